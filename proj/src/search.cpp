// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The expertmap Authors. All Rights Reserved.

#include "expertmap/search.hpp"

#include <algorithm>
#include <numeric>
#include <optional>

#include "expertmap/baselines.hpp"
#include "expertmap/error.hpp"
#include "expertmap/parallel.hpp"

namespace expertmap {

void SearchConfig::validate() const {
  if (restarts < 1) throw ValidationError("restarts must be >= 1");
  if (!(noise_fraction >= 0.0)) throw ValidationError("noise_fraction must be >= 0");
  if (!(convergence_threshold > 0.0 && convergence_threshold < 1.0)) {
    throw ValidationError("convergence_threshold must lie in (0, 1)");
  }
}

std::string Provenance::to_string() const {
  switch (kind) {
    case Kind::kGreedyRestart: return "greedy_restart:" + std::to_string(restart_index);
    case Kind::kBaselineLinear: return "baseline_linear";
    case Kind::kBaselineEplb: return "baseline_eplb";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// IncrementalScorer

IncrementalScorer::IncrementalScorer(const ExpertTrace& trace,
                                     const VariabilityProfile& profile)
    : trace_(trace),
      profile_(profile),
      num_gpus_(profile.num_gpus()),
      assignment_(trace.num_experts(), kUnplaced),
      loads_(trace.num_steps() * num_gpus_, 0),
      latencies_(trace.num_steps() * num_gpus_, 0.0),
      step_max_(trace.num_steps(), 0.0) {
  for (std::size_t t = 0; t < trace_.num_steps(); ++t) {
    for (std::size_t g = 0; g < num_gpus_; ++g) {
      latencies_[t * num_gpus_ + g] = profile_.curve(g).cost(0);
    }
  }
  recompute_score();
}

IncrementalScorer::IncrementalScorer(const ExpertTrace& trace,
                                     const VariabilityProfile& profile,
                                     const ExpertMapping& mapping)
    : IncrementalScorer(trace, profile) {
  check_dimensions(trace, profile, mapping);
  for (std::size_t e = 0; e < mapping.num_experts(); ++e) {
    assignment_[e] = mapping.gpu_of(e);
    for (std::size_t t = 0; t < trace_.num_steps(); ++t) {
      loads_[t * num_gpus_ + assignment_[e]] += trace_.at(t, e);
    }
  }
  for (std::size_t t = 0; t < trace_.num_steps(); ++t) {
    for (std::size_t g = 0; g < num_gpus_; ++g) {
      latencies_[t * num_gpus_ + g] = profile_.curve(g).cost(loads_[t * num_gpus_ + g]);
    }
  }
  recompute_score();
}

void IncrementalScorer::recompute_score() {
  score_ = 0.0;
  for (std::size_t t = 0; t < trace_.num_steps(); ++t) {
    const Millis* lat = latencies_.data() + t * num_gpus_;
    Millis m = lat[0];
    for (std::size_t g = 1; g < num_gpus_; ++g) m = std::max(m, lat[g]);
    step_max_[t] = m;
    score_ += m;
  }
}

Millis IncrementalScorer::max_excluding(std::size_t step, std::size_t gpu_a,
                                        std::size_t gpu_b) const {
  const Millis* lat = latencies_.data() + step * num_gpus_;
  Millis m = 0.0;
  for (std::size_t g = 0; g < num_gpus_; ++g) {
    if (g != gpu_a && g != gpu_b) m = std::max(m, lat[g]);
  }
  return m;
}

Millis IncrementalScorer::score_if_placed(std::size_t expert, std::size_t gpu) const {
  Millis total = 0.0;
  const CostCurve& curve = profile_.curve(gpu);
  for (std::size_t t = 0; t < trace_.num_steps(); ++t) {
    const TokenCount v = trace_.at(t, expert);
    if (v == 0) {
      total += step_max_[t];
      continue;
    }
    const Millis moved = curve.cost(loads_[t * num_gpus_ + gpu] + v);
    total += std::max(max_excluding(t, gpu, gpu), moved);
  }
  return total;
}

void IncrementalScorer::place(std::size_t expert, std::size_t gpu) {
  if (assignment_.at(expert) != kUnplaced) {
    throw ValidationError("expert " + std::to_string(expert) + " is already placed");
  }
  assignment_[expert] = gpu;
  const CostCurve& curve = profile_.curve(gpu);
  for (std::size_t t = 0; t < trace_.num_steps(); ++t) {
    const std::size_t i = t * num_gpus_ + gpu;
    loads_[i] += trace_.at(t, expert);
    latencies_[i] = curve.cost(loads_[i]);
  }
  recompute_score();
}

Millis IncrementalScorer::score_if_swapped(std::size_t expert_a,
                                           std::size_t expert_b) const {
  const std::size_t gpu_a = assignment_[expert_a];
  const std::size_t gpu_b = assignment_[expert_b];
  if (gpu_a == gpu_b) return score_;
  const CostCurve& curve_a = profile_.curve(gpu_a);
  const CostCurve& curve_b = profile_.curve(gpu_b);
  Millis total = 0.0;
  for (std::size_t t = 0; t < trace_.num_steps(); ++t) {
    const TokenCount* row = trace_.step_row(t);
    const TokenCount delta = row[expert_b] - row[expert_a];  // into gpu_a
    if (delta == 0) {
      total += step_max_[t];
      continue;
    }
    const Millis lat_a = curve_a.cost(loads_[t * num_gpus_ + gpu_a] + delta);
    const Millis lat_b = curve_b.cost(loads_[t * num_gpus_ + gpu_b] - delta);
    total += std::max({max_excluding(t, gpu_a, gpu_b), lat_a, lat_b});
  }
  return total;
}

void IncrementalScorer::swap(std::size_t expert_a, std::size_t expert_b) {
  const std::size_t gpu_a = assignment_.at(expert_a);
  const std::size_t gpu_b = assignment_.at(expert_b);
  if (gpu_a == kUnplaced || gpu_b == kUnplaced) {
    throw ValidationError("cannot swap an unplaced expert");
  }
  if (gpu_a == gpu_b) return;
  std::swap(assignment_[expert_a], assignment_[expert_b]);
  for (std::size_t t = 0; t < trace_.num_steps(); ++t) {
    const TokenCount delta = trace_.at(t, expert_b) - trace_.at(t, expert_a);
    const std::size_t ia = t * num_gpus_ + gpu_a;
    const std::size_t ib = t * num_gpus_ + gpu_b;
    loads_[ia] += delta;
    loads_[ib] -= delta;
    latencies_[ia] = profile_.curve(gpu_a).cost(loads_[ia]);
    latencies_[ib] = profile_.curve(gpu_b).cost(loads_[ib]);
  }
  recompute_score();
}

// ---------------------------------------------------------------------------
// Search

std::mt19937_64 restart_rng(std::uint64_t seed, std::size_t restart_index) {
  return std::mt19937_64(seed ^ static_cast<std::uint64_t>(restart_index));
}

double symmetric_unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-52 - 1.0;
}

namespace {

void check_search_inputs(const ExpertTrace& trace, const VariabilityProfile& profile) {
  require_divisible(trace.num_experts(), profile.num_gpus());
}

}  // namespace

ExpertMapping initial_mapping(const TraceStats& stats, std::size_t restart_index,
                              const ExpertTrace& trace,
                              const VariabilityProfile& profile,
                              const SearchConfig& config) {
  check_search_inputs(trace, profile);
  const std::size_t experts = trace.num_experts();
  const std::size_t gpus = profile.num_gpus();
  if (stats.mean_utilization.size() != experts) {
    throw DimensionError("trace statistics do not match the trace");
  }

  std::vector<double> key = stats.mean_utilization;
  if (restart_index > 0) {
    std::mt19937_64 rng = restart_rng(config.rng_seed, restart_index);
    for (double& k : key) k *= 1.0 + config.noise_fraction * symmetric_unit(rng);
  }
  std::vector<std::size_t> order(experts);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return key[a] > key[b]; });

  const std::size_t capacity = experts / gpus;
  std::vector<std::size_t> hosted(gpus, 0);
  IncrementalScorer scorer(trace, profile);
  for (std::size_t e : order) {
    std::size_t best_gpu = gpus;
    Millis best_score = 0.0;
    for (std::size_t g = 0; g < gpus; ++g) {
      if (hosted[g] == capacity) continue;
      const Millis s = scorer.score_if_placed(e, g);
      if (best_gpu == gpus || s < best_score) {
        best_gpu = g;
        best_score = s;
      }
    }
    scorer.place(e, best_gpu);
    ++hosted[best_gpu];
  }
  return ExpertMapping(gpus, scorer.assignment());
}

RefineResult refine(const ExpertMapping& mapping, const ExpertTrace& trace,
                    const VariabilityProfile& profile, const SearchConfig& config) {
  config.validate();
  IncrementalScorer scorer(trace, profile, mapping);
  const std::size_t experts = mapping.num_experts();
  const std::size_t cap = config.swap_cap(experts);

  RefineResult result{mapping, 0, {scorer.score()}};
  while (result.swap_count < cap) {
    const Millis previous = scorer.score();
    std::optional<std::pair<std::size_t, std::size_t>> best;
    Millis best_drop = 0.0;
    for (std::size_t a = 0; a < experts; ++a) {
      for (std::size_t b = a + 1; b < experts; ++b) {
        if (scorer.gpu_of(a) == scorer.gpu_of(b)) continue;
        const Millis drop = previous - scorer.score_if_swapped(a, b);
        if (drop > best_drop) {
          best_drop = drop;
          best = {a, b};
        }
      }
    }
    if (!best) break;
    scorer.swap(best->first, best->second);
    ++result.swap_count;
    result.trajectory.push_back(scorer.score());
    if (best_drop / previous < config.convergence_threshold) break;
  }
  result.mapping = ExpertMapping(mapping.num_gpus(), scorer.assignment());
  return result;
}

SearchResult search(const ExpertTrace& trace, const VariabilityProfile& profile,
                    const SearchConfig& config) {
  config.validate();
  check_search_inputs(trace, profile);
  const TraceStats stats = compute_stats(trace);
  const std::size_t gpus = profile.num_gpus();

  std::vector<Provenance> starts;
  for (std::size_t i = 0; i < config.restarts; ++i) {
    starts.push_back({Provenance::Kind::kGreedyRestart, i});
  }
  if (config.seed_with_baselines) {
    starts.push_back({Provenance::Kind::kBaselineLinear, 0});
    starts.push_back({Provenance::Kind::kBaselineEplb, 0});
  }

  std::vector<std::optional<ExpertMapping>> finals(starts.size());
  std::vector<RestartOutcome> outcomes(starts.size());
  parallel_for(starts.size(), config.threads, [&](std::size_t job) {
    const Provenance& p = starts[job];
    ExpertMapping start = [&] {
      switch (p.kind) {
        case Provenance::Kind::kBaselineLinear:
          return linear_mapping(trace.num_experts(), gpus);
        case Provenance::Kind::kBaselineEplb:
          return eplb_mapping(trace, gpus);
        case Provenance::Kind::kGreedyRestart:
          break;
      }
      return initial_mapping(stats, p.restart_index, trace, profile, config);
    }();
    RefineResult refined = refine(start, trace, profile, config);
    RestartOutcome& out = outcomes[job];
    out.provenance = p;
    out.initial_score = refined.trajectory.front();
    out.final_score = refined.trajectory.back();
    out.swap_count = refined.swap_count;
    out.trajectory = std::move(refined.trajectory);
    finals[job] = std::move(refined.mapping);
  });

  // Ties keep the earliest start in provenance order.
  std::size_t best = 0;
  for (std::size_t job = 1; job < outcomes.size(); ++job) {
    if (outcomes[job].final_score < outcomes[best].final_score) best = job;
  }
  return SearchResult{*finals[best], outcomes[best].final_score,
                      outcomes[best].provenance, std::move(outcomes)};
}

nlohmann::json search_config_to_json(const SearchConfig& config) {
  return {{"restarts", config.restarts},
          {"noise_fraction", config.noise_fraction},
          {"convergence_threshold", config.convergence_threshold},
          {"rng_seed", config.rng_seed},
          {"seed_with_baselines", config.seed_with_baselines},
          {"max_swaps_per_restart", config.max_swaps_per_restart}};
}

nlohmann::json search_result_to_json(const SearchResult& result) {
  nlohmann::json rows = nlohmann::json::array();
  for (const RestartOutcome& r : result.per_restart) {
    rows.push_back({{"provenance", r.provenance.to_string()},
                    {"initial_score", r.initial_score},
                    {"final_score", r.final_score},
                    {"swap_count", r.swap_count}});
  }
  return {{"best_mapping", mapping_to_json(result.best_mapping)},
          {"best_score", result.best_score},
          {"provenance", result.provenance.to_string()},
          {"per_restart", rows}};
}

}  // namespace expertmap
