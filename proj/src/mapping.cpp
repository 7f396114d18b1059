// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The expertmap Authors. All Rights Reserved.

#include "expertmap/mapping.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "expertmap/error.hpp"
#include "io_util.hpp"

namespace expertmap {

void require_divisible(std::size_t num_experts, std::size_t num_gpus) {
  if (num_gpus == 0) throw ValidationError("num_gpus must be >= 1");
  if (num_experts == 0 || num_experts % num_gpus != 0) {
    throw ValidationError(std::to_string(num_experts) +
                          " experts cannot be split evenly across " +
                          std::to_string(num_gpus) + " GPUs");
  }
}

ExpertMapping::ExpertMapping(std::size_t num_gpus, std::vector<std::size_t> assignment)
    : num_gpus_(num_gpus), assignment_(std::move(assignment)) {
  require_divisible(assignment_.size(), num_gpus_);
  std::vector<std::size_t> count(num_gpus_, 0);
  for (std::size_t e = 0; e < assignment_.size(); ++e) {
    if (assignment_[e] >= num_gpus_) {
      throw ValidationError("expert " + std::to_string(e) + " assigned to GPU " +
                            std::to_string(assignment_[e]) + " of " +
                            std::to_string(num_gpus_));
    }
    ++count[assignment_[e]];
  }
  const std::size_t per_gpu = assignment_.size() / num_gpus_;
  for (std::size_t g = 0; g < num_gpus_; ++g) {
    if (count[g] != per_gpu) {
      throw ValidationError("GPU " + std::to_string(g) + " hosts " +
                            std::to_string(count[g]) + " experts, expected " +
                            std::to_string(per_gpu));
    }
  }
}

std::vector<std::vector<std::size_t>> ExpertMapping::experts_by_gpu() const {
  std::vector<std::vector<std::size_t>> out(num_gpus_);
  for (std::size_t e = 0; e < assignment_.size(); ++e) out[assignment_[e]].push_back(e);
  return out;
}

ExpertMapping ExpertMapping::swapped(std::size_t expert_a, std::size_t expert_b) const {
  ExpertMapping copy = *this;
  std::swap(copy.assignment_.at(expert_a), copy.assignment_.at(expert_b));
  return copy;
}

void check_dimensions(const ExpertTrace& trace, const VariabilityProfile& profile,
                      const ExpertMapping& mapping) {
  if (trace.num_experts() != mapping.num_experts()) {
    throw DimensionError("trace has " + std::to_string(trace.num_experts()) +
                         " experts, mapping has " +
                         std::to_string(mapping.num_experts()));
  }
  if (profile.num_gpus() != mapping.num_gpus()) {
    throw DimensionError("profile has " + std::to_string(profile.num_gpus()) +
                         " GPUs, mapping has " + std::to_string(mapping.num_gpus()));
  }
}

std::vector<TokenCount> gpu_loads(const ExpertTrace& trace, const ExpertMapping& mapping,
                                  std::size_t step) {
  if (trace.num_experts() != mapping.num_experts()) {
    throw DimensionError("trace has " + std::to_string(trace.num_experts()) +
                         " experts, mapping has " +
                         std::to_string(mapping.num_experts()));
  }
  if (step >= trace.num_steps()) {
    throw DimensionError("step " + std::to_string(step) + " out of range");
  }
  std::vector<TokenCount> loads(mapping.num_gpus(), 0);
  const TokenCount* row = trace.step_row(step);
  for (std::size_t e = 0; e < trace.num_experts(); ++e) loads[mapping.gpu_of(e)] += row[e];
  return loads;
}

Millis score_mapping(const ExpertTrace& trace, const VariabilityProfile& profile,
                     const ExpertMapping& mapping) {
  check_dimensions(trace, profile, mapping);
  Millis total = 0.0;
  for (std::size_t t = 0; t < trace.num_steps(); ++t) {
    const std::vector<TokenCount> loads = gpu_loads(trace, mapping, t);
    Millis straggler = profile.curve(0).cost(loads[0]);
    for (std::size_t g = 1; g < loads.size(); ++g) {
      straggler = std::max(straggler, profile.curve(g).cost(loads[g]));
    }
    total += straggler;
  }
  return total;
}

double nearest_rank(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const auto n = static_cast<double>(values.size());
  auto rank = static_cast<std::size_t>(std::ceil(q * n));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

ReplayReport replay(const ExpertTrace& trace, const VariabilityProfile& profile,
                    const ExpertMapping& mapping) {
  check_dimensions(trace, profile, mapping);
  const std::size_t gpus = mapping.num_gpus();
  ReplayReport report;
  report.per_gpu_total_tokens.assign(gpus, 0);
  report.per_gpu_busy_time.assign(gpus, 0.0);
  report.step_costs.reserve(trace.num_steps());

  std::vector<double> stragglers;
  stragglers.reserve(trace.num_steps());
  for (std::size_t t = 0; t < trace.num_steps(); ++t) {
    StepCost step;
    step.per_gpu_tokens = gpu_loads(trace, mapping, t);
    step.per_gpu_latency.resize(gpus);
    for (std::size_t g = 0; g < gpus; ++g) {
      step.per_gpu_latency[g] = profile.curve(g).cost(step.per_gpu_tokens[g]);
      if (g == 0 || step.per_gpu_latency[g] > step.straggler_latency) {
        step.straggler_latency = step.per_gpu_latency[g];
        step.straggler_gpu = g;
      }
      report.per_gpu_total_tokens[g] += step.per_gpu_tokens[g];
      report.per_gpu_busy_time[g] += step.per_gpu_latency[g];
    }
    report.total_score += step.straggler_latency;
    stragglers.push_back(step.straggler_latency);
    report.step_costs.push_back(std::move(step));
  }

  report.mean_step_latency = report.total_score / static_cast<double>(trace.num_steps());
  report.percentiles.p50 = nearest_rank(stragglers, 0.50);
  report.percentiles.p90 = nearest_rank(stragglers, 0.90);
  report.percentiles.p95 = nearest_rank(stragglers, 0.95);
  report.percentiles.p99 = nearest_rank(stragglers, 0.99);
  return report;
}

nlohmann::json mapping_to_json(const ExpertMapping& mapping) {
  return {{"num_experts", mapping.num_experts()},
          {"num_gpus", mapping.num_gpus()},
          {"assignment", mapping.assignment()}};
}

ExpertMapping mapping_from_json(const nlohmann::json& j) {
  try {
    const auto experts = j.at("num_experts").get<std::size_t>();
    const auto gpus = j.at("num_gpus").get<std::size_t>();
    auto assignment = j.at("assignment").get<std::vector<std::size_t>>();
    if (assignment.size() != experts) {
      throw ValidationError("mapping declares " + std::to_string(experts) +
                            " experts but assigns " + std::to_string(assignment.size()));
    }
    return ExpertMapping(gpus, std::move(assignment));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("mapping JSON: ") + e.what());
  }
}

ExpertMapping load_mapping(const std::filesystem::path& path) {
  return mapping_from_json(detail::parse_json(detail::read_file(path), "mapping"));
}

void save_mapping(const ExpertMapping& mapping, const std::filesystem::path& path) {
  detail::write_file(path, mapping_to_json(mapping).dump(2) + "\n");
}

nlohmann::json report_to_json(const ReplayReport& report, bool verbose) {
  nlohmann::json j = {
      {"total_score", report.total_score},
      {"mean_step_latency", report.mean_step_latency},
      {"percentiles",
       {{"p50", report.percentiles.p50},
        {"p90", report.percentiles.p90},
        {"p95", report.percentiles.p95},
        {"p99", report.percentiles.p99}}},
      {"per_gpu_total_tokens", report.per_gpu_total_tokens},
      {"per_gpu_busy_time", report.per_gpu_busy_time},
  };
  if (verbose) {
    nlohmann::json steps = nlohmann::json::array();
    for (const StepCost& s : report.step_costs) {
      steps.push_back({{"per_gpu_tokens", s.per_gpu_tokens},
                       {"per_gpu_latency", s.per_gpu_latency},
                       {"straggler_gpu", s.straggler_gpu},
                       {"straggler_latency", s.straggler_latency}});
    }
    j["step_costs"] = std::move(steps);
  }
  return j;
}

}  // namespace expertmap
