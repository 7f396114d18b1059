// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The expertmap Authors. All Rights Reserved.

#include "expertmap/trace.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <utility>

#include "expertmap/error.hpp"
#include "io_util.hpp"

namespace expertmap {

ExpertTrace::ExpertTrace(std::size_t num_experts, std::size_t num_steps,
                         std::vector<TokenCount> tokens)
    : num_experts_(num_experts), num_steps_(num_steps), tokens_(std::move(tokens)) {
  if (num_experts_ == 0 || num_steps_ == 0) {
    throw ValidationError("trace needs at least one step and one expert");
  }
  if (tokens_.size() != num_experts_ * num_steps_) {
    throw ValidationError("trace holds " + std::to_string(tokens_.size()) +
                          " counts, expected " +
                          std::to_string(num_experts_ * num_steps_));
  }
  bool any_positive = false;
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (tokens_[i] < 0) {
      throw ValidationError("negative token count at step " +
                            std::to_string(i / num_experts_) + ", expert " +
                            std::to_string(i % num_experts_));
    }
    any_positive = any_positive || tokens_[i] > 0;
  }
  if (!any_positive) throw ValidationError("trace contains no tokens");
}

ExpertTrace ExpertTrace::from_rows(const std::vector<std::vector<TokenCount>>& rows) {
  if (rows.empty() || rows.front().empty()) {
    throw ValidationError("empty trace matrix");
  }
  const std::size_t width = rows.front().size();
  std::vector<TokenCount> flat;
  flat.reserve(width * rows.size());
  for (std::size_t t = 0; t < rows.size(); ++t) {
    if (rows[t].size() != width) {
      throw ValidationError("row " + std::to_string(t) + " has " +
                            std::to_string(rows[t].size()) +
                            " experts, expected " + std::to_string(width));
    }
    flat.insert(flat.end(), rows[t].begin(), rows[t].end());
  }
  return ExpertTrace(width, rows.size(), std::move(flat));
}

TokenCount ExpertTrace::step_total(std::size_t step) const {
  const TokenCount* row = step_row(step);
  return std::accumulate(row, row + num_experts_, TokenCount{0});
}

TokenCount ExpertTrace::expert_total(std::size_t expert) const {
  TokenCount sum = 0;
  for (std::size_t t = 0; t < num_steps_; ++t) sum += at(t, expert);
  return sum;
}

std::vector<std::vector<TokenCount>> ExpertTrace::rows() const {
  std::vector<std::vector<TokenCount>> out(num_steps_);
  for (std::size_t t = 0; t < num_steps_; ++t) {
    out[t].assign(step_row(t), step_row(t) + num_experts_);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Statistics

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = std::min(x.size(), y.size());
  if (n < 2) return 0.0;
  double mean_x = 0.0, mean_y = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean_x += x[i];
    mean_y += y[i];
  }
  mean_x /= static_cast<double>(n);
  mean_y /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mean_x;
    const double dy = y[i] - mean_y;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

TraceStats compute_stats(const ExpertTrace& trace) {
  const std::size_t experts = trace.num_experts();
  const std::size_t steps = trace.num_steps();
  TraceStats stats;

  TokenCount grand_total = 0;
  std::vector<TokenCount> totals(experts, 0);
  std::vector<std::size_t> active(experts, 0);
  std::vector<std::vector<double>> series(experts, std::vector<double>(steps));
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t e = 0; e < experts; ++e) {
      const TokenCount v = trace.at(t, e);
      totals[e] += v;
      grand_total += v;
      active[e] += v > 0 ? 1 : 0;
      series[e][t] = static_cast<double>(v);
    }
  }

  stats.mean_utilization.resize(experts);
  stats.active_fraction.resize(experts);
  for (std::size_t e = 0; e < experts; ++e) {
    stats.mean_utilization[e] =
        static_cast<double>(totals[e]) / static_cast<double>(grand_total);
    stats.active_fraction[e] =
        static_cast<double>(active[e]) / static_cast<double>(steps);
  }

  stats.correlation.assign(experts, std::vector<double>(experts, 0.0));
  for (std::size_t a = 0; a < experts; ++a) {
    stats.correlation[a][a] = 1.0;
    for (std::size_t b = a + 1; b < experts; ++b) {
      const double r = pearson(series[a], series[b]);
      stats.correlation[a][b] = r;
      stats.correlation[b][a] = r;
    }
  }
  return stats;
}

nlohmann::json stats_to_json(const TraceStats& stats) {
  return {{"mean_utilization", stats.mean_utilization},
          {"active_fraction", stats.active_fraction},
          {"correlation", stats.correlation}};
}

// ---------------------------------------------------------------------------
// Synthetic generation

void SyntheticTraceSpec::validate() const {
  if (num_experts == 0) throw ValidationError("num_experts must be >= 1");
  if (num_steps == 0) throw ValidationError("num_steps must be >= 1");
  if (tokens_per_step < 1) throw ValidationError("tokens_per_step must be >= 1");
  auto check_probability = [](double p, const char* what) {
    if (!(p > 0.0 && p <= 1.0)) {
      throw ValidationError(std::string(what) + " must lie in (0, 1]");
    }
  };
  std::set<std::size_t> seen;
  for (std::size_t e : consistent_experts) {
    if (e >= num_experts) {
      throw ValidationError("consistent expert " + std::to_string(e) + " out of range");
    }
    if (!seen.insert(e).second) {
      throw ValidationError("consistent expert " + std::to_string(e) + " listed twice");
    }
  }
  if (!consistent_experts.empty()) {
    check_probability(consistent_probability, "consistent probability");
  }
  std::set<std::size_t> seen_temporal;
  for (const TemporalGroup& group : temporal_groups) {
    check_probability(group.burst_probability, "burst probability");
    if (!(group.token_multiplier >= 1.0)) {
      throw ValidationError("token multiplier must be >= 1");
    }
    for (std::size_t e : group.experts) {
      if (e >= num_experts) {
        throw ValidationError("temporal expert " + std::to_string(e) + " out of range");
      }
      if (!seen_temporal.insert(e).second) {
        throw ValidationError("temporal expert " + std::to_string(e) +
                              " appears in more than one group");
      }
    }
  }
  // An expert cannot be both consistent and temporal.
  for (std::size_t e : seen_temporal) {
    if (seen.count(e) != 0) {
      throw ValidationError("expert " + std::to_string(e) +
                            " is both consistent and temporal");
    }
  }
}

namespace {

// Uniform double in [0, 1) from the top 53 bits; identical across platforms,
// unlike std::uniform_real_distribution.
double unit_draw(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

ExpertTrace generate_trace(const SyntheticTraceSpec& spec) {
  spec.validate();
  const std::size_t experts = spec.num_experts;

  enum class Role { kBackground, kConsistent, kTemporal };
  std::vector<Role> role(experts, Role::kBackground);
  for (std::size_t e : spec.consistent_experts) role[e] = Role::kConsistent;
  for (const TemporalGroup& g : spec.temporal_groups) {
    for (std::size_t e : g.experts) role[e] = Role::kTemporal;
  }

  std::mt19937_64 rng(spec.rng_seed);
  std::vector<TokenCount> tokens(experts * spec.num_steps, 0);
  std::vector<double> weight(experts);

  for (std::size_t t = 0; t < spec.num_steps; ++t) {
    std::fill(weight.begin(), weight.end(), 0.0);
    for (std::size_t e = 0; e < experts; ++e) {
      if (role[e] == Role::kBackground) weight[e] = 1.0;
    }
    // Fixed draw order: consistent experts in listed order, then groups.
    for (std::size_t e : spec.consistent_experts) {
      if (unit_draw(rng) < spec.consistent_probability) weight[e] = 1.0;
    }
    for (const TemporalGroup& g : spec.temporal_groups) {
      if (unit_draw(rng) < g.burst_probability) {
        for (std::size_t e : g.experts) weight[e] = g.token_multiplier;
      }
    }

    const double total_weight = std::accumulate(weight.begin(), weight.end(), 0.0);
    if (total_weight <= 0.0) {
      throw GenerationError("no expert is active at step " + std::to_string(t) +
                            "; add background experts or raise a probability");
    }

    TokenCount* row = tokens.data() + t * experts;
    TokenCount assigned = 0;
    for (std::size_t e = 0; e < experts; ++e) {
      if (weight[e] == 0.0) continue;
      row[e] = static_cast<TokenCount>(std::floor(
          static_cast<double>(spec.tokens_per_step) * weight[e] / total_weight));
      assigned += row[e];
    }
    // Rounding residue: one token each to active experts in index order.
    TokenCount residue = spec.tokens_per_step - assigned;
    // Floating-point floors can overshoot by a token; take it back from the
    // highest-indexed active experts.
    for (std::size_t e = experts; e-- > 0 && residue < 0;) {
      if (row[e] > 0) {
        --row[e];
        ++residue;
      }
    }
    while (residue > 0) {
      for (std::size_t e = 0; e < experts && residue > 0; ++e) {
        if (weight[e] == 0.0) continue;
        ++row[e];
        --residue;
      }
    }
  }
  return ExpertTrace(experts, spec.num_steps, std::move(tokens));
}

SyntheticTraceSpec trace_spec_from_json(const nlohmann::json& j) {
  try {
    SyntheticTraceSpec spec;
    spec.num_experts = j.at("num_experts").get<std::size_t>();
    spec.num_steps = j.value("num_steps", spec.num_steps);
    spec.tokens_per_step = j.value("tokens_per_step", spec.tokens_per_step);
    spec.consistent_experts =
        j.value("consistent_experts", std::vector<std::size_t>{});
    spec.consistent_probability =
        j.value("consistent_probability", spec.consistent_probability);
    if (j.contains("temporal_groups")) {
      for (const auto& g : j.at("temporal_groups")) {
        TemporalGroup group;
        group.experts = g.at("experts").get<std::vector<std::size_t>>();
        group.burst_probability = g.value("burst_probability", group.burst_probability);
        group.token_multiplier = g.value("token_multiplier", group.token_multiplier);
        spec.temporal_groups.push_back(std::move(group));
      }
    }
    spec.rng_seed = j.value("rng_seed", spec.rng_seed);
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("trace spec: ") + e.what());
  }
}

nlohmann::json trace_spec_to_json(const SyntheticTraceSpec& spec) {
  nlohmann::json groups = nlohmann::json::array();
  for (const TemporalGroup& g : spec.temporal_groups) {
    groups.push_back({{"experts", g.experts},
                      {"burst_probability", g.burst_probability},
                      {"token_multiplier", g.token_multiplier}});
  }
  return {{"num_experts", spec.num_experts},
          {"num_steps", spec.num_steps},
          {"tokens_per_step", spec.tokens_per_step},
          {"consistent_experts", spec.consistent_experts},
          {"consistent_probability", spec.consistent_probability},
          {"temporal_groups", groups},
          {"rng_seed", spec.rng_seed}};
}

// ---------------------------------------------------------------------------
// Serialization

nlohmann::json trace_to_json(const ExpertTrace& trace) {
  return {{"num_experts", trace.num_experts()},
          {"num_steps", trace.num_steps()},
          {"tokens", trace.rows()}};
}

ExpertTrace trace_from_json(const nlohmann::json& j) {
  std::size_t experts = 0, steps = 0;
  std::vector<std::vector<TokenCount>> rows;
  try {
    experts = j.at("num_experts").get<std::size_t>();
    steps = j.at("num_steps").get<std::size_t>();
    rows = j.at("tokens").get<std::vector<std::vector<TokenCount>>>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("trace JSON: ") + e.what());
  }
  if (rows.size() != steps) {
    throw ValidationError("trace JSON declares " + std::to_string(steps) +
                          " steps but holds " + std::to_string(rows.size()));
  }
  ExpertTrace trace = ExpertTrace::from_rows(rows);
  if (trace.num_experts() != experts) {
    throw ValidationError("trace JSON declares " + std::to_string(experts) +
                          " experts but rows hold " +
                          std::to_string(trace.num_experts()));
  }
  return trace;
}

ExpertTrace parse_trace_json(const std::string& text) {
  return trace_from_json(detail::parse_json(text, "trace"));
}

namespace {

TokenCount parse_csv_int(std::string_view field, std::size_t line, const char* name) {
  while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
  while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) {
    field.remove_suffix(1);
  }
  TokenCount value = 0;
  const char* begin = field.data();
  const char* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (field.empty() || ec != std::errc() || ptr != end) {
    throw ParseError("line " + std::to_string(line) + ": field '" + name +
                     "' is not an integer: '" + std::string(field) + "'");
  }
  return value;
}

}  // namespace

ExpertTrace parse_trace_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::map<std::pair<TokenCount, TokenCount>, TokenCount> cells;
  TokenCount max_step = -1, max_expert = -1;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (!header_seen) {
      header_seen = true;
      std::string compact;
      for (char c : line) {
        if (c != ' ' && c != '\t') compact.push_back(c);
      }
      if (compact != "step,expert,tokens") {
        throw ParseError("line " + std::to_string(line_no) +
                         ": expected header 'step,expert,tokens'");
      }
      continue;
    }
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    for (;;) {
      const auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (fields.size() != 3) {
      throw ValidationError("line " + std::to_string(line_no) + ": expected 3 fields, got " +
                            std::to_string(fields.size()));
    }
    const TokenCount step = parse_csv_int(fields[0], line_no, "step");
    const TokenCount expert = parse_csv_int(fields[1], line_no, "expert");
    const TokenCount tokens = parse_csv_int(fields[2], line_no, "tokens");
    if (step < 0 || expert < 0) {
      throw ValidationError("line " + std::to_string(line_no) +
                            ": negative step or expert index");
    }
    if (tokens < 0) {
      throw ValidationError("line " + std::to_string(line_no) + ": negative token count");
    }
    if (!cells.emplace(std::make_pair(step, expert), tokens).second) {
      throw ValidationError("line " + std::to_string(line_no) + ": duplicate cell (" +
                            std::to_string(step) + "," + std::to_string(expert) + ")");
    }
    max_step = std::max(max_step, step);
    max_expert = std::max(max_expert, expert);
  }
  if (cells.empty()) throw ValidationError("trace CSV has no rows");

  const auto steps = static_cast<std::size_t>(max_step + 1);
  const auto experts = static_cast<std::size_t>(max_expert + 1);
  std::vector<TokenCount> flat(steps * experts, 0);
  for (const auto& [key, tokens] : cells) {
    flat[static_cast<std::size_t>(key.first) * experts +
         static_cast<std::size_t>(key.second)] = tokens;
  }
  return ExpertTrace(experts, steps, std::move(flat));
}

std::string trace_to_csv(const ExpertTrace& trace) {
  std::string out = "step,expert,tokens\n";
  for (std::size_t t = 0; t < trace.num_steps(); ++t) {
    for (std::size_t e = 0; e < trace.num_experts(); ++e) {
      out += std::to_string(t) + ',' + std::to_string(e) + ',' +
             std::to_string(trace.at(t, e)) + '\n';
    }
  }
  return out;
}

ExpertTrace load_trace(const std::filesystem::path& path, TraceFormat format) {
  const std::string text = detail::read_file(path);
  return format == TraceFormat::kCsv ? parse_trace_csv(text) : parse_trace_json(text);
}

ExpertTrace load_trace(const std::filesystem::path& path) {
  return load_trace(path, path.extension() == ".csv" ? TraceFormat::kCsv
                                                     : TraceFormat::kJson);
}

void save_trace(const ExpertTrace& trace, const std::filesystem::path& path,
                TraceFormat format) {
  detail::write_file(path, format == TraceFormat::kCsv
                               ? trace_to_csv(trace)
                               : trace_to_json(trace).dump() + "\n");
}

}  // namespace expertmap
