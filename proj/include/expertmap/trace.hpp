// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The expertmap Authors. All Rights Reserved.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace expertmap {

using TokenCount = std::int64_t;

/// Per-step, per-expert routed-token counts.
///
/// Stored row-major as tokens[step * num_experts + expert]. Construction
/// validates the invariants: at least one step and one expert, no negative
/// counts, and at least one strictly positive entry.
class ExpertTrace {
 public:
  ExpertTrace(std::size_t num_experts, std::size_t num_steps,
              std::vector<TokenCount> tokens);

  /// Builds from a [step][expert] matrix. Ragged rows are rejected.
  static ExpertTrace from_rows(const std::vector<std::vector<TokenCount>>& rows);

  std::size_t num_experts() const { return num_experts_; }
  std::size_t num_steps() const { return num_steps_; }

  TokenCount at(std::size_t step, std::size_t expert) const {
    return tokens_[step * num_experts_ + expert];
  }
  /// Counts of one step, indexed by expert.
  const TokenCount* step_row(std::size_t step) const {
    return tokens_.data() + step * num_experts_;
  }
  const std::vector<TokenCount>& data() const { return tokens_; }

  TokenCount step_total(std::size_t step) const;
  /// Sum over all steps for one expert.
  TokenCount expert_total(std::size_t expert) const;

  std::vector<std::vector<TokenCount>> rows() const;

  friend bool operator==(const ExpertTrace&, const ExpertTrace&) = default;

 private:
  std::size_t num_experts_;
  std::size_t num_steps_;
  std::vector<TokenCount> tokens_;
};

struct TraceStats {
  std::vector<double> mean_utilization;  // fraction of all trace tokens
  std::vector<double> active_fraction;   // fraction of steps with tokens > 0
  std::vector<std::vector<double>> correlation;  // Pearson, [expert][expert]
};

/// Pearson coefficient of two equally long series. Zero-variance input
/// yields 0. Result is clamped to [-1, 1].
double pearson(const std::vector<double>& x, const std::vector<double>& y);

TraceStats compute_stats(const ExpertTrace& trace);

/// A group of temporal experts that burst together.
struct TemporalGroup {
  std::vector<std::size_t> experts;
  double burst_probability = 0.17;
  double token_multiplier = 3.0;
};

struct SyntheticTraceSpec {
  std::size_t num_experts = 16;
  std::size_t num_steps = 16;
  TokenCount tokens_per_step = 4096;
  std::vector<std::size_t> consistent_experts;
  double consistent_probability = 0.85;
  std::vector<TemporalGroup> temporal_groups;
  std::uint64_t rng_seed = 0;

  /// Throws ValidationError on out-of-range indices, overlaps or
  /// probabilities outside (0, 1].
  void validate() const;
};

/// Draws a trace. Consistent experts are independently active with their
/// probability; each temporal group is jointly active with its burst
/// probability and members then weigh token_multiplier times a regular
/// expert; experts in neither list are always active with weight one.
/// Every step routes exactly tokens_per_step tokens. Throws GenerationError
/// when a step ends up with no active expert.
ExpertTrace generate_trace(const SyntheticTraceSpec& spec);

enum class TraceFormat { kJson, kCsv };

ExpertTrace load_trace(const std::filesystem::path& path, TraceFormat format);
/// Picks the format from the file extension (".csv" means CSV).
ExpertTrace load_trace(const std::filesystem::path& path);
ExpertTrace parse_trace_csv(const std::string& text);
ExpertTrace parse_trace_json(const std::string& text);

void save_trace(const ExpertTrace& trace, const std::filesystem::path& path,
                TraceFormat format = TraceFormat::kJson);
std::string trace_to_csv(const ExpertTrace& trace);
nlohmann::json trace_to_json(const ExpertTrace& trace);
ExpertTrace trace_from_json(const nlohmann::json& j);

nlohmann::json stats_to_json(const TraceStats& stats);
SyntheticTraceSpec trace_spec_from_json(const nlohmann::json& j);
nlohmann::json trace_spec_to_json(const SyntheticTraceSpec& spec);

}  // namespace expertmap
