// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The expertmap Authors. All Rights Reserved.

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "expertmap/profile.hpp"
#include "expertmap/trace.hpp"

namespace expertmap {

/// Assignment of every expert to one GPU with an equal number of experts per
/// GPU.
class ExpertMapping {
 public:
  ExpertMapping(std::size_t num_gpus, std::vector<std::size_t> assignment);

  std::size_t num_experts() const { return assignment_.size(); }
  std::size_t num_gpus() const { return num_gpus_; }
  std::size_t experts_per_gpu() const { return assignment_.size() / num_gpus_; }
  std::size_t gpu_of(std::size_t expert) const { return assignment_[expert]; }
  const std::vector<std::size_t>& assignment() const { return assignment_; }

  /// Experts hosted by each GPU, ascending.
  std::vector<std::vector<std::size_t>> experts_by_gpu() const;

  /// Exchanges the GPUs of two experts. Per-GPU counts are unchanged.
  ExpertMapping swapped(std::size_t expert_a, std::size_t expert_b) const;

  friend bool operator==(const ExpertMapping&, const ExpertMapping&) = default;

 private:
  std::size_t num_gpus_;
  std::vector<std::size_t> assignment_;
};

/// Throws ValidationError unless num_experts is a positive multiple of
/// num_gpus.
void require_divisible(std::size_t num_experts, std::size_t num_gpus);

/// Throws DimensionError if the three inputs disagree.
void check_dimensions(const ExpertTrace& trace, const VariabilityProfile& profile,
                      const ExpertMapping& mapping);

struct StepCost {
  std::vector<TokenCount> per_gpu_tokens;
  std::vector<Millis> per_gpu_latency;
  std::size_t straggler_gpu = 0;
  Millis straggler_latency = 0.0;
};

struct Percentiles {
  Millis p50 = 0, p90 = 0, p95 = 0, p99 = 0;
};

struct ReplayReport {
  Millis total_score = 0.0;
  std::vector<StepCost> step_costs;
  Millis mean_step_latency = 0.0;
  Percentiles percentiles;
  std::vector<TokenCount> per_gpu_total_tokens;
  std::vector<Millis> per_gpu_busy_time;
};

std::vector<TokenCount> gpu_loads(const ExpertTrace& trace,
                                  const ExpertMapping& mapping, std::size_t step);

/// Sum over steps of the slowest GPU's latency, accumulated in step order.
Millis score_mapping(const ExpertTrace& trace, const VariabilityProfile& profile,
                     const ExpertMapping& mapping);

ReplayReport replay(const ExpertTrace& trace, const VariabilityProfile& profile,
                    const ExpertMapping& mapping);

/// Nearest-rank quantile: the ceil(q * n)-th smallest value (q in (0, 1]).
double nearest_rank(std::vector<double> values, double q);

nlohmann::json mapping_to_json(const ExpertMapping& mapping);
ExpertMapping mapping_from_json(const nlohmann::json& j);
ExpertMapping load_mapping(const std::filesystem::path& path);
void save_mapping(const ExpertMapping& mapping, const std::filesystem::path& path);

nlohmann::json report_to_json(const ReplayReport& report, bool verbose);

}  // namespace expertmap
