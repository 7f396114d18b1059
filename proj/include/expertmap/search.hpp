// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The expertmap Authors. All Rights Reserved.

#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "expertmap/mapping.hpp"
#include "expertmap/profile.hpp"
#include "expertmap/trace.hpp"

namespace expertmap {

struct SearchConfig {
  std::size_t restarts = 30;
  double noise_fraction = 0.20;
  double convergence_threshold = 0.001;
  std::uint64_t rng_seed = 0;
  bool seed_with_baselines = true;
  std::size_t max_swaps_per_restart = 0;  // 0: 10 * num_experts
  std::size_t threads = 1;                // 0: hardware concurrency

  void validate() const;
  std::size_t swap_cap(std::size_t num_experts) const {
    return max_swaps_per_restart != 0 ? max_swaps_per_restart : 10 * num_experts;
  }
};

/// Where a refinement run started from.
struct Provenance {
  enum class Kind { kGreedyRestart, kBaselineLinear, kBaselineEplb };
  Kind kind = Kind::kGreedyRestart;
  std::size_t restart_index = 0;

  std::string to_string() const;
  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct RestartOutcome {
  Provenance provenance;
  Millis initial_score = 0.0;
  Millis final_score = 0.0;
  std::size_t swap_count = 0;
  /// Score before the first swap and after each applied swap.
  std::vector<Millis> trajectory;
};

struct SearchResult {
  ExpertMapping best_mapping;
  Millis best_score = 0.0;
  Provenance provenance;
  std::vector<RestartOutcome> per_restart;
};

/// Caches per-(step, GPU) loads and latencies of a mapping so that candidate
/// moves are scored by re-costing only the GPUs they touch. Candidate scores
/// are summed in step order, so they equal score_mapping() on the resulting
/// mapping bit for bit.
///
/// Experts may be left unplaced (partial mappings during greedy
/// construction); they contribute no tokens.
class IncrementalScorer {
 public:
  static constexpr std::size_t kUnplaced = static_cast<std::size_t>(-1);

  IncrementalScorer(const ExpertTrace& trace, const VariabilityProfile& profile);
  IncrementalScorer(const ExpertTrace& trace, const VariabilityProfile& profile,
                    const ExpertMapping& mapping);

  Millis score() const { return score_; }
  std::size_t gpu_of(std::size_t expert) const { return assignment_[expert]; }
  const std::vector<std::size_t>& assignment() const { return assignment_; }

  /// Score after additionally placing an unplaced expert on `gpu`.
  Millis score_if_placed(std::size_t expert, std::size_t gpu) const;
  void place(std::size_t expert, std::size_t gpu);

  /// Score after exchanging the GPUs of two placed experts.
  Millis score_if_swapped(std::size_t expert_a, std::size_t expert_b) const;
  void swap(std::size_t expert_a, std::size_t expert_b);

 private:
  Millis max_excluding(std::size_t step, std::size_t gpu_a, std::size_t gpu_b) const;
  void recompute_score();

  const ExpertTrace& trace_;
  const VariabilityProfile& profile_;
  std::size_t num_gpus_;
  std::vector<std::size_t> assignment_;
  std::vector<TokenCount> loads_;    // [step * G + gpu]
  std::vector<Millis> latencies_;    // [step * G + gpu]
  std::vector<Millis> step_max_;
  Millis score_ = 0.0;
};

/// Per-restart generator: seeded with seed XOR restart_index.
std::mt19937_64 restart_rng(std::uint64_t seed, std::size_t restart_index);

/// Uniform double in [-1, 1) from the top 53 bits of one draw.
double symmetric_unit(std::mt19937_64& rng);

/// Greedy construction. Experts are ordered by utilization (perturbed by
/// u * (1 + noise * eta) for restart_index > 0), heaviest first, and each is
/// placed on the GPU with remaining capacity that minimizes the partial
/// score. Ties go to the lower expert index and the lower GPU index.
ExpertMapping initial_mapping(const TraceStats& stats, std::size_t restart_index,
                              const ExpertTrace& trace,
                              const VariabilityProfile& profile,
                              const SearchConfig& config);

struct RefineResult {
  ExpertMapping mapping;
  std::size_t swap_count = 0;
  std::vector<Millis> trajectory;
};

/// Best-improvement pairwise swap descent. Each iteration applies the
/// cross-GPU swap with the largest score drop, and stops after a swap whose
/// relative drop is below the convergence threshold, when no swap improves,
/// or at the swap cap.
RefineResult refine(const ExpertMapping& mapping, const ExpertTrace& trace,
                    const VariabilityProfile& profile, const SearchConfig& config);

/// Restart loop: config.restarts greedy starts plus, optionally, the linear
/// and EPLB baselines, each refined; returns the lowest score. Restarts run
/// on config.threads threads and the result does not depend on that count.
SearchResult search(const ExpertTrace& trace, const VariabilityProfile& profile,
                    const SearchConfig& config);

nlohmann::json search_config_to_json(const SearchConfig& config);
nlohmann::json search_result_to_json(const SearchResult& result);

}  // namespace expertmap
