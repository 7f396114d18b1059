// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The expertmap Authors. All Rights Reserved.

// Test-only fixtures and brute-force oracles. Nothing in here calls into the
// scoring or search code it is used to check.

#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "expertmap/mapping.hpp"
#include "expertmap/profile.hpp"
#include "expertmap/trace.hpp"

namespace expertmap::testing {

inline std::filesystem::path data_path(const std::string& name) {
  return std::filesystem::path(EXPERTMAP_TEST_DATA_DIR) / name;
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline std::int64_t uniform_int(std::mt19937_64& rng, std::int64_t lo, std::int64_t hi) {
  return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
}

/// Random trace with a few heavy experts and occasional idle ones.
inline ExpertTrace random_trace(std::mt19937_64& rng, std::size_t experts, std::size_t steps,
                                std::int64_t max_tokens = 200) {
  std::vector<std::int64_t> scale(experts);
  for (auto& s : scale) s = uniform_int(rng, 1, max_tokens);
  std::vector<std::vector<std::int64_t>> rows(steps, std::vector<std::int64_t>(experts));
  for (auto& row : rows) {
    for (std::size_t e = 0; e < experts; ++e) {
      row[e] = uniform(rng, 0, 1) < 0.15 ? 0 : uniform_int(rng, 0, scale[e]);
    }
  }
  rows[0][0] += 1;  // never all zero
  return ExpertTrace::from_rows(rows);
}

/// Dense staircase curves: one sample per tile up to `max_tokens`, each tile
/// adding a random increment scaled by a per-GPU slowdown.
inline VariabilityProfile random_staircase_profile(std::mt19937_64& rng, std::size_t gpus,
                                                   std::int64_t tile,
                                                   std::int64_t max_tokens) {
  std::vector<CostCurve> curves;
  for (std::size_t g = 0; g < gpus; ++g) {
    const double slowdown = uniform(rng, 0.85, 1.2);
    double latency = uniform(rng, 0.0, 2.0);
    std::vector<CostSample> samples;
    for (std::int64_t n = tile; n <= max_tokens; n += tile) {
      latency += slowdown * uniform(rng, 0.5, 1.5);
      samples.push_back({n, latency});
    }
    curves.emplace_back(std::move(samples), tile, max_tokens);
  }
  return VariabilityProfile(std::move(curves), "random staircase");
}

/// Latency lookup on raw samples by linear scan: dense-region ceiling,
/// otherwise the nearest sample at or above n. Only valid for curves whose
/// dense region covers every sample, which is how the fixtures build them.
inline double reference_cost(const CostCurve& curve, std::int64_t n) {
  if (n <= 0) return 0.0;
  const auto& s = curve.samples();
  for (const CostSample& sample : s) {
    if (sample.tokens >= n) return sample.latency;
  }
  const CostSample& last = s.back();
  const CostSample& prev = s[s.size() - 2];
  return last.latency + (last.latency - prev.latency) /
                            static_cast<double>(last.tokens - prev.tokens) *
                            static_cast<double>(n - last.tokens);
}

/// Straggler-sum score by two nested loops over the raw trace.
inline double reference_score(const ExpertTrace& trace, const VariabilityProfile& profile,
                              const std::vector<std::size_t>& assignment) {
  double total = 0.0;
  for (std::size_t t = 0; t < trace.num_steps(); ++t) {
    double worst = 0.0;
    for (std::size_t g = 0; g < profile.num_gpus(); ++g) {
      std::int64_t load = 0;
      for (std::size_t e = 0; e < trace.num_experts(); ++e) {
        if (assignment[e] == g) load += trace.at(t, e);
      }
      worst = std::max(worst, reference_cost(profile.curve(g), load));
    }
    total += worst;
  }
  return total;
}

/// Calls fn on every assignment with exactly E/G experts per GPU.
inline void for_each_balanced(std::size_t experts, std::size_t gpus,
                              const std::function<void(const std::vector<std::size_t>&)>& fn) {
  const std::size_t capacity = experts / gpus;
  std::vector<std::size_t> assignment(experts);
  std::vector<std::size_t> count(gpus, 0);
  std::function<void(std::size_t)> rec = [&](std::size_t e) {
    if (e == experts) {
      fn(assignment);
      return;
    }
    for (std::size_t g = 0; g < gpus; ++g) {
      if (count[g] == capacity) continue;
      assignment[e] = g;
      ++count[g];
      rec(e + 1);
      --count[g];
    }
  };
  rec(0);
}

struct BruteForceOptimum {
  double score = 0.0;
  std::vector<std::size_t> assignment;
  std::size_t mappings_seen = 0;
};

inline BruteForceOptimum brute_force_optimum(const ExpertTrace& trace,
                                             const VariabilityProfile& profile) {
  BruteForceOptimum best;
  bool first = true;
  for_each_balanced(trace.num_experts(), profile.num_gpus(),
                    [&](const std::vector<std::size_t>& a) {
                      ++best.mappings_seen;
                      const double s = reference_score(trace, profile, a);
                      if (first || s < best.score) {
                        best.score = s;
                        best.assignment = a;
                        first = false;
                      }
                    });
  return best;
}

/// The three-step, four-expert, two-GPU worked example: loads (3, 6) at step
/// 0 with C_0(3) = 2 and C_1(6) = 5, stragglers 5, 4, 4.
inline ExpertTrace worked_example_trace() {
  return ExpertTrace::from_rows({{1, 2, 3, 3}, {3, 2, 1, 1}, {2, 2, 1, 0}});
}

inline VariabilityProfile worked_example_profile() {
  const std::vector<double> c0 = {1, 2, 2, 4, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15};
  const std::vector<double> c1 = {1, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15};
  std::vector<CostCurve> curves;
  for (const auto* table : {&c0, &c1}) {
    std::vector<CostSample> samples;
    for (std::size_t i = 0; i < table->size(); ++i) {
      samples.push_back({static_cast<std::int64_t>(i + 1), (*table)[i]});
    }
    curves.emplace_back(std::move(samples), 1, 16);
  }
  return VariabilityProfile(std::move(curves), "lookup table");
}

inline ExpertMapping worked_example_mapping() { return ExpertMapping(2, {0, 0, 1, 1}); }

/// Exact expected (max - min) / max of n i.i.d. two-point draws, by
/// enumerating all 2^n outcomes.
inline double two_point_exact_gap(double v1, double v2, double p, std::size_t n) {
  double expected = 0.0;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    double prob = 1.0, lo = 0.0, hi = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const bool first = (mask >> i) & 1U;
      const double v = first ? v1 : v2;
      prob *= first ? p : 1.0 - p;
      lo = i == 0 ? v : std::min(lo, v);
      hi = i == 0 ? v : std::max(hi, v);
    }
    expected += prob * (hi - lo) / hi;
  }
  return expected;
}

}  // namespace expertmap::testing
