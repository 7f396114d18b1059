// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The expertmap Authors. All Rights Reserved.

#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace expertmap {

/// Normalized per-GPU throughput distribution (nominal = 1.0).
class ThroughputDistribution {
 public:
  enum class Kind { kEmpirical, kUniform, kNormal, kTwoPoint };

  static ThroughputDistribution empirical(std::vector<double> values);
  static ThroughputDistribution uniform(double lo, double hi);
  /// Truncated to strictly positive draws.
  static ThroughputDistribution normal(double mean, double stddev);
  /// v1 with probability p, v2 otherwise.
  static ThroughputDistribution two_point(double v1, double v2, double p);

  double sample(std::mt19937_64& rng) const;

  Kind kind() const { return kind_; }
  const std::vector<double>& params() const { return params_; }
  nlohmann::json to_json() const;

 private:
  ThroughputDistribution(Kind kind, std::vector<double> params)
      : kind_(kind), params_(std::move(params)) {}

  Kind kind_;
  std::vector<double> params_;
};

struct ScaleStudyResult {
  std::vector<std::size_t> sizes;
  std::vector<double> expected_gap;
  std::size_t num_samples = 0;
  std::uint64_t rng_seed = 0;
};

/// Mean over Monte-Carlo samples of (max - min) / max across n draws.
double expected_gap(const ThroughputDistribution& dist, std::size_t n,
                    std::size_t samples, std::uint64_t seed,
                    std::size_t threads = 1);

/// Gap per size using common random numbers: each sample draws
/// max(sizes) values once and size n reads its first n, so the result is
/// non-decreasing in n exactly. Independent of the thread count.
ScaleStudyResult run_study(const ThroughputDistribution& dist,
                           const std::vector<std::size_t>& sizes,
                           std::size_t samples, std::uint64_t seed,
                           std::size_t threads = 1);

nlohmann::json scale_result_to_json(const ScaleStudyResult& result);
std::string scale_result_to_csv(const ScaleStudyResult& result);

}  // namespace expertmap
