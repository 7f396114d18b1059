// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The expertmap Authors. All Rights Reserved.

#include "expertmap/scale_study.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "expertmap/error.hpp"
#include "expertmap/parallel.hpp"

namespace expertmap {

namespace {

constexpr std::size_t kChunkSamples = 4096;

double unit_draw(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw ValidationError(std::string(what) + " must be a positive finite value");
  }
}

}  // namespace

ThroughputDistribution ThroughputDistribution::empirical(std::vector<double> values) {
  if (values.empty()) throw ValidationError("empirical distribution needs values");
  for (double v : values) require_positive(v, "empirical throughput");
  return {Kind::kEmpirical, std::move(values)};
}

ThroughputDistribution ThroughputDistribution::uniform(double lo, double hi) {
  require_positive(lo, "uniform lower bound");
  require_positive(hi, "uniform upper bound");
  if (hi < lo) throw ValidationError("uniform bounds are reversed");
  return {Kind::kUniform, {lo, hi}};
}

ThroughputDistribution ThroughputDistribution::normal(double mean, double stddev) {
  require_positive(mean, "normal mean");
  if (!(stddev >= 0.0) || !std::isfinite(stddev)) {
    throw ValidationError("normal stddev must be >= 0");
  }
  return {Kind::kNormal, {mean, stddev}};
}

ThroughputDistribution ThroughputDistribution::two_point(double v1, double v2, double p) {
  require_positive(v1, "two-point value");
  require_positive(v2, "two-point value");
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("two-point p must lie in [0, 1]");
  return {Kind::kTwoPoint, {v1, v2, p}};
}

double ThroughputDistribution::sample(std::mt19937_64& rng) const {
  switch (kind_) {
    case Kind::kEmpirical: {
      const auto i = static_cast<std::size_t>(unit_draw(rng) *
                                              static_cast<double>(params_.size()));
      return params_[std::min(i, params_.size() - 1)];
    }
    case Kind::kUniform:
      return params_[0] + (params_[1] - params_[0]) * unit_draw(rng);
    case Kind::kNormal:
      for (;;) {
        // Box-Muller; the draw is rejected and redrawn if non-positive.
        const double u1 = 1.0 - unit_draw(rng);
        const double u2 = unit_draw(rng);
        const double z = std::sqrt(-2.0 * std::log(u1)) *
                         std::cos(2.0 * std::numbers::pi * u2);
        const double v = params_[0] + params_[1] * z;
        if (v > 0.0) return v;
      }
    case Kind::kTwoPoint:
      return unit_draw(rng) < params_[2] ? params_[0] : params_[1];
  }
  return 1.0;
}

nlohmann::json ThroughputDistribution::to_json() const {
  switch (kind_) {
    case Kind::kEmpirical: return {{"kind", "empirical"}, {"values", params_}};
    case Kind::kUniform: return {{"kind", "uniform"}, {"lo", params_[0]}, {"hi", params_[1]}};
    case Kind::kNormal:
      return {{"kind", "normal"}, {"mean", params_[0]}, {"stddev", params_[1]}};
    case Kind::kTwoPoint:
      return {{"kind", "two_point"}, {"v1", params_[0]}, {"v2", params_[1]}, {"p", params_[2]}};
  }
  return {};
}

ScaleStudyResult run_study(const ThroughputDistribution& dist,
                           const std::vector<std::size_t>& sizes, std::size_t samples,
                           std::uint64_t seed, std::size_t threads) {
  if (sizes.empty()) throw ValidationError("scale study needs at least one size");
  if (samples == 0) throw ValidationError("scale study needs at least one sample");
  for (std::size_t n : sizes) {
    if (n == 0) throw ValidationError("deployment sizes must be >= 1");
  }
  const std::size_t max_n = *std::max_element(sizes.begin(), sizes.end());
  const std::size_t chunks = (samples + kChunkSamples - 1) / kChunkSamples;

  // chunk_sums[c][k]: sum over the chunk's samples of the gap at prefix k+1.
  std::vector<std::vector<double>> chunk_sums(chunks, std::vector<double>(max_n, 0.0));
  parallel_for(chunks, threads, [&](std::size_t c) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32)};
    std::mt19937_64 rng(seq);
    const std::size_t begin = c * kChunkSamples;
    const std::size_t end = std::min(samples, begin + kChunkSamples);
    std::vector<double>& sums = chunk_sums[c];
    for (std::size_t s = begin; s < end; ++s) {
      double lo = 0.0, hi = 0.0;
      for (std::size_t k = 0; k < max_n; ++k) {
        const double v = dist.sample(rng);
        lo = k == 0 ? v : std::min(lo, v);
        hi = k == 0 ? v : std::max(hi, v);
        sums[k] += (hi - lo) / hi;
      }
    }
  });

  ScaleStudyResult result;
  result.sizes = sizes;
  result.num_samples = samples;
  result.rng_seed = seed;
  for (std::size_t n : sizes) {
    double total = 0.0;
    for (const auto& sums : chunk_sums) total += sums[n - 1];
    result.expected_gap.push_back(total / static_cast<double>(samples));
  }
  return result;
}

double expected_gap(const ThroughputDistribution& dist, std::size_t n,
                    std::size_t samples, std::uint64_t seed, std::size_t threads) {
  return run_study(dist, {n}, samples, seed, threads).expected_gap.front();
}

nlohmann::json scale_result_to_json(const ScaleStudyResult& result) {
  return {{"sizes", result.sizes},
          {"expected_gap", result.expected_gap},
          {"num_samples", result.num_samples},
          {"rng_seed", result.rng_seed}};
}

std::string scale_result_to_csv(const ScaleStudyResult& result) {
  std::string out = "n,expected_gap\n";
  for (std::size_t i = 0; i < result.sizes.size(); ++i) {
    out += std::to_string(result.sizes[i]) + ',' +
           nlohmann::json(result.expected_gap[i]).dump() + '\n';
  }
  return out;
}

}  // namespace expertmap
