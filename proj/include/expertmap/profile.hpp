// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The expertmap Authors. All Rights Reserved.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "expertmap/trace.hpp"

namespace expertmap {

using Millis = double;

struct CostSample {
  TokenCount tokens;
  Millis latency;
  friend bool operator==(const CostSample&, const CostSample&) = default;
};

/// Token-count to latency curve of one GPU.
///
/// Up to dense_limit tokens the curve is a staircase: a query returns the
/// latency of the smallest sample at or above it. Past dense_limit the
/// samples are sparse and the curve interpolates linearly between them, and
/// past the last sample it extrapolates linearly from the last two.
class CostCurve {
 public:
  /// Validates strictly increasing token counts starting at >= 1, positive
  /// latencies and non-decreasing latency.
  CostCurve(std::vector<CostSample> samples, TokenCount tile_size,
            TokenCount dense_limit);

  /// Like the constructor, but latency dips of at most `tolerance` (relative
  /// to the running maximum) are clamped up instead of rejected.
  static CostCurve from_measurements(std::vector<CostSample> samples,
                                     TokenCount tile_size,
                                     TokenCount dense_limit,
                                     double tolerance = 0.02);

  Millis cost(TokenCount n) const;

  const std::vector<CostSample>& samples() const { return samples_; }
  TokenCount tile_size() const { return tile_size_; }
  TokenCount dense_limit() const { return dense_limit_; }

  friend bool operator==(const CostCurve&, const CostCurve&) = default;

 private:
  std::vector<CostSample> samples_;
  TokenCount tile_size_;
  TokenCount dense_limit_;
};

inline Millis cost(const CostCurve& curve, TokenCount n) { return curve.cost(n); }

class VariabilityProfile {
 public:
  /// Requires at least one curve and a single shared tile size.
  VariabilityProfile(std::vector<CostCurve> curves, std::string label = {});

  std::size_t num_gpus() const { return curves_.size(); }
  TokenCount tile_size() const { return curves_.front().tile_size(); }
  const CostCurve& curve(std::size_t gpu) const { return curves_[gpu]; }
  const std::vector<CostCurve>& curves() const { return curves_; }
  const std::string& label() const { return label_; }

  friend bool operator==(const VariabilityProfile&,
                         const VariabilityProfile&) = default;

 private:
  std::vector<CostCurve> curves_;
  std::string label_;
};

enum class VariabilitySetup { kLow, kModerate, kHigh, kExplicit };

VariabilitySetup parse_setup(const std::string& name);
std::string to_string(VariabilitySetup setup);

struct VariabilitySetupSpec {
  std::size_t num_gpus = 4;
  VariabilitySetup setup = VariabilitySetup::kLow;
  std::optional<std::vector<double>> speed_factors;  // explicit setup only
  Millis base_latency = 1.0;    // per tile at factor 1.0
  Millis fixed_overhead = 0.0;
  TokenCount tile_size = 64;
  TokenCount max_tokens = 16384;
  TokenCount dense_tiles = 32;   // dense region length in tiles
  TokenCount sparse_stride_tiles = 16;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

/// Throughput factor of the single slow GPU in the high setup, and the range
/// from which the moderate setup draws.
inline constexpr double kSlowestFactor = 0.88;
inline constexpr double kFastestFactor = 1.11;

/// Per-GPU speed factors implied by the setup (seeded for moderate).
std::vector<double> speed_factors(const VariabilitySetupSpec& spec);

/// Samples latency = overhead + base * ceil(n / tile) / factor at every tile
/// boundary up to the dense limit, then every sparse stride, ending at
/// max_tokens.
VariabilityProfile generate_profile(const VariabilitySetupSpec& spec);

/// Largest n_b with cost(b, n_b) <= cost(a, n_a).
TokenCount equal_latency_load(const CostCurve& curve_a, const CostCurve& curve_b,
                              TokenCount n_a);

nlohmann::json profile_to_json(const VariabilityProfile& profile);
/// Applies the 2% monotonicity tolerance.
VariabilityProfile profile_from_json(const nlohmann::json& j);
VariabilityProfile parse_profile_json(const std::string& text);
VariabilityProfile load_profile(const std::filesystem::path& path);
void save_profile(const VariabilityProfile& profile,
                  const std::filesystem::path& path);

}  // namespace expertmap
