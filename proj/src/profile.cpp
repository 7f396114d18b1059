// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The expertmap Authors. All Rights Reserved.

#include "expertmap/profile.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <utility>

#include "expertmap/error.hpp"
#include "io_util.hpp"

namespace expertmap {

namespace {

void validate_samples(const std::vector<CostSample>& samples, TokenCount tile_size,
                      TokenCount dense_limit) {
  if (tile_size < 1) throw ValidationError("tile_size must be >= 1");
  if (dense_limit < 0) throw ValidationError("dense_limit must be >= 0");
  if (samples.empty()) throw ValidationError("cost curve has no samples");
  if (samples.front().tokens < 1) {
    throw ValidationError("first sample must be at >= 1 token");
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!(samples[i].latency > 0.0) || !std::isfinite(samples[i].latency)) {
      throw ValidationError("sample at " + std::to_string(samples[i].tokens) +
                            " tokens has non-positive latency");
    }
    if (i == 0) continue;
    if (samples[i].tokens <= samples[i - 1].tokens) {
      throw ValidationError("sample token counts must be strictly increasing (at " +
                            std::to_string(samples[i].tokens) + ")");
    }
    if (samples[i].latency < samples[i - 1].latency) {
      throw ValidationError("latency decreases at " +
                            std::to_string(samples[i].tokens) + " tokens");
    }
  }
}

}  // namespace

CostCurve::CostCurve(std::vector<CostSample> samples, TokenCount tile_size,
                     TokenCount dense_limit)
    : samples_(std::move(samples)), tile_size_(tile_size), dense_limit_(dense_limit) {
  validate_samples(samples_, tile_size_, dense_limit_);
}

CostCurve CostCurve::from_measurements(std::vector<CostSample> samples,
                                       TokenCount tile_size, TokenCount dense_limit,
                                       double tolerance) {
  Millis running_max = 0.0;
  for (CostSample& s : samples) {
    if (s.latency < running_max) {
      if (s.latency < running_max * (1.0 - tolerance)) {
        throw ValidationError("latency at " + std::to_string(s.tokens) +
                              " tokens drops more than " +
                              std::to_string(tolerance * 100.0) +
                              "% below an earlier sample");
      }
      s.latency = running_max;
    }
    running_max = std::max(running_max, s.latency);
  }
  return CostCurve(std::move(samples), tile_size, dense_limit);
}

Millis CostCurve::cost(TokenCount n) const {
  if (n <= 0) return 0.0;
  const auto it = std::lower_bound(
      samples_.begin(), samples_.end(), n,
      [](const CostSample& s, TokenCount v) { return s.tokens < v; });

  if (it == samples_.end()) {
    const CostSample& last = samples_.back();
    if (samples_.size() == 1) return last.latency;
    const CostSample& prev = samples_[samples_.size() - 2];
    const double slope = (last.latency - prev.latency) /
                         static_cast<double>(last.tokens - prev.tokens);
    return last.latency + slope * static_cast<double>(n - last.tokens);
  }
  if (it->tokens == n || it == samples_.begin()) return it->latency;

  // An interval that starts inside the dense region is a single stair step;
  // only intervals lying wholly in the sparse region are interpolated.
  const CostSample& lo = *(it - 1);
  if (lo.tokens < dense_limit_) return it->latency;
  const double frac = static_cast<double>(n - lo.tokens) /
                      static_cast<double>(it->tokens - lo.tokens);
  return lo.latency + frac * (it->latency - lo.latency);
}

VariabilityProfile::VariabilityProfile(std::vector<CostCurve> curves, std::string label)
    : curves_(std::move(curves)), label_(std::move(label)) {
  if (curves_.empty()) throw ValidationError("profile needs at least one GPU curve");
  for (const CostCurve& c : curves_) {
    if (c.tile_size() != curves_.front().tile_size()) {
      throw ValidationError("GPU curves use different tile sizes (" +
                            std::to_string(curves_.front().tile_size()) + " vs " +
                            std::to_string(c.tile_size()) + ")");
    }
  }
}

VariabilitySetup parse_setup(const std::string& name) {
  if (name == "low") return VariabilitySetup::kLow;
  if (name == "moderate") return VariabilitySetup::kModerate;
  if (name == "high") return VariabilitySetup::kHigh;
  if (name == "explicit") return VariabilitySetup::kExplicit;
  throw ValidationError("unknown variability setup '" + name + "'");
}

std::string to_string(VariabilitySetup setup) {
  switch (setup) {
    case VariabilitySetup::kLow: return "low";
    case VariabilitySetup::kModerate: return "moderate";
    case VariabilitySetup::kHigh: return "high";
    case VariabilitySetup::kExplicit: return "explicit";
  }
  return "unknown";
}

void VariabilitySetupSpec::validate() const {
  if (num_gpus == 0) throw ValidationError("num_gpus must be >= 1");
  if (tile_size < 1) throw ValidationError("tile_size must be >= 1");
  if (max_tokens < tile_size) throw ValidationError("max_tokens must be >= tile_size");
  if (dense_tiles < 1 || sparse_stride_tiles < 1) {
    throw ValidationError("dense_tiles and sparse_stride_tiles must be >= 1");
  }
  if (!(base_latency > 0.0)) throw ValidationError("base_latency must be > 0");
  if (!(fixed_overhead >= 0.0)) throw ValidationError("fixed_overhead must be >= 0");
  if (setup == VariabilitySetup::kExplicit) {
    if (!speed_factors) throw ValidationError("explicit setup needs speed factors");
  }
  if (speed_factors) {
    if (speed_factors->size() != num_gpus) {
      throw ValidationError("need one speed factor per GPU");
    }
    for (double f : *speed_factors) {
      if (!(f > 0.0)) throw ValidationError("speed factors must be > 0");
    }
  }
}

std::vector<double> speed_factors(const VariabilitySetupSpec& spec) {
  spec.validate();
  if (spec.speed_factors) return *spec.speed_factors;
  std::vector<double> factors(spec.num_gpus, 1.0);
  switch (spec.setup) {
    case VariabilitySetup::kLow:
    case VariabilitySetup::kExplicit:
      break;
    case VariabilitySetup::kHigh:
      factors[0] = kSlowestFactor;
      break;
    case VariabilitySetup::kModerate: {
      std::mt19937_64 rng(spec.rng_seed);
      for (double& f : factors) {
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        f = kSlowestFactor + (kFastestFactor - kSlowestFactor) * u;
      }
      break;
    }
  }
  return factors;
}

VariabilityProfile generate_profile(const VariabilitySetupSpec& spec) {
  const std::vector<double> factors = speed_factors(spec);
  const TokenCount tile = spec.tile_size;
  const TokenCount dense_limit = spec.dense_tiles * tile;

  std::vector<TokenCount> points;
  for (TokenCount n = tile; n <= std::min(dense_limit, spec.max_tokens); n += tile) {
    points.push_back(n);
  }
  for (TokenCount n = dense_limit + spec.sparse_stride_tiles * tile; n <= spec.max_tokens;
       n += spec.sparse_stride_tiles * tile) {
    points.push_back(n);
  }
  if (points.back() < spec.max_tokens) points.push_back(spec.max_tokens);

  std::vector<CostCurve> curves;
  curves.reserve(factors.size());
  for (double factor : factors) {
    std::vector<CostSample> samples;
    samples.reserve(points.size());
    for (TokenCount n : points) {
      const auto tiles = static_cast<double>((n + tile - 1) / tile);
      samples.push_back({n, spec.fixed_overhead + spec.base_latency * tiles / factor});
    }
    curves.emplace_back(std::move(samples), tile, dense_limit);
  }
  return VariabilityProfile(std::move(curves), to_string(spec.setup) + " variability");
}

TokenCount equal_latency_load(const CostCurve& curve_a, const CostCurve& curve_b,
                              TokenCount n_a) {
  constexpr TokenCount kCap = TokenCount{1} << 50;
  const Millis target = curve_a.cost(n_a);
  TokenCount lo = 0;  // cost(0) = 0 always fits
  TokenCount hi = 1;
  while (curve_b.cost(hi) <= target) {
    lo = hi;
    if (hi >= kCap) return kCap;  // flat tail: no finite bound
    hi *= 2;
  }
  while (hi - lo > 1) {
    const TokenCount mid = lo + (hi - lo) / 2;
    (curve_b.cost(mid) <= target ? lo : hi) = mid;
  }
  return lo;
}

// ---------------------------------------------------------------------------
// Serialization

nlohmann::json profile_to_json(const VariabilityProfile& profile) {
  nlohmann::json curves = nlohmann::json::array();
  for (const CostCurve& c : profile.curves()) {
    nlohmann::json samples = nlohmann::json::array();
    for (const CostSample& s : c.samples()) samples.push_back({s.tokens, s.latency});
    curves.push_back({{"dense_limit", c.dense_limit()}, {"samples", samples}});
  }
  return {{"num_gpus", profile.num_gpus()},
          {"tile_size", profile.tile_size()},
          {"label", profile.label()},
          {"curves", curves}};
}

VariabilityProfile profile_from_json(const nlohmann::json& j) {
  try {
    const auto num_gpus = j.at("num_gpus").get<std::size_t>();
    const auto tile_size = j.at("tile_size").get<TokenCount>();
    const std::string label = j.value("label", std::string{});
    const auto& curves_json = j.at("curves");
    if (!curves_json.is_array() || curves_json.size() != num_gpus) {
      throw ValidationError("profile declares " + std::to_string(num_gpus) +
                            " GPUs but has " + std::to_string(curves_json.size()) +
                            " curves");
    }
    std::vector<CostCurve> curves;
    for (std::size_t g = 0; g < curves_json.size(); ++g) {
      const auto& c = curves_json[g];
      const TokenCount curve_tile = c.value("tile_size", tile_size);
      if (curve_tile != tile_size) {
        throw ValidationError("curve " + std::to_string(g) + " uses tile size " +
                              std::to_string(curve_tile) + ", profile uses " +
                              std::to_string(tile_size));
      }
      std::vector<CostSample> samples;
      for (const auto& s : c.at("samples")) {
        if (!s.is_array() || s.size() != 2) {
          throw ValidationError("curve " + std::to_string(g) +
                                ": samples must be [tokens, latency_ms] pairs");
        }
        samples.push_back({s[0].get<TokenCount>(), s[1].get<double>()});
      }
      try {
        curves.push_back(CostCurve::from_measurements(
            std::move(samples), tile_size, c.at("dense_limit").get<TokenCount>()));
      } catch (const ValidationError& e) {
        throw ValidationError("curve " + std::to_string(g) + ": " + e.what());
      }
    }
    return VariabilityProfile(std::move(curves), label);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("profile JSON: ") + e.what());
  }
}

VariabilityProfile parse_profile_json(const std::string& text) {
  return profile_from_json(detail::parse_json(text, "profile"));
}

VariabilityProfile load_profile(const std::filesystem::path& path) {
  return parse_profile_json(detail::read_file(path));
}

void save_profile(const VariabilityProfile& profile, const std::filesystem::path& path) {
  detail::write_file(path, profile_to_json(profile).dump(2) + "\n");
}

}  // namespace expertmap
