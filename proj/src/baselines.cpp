// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The expertmap Authors. All Rights Reserved.

#include "expertmap/baselines.hpp"

#include <algorithm>
#include <numeric>

#include "expertmap/error.hpp"

namespace expertmap {

ExpertMapping linear_mapping(std::size_t num_experts, std::size_t num_gpus) {
  require_divisible(num_experts, num_gpus);
  std::vector<std::size_t> assignment(num_experts);
  for (std::size_t e = 0; e < num_experts; ++e) assignment[e] = e * num_gpus / num_experts;
  return ExpertMapping(num_gpus, std::move(assignment));
}

namespace {

// LPT over any orderable per-expert weight. Ties: lower expert index first,
// then lower GPU index.
template <typename Weight>
ExpertMapping lpt(const std::vector<Weight>& weights, std::size_t num_gpus) {
  const std::size_t experts = weights.size();
  require_divisible(experts, num_gpus);
  const std::size_t capacity = experts / num_gpus;

  std::vector<std::size_t> order(experts);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return weights[a] > weights[b]; });

  std::vector<Weight> load(num_gpus, Weight{});
  std::vector<std::size_t> hosted(num_gpus, 0);
  std::vector<std::size_t> assignment(experts, 0);
  for (std::size_t e : order) {
    std::size_t best = num_gpus;
    for (std::size_t g = 0; g < num_gpus; ++g) {
      if (hosted[g] == capacity) continue;
      if (best == num_gpus || load[g] < load[best]) best = g;
    }
    assignment[e] = best;
    load[best] += weights[e];
    ++hosted[best];
  }
  return ExpertMapping(num_gpus, std::move(assignment));
}

}  // namespace

ExpertMapping eplb_mapping(const std::vector<TokenCount>& aggregate_tokens,
                           std::size_t num_gpus) {
  return lpt(aggregate_tokens, num_gpus);
}

ExpertMapping eplb_mapping(const ExpertTrace& trace, std::size_t num_gpus) {
  std::vector<TokenCount> totals(trace.num_experts());
  for (std::size_t e = 0; e < totals.size(); ++e) totals[e] = trace.expert_total(e);
  return lpt(totals, num_gpus);
}

std::vector<TokenCount> aggregate_gpu_tokens(const ExpertTrace& trace,
                                             const ExpertMapping& mapping) {
  if (trace.num_experts() != mapping.num_experts()) {
    throw DimensionError("trace and mapping disagree on the expert count");
  }
  std::vector<TokenCount> totals(mapping.num_gpus(), 0);
  for (std::size_t e = 0; e < trace.num_experts(); ++e) {
    totals[mapping.gpu_of(e)] += trace.expert_total(e);
  }
  return totals;
}

}  // namespace expertmap
