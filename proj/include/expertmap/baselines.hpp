// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The expertmap Authors. All Rights Reserved.

#pragma once

#include <cstddef>
#include <vector>

#include "expertmap/mapping.hpp"
#include "expertmap/trace.hpp"

namespace expertmap {

/// Contiguous index blocks: expert i goes to GPU floor(i * G / E).
ExpertMapping linear_mapping(std::size_t num_experts, std::size_t num_gpus);

/// Capacity-constrained longest-processing-time on aggregate token counts.
/// Never looks at latency curves.
ExpertMapping eplb_mapping(const std::vector<TokenCount>& aggregate_tokens,
                           std::size_t num_gpus);
ExpertMapping eplb_mapping(const ExpertTrace& trace, std::size_t num_gpus);

/// Per-GPU aggregate token totals of a mapping.
std::vector<TokenCount> aggregate_gpu_tokens(const ExpertTrace& trace,
                                             const ExpertMapping& mapping);

}  // namespace expertmap
