# SPDX-License-Identifier: Apache-2.0
# Copyright (c) 2026 The expertmap Authors. All Rights Reserved.
"""Variability-aware expert-to-GPU mapping for MoE inference."""

from ._expertmap import (
    CostCurve,
    DimensionError,
    Error,
    ExpertMapping,
    ExpertTrace,
    GenerationError,
    ParseError,
    ThroughputDistribution,
    TraceStats,
    ValidationError,
    VariabilityProfile,
    compute_stats,
    eplb_mapping,
    equal_latency_load,
    expected_gap,
    generate_profile,
    generate_trace,
    gpu_loads,
    linear_mapping,
    load_profile,
    load_trace,
    replay,
    run_study,
    save_profile,
    save_trace,
    score_mapping,
    search,
)

__version__ = "0.1.0"
