// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The expertmap Authors. All Rights Reserved.

#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "expertmap/baselines.hpp"
#include "expertmap/error.hpp"
#include "expertmap/mapping.hpp"
#include "expertmap/parallel.hpp"
#include "expertmap/profile.hpp"
#include "expertmap/scale_study.hpp"
#include "expertmap/search.hpp"
#include "expertmap/trace.hpp"

namespace py = pybind11;
using namespace expertmap;

namespace {

py::dict percentiles_dict(const Percentiles& p) {
  py::dict d;
  d["p50"] = p.p50;
  d["p90"] = p.p90;
  d["p95"] = p.p95;
  d["p99"] = p.p99;
  return d;
}

py::dict report_dict(const ReplayReport& r) {
  py::dict d;
  d["total_score"] = r.total_score;
  d["mean_step_latency"] = r.mean_step_latency;
  d["percentiles"] = percentiles_dict(r.percentiles);
  d["per_gpu_total_tokens"] = r.per_gpu_total_tokens;
  d["per_gpu_busy_time"] = r.per_gpu_busy_time;
  py::list stragglers, straggler_gpus;
  for (const StepCost& s : r.step_costs) {
    stragglers.append(s.straggler_latency);
    straggler_gpus.append(s.straggler_gpu);
  }
  d["step_straggler_latency"] = stragglers;
  d["step_straggler_gpu"] = straggler_gpus;
  return d;
}

}  // namespace

PYBIND11_MODULE(_expertmap, m) {
  m.doc() = "Variability-aware expert-to-GPU mapping for MoE inference.";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
  py::register_exception<GenerationError>(m, "GenerationError", base.ptr());

  py::class_<ExpertTrace>(m, "ExpertTrace")
      .def(py::init(&ExpertTrace::from_rows), py::arg("rows"))
      .def_property_readonly("num_experts", &ExpertTrace::num_experts)
      .def_property_readonly("num_steps", &ExpertTrace::num_steps)
      .def("rows", &ExpertTrace::rows)
      .def("step_total", &ExpertTrace::step_total)
      .def(py::self == py::self);

  py::class_<TraceStats>(m, "TraceStats")
      .def_readonly("mean_utilization", &TraceStats::mean_utilization)
      .def_readonly("active_fraction", &TraceStats::active_fraction)
      .def_readonly("correlation", &TraceStats::correlation);

  m.def("compute_stats", &compute_stats, py::arg("trace"));
  m.def("load_trace", py::overload_cast<const std::filesystem::path&>(&load_trace),
        py::arg("path"));
  m.def(
      "save_trace",
      [](const ExpertTrace& t, const std::filesystem::path& p, const std::string& fmt) {
        save_trace(t, p, fmt == "csv" ? TraceFormat::kCsv : TraceFormat::kJson);
      },
      py::arg("trace"), py::arg("path"), py::arg("format") = "json");
  m.def(
      "generate_trace",
      [](std::size_t num_experts, std::size_t num_steps, TokenCount tokens_per_step,
         std::vector<std::size_t> consistent, double p_consistent,
         std::vector<std::vector<std::size_t>> temporal, double p_burst, double multiplier,
         std::uint64_t seed) {
        SyntheticTraceSpec spec;
        spec.num_experts = num_experts;
        spec.num_steps = num_steps;
        spec.tokens_per_step = tokens_per_step;
        spec.consistent_experts = std::move(consistent);
        spec.consistent_probability = p_consistent;
        for (auto& g : temporal) spec.temporal_groups.push_back({std::move(g), p_burst, multiplier});
        spec.rng_seed = seed;
        return generate_trace(spec);
      },
      py::arg("num_experts"), py::arg("num_steps") = 16, py::arg("tokens_per_step") = 4096,
      py::arg("consistent") = std::vector<std::size_t>{}, py::arg("p_consistent") = 0.85,
      py::arg("temporal") = std::vector<std::vector<std::size_t>>{}, py::arg("p_burst") = 0.17,
      py::arg("multiplier") = 3.0, py::arg("seed") = 0);

  py::class_<CostCurve>(m, "CostCurve")
      .def(py::init([](const std::vector<std::pair<TokenCount, double>>& samples,
                       TokenCount tile_size, TokenCount dense_limit) {
             std::vector<CostSample> s;
             for (const auto& [n, l] : samples) s.push_back({n, l});
             return CostCurve(std::move(s), tile_size, dense_limit);
           }),
           py::arg("samples"), py::arg("tile_size"), py::arg("dense_limit"))
      .def("cost", &CostCurve::cost, py::arg("n"))
      .def_property_readonly("tile_size", &CostCurve::tile_size)
      .def_property_readonly("dense_limit", &CostCurve::dense_limit);

  py::class_<VariabilityProfile>(m, "VariabilityProfile")
      .def(py::init<std::vector<CostCurve>, std::string>(), py::arg("curves"),
           py::arg("label") = "")
      .def_property_readonly("num_gpus", &VariabilityProfile::num_gpus)
      .def_property_readonly("label", &VariabilityProfile::label)
      .def("curve", &VariabilityProfile::curve, py::return_value_policy::reference_internal)
      .def(py::self == py::self);

  m.def(
      "generate_profile",
      [](std::size_t num_gpus, const std::string& setup,
         std::optional<std::vector<double>> factors, double base_latency, double overhead,
         TokenCount tile_size, TokenCount max_tokens, std::uint64_t seed) {
        VariabilitySetupSpec spec;
        spec.num_gpus = num_gpus;
        spec.setup = parse_setup(setup);
        spec.speed_factors = std::move(factors);
        spec.base_latency = base_latency;
        spec.fixed_overhead = overhead;
        spec.tile_size = tile_size;
        spec.max_tokens = max_tokens;
        spec.rng_seed = seed;
        return generate_profile(spec);
      },
      py::arg("num_gpus") = 4, py::arg("setup") = "low", py::arg("factors") = py::none(),
      py::arg("base_latency") = 1.0, py::arg("overhead") = 0.0, py::arg("tile_size") = 64,
      py::arg("max_tokens") = 16384, py::arg("seed") = 0);
  m.def("load_profile", &load_profile, py::arg("path"));
  m.def("save_profile", &save_profile, py::arg("profile"), py::arg("path"));
  m.def("equal_latency_load", &equal_latency_load, py::arg("curve_a"), py::arg("curve_b"),
        py::arg("n_a"));

  py::class_<ExpertMapping>(m, "ExpertMapping")
      .def(py::init<std::size_t, std::vector<std::size_t>>(), py::arg("num_gpus"),
           py::arg("assignment"))
      .def_property_readonly("num_experts", &ExpertMapping::num_experts)
      .def_property_readonly("num_gpus", &ExpertMapping::num_gpus)
      .def_property_readonly("assignment", &ExpertMapping::assignment)
      .def(py::self == py::self);

  m.def("gpu_loads", &gpu_loads, py::arg("trace"), py::arg("mapping"), py::arg("step"));
  m.def("score_mapping", &score_mapping, py::arg("trace"), py::arg("profile"),
        py::arg("mapping"));
  m.def(
      "replay",
      [](const ExpertTrace& t, const VariabilityProfile& p, const ExpertMapping& mp) {
        return report_dict(replay(t, p, mp));
      },
      py::arg("trace"), py::arg("profile"), py::arg("mapping"));
  m.def("linear_mapping", &linear_mapping, py::arg("num_experts"), py::arg("num_gpus"));
  m.def("eplb_mapping",
        py::overload_cast<const ExpertTrace&, std::size_t>(&eplb_mapping), py::arg("trace"),
        py::arg("num_gpus"));

  m.def(
      "search",
      [](const ExpertTrace& t, const VariabilityProfile& p, std::size_t restarts,
         double noise, double threshold, std::uint64_t seed, bool seed_with_baselines,
         std::size_t threads) {
        SearchConfig config;
        config.restarts = restarts;
        config.noise_fraction = noise;
        config.convergence_threshold = threshold;
        config.rng_seed = seed;
        config.seed_with_baselines = seed_with_baselines;
        config.threads = threads;
        std::optional<SearchResult> found;
        {
          py::gil_scoped_release release;
          found = search(t, p, config);
        }
        const SearchResult& r = *found;
        py::dict d;
        d["best_mapping"] = r.best_mapping;
        d["best_score"] = r.best_score;
        d["provenance"] = r.provenance.to_string();
        py::list rows;
        for (const RestartOutcome& o : r.per_restart) {
          py::dict row;
          row["provenance"] = o.provenance.to_string();
          row["initial_score"] = o.initial_score;
          row["final_score"] = o.final_score;
          row["swap_count"] = o.swap_count;
          rows.append(row);
        }
        d["per_restart"] = rows;
        return d;
      },
      py::arg("trace"), py::arg("profile"), py::arg("restarts") = 30, py::arg("noise") = 0.2,
      py::arg("threshold") = 0.001, py::arg("seed") = 0, py::arg("seed_with_baselines") = true,
      py::arg("threads") = 1);

  py::class_<ThroughputDistribution>(m, "ThroughputDistribution")
      .def_static("empirical", &ThroughputDistribution::empirical, py::arg("values"))
      .def_static("uniform", &ThroughputDistribution::uniform, py::arg("lo"), py::arg("hi"))
      .def_static("normal", &ThroughputDistribution::normal, py::arg("mean"), py::arg("stddev"))
      .def_static("two_point", &ThroughputDistribution::two_point, py::arg("v1"), py::arg("v2"),
                  py::arg("p"));
  m.def("expected_gap", &expected_gap, py::arg("dist"), py::arg("n"),
        py::arg("samples") = 10000, py::arg("seed") = 0, py::arg("threads") = 1);
  m.def(
      "run_study",
      [](const ThroughputDistribution& d, const std::vector<std::size_t>& sizes,
         std::size_t samples, std::uint64_t seed, std::size_t threads) {
        return run_study(d, sizes, samples, seed, threads).expected_gap;
      },
      py::arg("dist"), py::arg("sizes"), py::arg("samples") = 10000, py::arg("seed") = 0,
      py::arg("threads") = 1);
}
