// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The expertmap Authors. All Rights Reserved.

#include "expertmap/cli.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "expertmap/baselines.hpp"
#include "expertmap/error.hpp"
#include "expertmap/mapping.hpp"
#include "expertmap/parallel.hpp"
#include "expertmap/profile.hpp"
#include "expertmap/scale_study.hpp"
#include "expertmap/search.hpp"
#include "expertmap/trace.hpp"
#include "io_util.hpp"

namespace expertmap {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct GlobalOptions {
  std::optional<std::uint64_t> seed;
  std::string output;
  std::string format = "json";
  bool verbose = false;
  bool quiet = false;
  bool timing = false;
};

struct SearchFlags {
  std::size_t restarts = 30;
  double noise = 0.20;
  double threshold = 0.001;
  bool no_baseline_seeds = false;
  std::size_t max_swaps = 0;
};

class Context {
 public:
  Context(std::string command, const GlobalOptions& opts, std::ostream& out,
          std::ostream& err)
      : command_(std::move(command)),
        opts_(opts),
        out_(out),
        err_(err),
        start_(std::chrono::steady_clock::now()) {}

  const GlobalOptions& opts() const { return opts_; }

  /// The --seed value, or a fresh one announced on stderr.
  std::uint64_t seed() {
    if (!resolved_seed_) {
      if (opts_.seed) {
        resolved_seed_ = *opts_.seed;
      } else {
        std::random_device rd;
        resolved_seed_ = (static_cast<std::uint64_t>(rd()) << 32) | rd();
        err_ << "seed: " << *resolved_seed_ << "\n";
      }
    }
    return *resolved_seed_;
  }

  json manifest(const json& inputs, const json& config) const {
    json m = {{"command", command_},
              {"tool_version", kVersion},
              {"inputs", inputs},
              {"config", config}};
    m["seeds"] = resolved_seed_ ? json{{"rng_seed", *resolved_seed_}} : json::object();
    if (opts_.timing) {
      m["duration_ms"] = std::chrono::duration<double, std::milli>(
                             std::chrono::steady_clock::now() - start_)
                             .count();
    }
    return m;
  }

  void emit(const std::string& text) const {
    if (opts_.output.empty() || opts_.output == "-") {
      out_ << text;
    } else {
      detail::write_file(opts_.output, text);
    }
  }
  void emit(const json& j) const { emit(j.dump(2) + "\n"); }

  void say(const std::string& line) const {
    if (!opts_.quiet) err_ << line << "\n";
  }

  bool csv() const { return opts_.format == "csv"; }

 private:
  std::string command_;
  const GlobalOptions& opts_;
  std::ostream& out_;
  std::ostream& err_;
  std::chrono::steady_clock::time_point start_;
  std::optional<std::uint64_t> resolved_seed_;
};

std::string fmt_ms(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(3) << v;
  return s.str();
}

std::string fmt_pct(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << v << "%";
  return s.str();
}

double reduction_pct(double reference, double value) {
  return reference == 0.0 ? 0.0 : 100.0 * (reference - value) / reference;
}

std::vector<std::size_t> parse_index_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      const long long v = std::stoll(item, &used);
      if (used != item.size() || v < 0) throw std::invalid_argument(item);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw ValidationError("not a non-negative integer: '" + item + "'");
    }
  }
  return out;
}

std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ValidationError("not a number: '" + item + "'");
    }
  }
  return out;
}

SearchConfig make_search_config(const SearchFlags& flags, std::uint64_t seed) {
  SearchConfig config;
  config.restarts = flags.restarts;
  config.noise_fraction = flags.noise;
  config.convergence_threshold = flags.threshold;
  config.seed_with_baselines = !flags.no_baseline_seeds;
  config.max_swaps_per_restart = flags.max_swaps;
  config.rng_seed = seed;
  config.threads = threads_from_env();
  config.validate();
  return config;
}

void add_search_flags(CLI::App* cmd, SearchFlags& flags) {
  cmd->add_option("--restarts", flags.restarts, "Greedy restarts (K)")->check(CLI::PositiveNumber);
  cmd->add_option("--noise", flags.noise, "Sort-key noise fraction for restarts after the first");
  cmd->add_option("--threshold", flags.threshold, "Relative score drop below which refinement stops");
  cmd->add_flag("--no-baseline-seeds", flags.no_baseline_seeds,
                "Do not refine from the linear and EPLB mappings");
  cmd->add_option("--max-swaps", flags.max_swaps, "Swap cap per restart (0: 10 x experts)");
}

// ---------------------------------------------------------------------------
// Commands

struct GenTraceArgs {
  std::string spec_file;
  std::size_t experts = 16;
  std::size_t steps = 16;
  TokenCount tokens_per_step = 4096;
  std::string consistent;
  double p_consistent = 0.85;
  std::string temporal;
  double p_burst = 0.17;
  double multiplier = 3.0;
};

void cmd_gen_trace(Context& ctx, const GenTraceArgs& a) {
  SyntheticTraceSpec spec;
  if (!a.spec_file.empty()) {
    spec = trace_spec_from_json(detail::parse_json(detail::read_file(a.spec_file), "trace spec"));
    if (ctx.opts().seed) spec.rng_seed = ctx.seed();
  } else {
    spec.num_experts = a.experts;
    spec.num_steps = a.steps;
    spec.tokens_per_step = a.tokens_per_step;
    spec.consistent_experts = parse_index_list(a.consistent);
    spec.consistent_probability = a.p_consistent;
    std::stringstream groups(a.temporal);
    std::string group;
    while (std::getline(groups, group, ';')) {
      TemporalGroup g;
      g.experts = parse_index_list(group);
      if (g.experts.empty()) continue;
      g.burst_probability = a.p_burst;
      g.token_multiplier = a.multiplier;
      spec.temporal_groups.push_back(std::move(g));
    }
    spec.rng_seed = ctx.seed();
  }
  const ExpertTrace trace = generate_trace(spec);
  ctx.emit(ctx.csv() ? trace_to_csv(trace) : trace_to_json(trace).dump() + "\n");
  ctx.say("generated trace: " + std::to_string(trace.num_steps()) + " steps x " +
          std::to_string(trace.num_experts()) + " experts");
}

struct GenProfileArgs {
  std::size_t gpus = 4;
  std::string setup = "low";
  std::string factors;
  double base_latency = 1.0;
  double overhead = 0.0;
  TokenCount tile = 64;
  TokenCount max_tokens = 16384;
  TokenCount dense_tiles = 32;
  TokenCount sparse_stride = 16;
};

void cmd_gen_profile(Context& ctx, const GenProfileArgs& a) {
  VariabilitySetupSpec spec;
  spec.num_gpus = a.gpus;
  spec.setup = parse_setup(a.setup);
  if (!a.factors.empty()) spec.speed_factors = parse_number_list(a.factors);
  spec.base_latency = a.base_latency;
  spec.fixed_overhead = a.overhead;
  spec.tile_size = a.tile;
  spec.max_tokens = a.max_tokens;
  spec.dense_tiles = a.dense_tiles;
  spec.sparse_stride_tiles = a.sparse_stride;
  if (spec.setup == VariabilitySetup::kModerate) spec.rng_seed = ctx.seed();
  const VariabilityProfile profile = generate_profile(spec);
  ctx.emit(profile_to_json(profile));
  std::string line = "profile " + profile.label() + ", speed factors:";
  for (double f : speed_factors(spec)) line += " " + fmt_ms(f);
  ctx.say(line);
}

struct Inputs {
  std::string trace;
  std::string profile;
  std::string mapping;
};

json inputs_json(const Inputs& in) {
  json j = json::object();
  if (!in.trace.empty()) j["trace"] = in.trace;
  if (!in.profile.empty()) j["profile"] = in.profile;
  if (!in.mapping.empty()) j["mapping"] = in.mapping;
  return j;
}

void cmd_score(Context& ctx, const Inputs& in) {
  const ExpertTrace trace = load_trace(in.trace);
  const VariabilityProfile profile = load_profile(in.profile);
  const ExpertMapping mapping = load_mapping(in.mapping);
  const Millis score = score_mapping(trace, profile, mapping);
  ctx.emit(json{{"manifest", ctx.manifest(inputs_json(in), json::object())},
                {"total_score", score}});
  ctx.say("score: " + fmt_ms(score) + " ms");
}

std::string step_csv(const ReplayReport& report) {
  std::string out = "step,straggler_gpu,straggler_latency";
  const std::size_t gpus = report.per_gpu_busy_time.size();
  for (std::size_t g = 0; g < gpus; ++g) out += ",gpu" + std::to_string(g) + "_latency";
  out += "\n";
  for (std::size_t t = 0; t < report.step_costs.size(); ++t) {
    const StepCost& s = report.step_costs[t];
    out += std::to_string(t) + "," + std::to_string(s.straggler_gpu) + "," +
           json(s.straggler_latency).dump();
    for (double v : s.per_gpu_latency) out += "," + json(v).dump();
    out += "\n";
  }
  return out;
}

void cmd_replay(Context& ctx, const Inputs& in) {
  const ExpertTrace trace = load_trace(in.trace);
  const VariabilityProfile profile = load_profile(in.profile);
  const ExpertMapping mapping = load_mapping(in.mapping);
  const ReplayReport report = replay(trace, profile, mapping);
  if (ctx.csv()) {
    ctx.emit(step_csv(report));
  } else {
    json j = report_to_json(report, ctx.opts().verbose);
    j["manifest"] = ctx.manifest(inputs_json(in), json::object());
    ctx.emit(j);
  }
  ctx.say("total " + fmt_ms(report.total_score) + " ms, mean step " +
          fmt_ms(report.mean_step_latency) + " ms, p90 " + fmt_ms(report.percentiles.p90) +
          " ms, p99 " + fmt_ms(report.percentiles.p99) + " ms");
}

void cmd_compare(Context& ctx, const Inputs& in, const std::vector<std::string>& mappings) {
  const ExpertTrace trace = load_trace(in.trace);
  const VariabilityProfile profile = load_profile(in.profile);
  std::vector<ExpertMapping> loaded;
  for (const std::string& path : mappings) loaded.push_back(load_mapping(path));

  json rows = json::array();
  std::string csv = "mapping,total_score,mean_step_latency,p50,p90,p95,p99,reduction_pct\n";
  std::optional<ReplayReport> reference;
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    ReplayReport r = replay(trace, profile, loaded[i]);
    if (!reference) reference = r;
    const double red = reduction_pct(reference->total_score, r.total_score);
    json row = report_to_json(r, ctx.opts().verbose);
    row["mapping"] = mappings[i];
    row["reduction_pct"] = red;
    row["reduction_pct_p90"] = reduction_pct(reference->percentiles.p90, r.percentiles.p90);
    row["reduction_pct_p99"] = reduction_pct(reference->percentiles.p99, r.percentiles.p99);
    rows.push_back(row);
    csv += mappings[i] + "," + json(r.total_score).dump() + "," +
           json(r.mean_step_latency).dump() + "," + json(r.percentiles.p50).dump() + "," +
           json(r.percentiles.p90).dump() + "," + json(r.percentiles.p95).dump() + "," +
           json(r.percentiles.p99).dump() + "," + json(red).dump() + "\n";
    ctx.say(mappings[i] + ": total " + fmt_ms(r.total_score) + " ms, p90 " +
            fmt_ms(r.percentiles.p90) + " ms, reduction vs first " + fmt_pct(red));
  }
  if (ctx.csv()) {
    ctx.emit(csv);
  } else {
    json inputs = inputs_json(in);
    inputs["mappings"] = mappings;
    ctx.emit(json{{"manifest", ctx.manifest(inputs, json::object())}, {"mappings", rows}});
  }
}

void cmd_baseline(Context& ctx, const std::string& policy, const Inputs& in,
                  std::size_t experts, std::size_t gpus) {
  std::optional<ExpertTrace> trace;
  if (!in.trace.empty()) trace = load_trace(in.trace);
  if (!in.profile.empty()) gpus = load_profile(in.profile).num_gpus();
  if (gpus == 0) throw ValidationError("baseline needs --gpus or --profile");

  std::optional<ExpertMapping> mapping;
  if (policy == "linear") {
    if (trace) experts = trace->num_experts();
    if (experts == 0) throw ValidationError("linear baseline needs --experts or --trace");
    mapping = linear_mapping(experts, gpus);
  } else {
    if (!trace) throw ValidationError("eplb baseline needs --trace");
    mapping = eplb_mapping(*trace, gpus);
  }
  json j = mapping_to_json(*mapping);
  j["policy"] = policy;
  j["manifest"] = ctx.manifest(inputs_json(in), json{{"policy", policy}, {"num_gpus", gpus}});
  ctx.emit(j);
  if (trace) {
    std::string line = policy + " per-GPU tokens:";
    for (TokenCount t : aggregate_gpu_tokens(*trace, *mapping)) line += " " + std::to_string(t);
    ctx.say(line);
  }
}

json comparison_block(const ExpertTrace& trace, const VariabilityProfile& profile,
                      Millis best) {
  const Millis linear = score_mapping(trace, profile,
                                      linear_mapping(trace.num_experts(), profile.num_gpus()));
  const Millis eplb = score_mapping(trace, profile, eplb_mapping(trace, profile.num_gpus()));
  return {{"linear", linear},
          {"eplb", eplb},
          {"gem", best},
          {"gem_vs_linear_pct", reduction_pct(linear, best)},
          {"gem_vs_eplb_pct", reduction_pct(eplb, best)}};
}

void cmd_optimize(Context& ctx, const Inputs& in, const SearchFlags& flags,
                  const std::string& mapping_out) {
  const ExpertTrace trace = load_trace(in.trace);
  const VariabilityProfile profile = load_profile(in.profile);
  if (trace.num_experts() % profile.num_gpus() != 0) {
    throw DimensionError(std::to_string(trace.num_experts()) +
                         " experts cannot be split across " +
                         std::to_string(profile.num_gpus()) + " GPUs");
  }
  const SearchConfig config = make_search_config(flags, ctx.seed());
  const SearchResult result = search(trace, profile, config);
  const json cmp = comparison_block(trace, profile, result.best_score);

  if (!mapping_out.empty()) save_mapping(result.best_mapping, mapping_out);
  json j = search_result_to_json(result);
  j["comparison"] = cmp;
  json inputs = inputs_json(in);
  if (!mapping_out.empty()) inputs["mapping_out"] = mapping_out;
  j["manifest"] = ctx.manifest(inputs, search_config_to_json(config));
  ctx.emit(j);

  ctx.say("linear " + fmt_ms(cmp["linear"].get<double>()) + " ms | eplb " +
          fmt_ms(cmp["eplb"].get<double>()) + " ms | gem " + fmt_ms(result.best_score) +
          " ms (" + fmt_pct(cmp["gem_vs_linear_pct"].get<double>()) + " vs linear, " +
          fmt_pct(cmp["gem_vs_eplb_pct"].get<double>()) + " vs eplb) from " +
          result.provenance.to_string());
}

void cmd_stats(Context& ctx, const Inputs& in) {
  const ExpertTrace trace = load_trace(in.trace);
  const TraceStats stats = compute_stats(trace);
  if (ctx.csv()) {
    std::string csv = "expert,mean_utilization,active_fraction\n";
    for (std::size_t e = 0; e < trace.num_experts(); ++e) {
      csv += std::to_string(e) + "," + json(stats.mean_utilization[e]).dump() + "," +
             json(stats.active_fraction[e]).dump() + "\n";
    }
    ctx.emit(csv);
  } else {
    json j = stats_to_json(stats);
    j["num_experts"] = trace.num_experts();
    j["num_steps"] = trace.num_steps();
    j["manifest"] = ctx.manifest(inputs_json(in), json::object());
    ctx.emit(j);
  }
  ctx.say("trace: " + std::to_string(trace.num_steps()) + " steps x " +
          std::to_string(trace.num_experts()) + " experts");
}

struct ScaleArgs {
  std::string dist = "uniform";
  double lo = kSlowestFactor, hi = kFastestFactor;
  double mean = 1.0, stddev = 0.05;
  double v1 = 1.0, v2 = 0.9, p = 0.5;
  std::string values;
  std::string sizes = "1,2,4,8,16,32,64";
  std::size_t samples = 10000;
  std::string csv_out;
};

void cmd_scale_study(Context& ctx, const ScaleArgs& a) {
  const ThroughputDistribution dist = [&] {
    if (a.dist == "uniform") return ThroughputDistribution::uniform(a.lo, a.hi);
    if (a.dist == "normal") return ThroughputDistribution::normal(a.mean, a.stddev);
    if (a.dist == "two-point") return ThroughputDistribution::two_point(a.v1, a.v2, a.p);
    if (a.dist == "empirical") {
      return ThroughputDistribution::empirical(parse_number_list(a.values));
    }
    throw ValidationError("unknown distribution '" + a.dist + "'");
  }();
  const std::vector<std::size_t> sizes = parse_index_list(a.sizes);
  const ScaleStudyResult result =
      run_study(dist, sizes, a.samples, ctx.seed(), threads_from_env());
  if (!a.csv_out.empty()) detail::write_file(a.csv_out, scale_result_to_csv(result));
  if (ctx.csv()) {
    ctx.emit(scale_result_to_csv(result));
  } else {
    json j = scale_result_to_json(result);
    j["distribution"] = dist.to_json();
    j["manifest"] = ctx.manifest(json::object(), json{{"distribution", dist.to_json()},
                                                      {"samples", a.samples}});
    ctx.emit(j);
  }
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    ctx.say("N=" + std::to_string(sizes[i]) + ": gap " + fmt_pct(100.0 * result.expected_gap[i]));
  }
}

void cmd_multi_layer(Context& ctx, const std::string& trace_dir, const Inputs& in,
                     const SearchFlags& flags) {
  if (ctx.opts().output.empty()) {
    throw ValidationError("multi-layer needs --output DIR");
  }
  std::vector<fs::path> files;
  if (!fs::is_directory(trace_dir)) throw ValidationError(trace_dir + " is not a directory");
  for (const auto& entry : fs::directory_iterator(trace_dir)) {
    const auto ext = entry.path().extension();
    if (entry.is_regular_file() && (ext == ".json" || ext == ".csv")) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ValidationError("no layer traces in " + trace_dir);

  const VariabilityProfile profile = load_profile(in.profile);
  std::vector<ExpertTrace> traces;
  for (const fs::path& f : files) {
    ExpertTrace t = load_trace(f);
    if (t.num_experts() % profile.num_gpus() != 0) {
      throw DimensionError("layer " + f.filename().string() + ": " +
                           std::to_string(t.num_experts()) +
                           " experts cannot be split across " +
                           std::to_string(profile.num_gpus()) + " GPUs");
    }
    traces.push_back(std::move(t));
  }

  const SearchConfig config = make_search_config(flags, ctx.seed());
  std::vector<SearchResult> results;
  for (const ExpertTrace& t : traces) results.push_back(search(t, profile, config));

  const fs::path out_dir = ctx.opts().output;
  fs::create_directories(out_dir);
  json layers = json::array();
  Millis aggregate = 0.0, linear_total = 0.0, eplb_total = 0.0;
  for (std::size_t i = 0; i < files.size(); ++i) {
    const std::string name = files[i].stem().string() + ".mapping.json";
    save_mapping(results[i].best_mapping, out_dir / name);
    const json cmp = comparison_block(traces[i], profile, results[i].best_score);
    aggregate += results[i].best_score;
    linear_total += cmp["linear"].get<double>();
    eplb_total += cmp["eplb"].get<double>();
    layers.push_back({{"layer", files[i].filename().string()},
                      {"mapping_file", name},
                      {"best_score", results[i].best_score},
                      {"provenance", results[i].provenance.to_string()},
                      {"comparison", cmp}});
  }
  json inputs = inputs_json(in);
  inputs["trace_dir"] = trace_dir;
  json report = {{"layers", layers},
                 {"aggregate_score", aggregate},
                 {"aggregate_linear", linear_total},
                 {"aggregate_eplb", eplb_total},
                 {"gem_vs_linear_pct", reduction_pct(linear_total, aggregate)},
                 {"gem_vs_eplb_pct", reduction_pct(eplb_total, aggregate)},
                 {"manifest", ctx.manifest(inputs, search_config_to_json(config))}};
  detail::write_file(out_dir / "report.json", report.dump(2) + "\n");
  ctx.say(std::to_string(files.size()) + " layers, aggregate " + fmt_ms(aggregate) +
          " ms (" + fmt_pct(reduction_pct(linear_total, aggregate)) + " vs linear)");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Variability-aware expert-to-GPU mapping: search, replay and compare", "expertmap"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions opts;
  app.add_option("--seed", opts.seed, "RNG seed (chosen and printed when omitted)");
  app.add_option("-o,--output", opts.output, "Output file (directory for multi-layer)");
  app.add_option("--format", opts.format, "Machine-readable output format")
      ->check(CLI::IsMember({"json", "csv"}));
  app.add_flag("-v,--verbose", opts.verbose, "Include per-step detail in reports");
  app.add_flag("-q,--quiet", opts.quiet, "Suppress the human-readable summary");
  app.add_flag("--timing", opts.timing, "Record wall-clock duration in the manifest");

  Inputs in;
  auto add_trace = [&](CLI::App* c, bool required) {
    auto* o = c->add_option("--trace", in.trace, "Trace file (.json or .csv)")
                  ->check(CLI::ExistingFile);
    if (required) o->required();
  };
  auto add_profile = [&](CLI::App* c, bool required) {
    auto* o = c->add_option("--profile", in.profile, "Variability profile JSON")
                  ->check(CLI::ExistingFile);
    if (required) o->required();
  };

  GenTraceArgs gt;
  auto* gen_trace = app.add_subcommand("gen-trace", "Generate a synthetic expert trace");
  gen_trace->add_option("--spec", gt.spec_file, "Trace spec JSON")->check(CLI::ExistingFile);
  gen_trace->add_option("--experts", gt.experts)->check(CLI::PositiveNumber);
  gen_trace->add_option("--steps", gt.steps, "Trace window length")->check(CLI::PositiveNumber);
  gen_trace->add_option("--tokens-per-step", gt.tokens_per_step)->check(CLI::PositiveNumber);
  gen_trace->add_option("--consistent", gt.consistent, "Consistent experts, e.g. 2,5,15");
  gen_trace->add_option("--p-consistent", gt.p_consistent);
  gen_trace->add_option("--temporal", gt.temporal, "Temporal groups, e.g. '0,3;10'");
  gen_trace->add_option("--p-burst", gt.p_burst);
  gen_trace->add_option("--multiplier", gt.multiplier);

  GenProfileArgs gp;
  auto* gen_profile = app.add_subcommand("gen-profile", "Generate a synthetic variability profile");
  gen_profile->add_option("--gpus", gp.gpus)->check(CLI::PositiveNumber);
  gen_profile->add_option("--setup", gp.setup)
      ->check(CLI::IsMember({"low", "moderate", "high", "explicit"}));
  gen_profile->add_option("--factors", gp.factors, "Per-GPU speed factors, e.g. 0.88,1,1,1");
  gen_profile->add_option("--base-latency", gp.base_latency, "ms per tile at factor 1.0");
  gen_profile->add_option("--overhead", gp.overhead, "Fixed ms per step");
  gen_profile->add_option("--tile", gp.tile)->check(CLI::PositiveNumber);
  gen_profile->add_option("--max-tokens", gp.max_tokens)->check(CLI::PositiveNumber);
  gen_profile->add_option("--dense-tiles", gp.dense_tiles)->check(CLI::PositiveNumber);
  gen_profile->add_option("--sparse-stride", gp.sparse_stride)->check(CLI::PositiveNumber);

  auto* score = app.add_subcommand("score", "Score a mapping");
  auto* replay_cmd = app.add_subcommand("replay", "Replay a trace under a mapping");
  for (CLI::App* c : {score, replay_cmd}) {
    add_trace(c, true);
    add_profile(c, true);
    c->add_option("--mapping", in.mapping)->required()->check(CLI::ExistingFile);
  }

  std::vector<std::string> compare_mappings;
  auto* compare = app.add_subcommand("compare", "Replay several mappings; first is the reference");
  add_trace(compare, true);
  add_profile(compare, true);
  compare->add_option("--mapping", compare_mappings, "Mapping files (repeatable)")
      ->required()
      ->check(CLI::ExistingFile);

  std::string policy;
  std::size_t base_experts = 0, base_gpus = 0;
  auto* baseline = app.add_subcommand("baseline", "Emit a baseline mapping");
  baseline->add_option("policy", policy)->required()->check(CLI::IsMember({"linear", "eplb"}));
  add_trace(baseline, false);
  add_profile(baseline, false);
  baseline->add_option("--experts", base_experts);
  baseline->add_option("--gpus", base_gpus);

  SearchFlags sf;
  std::string mapping_out;
  auto* optimize = app.add_subcommand("optimize", "Search a variability-aware mapping");
  add_trace(optimize, true);
  add_profile(optimize, true);
  add_search_flags(optimize, sf);
  optimize->add_option("--mapping-out", mapping_out, "Also write the best mapping here");

  auto* stats = app.add_subcommand("stats", "Trace statistics and correlation matrix");
  add_trace(stats, true);

  ScaleArgs sa;
  auto* scale = app.add_subcommand("scale-study", "Monte-Carlo slowest-to-fastest gap vs. N");
  scale->add_option("--dist", sa.dist)
      ->check(CLI::IsMember({"uniform", "normal", "two-point", "empirical"}));
  scale->add_option("--lo", sa.lo);
  scale->add_option("--hi", sa.hi);
  scale->add_option("--mean", sa.mean);
  scale->add_option("--stddev", sa.stddev);
  scale->add_option("--v1", sa.v1);
  scale->add_option("--v2", sa.v2);
  scale->add_option("--p", sa.p);
  scale->add_option("--values", sa.values, "Empirical throughputs, comma separated");
  scale->add_option("--sizes", sa.sizes, "Deployment sizes, comma separated");
  scale->add_option("--samples", sa.samples)->check(CLI::PositiveNumber);
  scale->add_option("--csv-out", sa.csv_out, "Also write n,expected_gap CSV here");

  std::string trace_dir;
  auto* multi = app.add_subcommand("multi-layer", "Search one mapping per layer trace");
  multi->add_option("--trace-dir", trace_dir)->required();
  add_profile(multi, true);
  add_search_flags(multi, sf);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  CLI::App* chosen = app.get_subcommands().front();
  Context ctx(chosen->get_name(), opts, out, err);
  try {
    if (chosen == gen_trace) cmd_gen_trace(ctx, gt);
    else if (chosen == gen_profile) cmd_gen_profile(ctx, gp);
    else if (chosen == score) cmd_score(ctx, in);
    else if (chosen == replay_cmd) cmd_replay(ctx, in);
    else if (chosen == compare) cmd_compare(ctx, in, compare_mappings);
    else if (chosen == baseline) cmd_baseline(ctx, policy, in, base_experts, base_gpus);
    else if (chosen == optimize) cmd_optimize(ctx, in, sf, mapping_out);
    else if (chosen == stats) cmd_stats(ctx, in);
    else if (chosen == scale) cmd_scale_study(ctx, sa);
    else if (chosen == multi) cmd_multi_layer(ctx, trace_dir, in, sf);
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const DimensionError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const GenerationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace expertmap
