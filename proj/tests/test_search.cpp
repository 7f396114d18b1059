// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The expertmap Authors. All Rights Reserved.

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "expertmap/baselines.hpp"
#include "expertmap/error.hpp"
#include "expertmap/search.hpp"
#include "support.hpp"

namespace expertmap {
namespace {

// C(n) = n on every GPU.
VariabilityProfile identity_profile(std::size_t gpus, TokenCount max_tokens = 64) {
  std::vector<CostSample> samples;
  for (TokenCount n = 1; n <= max_tokens; ++n) samples.push_back({n, static_cast<double>(n)});
  std::vector<CostCurve> curves(gpus, CostCurve(samples, 1, max_tokens));
  return VariabilityProfile(std::move(curves), "identity");
}

SearchConfig quick_config(std::uint64_t seed = 1) {
  SearchConfig c;
  c.restarts = 10;
  c.rng_seed = seed;
  return c;
}

TEST(InitialMapping, HeaviestFirstOntoLeastCostlyGpu) {
  const ExpertTrace trace = ExpertTrace::from_rows({{4, 3, 2, 1}});
  const VariabilityProfile profile = identity_profile(2);
  const ExpertMapping m = initial_mapping(compute_stats(trace), 0, trace, profile, quick_config());
  EXPECT_EQ(aggregate_gpu_tokens(trace, m), (std::vector<TokenCount>{5, 5}));
  EXPECT_EQ(m.assignment(), (std::vector<std::size_t>{0, 1, 1, 0}));
}

TEST(InitialMapping, UniformTraceSpreadsEvenly) {
  const ExpertTrace trace = ExpertTrace::from_rows({{5, 5, 5, 5, 5, 5, 5, 5}});
  const VariabilityProfile profile = identity_profile(4);
  const ExpertMapping m = initial_mapping(compute_stats(trace), 0, trace, profile, quick_config());
  EXPECT_EQ(aggregate_gpu_tokens(trace, m), (std::vector<TokenCount>(4, 10)));
}

TEST(InitialMapping, DeterministicPerRestart) {
  std::mt19937_64 rng(3);
  const ExpertTrace trace = testing::random_trace(rng, 16, 8);
  const VariabilityProfile profile = testing::random_staircase_profile(rng, 4, 16, 6400);
  const TraceStats stats = compute_stats(trace);
  for (std::size_t r = 0; r < 5; ++r) {
    EXPECT_EQ(initial_mapping(stats, r, trace, profile, quick_config()),
              initial_mapping(stats, r, trace, profile, quick_config()));
  }
  SearchConfig no_noise = quick_config();
  no_noise.noise_fraction = 0.0;
  EXPECT_EQ(initial_mapping(stats, 3, trace, profile, no_noise),
            initial_mapping(stats, 0, trace, profile, no_noise));
}

TEST(InitialMapping, NonDivisibleIsRejected) {
  const ExpertTrace trace = ExpertTrace::from_rows({{1, 2, 3}});
  EXPECT_THROW(initial_mapping(compute_stats(trace), 0, trace, identity_profile(2), quick_config()),
               ValidationError);
  EXPECT_THROW(search(trace, identity_profile(2), quick_config()), ValidationError);
}

TEST(RestartRng, SeedXorIndex) {
  std::mt19937_64 a = restart_rng(10, 3);
  std::mt19937_64 b(10 ^ 3);
  EXPECT_EQ(a(), b());
  for (int i = 0; i < 1000; ++i) {
    const double u = symmetric_unit(a);
    ASSERT_GE(u, -1.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(Refine, OptimalInputIsUntouched) {
  const ExpertTrace trace = ExpertTrace::from_rows({{4, 3, 2, 1}});
  const RefineResult r =
      refine(ExpertMapping(2, {0, 1, 1, 0}), trace, identity_profile(2), quick_config());
  EXPECT_EQ(r.swap_count, 0u);
  EXPECT_EQ(r.mapping.assignment(), (std::vector<std::size_t>{0, 1, 1, 0}));
  EXPECT_EQ(r.trajectory, (std::vector<double>{5.0}));
}

TEST(Refine, BruteForcedOptimumIsUntouched) {
  std::mt19937_64 rng(606);
  for (int i = 0; i < 20; ++i) {
    const ExpertTrace trace = testing::random_trace(rng, 6, 8);
    const VariabilityProfile profile = testing::random_staircase_profile(rng, 2, 16, 2400);
    const testing::BruteForceOptimum best = testing::brute_force_optimum(trace, profile);
    const RefineResult r =
        refine(ExpertMapping(2, best.assignment), trace, profile, quick_config());
    EXPECT_EQ(r.swap_count, 0u);
    EXPECT_EQ(r.mapping.assignment(), best.assignment);
  }
}

TEST(Search, UniformTraceOnIdenticalGpus) {
  const ExpertTrace trace = ExpertTrace::from_rows({{7, 7, 7, 7, 7, 7}});
  SearchConfig c = quick_config();
  c.restarts = 1;
  const SearchResult r = search(trace, identity_profile(3), c);
  EXPECT_EQ(r.best_score, 14.0);
}

TEST(Refine, SingleSwapBalances) {
  const ExpertTrace trace = ExpertTrace::from_rows({{4, 3, 1, 2}});
  const VariabilityProfile profile = identity_profile(2);
  const RefineResult r = refine(ExpertMapping(2, {0, 0, 1, 1}), trace, profile, quick_config());
  EXPECT_EQ(r.swap_count, 1u);
  EXPECT_EQ(r.trajectory, (std::vector<double>{7.0, 5.0}));
  EXPECT_EQ(aggregate_gpu_tokens(trace, r.mapping), (std::vector<TokenCount>{5, 5}));
}

TEST(Refine, RespectsSwapCap) {
  std::mt19937_64 rng(12);
  const ExpertTrace trace = testing::random_trace(rng, 16, 8);
  const VariabilityProfile profile = testing::random_staircase_profile(rng, 4, 16, 6400);
  SearchConfig c = quick_config();
  c.max_swaps_per_restart = 1;
  c.convergence_threshold = 1e-12;
  const RefineResult r = refine(linear_mapping(16, 4), trace, profile, c);
  EXPECT_LE(r.swap_count, 1u);
}

TEST(Search, MatchesBruteForceOnSmallInstances) {
  std::mt19937_64 rng(21);
  int exact = 0;
  for (int i = 0; i < 20; ++i) {
    const ExpertTrace trace = testing::random_trace(rng, 8, 16);
    const VariabilityProfile profile = testing::random_staircase_profile(rng, 2, 16, 3200);
    const testing::BruteForceOptimum best = testing::brute_force_optimum(trace, profile);
    ASSERT_EQ(best.mappings_seen, 70u);
    const SearchResult r = search(trace, profile, quick_config(i));
    EXPECT_GE(r.best_score, best.score - 1e-9);
    EXPECT_LE(r.best_score, best.score * 1.02);
    if (r.best_score <= best.score + 1e-9) ++exact;
  }
  EXPECT_GE(exact, 18);
}

TEST(Search, DominatesBaselinesAndTracksProvenance) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 10; ++i) {
    const ExpertTrace trace = testing::random_trace(rng, 16, 8, 500);
    const VariabilityProfile profile = testing::random_staircase_profile(rng, 4, 16, 8000);
    const SearchResult r = search(trace, profile, quick_config(i));
    EXPECT_LE(r.best_score, score_mapping(trace, profile, linear_mapping(16, 4)));
    EXPECT_LE(r.best_score, score_mapping(trace, profile, eplb_mapping(trace, 4)));
    EXPECT_EQ(r.best_score, score_mapping(trace, profile, r.best_mapping));
    ASSERT_EQ(r.per_restart.size(), 12u);
    EXPECT_EQ(r.per_restart[10].provenance.kind, Provenance::Kind::kBaselineLinear);
    EXPECT_EQ(r.per_restart[11].provenance.kind, Provenance::Kind::kBaselineEplb);
    double lowest = r.per_restart[0].final_score;
    for (const RestartOutcome& o : r.per_restart) lowest = std::min(lowest, o.final_score);
    EXPECT_EQ(r.best_score, lowest);
  }
}

TEST(Search, TrajectoriesAreMonotoneAndCapped) {
  std::mt19937_64 rng(8);
  const ExpertTrace trace = testing::random_trace(rng, 32, 16, 400);
  const VariabilityProfile profile = testing::random_staircase_profile(rng, 4, 16, 12800);
  const SearchResult r = search(trace, profile, quick_config());
  for (const RestartOutcome& o : r.per_restart) {
    EXPECT_LE(o.swap_count, 320u);
    ASSERT_EQ(o.trajectory.size(), o.swap_count + 1);
    EXPECT_EQ(o.trajectory.front(), o.initial_score);
    EXPECT_EQ(o.trajectory.back(), o.final_score);
    for (std::size_t k = 1; k < o.trajectory.size(); ++k) {
      EXPECT_LT(o.trajectory[k], o.trajectory[k - 1]);
    }
  }
  for (const auto& group : r.best_mapping.experts_by_gpu()) EXPECT_EQ(group.size(), 8u);
}

TEST(Search, ThreadCountDoesNotChangeResult) {
  std::mt19937_64 rng(99);
  const ExpertTrace trace = testing::random_trace(rng, 32, 16, 400);
  const VariabilityProfile profile = testing::random_staircase_profile(rng, 4, 16, 12800);
  SearchConfig serial = quick_config(42);
  SearchConfig threaded = serial;
  threaded.threads = 4;
  const SearchResult a = search(trace, profile, serial);
  const SearchResult b = search(trace, profile, threaded);
  EXPECT_EQ(a.best_mapping, b.best_mapping);
  EXPECT_EQ(a.best_score, b.best_score);
  EXPECT_EQ(a.provenance, b.provenance);
  EXPECT_EQ(search_result_to_json(a).dump(), search_result_to_json(b).dump());
}

TEST(Search, InvalidConfig) {
  const ExpertTrace trace = testing::worked_example_trace();
  const VariabilityProfile profile = testing::worked_example_profile();
  SearchConfig c;
  c.restarts = 0;
  c.seed_with_baselines = false;
  EXPECT_THROW(search(trace, profile, c), ValidationError);
  c = SearchConfig{};
  c.noise_fraction = -0.1;
  EXPECT_THROW(search(trace, profile, c), ValidationError);
  c = SearchConfig{};
  c.convergence_threshold = -1.0;
  EXPECT_THROW(search(trace, profile, c), ValidationError);
}

TEST(Search, WorkedExampleImprovesOnGivenMapping) {
  const SearchResult r =
      search(testing::worked_example_trace(), testing::worked_example_profile(), quick_config());
  EXPECT_LE(r.best_score, 13.0);
  EXPECT_EQ(r.best_score, testing::brute_force_optimum(testing::worked_example_trace(),
                                                       testing::worked_example_profile())
                              .score);
}

TEST(IncrementalScorer, BitExactAgainstFullScore) {
  std::mt19937_64 rng(1234);
  for (int i = 0; i < 100; ++i) {
    const std::size_t gpus = 2 + rng() % 3;
    const std::size_t experts = gpus * (2 + rng() % 4);
    const ExpertTrace trace = testing::random_trace(rng, experts, 1 + rng() % 16, 300);
    VariabilityProfile profile = testing::random_staircase_profile(rng, gpus, 16, 1600);
    std::vector<std::size_t> a(experts);
    for (std::size_t e = 0; e < experts; ++e) a[e] = e % gpus;
    std::shuffle(a.begin(), a.end(), rng);
    ExpertMapping mapping(gpus, a);
    IncrementalScorer scorer(trace, profile, mapping);
    ASSERT_EQ(scorer.score(), score_mapping(trace, profile, mapping));
    for (int k = 0; k < 10; ++k) {
      const std::size_t x = rng() % experts;
      const std::size_t y = rng() % experts;
      const ExpertMapping next = mapping.swapped(x, y);
      ASSERT_EQ(scorer.score_if_swapped(x, y), score_mapping(trace, profile, next));
      scorer.swap(x, y);
      mapping = next;
      ASSERT_EQ(scorer.score(), score_mapping(trace, profile, mapping));
      ASSERT_EQ(scorer.assignment(), mapping.assignment());
    }
  }
}

TEST(IncrementalScorer, PartialPlacementEndsAtFullScore) {
  std::mt19937_64 rng(55);
  const ExpertTrace trace = testing::random_trace(rng, 8, 10);
  const VariabilityProfile profile = testing::random_staircase_profile(rng, 2, 16, 3200);
  IncrementalScorer scorer(trace, profile);
  EXPECT_EQ(scorer.score(), 0.0);
  const std::vector<std::size_t> a = {1, 0, 0, 1, 1, 0, 1, 0};
  for (std::size_t e = 0; e < 8; ++e) {
    EXPECT_EQ(scorer.gpu_of(e), IncrementalScorer::kUnplaced);
    const double predicted = scorer.score_if_placed(e, a[e]);
    scorer.place(e, a[e]);
    EXPECT_EQ(scorer.score(), predicted);
  }
  EXPECT_EQ(scorer.score(), score_mapping(trace, profile, ExpertMapping(2, a)));
}

}  // namespace
}  // namespace expertmap
