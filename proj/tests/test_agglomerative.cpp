#include <gtest/gtest.h>

#include "helpers.hpp"
#include "jule/agglomerative.hpp"
#include "jule/dataset.hpp"
#include "jule/metrics.hpp"

using namespace jule;
using testing_support::members_of;
using testing_support::to_matrix;

namespace {

// Square W from explicit rows; each row must hold the same number of nonzeros.
SampleAffinityGraph graph_from_dense(const oracle::Dense& w, std::size_t k) {
  std::vector<SampleId> ids;
  std::vector<double> weights;
  for (std::size_t i = 0; i < w.size(); ++i) {
    std::vector<std::pair<double, SampleId>> row;
    for (std::size_t j = 0; j < w.size(); ++j)
      if (w[i][j] > 0.0) row.push_back({-w[i][j], static_cast<SampleId>(j)});
    std::sort(row.begin(), row.end());
    EXPECT_EQ(row.size(), k);
    for (const auto& [nw, j] : row) {
      ids.push_back(j);
      weights.push_back(-nw);
    }
  }
  return SampleAffinityGraph::from_lists(w.size(), k, std::move(ids), std::move(weights));
}

Partition singletons(std::size_t n) {
  std::vector<ClusterId> a(n);
  std::iota(a.begin(), a.end(), 0);
  return Partition(a);
}

}  // namespace

TEST(Init, MutualPairs) {
  const Matrix x(4, 1, std::vector<double>{0, 1, 10, 11});
  const auto p = init_clusters(sample_affinity(x, 1, 1.0));
  EXPECT_EQ(p.live_count(), 2u);
  EXPECT_EQ(p.dense_labels(), (std::vector<int>{0, 0, 1, 1}));
}

TEST(Init, ChainJoinsIntoOneComponent) {
  // 0 -> 1, 1 -> 2 (closer), 2 -> 1, 3 -> 2
  const Matrix x(4, 1, std::vector<double>{0, 3, 5, 8});
  const auto p = init_clusters(sample_affinity(x, 1, 1.0));
  EXPECT_EQ(p.live_count(), 1u);
}

TEST(Init, SingleSample) {
  const auto g = SampleAffinityGraph::from_lists(1, 0, {}, {});
  const auto p = init_clusters(g);
  EXPECT_EQ(p.live_count(), 1u);
}

TEST(Init, MatchesOracleOnRandomData) {
  for (std::uint32_t seed = 0; seed < 10; ++seed) {
    const auto pts = oracle::random_points(60, 3, seed);
    const auto dense = oracle::affinity_matrix(pts, 4, 1.0);
    const auto p = init_clusters(sample_affinity(to_matrix(pts), 4, 1.0));
    auto got = members_of(p);
    got.erase(std::remove_if(got.begin(), got.end(), [](const auto& m) { return m.empty(); }), got.end());
    std::sort(got.begin(), got.end());
    auto want = oracle::first_neighbor_components(dense);
    std::sort(want.begin(), want.end());
    EXPECT_EQ(got, want);
  }
}

TEST(MergeLoss, WorkedExamples) {
  // c=0 with neighbors at affinities 0.6, 0.4, 0.2 (kc=3, lambda=1):
  //   -0.6 - 1/2 * ((0.6-0.4) + (0.6-0.2)) = -0.9
  // Built from singleton affinities 2*w*w'.
  const double a1 = 0.6, a2 = 0.4, a3 = 0.2;
  oracle::Dense w(4, std::vector<double>(4, 0.0));
  const double r1 = std::sqrt(a1 / 2), r2 = std::sqrt(a2 / 2), r3 = std::sqrt(a3 / 2);
  w[0][1] = w[1][0] = r1;
  w[0][2] = w[2][0] = r2;
  w[0][3] = w[3][0] = r3;
  // pad rows 1..3 so every row holds three nonzeros; tiny weights between 1, 2, 3
  const double eps = 1e-6;
  for (int i = 1; i <= 3; ++i)
    for (int j = 1; j <= 3; ++j)
      if (i != j) w[i][j] = eps;
  const auto g = graph_from_dense(w, 3);
  const ClusterAffinityCache cache(g, singletons(4));
  EXPECT_NEAR(merge_loss(cache, 0, 3, 1.0), -0.9, 1e-9);
  EXPECT_NEAR(merge_loss(cache, 0, 3, 0.0), -0.6, 1e-9);
  EXPECT_NEAR(merge_loss(cache, 0, 1, 1.0), -0.6, 1e-9);
  // kc=2: -0.6 - (0.6 - 0.4) = -0.8
  EXPECT_NEAR(merge_loss(cache, 0, 2, 1.0), -0.8, 1e-9);
  // lambda=0.5, kc=3: -0.6 - 0.25*0.6 = -0.75
  EXPECT_NEAR(merge_loss(cache, 0, 3, 0.5), -0.75, 1e-9);
}

TEST(MergeLoss, PaddingWithZeroAffinityClusters) {
  // four points where 0 and 1 only see each other; neighbors of 0 beyond 1 have zero affinity
  const Matrix x(4, 1, std::vector<double>{0, 1, 100, 101});
  const auto g = sample_affinity(x, 1, 1.0);
  const ClusterAffinityCache cache(g, singletons(4));
  const double a1 = cache.affinity(0, 1);
  // kc=3: -a1 - 1/2 * (a1 + a1)
  EXPECT_NEAR(merge_loss(cache, 0, 3, 1.0), -2.0 * a1, 1e-12);
  EXPECT_EQ(neighbor_clusters(cache, 0, 3), (std::vector<ClusterId>{1, 2, 3}));
  EXPECT_EQ(neighbor_clusters(cache, 0, 10).size(), 3u);
}

TEST(NeighborClusters, TiesByLowerId) {
  const Matrix x(3, 1, std::vector<double>{0, -1, 1});
  const auto g = sample_affinity(x, 2, 1.0);
  const ClusterAffinityCache cache(g, singletons(3));
  EXPECT_EQ(neighbor_clusters(cache, 0, 2), (std::vector<ClusterId>{1, 2}));
}

TEST(MergeLoss, NoNeighborThrows) {
  const Matrix x(2, 1, std::vector<double>{0, 1});
  const auto g = sample_affinity(x, 1, 1.0);
  auto part = singletons(2);
  ClusterAffinityCache cache(g, part);
  part.absorb(0, 1);
  cache.merge(g, part, 0, 1);
  EXPECT_THROW(merge_loss(cache, 0, 5, 1.0), LogicError);
  EXPECT_THROW(select_merge(cache, 5, 1.0), LogicError);
}

TEST(Engine, EveryStepMatchesBruteForceOracle) {
  for (std::uint32_t seed = 0; seed < 6; ++seed)
    for (double lambda : {0.0, 1.0, 2.5}) {
      const auto pts = oracle::random_points(36, 2, 40 + seed);
      const auto dense = oracle::affinity_matrix(pts, 5, 1.0);
      const auto g = sample_affinity(to_matrix(pts), 5, 1.0);
      const auto part = singletons(36);
      oracle::Members members = members_of(part);
      AgglomerativeEngine engine(g, part, AffinityMode::exact(), 4, lambda);
      while (engine.partition().live_count() > 1) {
        std::vector<double> losses;
        const auto want = oracle::select(dense, members, 4, lambda, &losses);
        const auto got = engine.select();
        ASSERT_NEAR(got.loss, want.loss, 1e-9);
        // near-ties may resolve either way at 1e-12 noise; compare ids only when unambiguous
        std::vector<double> sorted;
        for (double l : losses)
          if (!std::isnan(l)) sorted.push_back(l);
        std::sort(sorted.begin(), sorted.end());
        if (sorted.size() < 2 || sorted[1] - sorted[0] > 1e-9) {
          ASSERT_EQ(got.winner, want.winner);
          ASSERT_EQ(got.neighbor, want.neighbor);
        }
        const auto step = engine.step();
        oracle::merge(members, step.winner, step.neighbor);
        ASSERT_EQ(members_of(engine.partition()), members);
      }
    }
}

TEST(Engine, LambdaZeroPicksTheMostAffinePair) {
  for (std::uint32_t seed = 0; seed < 5; ++seed) {
    const auto pts = oracle::random_points(30, 3, 90 + seed);
    const auto dense = oracle::affinity_matrix(pts, 5, 1.0);
    const auto g = sample_affinity(to_matrix(pts), 5, 1.0);
    oracle::Members members = members_of(singletons(30));
    AgglomerativeEngine engine(g, singletons(30), AffinityMode::exact(), 5, 0.0);
    for (int t = 0; t < 20; ++t) {
      const auto [a, b] = oracle::argmax_pair(dense, members);
      const auto step = engine.step();
      ASSERT_EQ(std::min(step.winner, step.neighbor), a);
      ASSERT_EQ(std::max(step.winner, step.neighbor), b);
      oracle::merge(members, a, b);
    }
  }
}

TEST(Engine, SelectionMatchesSelectMergeAndSurvivesRebind) {
  const auto pts = oracle::random_points(50, 2, 3);
  const auto g = sample_affinity(to_matrix(pts), 6, 1.0);
  AgglomerativeEngine engine(g, init_clusters(g), AffinityMode::with_alpha(0.1), 5, 1.0);
  for (int t = 0; t < 5; ++t) {
    const auto a = engine.select();
    const auto b = select_merge(engine.cache(), 5, 1.0);
    EXPECT_EQ(a.winner, b.winner);
    EXPECT_EQ(a.neighbor, b.neighbor);
    EXPECT_DOUBLE_EQ(a.loss, b.loss);
    engine.step();
  }
  auto moved = to_matrix(pts);
  for (double& v : moved.data()) v = v * v;
  const auto g2 = sample_affinity(moved, 6, 1.0);
  engine.rebind(g2);
  const ClusterAffinityCache fresh(g2, engine.partition(), AffinityMode::with_alpha(0.1));
  for (ClusterId a : engine.partition().live_ids())
    for (ClusterId b : engine.partition().live_ids())
      if (a != b) EXPECT_NEAR(engine.cache().directed(a, b), fresh.directed(a, b), 1e-12);
  const auto s = engine.select();
  const auto r = select_merge(fresh, 5, 1.0);
  EXPECT_EQ(s.winner, r.winner);
  EXPECT_EQ(engine.timestep(), 5u);
}

// A clique of four samples whose best pair (0,1) is the most affine pair overall, next
// to an isolated pair (4,5). Pure greedy merging takes (0,1); with the local-structure
// term the isolated pair goes first, since its only neighbor stands out from the rest.
TEST(Engine, IsolatedPairBeforeCrowdedBestPair) {
  oracle::Dense w(6, std::vector<double>(6, 0.0));
  const double clique = 0.6, best = 0.7, pair = 0.65, weak = 0.01;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      if (i != j) w[i][j] = clique;
  w[0][1] = w[1][0] = best;
  w[4][5] = w[5][4] = pair;
  w[4][0] = w[4][1] = weak;
  w[5][2] = w[5][3] = weak;
  const auto g = graph_from_dense(w, 3);
  const ClusterAffinityCache cache(g, singletons(6));
  EXPECT_GT(cache.affinity(0, 1), cache.affinity(4, 5));
  const auto greedy = select_merge(cache, 3, 0.0);
  EXPECT_EQ(greedy.winner, 0u);
  EXPECT_EQ(greedy.neighbor, 1u);
  const auto local = select_merge(cache, 3, 1.0);
  EXPECT_EQ(local.winner, 4u);
  EXPECT_EQ(local.neighbor, 5u);
  // by hand: -2*0.65^2 * 2 against -0.98 - (0.98 - 0.72)
  EXPECT_NEAR(local.loss, -4.0 * pair * pair, 1e-12);
  EXPECT_NEAR(merge_loss(cache, 0, 3, 1.0), -0.98 - 0.26, 1e-12);
}

TEST(ApplyMerge, LowerIdSurvives) {
  const auto g = sample_affinity(to_matrix(oracle::random_points(8, 2, 1)), 3, 1.0);
  auto part = singletons(8);
  ClusterAffinityCache cache(g, part);
  const auto step = apply_merge(part, cache, g, 5, 2, -0.5, 7);
  EXPECT_EQ(step.winner, 5u);
  EXPECT_EQ(step.neighbor, 2u);
  EXPECT_EQ(step.t, 7u);
  EXPECT_EQ(step.n_clusters, 7u);
  EXPECT_TRUE(part.is_live(2));
  EXPECT_FALSE(part.is_live(5));
  EXPECT_EQ(part.cluster_of(5), 2u);
  EXPECT_THROW(apply_merge(part, cache, g, 5, 1), LogicError);
  EXPECT_THROW(apply_merge(part, cache, g, 1, 1), LogicError);
  part.check_invariants();
}

TEST(RunAgglomerative, SeparatedBlobsRecovered) {
  BlobsSpec spec;
  spec.n_per = 50;
  spec.k = 4;
  spec.dim = 5;
  spec.spread = 0.5;
  spec.seed = 11;
  const auto ds = make_blobs(spec);
  AgglomerativeOptions opt;
  opt.target_nc = 4;
  opt.ks = 10;
  const auto r = run_agglomerative(ds.features, opt);
  EXPECT_EQ(r.partition.live_count(), 4u);
  EXPECT_NEAR(nmi(r.partition.dense_labels(), *ds.labels), 1.0, 1e-12);
  EXPECT_EQ(r.steps.size(), r.initial_clusters - 4);
  for (std::size_t t = 0; t < r.steps.size(); ++t) EXPECT_EQ(r.steps[t].n_clusters, r.initial_clusters - t - 1);
}

TEST(RunAgglomerative, TargetEqualToInitialMakesNoMerges) {
  const auto x = to_matrix(oracle::random_points(40, 2, 2));
  AgglomerativeOptions opt;
  opt.ks = 5;
  const auto initial = init_clusters(sample_affinity(x, 5, 1.0)).live_count();
  opt.target_nc = initial;
  const auto r = run_agglomerative(x, opt);
  EXPECT_TRUE(r.steps.empty());
  EXPECT_EQ(r.partition.live_count(), initial);
  opt.target_nc = initial + 1;
  EXPECT_THROW(run_agglomerative(x, opt), ConfigError);
  opt.target_nc = 0;
  EXPECT_THROW(run_agglomerative(x, opt), ConfigError);
}

TEST(RunAgglomerative, ApproximateModesStillReachTarget) {
  const auto x = to_matrix(oracle::random_points(80, 3, 6));
  for (const auto mode : {AffinityMode::size_weighted(), AffinityMode::with_alpha(-0.2), AffinityMode::with_alpha(0.5)}) {
    AgglomerativeOptions opt;
    opt.ks = 6;
    opt.target_nc = 3;
    opt.mode = mode;
    const auto r = run_agglomerative(x, opt);
    EXPECT_EQ(r.partition.live_count(), 3u);
    r.partition.check_invariants();
  }
}
