#include <gtest/gtest.h>

#include "helpers.hpp"
#include "jule/cluster_affinity.hpp"

using namespace jule;
using testing_support::members_of;
using testing_support::to_matrix;

namespace {

using Ids = std::vector<SampleId>;

// Six points in two loose groups; Ks=3 gives a connected, asymmetric W.
oracle::Points six_points() { return {{0, 0}, {0.5, 0.1}, {0.2, 0.7}, {2, 2}, {2.4, 1.9}, {1.1, 1.2}}; }

}  // namespace

TEST(DirectedAffinity, SingletonsMultiplyWeights) {
  const auto g = sample_affinity(to_matrix(six_points()), 3, 1.0);
  for (SampleId i = 0; i < 6; ++i)
    for (SampleId j = 0; j < 6; ++j) {
      if (i == j) continue;
      EXPECT_NEAR(directed_affinity(g, Ids{i}, Ids{j}), g.weight(i, j) * g.weight(j, i), 1e-15);
      EXPECT_NEAR(affinity(g, Ids{i}, Ids{j}), 2.0 * g.weight(i, j) * g.weight(j, i), 1e-15);
    }
}

TEST(DirectedAffinity, DisconnectedIsZero) {
  const Matrix x(4, 1, std::vector<double>{0, 1, 100, 101});
  const auto g = sample_affinity(x, 1, 1.0);
  EXPECT_EQ(directed_affinity(g, Ids{0, 1}, Ids{2, 3}), 0.0);
  EXPECT_EQ(affinity(g, Ids{2, 3}, Ids{0, 1}), 0.0);
}

TEST(DirectedAffinity, TwoByTwoMatchesDenseOracle) {
  const auto p = six_points();
  const auto dense = oracle::affinity_matrix(p, 3, 1.0);
  const auto g = sample_affinity(to_matrix(p), 3, 1.0);
  const Ids ci = {0, 5}, cj = {2, 3};
  EXPECT_NEAR(directed_affinity(g, ci, cj), oracle::directed(dense, {0, 5}, {2, 3}), 1e-12);
  EXPECT_NEAR(directed_affinity(g, cj, ci), oracle::directed(dense, {2, 3}, {0, 5}), 1e-12);
}

TEST(DirectedAffinity, RandomClustersMatchDenseOracle) {
  for (std::uint32_t seed = 0; seed < 10; ++seed) {
    const auto p = oracle::random_points(30, 3, seed);
    const auto dense = oracle::affinity_matrix(p, 6, 1.0);
    const auto g = sample_affinity(to_matrix(p), 6, 1.0);
    std::vector<std::uint32_t> a, b;
    for (std::uint32_t s = 0; s < 30; ++s) (s % 3 == 0 ? a : s % 3 == 1 ? b : a).push_back(s);
    b.resize(std::min<std::size_t>(b.size(), 7));
    EXPECT_NEAR(directed_affinity(g, a, b), oracle::directed(dense, a, b), 1e-12);
    EXPECT_NEAR(affinity(g, a, b), affinity(g, b, a), 0.0);
  }
}

TEST(DirectedAffinity, OverlapIsLogicError) {
  const auto g = sample_affinity(to_matrix(six_points()), 3, 1.0);
  EXPECT_THROW(directed_affinity(g, Ids{0, 1}, Ids{1, 2}), LogicError);
  EXPECT_THROW(directed_affinity(g, Ids{}, Ids{1, 2}), LogicError);
}

TEST(MergeUpdates, FromIsAdditive) {
  EXPECT_EQ(merged_from_affinity(0.0, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(merged_from_affinity(0.3, 0.2), 0.5);
  const auto p = oracle::random_points(8, 2, 77);
  const auto g = sample_affinity(to_matrix(p), 3, 1.0);
  const Ids ci = {0, 1}, cm = {2, 3, 4}, cn = {5, 6, 7}, un = {2, 3, 4, 5, 6, 7};
  EXPECT_NEAR(merged_from_affinity(directed_affinity(g, ci, cm), directed_affinity(g, ci, cn)),
              directed_affinity(g, ci, un), 1e-12);
}

TEST(MergeUpdates, ExactToEqualsUnionRecompute) {
  for (std::uint32_t seed = 0; seed < 10; ++seed) {
    const auto g = sample_affinity(to_matrix(oracle::random_points(12, 2, seed)), 4, 1.0);
    const Ids ci = {0, 1, 2}, cm = {3, 4, 5, 6}, cn = {7, 8}, un = {3, 4, 5, 6, 7, 8};
    EXPECT_NEAR(merged_to_affinity(g, ci, cm, cn, AffinityMode::exact()), directed_affinity(g, un, ci), 1e-12);
  }
}

TEST(MergeUpdates, SizeWeighted) {
  EXPECT_DOUBLE_EQ(size_weighted_to_affinity(0.7, 0.7, 4, 4), 0.7);
  EXPECT_DOUBLE_EQ(size_weighted_to_affinity(0.4, 0.1, 3, 1), 0.325);
}

TEST(MergeUpdates, ApproximationsUseThePartValues) {
  const auto g = sample_affinity(to_matrix(oracle::random_points(10, 2, 4)), 4, 1.0);
  const Ids ci = {0, 1}, cm = {2, 3, 4}, cn = {5};
  const double to_m = directed_affinity(g, cm, ci), to_n = directed_affinity(g, cn, ci);
  EXPECT_DOUBLE_EQ(merged_to_affinity(g, ci, cm, cn, AffinityMode::size_weighted()),
                   size_weighted_to_affinity(to_m, to_n, 3, 1));
  EXPECT_DOUBLE_EQ(merged_to_affinity(g, ci, cm, cn, AffinityMode::with_alpha(0.1)),
                   alpha_to_affinity(to_m, to_n, 3, 1, 0.1));
}

TEST(MergeUpdates, AlphaRule) {
  // equal sizes, alpha 0: incoming sum plus a quarter of the outgoing sum
  const double from_m = 0.3, from_n = 0.2, to_m = 0.6, to_n = 0.2;
  EXPECT_NEAR(merged_affinity_alpha(from_m, from_n, to_m, to_n, 5, 5, 0.0), 0.5 + (0.6 + 0.2) / 4.0, 1e-15);
  EXPECT_EQ(merged_affinity_alpha(0, 0, 0, 0, 3, 9, 0.37), 0.0);
  EXPECT_DOUBLE_EQ(merged_affinity_alpha(from_m, from_n, to_m, to_n, 2, 7, -1.0), 0.5);
  // general sizes by hand: (1.1) * (4*0.6 + 1*0.2) / 9
  EXPECT_NEAR(merged_affinity_alpha(0, 0, 0.6, 0.2, 2, 1, 0.1), 1.1 * 2.6 / 9.0, 1e-15);
}

TEST(Cache, InitialValuesMatchDenseOracle) {
  const auto p = oracle::random_points(24, 3, 9);
  const auto dense = oracle::affinity_matrix(p, 5, 1.0);
  const auto g = sample_affinity(to_matrix(p), 5, 1.0);
  std::vector<ClusterId> assign(24);
  for (std::size_t s = 0; s < 24; ++s) assign[s] = static_cast<ClusterId>(s % 6);
  const Partition part(assign);
  const ClusterAffinityCache cache(g, part);
  const auto members = members_of(part);
  for (ClusterId a = 0; a < 6; ++a)
    for (ClusterId b = 0; b < 6; ++b) {
      if (a == b) continue;
      // directed(from=a, to=b) is A(a -> b)
      EXPECT_NEAR(cache.directed(a, b), oracle::directed(dense, members[b], members[a]), 1e-12);
      EXPECT_EQ(cache.affinity(a, b), cache.affinity(b, a));
    }
  EXPECT_EQ(cache.live_count(), 6u);
}

TEST(Cache, IncrementalMergesMatchRecomputation) {
  for (std::uint32_t seed = 0; seed < 8; ++seed) {
    const auto p = oracle::random_points(40, 2, 100 + seed);
    const auto dense = oracle::affinity_matrix(p, 5, 1.0);
    const auto g = sample_affinity(to_matrix(p), 5, 1.0);
    std::vector<ClusterId> assign(40);
    std::iota(assign.begin(), assign.end(), 0);
    Partition part(assign);
    ClusterAffinityCache cache(g, part);
    std::mt19937 gen(seed);
    while (part.live_count() > 3) {
      const auto live = part.live_ids();
      const ClusterId a = live[gen() % live.size()];
      ClusterId b = live[gen() % live.size()];
      if (a == b) continue;
      const ClusterId s = std::min(a, b), t = std::max(a, b);
      part.absorb(s, t);
      cache.merge(g, part, s, t);
      const auto members = members_of(part);
      for (ClusterId x : part.live_ids())
        for (ClusterId y : part.live_ids())
          if (x != y) ASSERT_NEAR(cache.directed(x, y), oracle::directed(dense, members[y], members[x]), 1e-12);
    }
  }
}

TEST(Cache, ApproximateModesTrackTheirRule) {
  const auto g = sample_affinity(to_matrix(oracle::random_points(16, 2, 5)), 4, 1.0);
  std::vector<ClusterId> assign(16);
  for (std::size_t s = 0; s < 16; ++s) assign[s] = static_cast<ClusterId>(s / 4);
  const Partition before(assign);
  for (const AffinityMode mode : {AffinityMode::size_weighted(), AffinityMode::with_alpha(-0.2)}) {
    Partition part = before;
    ClusterAffinityCache cache(g, part, mode);
    const double from_m = cache.directed(0, 2), from_n = cache.directed(1, 2);
    const double to_m = cache.directed(2, 0), to_n = cache.directed(2, 1);
    part.absorb(0, 1);
    cache.merge(g, part, 0, 1);
    EXPECT_NEAR(cache.directed(0, 2), from_m + from_n, 1e-15);
    const double expected = mode.kind == AffinityMode::Kind::SizeWeighted
                                ? size_weighted_to_affinity(to_m, to_n, 4, 4)
                                : alpha_to_affinity(to_m, to_n, 4, 4, -0.2);
    EXPECT_NEAR(cache.directed(2, 0), expected, 1e-15);
  }
}

TEST(Cache, AffinitiesNonNegativeAndSizesConsistent) {
  const auto g = sample_affinity(to_matrix(oracle::random_points(30, 2, 6)), 5, 1.0);
  std::vector<ClusterId> assign(30);
  std::iota(assign.begin(), assign.end(), 0);
  Partition part(assign);
  ClusterAffinityCache cache(g, part);
  for (ClusterId c = 1; c < 20; ++c) {
    part.absorb(0, c);
    cache.merge(g, part, 0, c);
  }
  std::size_t total = 0;
  for (ClusterId c : cache.live_ids()) {
    total += cache.size_of(c);
    EXPECT_EQ(cache.size_of(c), part.size_of(c));
    for (const auto& l : cache.links(c)) {
      EXPECT_GE(l.out, 0.0);
      EXPECT_GE(l.in, 0.0);
    }
  }
  EXPECT_EQ(total, 30u);
  EXPECT_FALSE(cache.is_live(5));
}

TEST(Cache, DescribesMode) {
  EXPECT_EQ(AffinityMode::exact().describe(), "exact");
  EXPECT_NE(AffinityMode::with_alpha(0.1).describe().find("0.1"), std::string::npos);
}
