#include "ctree/prior.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ctree/error.hpp"
#include "ctree/log_math.hpp"
#include "ctree/oracle.hpp"
#include "test_util.hpp"

namespace ctree {
namespace {

using testing::by_label;
using testing::random_log_l;

TEST(Prior, DepthZeroRootValue) {
  auto topo = build_topology(0);
  std::vector<double> log_l = {std::log(0.3)};
  auto field = compute_split_field(topo, log_l);
  EXPECT_DOUBLE_EQ(field.log_m(kRoot), std::log(0.3));
}

TEST(Prior, LeftmostBottomVertexAtDepthTwo) {
  auto topo = build_topology(2);
  std::mt19937_64 rng(1);
  auto log_l = random_log_l(topo, rng);
  auto field = compute_split_field(topo, log_l);
  auto l = [&](std::uint32_t label) {
    return std::exp(log_l[by_label(topo, label).slot()]);
  };
  const double expected =
      std::pow(1 - l(4), 0.25) * std::pow(1 - l(2), 0.5) * l(1);
  EXPECT_NEAR(std::exp(field.log_m(by_label(topo, 1))), expected, 1e-15);
}

TEST(Prior, FigureTwoTreeProbabilities) {
  auto topo = build_topology(2);
  std::mt19937_64 rng(2);
  auto log_l = random_log_l(topo, rng);
  auto field = compute_split_field(topo, log_l);
  auto l = [&](std::uint32_t label) {
    return std::exp(log_l[by_label(topo, label).slot()]);
  };
  auto tree = [&](std::vector<std::uint32_t> labels) {
    std::vector<VertexId> leaves;
    for (auto x : labels) leaves.push_back(by_label(topo, x));
    return InternalTree::from_leaves(topo, leaves);
  };
  const auto t1 = tree({1, 3, 6});
  const auto t2 = tree({2, 5, 7});
  const double p1 = (1 - l(4)) * (1 - l(2)) * l(1) * l(3) * l(6);
  const double p2 = (1 - l(4)) * (1 - l(6)) * l(2) * l(5) * l(7);
  EXPECT_NEAR(tree_probability_pi(field, t1), std::log(p1), 1e-12);
  EXPECT_NEAR(tree_probability_pi(field, t2), std::log(p2), 1e-12);
  EXPECT_NEAR(tree_probability_from_m(field, t1), std::log(p1), 1e-12);
  EXPECT_NEAR(tree_probability_from_m(field, t2), std::log(p2), 1e-12);
}

TEST(Prior, RootOnlyTree) {
  auto topo = build_topology(3);
  std::mt19937_64 rng(3);
  auto log_l = random_log_l(topo, rng);
  auto field = compute_split_field(topo, log_l);
  auto root = enumerate_internal_trees(topo, 1)[0];
  EXPECT_DOUBLE_EQ(tree_probability_pi(field, root), log_l[0]);
  EXPECT_DOUBLE_EQ(tree_probability_from_m(field, root), log_l[0]);
}

TEST(Prior, LeafProductMatchesRecursion) {
  std::mt19937_64 rng(4);
  for (int d = 0; d <= 4; ++d) {
    auto topo = build_topology(d);
    auto trees = oracle::all_internal_trees(topo);
    for (int trial = 0; trial < 40; ++trial) {
      auto field = compute_split_field(topo, random_log_l(topo, rng, 0.01, 0.99));
      for (const auto& t : trees) {
        ASSERT_NEAR(tree_probability_from_m(field, t),
                    tree_probability_pi(field, t), 1e-10);
      }
    }
  }
}

TEST(Prior, ClampedPriorIsNormalized) {
  std::mt19937_64 rng(5);
  for (int d = 0; d <= 4; ++d) {
    auto topo = build_topology(d);
    for (int trial = 0; trial < 5; ++trial) {
      auto log_l = clamp_bottom_level(topo, random_log_l(topo, rng));
      auto field = compute_split_field(topo, log_l);
      EXPECT_NEAR(std::exp(oracle::prior_total_log_mass(field)), 1.0, 1e-9);
    }
  }
}

TEST(Prior, UnclampedPriorLosesMass) {
  auto topo = build_topology(2);
  std::vector<double> log_l(topo.vertex_count(), std::log(0.5));
  auto field = compute_split_field(topo, log_l);
  EXPECT_LT(oracle::prior_total_log_mass(field), 0.0);
}

TEST(Prior, ExplicitComplementAgrees) {
  auto topo = build_topology(3);
  std::mt19937_64 rng(6);
  auto log_l = random_log_l(topo, rng);
  std::vector<double> log_1ml;
  for (double x : log_l) log_1ml.push_back(std::log1p(-std::exp(x)));
  auto a = compute_split_field(topo, log_l);
  auto b = compute_split_field(topo, log_l, log_1ml);
  for (std::size_t s = 0; s < topo.vertex_count(); ++s) {
    EXPECT_NEAR(a.log_m(VertexId::from_slot(s)), b.log_m(VertexId::from_slot(s)),
                1e-14);
  }
}

TEST(Prior, RejectsBadInput) {
  auto topo = build_topology(2);
  std::vector<double> short_l(3, -1.0);
  EXPECT_THROW(compute_split_field(topo, short_l), DomainError);
  std::vector<double> positive(topo.vertex_count(), 0.1);
  EXPECT_THROW(compute_split_field(topo, positive), DomainError);
}

TEST(Prior, CertainStopGivesZeroSplitMass) {
  auto topo = build_topology(2);
  std::vector<double> log_l(topo.vertex_count(), 0.0);
  auto field = compute_split_field(topo, log_l);
  EXPECT_TRUE(is_log_zero(field.log_m(VertexId(2))));
  EXPECT_DOUBLE_EQ(field.log_m(kRoot), 0.0);
}

}  // namespace
}  // namespace ctree
