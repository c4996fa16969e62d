#include "ctree/marginalizer.hpp"

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
using testing::random_grid;
using testing::random_log_l;

TEST(Marginal, SingleTokenUsesRootOnly) {
  std::mt19937_64 rng(1);
  for (int d = 0; d <= 4; ++d) {
    auto topo = build_topology(d);
    auto field = compute_split_field(topo, random_log_l(topo, rng));
    auto grid = random_grid(topo, 1, rng);
    auto table = marginal_log_likelihood(field, grid, 1);
    EXPECT_NEAR(table.log_marginal(), grid.at(kRoot, 0) + field.log_l(kRoot),
                1e-14);
  }
}

TEST(Marginal, FigureTwoSumOfTwoTrees) {
  auto topo = build_topology(2);
  std::mt19937_64 rng(2);
  auto log_l = random_log_l(topo, rng);
  auto field = compute_split_field(topo, log_l);
  auto grid = random_grid(topo, 3, rng);
  auto l = [&](std::uint32_t x) { return std::exp(log_l[by_label(topo, x).slot()]); };
  auto e = [&](std::uint32_t x, std::size_t n) {
    return std::exp(grid.at(by_label(topo, x), n));
  };
  const double p1 = (1 - l(4)) * (1 - l(2)) * l(1) * l(3) * l(6) * e(1, 0) *
                    e(3, 1) * e(6, 2);
  const double p2 = (1 - l(4)) * (1 - l(6)) * l(2) * l(5) * l(7) * e(2, 0) *
                    e(5, 1) * e(7, 2);
  EXPECT_NEAR(marginal_log_likelihood(field, grid, 3).log_marginal(),
              std::log(p1 + p2), 1e-12);
}

TEST(Marginal, MatchesEnumerationUpToDepthFour) {
  std::mt19937_64 rng(3);
  for (int d = 0; d <= 4; ++d) {
    auto topo = build_topology(d);
    for (std::size_t n = 1; n <= 8; ++n) {
      for (int trial = 0; trial < 10; ++trial) {
        auto field = compute_split_field(topo, random_log_l(topo, rng));
        auto grid = random_grid(topo, n, rng);
        const double dp = marginal_log_likelihood(field, grid, n).log_marginal();
        const double brute = oracle::log_marginal(field, grid, n);
        if (is_log_zero(brute)) {
          EXPECT_TRUE(is_log_zero(dp));
        } else {
          ASSERT_NEAR(dp, brute, 1e-9) << "depth " << d << " n " << n;
        }
      }
    }
  }
}

TEST(Marginal, RollingAgreesWithFullTable) {
  std::mt19937_64 rng(4);
  auto topo = build_topology(4);
  for (std::size_t n = 1; n <= 16; ++n) {
    auto field = compute_split_field(topo, random_log_l(topo, rng));
    auto grid = random_grid(topo, n, rng);
    EXPECT_EQ(marginal_log_likelihood_rolling(field, grid, n),
              marginal_log_likelihood(field, grid, n).log_marginal());
  }
}

TEST(Marginal, PrefixMarginalsMatchEnumeration) {
  std::mt19937_64 rng(5);
  auto topo = build_topology(3);
  auto field = compute_split_field(topo, random_log_l(topo, rng));
  auto grid = random_grid(topo, 8, rng);
  auto table = marginal_log_likelihood(field, grid, 8);
  auto prefixes = prefix_marginals(table);
  ASSERT_EQ(prefixes.size(), 8u);
  EXPECT_NEAR(prefixes[0], grid.at(kRoot, 0) + field.log_l(kRoot), 1e-14);
  EXPECT_EQ(prefixes.back(), table.log_marginal());
  for (std::size_t n = 1; n <= 8; ++n) {
    EXPECT_NEAR(prefixes[n - 1], oracle::log_marginal(field, grid, n), 1e-9);
  }
}

TEST(Marginal, TooLongForTheTreeHasZeroProbability) {
  std::mt19937_64 rng(6);
  auto topo = build_topology(2);
  auto field = compute_split_field(topo, random_log_l(topo, rng));
  auto grid = random_grid(topo, 5, rng);
  EXPECT_TRUE(is_log_zero(marginal_log_likelihood(field, grid, 5).log_marginal()));
}

TEST(Marginal, Errors) {
  std::mt19937_64 rng(7);
  auto topo = build_topology(2);
  auto field = compute_split_field(topo, random_log_l(topo, rng));
  auto grid = random_grid(topo, 2, rng);
  EXPECT_THROW(marginal_log_likelihood(field, grid, 0), DomainError);
  EXPECT_THROW(marginal_log_likelihood(field, grid, 3), DomainError);
}

TEST(Marginal, ReachabilityIsStructural) {
  auto topo = build_topology(2);
  std::mt19937_64 rng(8);
  auto field = compute_split_field(topo, random_log_l(topo, rng));
  auto grid = random_grid(topo, 2, rng);
  auto table = marginal_log_likelihood(field, grid, 2);
  for (std::size_t s = 0; s < topo.vertex_count(); ++s) {
    auto v = VertexId::from_slot(s);
    EXPECT_EQ(table.reached(v, 0), topo.in_left_boundary(v));
    EXPECT_EQ(table.reached(v, 0), !is_log_zero(table.log_M(v, 0)));
  }
}

TEST(Marginal, GatherPicksColumns) {
  auto topo = build_topology(1);
  std::vector<double> values = {-1, -2, -3, -4, -5, -6, -7, -8, -9};
  TokenLogProbs table(3, 3, values);
  std::vector<TokenId> tokens = {2, 0};
  auto grid = EmissionGrid::gather(table, tokens);
  EXPECT_EQ(grid.at(VertexId(1), 0), -3);
  EXPECT_EQ(grid.at(VertexId(1), 1), -1);
  EXPECT_EQ(grid.at(VertexId(3), 0), -9);
}

}  // namespace
}  // namespace ctree
