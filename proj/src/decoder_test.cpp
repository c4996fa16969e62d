#include "ctree/decoder.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "ctree/error.hpp"
#include "ctree/log_math.hpp"
#include "ctree/oracle.hpp"
#include "test_util.hpp"

namespace ctree {
namespace {

using testing::random_grid;
using testing::random_log_l;
using testing::random_token_table;

TEST(Decode, DepthZero) {
  auto topo = build_topology(0);
  std::vector<double> log_l = {std::log(0.4)};
  auto field = compute_split_field(topo, log_l);
  TokenLogProbs table(1, 3, {std::log(0.2), std::log(0.5), std::log(0.3)});
  auto out = decode_joint(field, table);
  EXPECT_EQ(out.tokens, std::vector<TokenId>{1});
  EXPECT_EQ(out.tree.leaf_vertices, std::vector<VertexId>{kRoot});
  EXPECT_DOUBLE_EQ(out.log_joint, std::log(0.4) + std::log(0.5));
}

TEST(Decode, MatchesExhaustiveSearch) {
  std::mt19937_64 rng(11);
  int checked = 0;
  for (int trial = 0; trial < 120 && checked < 40; ++trial) {
    const int depth = 1 + trial % 3;
    const std::size_t vocab = 2 + trial % 2;
    auto topo = build_topology(depth);
    auto field = compute_split_field(topo, random_log_l(topo, rng));
    auto table = random_token_table(topo, vocab, rng);
    auto brute = oracle::decode_joint(field, table, topo.max_leaves());
    if (brute.log_joint - brute.runner_up < 1e-9) continue;  // not tie-free
    auto out = decode_joint(field, table);
    EXPECT_EQ(out.tokens, brute.tokens);
    EXPECT_EQ(out.tree, brute.tree);
    EXPECT_NEAR(out.log_joint, brute.log_joint, 1e-12);
    ++checked;
  }
  EXPECT_GE(checked, 40);
}

TEST(Decode, EarlyStopAgreesWithLargerCap) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 30; ++trial) {
    auto topo = build_topology(1 + trial % 4);
    auto field = compute_split_field(topo, random_log_l(topo, rng));
    auto table = random_token_table(topo, 4, rng);
    auto a = decode_joint(field, table);
    auto b = decode_joint(field, table, 10 * topo.max_leaves() + 10);
    EXPECT_EQ(a.tokens, b.tokens);
    EXPECT_EQ(a.tree, b.tree);
    EXPECT_EQ(a.log_joint, b.log_joint);
  }
}

TEST(Decode, MaxLenCapsTheLength) {
  std::mt19937_64 rng(13);
  auto topo = build_topology(3);
  // Splitting is very likely, so long outputs win without a cap.
  std::vector<double> log_l(topo.vertex_count(), std::log(0.02));
  auto field = compute_split_field(topo, clamp_bottom_level(topo, log_l));
  auto table = random_token_table(topo, 3, rng);
  auto capped = decode_joint(field, table, 2);
  EXPECT_LE(capped.tokens.size(), 2u);
  auto brute = oracle::decode_joint(field, table, 2);
  EXPECT_EQ(capped.tokens, brute.tokens);
}

TEST(Decode, ScoreReproducesExactly) {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 20; ++trial) {
    auto topo = build_topology(4);
    auto field = compute_split_field(topo, random_log_l(topo, rng));
    auto table = random_token_table(topo, 5, rng);
    auto out = decode_joint(field, table);
    EXPECT_EQ(score_joint(field, table, out.tree, out.tokens), out.log_joint);
  }
}

TEST(Decode, DeterministicUnderTies) {
  auto topo = build_topology(2);
  std::vector<double> log_l(topo.vertex_count(), std::log(0.5));
  auto field = compute_split_field(topo, log_l);
  TokenLogProbs table(topo.vertex_count(), 2,
                      std::vector<double>(topo.vertex_count() * 2, std::log(0.5)));
  auto a = decode_joint(field, table);
  auto b = decode_joint(field, table);
  EXPECT_EQ(a.tokens, b.tokens);
  EXPECT_EQ(a.tree, b.tree);
  // Lowest token wins a tie.
  for (auto t : a.tokens) EXPECT_EQ(t, 0);
}

TEST(Decode, NothingDecodable) {
  auto topo = build_topology(1);
  std::vector<double> log_l(topo.vertex_count(), std::log(0.5));
  auto field = compute_split_field(topo, log_l);
  TokenLogProbs table(topo.vertex_count(), 2,
                      std::vector<double>(topo.vertex_count() * 2, kLogZero));
  EXPECT_THROW(decode_joint(field, table), NoDecodeError);
}

TEST(BestTree, SingleTokenIsRootOnly) {
  std::mt19937_64 rng(15);
  auto topo = build_topology(3);
  auto field = compute_split_field(topo, random_log_l(topo, rng));
  auto grid = random_grid(topo, 1, rng);
  auto out = best_tree_given_tokens(field, grid, 1);
  EXPECT_EQ(out.tree.leaf_vertices, std::vector<VertexId>{kRoot});
}

TEST(BestTree, MatchesExhaustiveSearch) {
  std::mt19937_64 rng(16);
  for (int d = 1; d <= 4; ++d) {
    auto topo = build_topology(d);
    for (std::size_t n = 1; n <= std::min<std::size_t>(6, topo.max_leaves()); ++n) {
      for (int trial = 0; trial < 10; ++trial) {
        auto field = compute_split_field(topo, random_log_l(topo, rng));
        auto grid = random_grid(topo, n, rng);
        auto brute = oracle::best_tree(field, grid, n);
        auto out = best_tree_given_tokens(field, grid, n);
        EXPECT_NEAR(out.log_joint, brute.log_joint, 1e-12);
        if (brute.log_joint - brute.runner_up > 1e-9) EXPECT_EQ(out.tree, brute.tree);
        EXPECT_LE(out.log_joint, oracle::log_marginal(field, grid, n) + 1e-12);
        EXPECT_EQ(score_joint(field, grid, out.tree), out.log_joint);
      }
    }
  }
}

TEST(BestTree, TooLong) {
  std::mt19937_64 rng(17);
  auto topo = build_topology(1);
  auto field = compute_split_field(topo, random_log_l(topo, rng));
  auto grid = random_grid(topo, 3, rng);
  EXPECT_THROW(best_tree_given_tokens(field, grid, 3), DomainError);
}

}  // namespace
}  // namespace ctree
