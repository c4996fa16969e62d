#include "ctree/topology.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "ctree/error.hpp"
#include "ctree/oracle.hpp"

namespace ctree {
namespace {

std::set<std::pair<std::uint32_t, std::uint32_t>> labeled(
    const CompleteTreeTopology& topo) {
  std::set<std::pair<std::uint32_t, std::uint32_t>> out;
  for (auto [a, b] : topo.transitions()) {
    out.emplace(topo.display_index(a), topo.display_index(b));
  }
  return out;
}

std::vector<std::uint32_t> labels_of(const CompleteTreeTopology& topo,
                                     const std::vector<VertexId>& vs) {
  std::vector<std::uint32_t> out;
  for (auto v : vs) out.push_back(topo.display_index(v));
  return out;
}

TEST(Topology, DepthZeroIsSingleVertex) {
  auto topo = build_topology(0);
  EXPECT_EQ(topo.vertex_count(), 1u);
  ASSERT_EQ(topo.left_boundary().size(), 1u);
  ASSERT_EQ(topo.right_boundary().size(), 1u);
  EXPECT_EQ(topo.left_boundary()[0], kRoot);
  EXPECT_EQ(topo.right_boundary()[0], kRoot);
  EXPECT_TRUE(topo.transitions().empty());
}

TEST(Topology, DepthTwoTransitionsInDisplayLabels) {
  auto topo = build_topology(2);
  std::set<std::pair<std::uint32_t, std::uint32_t>> expected = {
      {1, 3}, {5, 7}, {2, 6}, {2, 5}, {3, 6}, {3, 5}};
  EXPECT_EQ(labeled(topo), expected);
  EXPECT_EQ(topo.display_index(kRoot), 4u);
}

TEST(Topology, FiveAndSixFollowBothTwoAndThree) {
  auto topo = build_topology(2);
  for (std::uint32_t to : {5u, 6u}) {
    for (std::uint32_t from : {2u, 3u}) {
      EXPECT_TRUE(topo.has_transition(topo.from_display_index(from),
                                      topo.from_display_index(to)));
    }
  }
}

TEST(Topology, BoundariesHaveNoTransitionsOutOrIn) {
  for (int d = 0; d <= 5; ++d) {
    auto topo = build_topology(d);
    for (auto [a, b] : topo.transitions()) {
      EXPECT_FALSE(topo.in_right_boundary(a));
      EXPECT_FALSE(topo.in_left_boundary(b));
    }
  }
}

TEST(Topology, TransitionsMatchEnumeratedAdjacentPairs) {
  for (int d = 0; d <= 4; ++d) {
    auto topo = build_topology(d);
    std::set<Transition> built(topo.transitions().begin(), topo.transitions().end());
    EXPECT_EQ(built, oracle::harvest_adjacent_pairs(topo)) << "depth " << d;
  }
}

TEST(Topology, IncomingListsAreSortedAndConsistent) {
  auto topo = build_topology(4);
  std::size_t total = 0;
  for (std::size_t s = 0; s < topo.vertex_count(); ++s) {
    auto v = VertexId::from_slot(s);
    auto in = topo.incoming(v);
    EXPECT_TRUE(std::is_sorted(in.begin(), in.end()));
    for (auto u : in) EXPECT_TRUE(topo.has_transition(u, v));
    total += in.size();
  }
  EXPECT_EQ(total, topo.transitions().size());
}

TEST(Topology, DisplayIndexRoundTrips) {
  auto topo = build_topology(3);
  std::set<std::uint32_t> seen;
  for (std::size_t s = 0; s < topo.vertex_count(); ++s) {
    auto v = VertexId::from_slot(s);
    const auto label = topo.display_index(v);
    EXPECT_EQ(topo.from_display_index(label), v);
    seen.insert(label);
  }
  EXPECT_EQ(seen.size(), topo.vertex_count());
  EXPECT_EQ(*seen.begin(), 1u);
  EXPECT_EQ(*seen.rbegin(), topo.vertex_count());
}

TEST(Topology, CapacityLimit) {
  EXPECT_THROW(build_topology(15), CapacityError);
  EXPECT_THROW(build_topology(6, 5), CapacityError);
  EXPECT_THROW(build_topology(-1), DomainError);
}

TEST(Enumerate, FigureTwoTrees) {
  auto topo = build_topology(2);
  auto trees = enumerate_internal_trees(topo, 3);
  ASSERT_EQ(trees.size(), 2u);
  std::set<std::vector<std::uint32_t>> leaves;
  for (const auto& t : trees) leaves.insert(labels_of(topo, t.leaf_vertices));
  EXPECT_TRUE(leaves.count({1, 3, 6}));
  EXPECT_TRUE(leaves.count({2, 5, 7}));
}

TEST(Enumerate, RootOnlyTree) {
  for (int d = 0; d <= 4; ++d) {
    auto topo = build_topology(d);
    auto trees = enumerate_internal_trees(topo, 1);
    ASSERT_EQ(trees.size(), 1u);
    EXPECT_EQ(trees[0].leaf_vertices, std::vector<VertexId>{kRoot});
  }
}

TEST(Enumerate, CountsAgainstCatalan) {
  auto topo = build_topology(4);
  EXPECT_EQ(enumerate_internal_trees(topo, 4).size(), 5u);
  // Every shape with n leaves has height at most n - 1, so it fits when
  // n - 1 <= depth.
  for (int d = 0; d <= 4; ++d) {
    auto t = build_topology(d);
    for (std::size_t n = 1; n <= static_cast<std::size_t>(d) + 1; ++n) {
      EXPECT_EQ(enumerate_internal_trees(t, n).size(), oracle::catalan(n - 1))
          << "depth " << d << " n " << n;
    }
  }
  // Shapes too tall for the scaffold are excluded.
  EXPECT_LT(enumerate_internal_trees(topo, 6).size(), oracle::catalan(5));
  EXPECT_EQ(enumerate_internal_trees(topo, 16).size(), 1u);
  EXPECT_TRUE(enumerate_internal_trees(topo, 17).empty());
}

TEST(Enumerate, TreesAreFullAndOrdered) {
  auto topo = build_topology(3);
  for (std::size_t n = 1; n <= 8; ++n) {
    for (const auto& t : enumerate_internal_trees(topo, n)) {
      EXPECT_EQ(t.leaf_count(), n);
      EXPECT_EQ(t.member_vertices.size(), 2 * n - 1);
      EXPECT_EQ(InternalTree::from_leaves(topo, t.leaf_vertices), t);
      for (auto v : t.member_vertices) {
        if (v == kRoot) continue;
        EXPECT_TRUE(t.is_member(v.parent()));
        EXPECT_FALSE(t.is_leaf(v.parent()));
      }
    }
  }
}

TEST(Enumerate, FromLeavesRejectsBadInput) {
  auto topo = build_topology(2);
  std::vector<VertexId> not_full = {VertexId(4), VertexId(5)};
  EXPECT_THROW(InternalTree::from_leaves(topo, not_full), DomainError);
  std::vector<VertexId> wrong_order = {VertexId(3), VertexId(2)};
  EXPECT_THROW(InternalTree::from_leaves(topo, wrong_order), DomainError);
}

TEST(LeafPath, Examples) {
  auto topo = build_topology(2);
  EXPECT_EQ(leaf_path_to_root(topo, kRoot), std::vector<VertexId>{kRoot});
  EXPECT_EQ(labels_of(topo, leaf_path_to_root(topo, topo.from_display_index(1))),
            (std::vector<std::uint32_t>{1, 2, 4}));
  auto topo3 = build_topology(3);
  EXPECT_EQ(leaf_path_to_root(topo3, topo3.left_boundary().back()).size(), 4u);
}

TEST(Render, Examples) {
  auto topo = build_topology(2);
  auto root_only = enumerate_internal_trees(topo, 1)[0];
  std::vector<std::string> walk = {"walk"};
  EXPECT_EQ(render_tree(root_only, walk), "[walk]");

  std::vector<VertexId> t1 = {topo.from_display_index(1), topo.from_display_index(3),
                              topo.from_display_index(6)};
  auto tree = InternalTree::from_leaves(topo, t1);
  std::vector<std::string> abc = {"a", "b", "c"};
  EXPECT_EQ(render_tree(tree, abc), "[[[a] [b]] [c]]");
}

TEST(Render, ParseRoundTrip) {
  auto topo = build_topology(3);
  for (std::size_t n = 1; n <= 8; ++n) {
    for (const auto& t : enumerate_internal_trees(topo, n)) {
      std::vector<std::string> labels;
      for (std::size_t i = 0; i < n; ++i) labels.push_back("w" + std::to_string(i));
      const auto text = render_tree(t, labels);
      auto parsed = parse_tree(topo, text);
      EXPECT_EQ(parsed.tree, t) << text;
      EXPECT_EQ(parsed.labels, labels);
    }
  }
}

TEST(Render, ParseErrors) {
  auto topo = build_topology(1);
  EXPECT_THROW(parse_tree(topo, "[a"), DomainError);
  EXPECT_THROW(parse_tree(topo, "[[a] [b] [c]]"), DomainError);
  EXPECT_THROW(parse_tree(topo, "[[[a] [b]] [c]]"), DomainError);  // too deep
  EXPECT_THROW(parse_tree(topo, ""), DomainError);
}

}  // namespace
}  // namespace ctree
