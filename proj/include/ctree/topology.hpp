#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ctree {

inline constexpr int kDefaultMaxDepth = 14;

// Vertex of the complete tree in level-order (heap) numbering: the root is 1,
// the children of i are 2i and 2i+1.
struct VertexId {
  std::uint32_t value = 0;

  constexpr VertexId() = default;
  constexpr explicit VertexId(std::uint32_t v) : value(v) {}

  // Zero-based position for array storage.
  constexpr std::size_t slot() const { return value - 1; }
  static constexpr VertexId from_slot(std::size_t s) {
    return VertexId(static_cast<std::uint32_t>(s + 1));
  }

  constexpr VertexId parent() const { return VertexId(value / 2); }
  constexpr VertexId left() const { return VertexId(2 * value); }
  constexpr VertexId right() const { return VertexId(2 * value + 1); }

  friend constexpr auto operator<=>(VertexId, VertexId) = default;
};

inline constexpr VertexId kRoot{1};

using Transition = std::pair<VertexId, VertexId>;

// The complete binary tree of a fixed depth together with its boundaries and
// the successive-leaf transition set. Immutable after construction.
class CompleteTreeTopology {
 public:
  int depth() const { return depth_; }
  std::size_t vertex_count() const { return vertex_count_; }
  // Largest number of leaves an internal tree can have (2^depth).
  std::size_t max_leaves() const { return std::size_t{1} << depth_; }

  bool contains(VertexId v) const {
    return v.value >= 1 && v.value <= vertex_count_;
  }
  // Level of a vertex; the root is at level 0.
  int level(VertexId v) const;
  bool is_bottom(VertexId v) const { return level(v) == depth_; }

  // Root first, then down the leftmost (rightmost) path.
  std::span<const VertexId> left_boundary() const { return left_boundary_; }
  std::span<const VertexId> right_boundary() const { return right_boundary_; }
  bool in_left_boundary(VertexId v) const { return in_left_[v.slot()]; }
  bool in_right_boundary(VertexId v) const { return in_right_[v.slot()]; }

  // All pairs (u, w) such that w can follow u as the next leaf, sorted.
  std::span<const Transition> transitions() const { return transitions_; }
  // Predecessors u with (u, v) in the transition set, ascending by index.
  std::span<const VertexId> incoming(VertexId v) const {
    return incoming_[v.slot()];
  }
  bool has_transition(VertexId from, VertexId to) const;

  // In-order label used by the figures (leftmost bottom vertex is 1).
  std::uint32_t display_index(VertexId v) const;
  VertexId from_display_index(std::uint32_t label) const;

 private:
  friend CompleteTreeTopology build_topology(int depth, int max_depth);

  int depth_ = 0;
  std::size_t vertex_count_ = 1;
  std::vector<VertexId> left_boundary_;
  std::vector<VertexId> right_boundary_;
  std::vector<bool> in_left_;
  std::vector<bool> in_right_;
  std::vector<Transition> transitions_;
  std::vector<std::vector<VertexId>> incoming_;
};

// Builds the topology, computing the transition set recursively: transitions
// of both subtrees plus right boundary of the left subtree times the left
// boundary of the right subtree. Throws CapacityError when depth > max_depth.
CompleteTreeTopology build_topology(int depth,
                                    int max_depth = kDefaultMaxDepth);

// A full binary tree rooted at the topology root.
struct InternalTree {
  std::vector<VertexId> leaf_vertices;    // left to right
  std::vector<VertexId> member_vertices;  // ascending

  std::size_t leaf_count() const { return leaf_vertices.size(); }
  bool is_member(VertexId v) const;
  bool is_leaf(VertexId v) const;

  // Builds the tree whose leaves are `leaves` (left to right). Throws
  // DomainError unless they are the leaves of a full binary tree rooted at
  // the topology root, in order.
  static InternalTree from_leaves(const CompleteTreeTopology& topology,
                                  std::span<const VertexId> leaves);

  friend bool operator==(const InternalTree&, const InternalTree&) = default;
};

// Every internal tree with exactly n_leaves leaves. Empty when none fit.
std::vector<InternalTree> enumerate_internal_trees(
    const CompleteTreeTopology& topology, std::size_t n_leaves);

// v, parent(v), ..., root.
std::vector<VertexId> leaf_path_to_root(const CompleteTreeTopology& topology,
                                        VertexId v);

// Nested bracket notation, e.g. "[[[a] [b]] [c]]".
std::string render_tree(const InternalTree& tree,
                        std::span<const std::string> leaf_labels);

struct LabeledTree {
  InternalTree tree;
  std::vector<std::string> labels;
};

// Inverse of render_tree. Throws DomainError on malformed text or when the
// shape does not fit inside the topology.
LabeledTree parse_tree(const CompleteTreeTopology& topology,
                       std::string_view text);

}  // namespace ctree
