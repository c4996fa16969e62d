#include "ctree/topology.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <string>

#include "ctree/error.hpp"

namespace ctree {

namespace {

struct SubtreeBoundaries {
  std::vector<VertexId> left;   // subtree root first
  std::vector<VertexId> right;  // subtree root first
};

// Recursive successive-leaf construction; appends transitions to `out`.
SubtreeBoundaries successive_leaves(VertexId v, int levels_below,
                                    std::vector<Transition>& out) {
  if (levels_below == 0) return {{v}, {v}};
  SubtreeBoundaries lhs = successive_leaves(v.left(), levels_below - 1, out);
  SubtreeBoundaries rhs = successive_leaves(v.right(), levels_below - 1, out);
  for (VertexId from : lhs.right) {
    for (VertexId to : rhs.left) out.emplace_back(from, to);
  }
  SubtreeBoundaries result;
  result.left.reserve(lhs.left.size() + 1);
  result.left.push_back(v);
  result.left.insert(result.left.end(), lhs.left.begin(), lhs.left.end());
  result.right.reserve(rhs.right.size() + 1);
  result.right.push_back(v);
  result.right.insert(result.right.end(), rhs.right.begin(), rhs.right.end());
  return result;
}

void check_vertex(const CompleteTreeTopology& topology, VertexId v) {
  if (!topology.contains(v)) {
    throw DomainError("vertex " + std::to_string(v.value) +
                      " is outside the complete tree");
  }
}

}  // namespace

int CompleteTreeTopology::level(VertexId v) const {
  return std::bit_width(v.value) - 1;
}

bool CompleteTreeTopology::has_transition(VertexId from, VertexId to) const {
  if (!contains(from) || !contains(to)) return false;
  auto preds = incoming(to);
  return std::binary_search(preds.begin(), preds.end(), from);
}

std::uint32_t CompleteTreeTopology::display_index(VertexId v) const {
  const int k = level(v);
  const std::uint32_t pos = v.value - (1u << k);
  return (2 * pos + 1) << (depth_ - k);
}

VertexId CompleteTreeTopology::from_display_index(std::uint32_t label) const {
  if (label == 0 || label > vertex_count_) {
    throw DomainError("display label " + std::to_string(label) +
                      " is outside the complete tree");
  }
  const int trailing = std::countr_zero(label);
  const int k = depth_ - trailing;
  const std::uint32_t pos = ((label >> trailing) - 1) / 2;
  return VertexId((1u << k) + pos);
}

CompleteTreeTopology build_topology(int depth, int max_depth) {
  if (depth < 0) throw DomainError("depth must be non-negative");
  if (depth > max_depth) {
    throw CapacityError("depth " + std::to_string(depth) +
                        " exceeds the configured maximum of " +
                        std::to_string(max_depth));
  }
  CompleteTreeTopology t;
  t.depth_ = depth;
  t.vertex_count_ = (std::size_t{1} << (depth + 1)) - 1;

  SubtreeBoundaries bounds = successive_leaves(kRoot, depth, t.transitions_);
  std::sort(t.transitions_.begin(), t.transitions_.end());
  t.left_boundary_ = std::move(bounds.left);
  t.right_boundary_ = std::move(bounds.right);

  t.in_left_.assign(t.vertex_count_, false);
  t.in_right_.assign(t.vertex_count_, false);
  for (VertexId v : t.left_boundary_) t.in_left_[v.slot()] = true;
  for (VertexId v : t.right_boundary_) t.in_right_[v.slot()] = true;

  t.incoming_.assign(t.vertex_count_, {});
  // transitions_ is sorted by source, so each list comes out ascending.
  for (const auto& [from, to] : t.transitions_) {
    t.incoming_[to.slot()].push_back(from);
  }
  return t;
}

bool InternalTree::is_member(VertexId v) const {
  return std::binary_search(member_vertices.begin(), member_vertices.end(), v);
}

bool InternalTree::is_leaf(VertexId v) const {
  return std::find(leaf_vertices.begin(), leaf_vertices.end(), v) !=
         leaf_vertices.end();
}

InternalTree InternalTree::from_leaves(const CompleteTreeTopology& topology,
                                       std::span<const VertexId> leaves) {
  if (leaves.empty()) throw DomainError("an internal tree has at least 1 leaf");
  std::vector<bool> member(topology.vertex_count(), false);
  std::vector<bool> leaf(topology.vertex_count(), false);
  for (VertexId v : leaves) {
    check_vertex(topology, v);
    if (leaf[v.slot()]) throw DomainError("repeated leaf vertex");
    leaf[v.slot()] = true;
    for (VertexId u = v; u.value >= 1; u = u.parent()) member[u.slot()] = true;
  }
  InternalTree tree;
  for (std::size_t s = 0; s < member.size(); ++s) {
    if (!member[s]) continue;
    const VertexId v = VertexId::from_slot(s);
    const bool has_left = topology.contains(v.left()) && member[v.left().slot()];
    const bool has_right =
        topology.contains(v.right()) && member[v.right().slot()];
    if (has_left != has_right) {
      throw DomainError("vertex " + std::to_string(v.value) +
                        " has exactly one child; the tree is not full");
    }
    if (leaf[s] == has_left) {
      throw DomainError("leaf set does not match the childless vertices");
    }
    tree.member_vertices.push_back(v);
  }
  for (std::size_t i = 1; i < leaves.size(); ++i) {
    if (topology.display_index(leaves[i - 1]) >=
        topology.display_index(leaves[i])) {
      throw DomainError("leaves are not in left-to-right order");
    }
  }
  tree.leaf_vertices.assign(leaves.begin(), leaves.end());
  return tree;
}

namespace {

void enumerate_leaf_lists(const CompleteTreeTopology& topology, VertexId v,
                          std::size_t n,
                          std::vector<std::vector<VertexId>>& out) {
  if (n == 1) {
    out.push_back({v});
    return;
  }
  if (topology.is_bottom(v)) return;
  const std::size_t capacity =
      std::size_t{1} << (topology.depth() - topology.level(v) - 1);
  for (std::size_t k = 1; k < n; ++k) {
    if (k > capacity || n - k > capacity) continue;
    std::vector<std::vector<VertexId>> lhs;
    std::vector<std::vector<VertexId>> rhs;
    enumerate_leaf_lists(topology, v.left(), k, lhs);
    if (lhs.empty()) continue;
    enumerate_leaf_lists(topology, v.right(), n - k, rhs);
    for (const auto& a : lhs) {
      for (const auto& b : rhs) {
        std::vector<VertexId> joined(a);
        joined.insert(joined.end(), b.begin(), b.end());
        out.push_back(std::move(joined));
      }
    }
  }
}

}  // namespace

std::vector<InternalTree> enumerate_internal_trees(
    const CompleteTreeTopology& topology, std::size_t n_leaves) {
  if (n_leaves == 0) throw DomainError("n_leaves must be positive");
  std::vector<InternalTree> trees;
  if (n_leaves > topology.max_leaves()) return trees;
  std::vector<std::vector<VertexId>> lists;
  enumerate_leaf_lists(topology, kRoot, n_leaves, lists);
  trees.reserve(lists.size());
  for (const auto& leaves : lists) {
    trees.push_back(InternalTree::from_leaves(topology, leaves));
  }
  return trees;
}

std::vector<VertexId> leaf_path_to_root(const CompleteTreeTopology& topology,
                                        VertexId v) {
  check_vertex(topology, v);
  std::vector<VertexId> path;
  for (VertexId u = v; u.value >= 1; u = u.parent()) path.push_back(u);
  return path;
}

namespace {

void render_subtree(const InternalTree& tree, VertexId v,
                    std::span<const std::string> labels, std::size_t& next,
                    std::string& out) {
  out += '[';
  if (tree.is_leaf(v)) {
    out += labels[next++];
  } else {
    render_subtree(tree, v.left(), labels, next, out);
    out += ' ';
    render_subtree(tree, v.right(), labels, next, out);
  }
  out += ']';
}

class TreeTextParser {
 public:
  TreeTextParser(const CompleteTreeTopology& topology, std::string_view text)
      : topology_(topology), text_(text) {}

  LabeledTree parse() {
    skip_space();
    node(kRoot);
    skip_space();
    if (pos_ != text_.size()) fail("trailing characters");
    LabeledTree result;
    result.tree = InternalTree::from_leaves(topology_, leaves_);
    result.labels = std::move(labels_);
    return result;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw DomainError("tree text: " + what + " at offset " +
                      std::to_string(pos_));
  }

  void skip_space() {
    while (pos_ < text_.size() &&
           std::isspace(static_cast<unsigned char>(text_[pos_]))) {
      ++pos_;
    }
  }

  void expect(char c) {
    skip_space();
    if (pos_ >= text_.size() || text_[pos_] != c) {
      fail(std::string("expected '") + c + "'");
    }
    ++pos_;
  }

  void node(VertexId v) {
    if (!topology_.contains(v)) fail("tree is deeper than the complete tree");
    expect('[');
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == '[') {
      node(v.left());
      node(v.right());
    } else {
      const std::size_t start = pos_;
      while (pos_ < text_.size() && text_[pos_] != '[' && text_[pos_] != ']' &&
             !std::isspace(static_cast<unsigned char>(text_[pos_]))) {
        ++pos_;
      }
      if (pos_ == start) fail("empty leaf label");
      labels_.emplace_back(text_.substr(start, pos_ - start));
      leaves_.push_back(v);
    }
    expect(']');
  }

  const CompleteTreeTopology& topology_;
  std::string_view text_;
  std::size_t pos_ = 0;
  std::vector<VertexId> leaves_;
  std::vector<std::string> labels_;
};

}  // namespace

std::string render_tree(const InternalTree& tree,
                        std::span<const std::string> leaf_labels) {
  if (leaf_labels.size() != tree.leaf_vertices.size()) {
    throw DomainError("render_tree: " + std::to_string(leaf_labels.size()) +
                      " labels for " +
                      std::to_string(tree.leaf_vertices.size()) + " leaves");
  }
  std::string out;
  std::size_t next = 0;
  render_subtree(tree, kRoot, leaf_labels, next, out);
  return out;
}

LabeledTree parse_tree(const CompleteTreeTopology& topology,
                       std::string_view text) {
  return TreeTextParser(topology, text).parse();
}

}  // namespace ctree
