#include "ctree/prior.hpp"

#include <string>

#include "ctree/error.hpp"
#include "ctree/log_math.hpp"

namespace ctree {

namespace {

void check_tree(const SplitField& field, const InternalTree& tree) {
  if (tree.member_vertices.empty() || tree.member_vertices.front() != kRoot) {
    throw DomainError("tree is not rooted at the topology root");
  }
  const auto& topology = field.topology();
  for (VertexId v : tree.member_vertices) {
    if (!topology.contains(v)) {
      throw DomainError("tree vertex " + std::to_string(v.value) +
                        " is outside the complete tree");
    }
  }
}

double pi_recursive(const SplitField& field, const InternalTree& tree,
                    VertexId v) {
  if (tree.is_leaf(v)) return field.log_l(v);
  return field.log_one_minus_l(v) + pi_recursive(field, tree, v.left()) +
         pi_recursive(field, tree, v.right());
}

}  // namespace

SplitField compute_split_field(const CompleteTreeTopology& topology,
                               std::span<const double> log_l) {
  std::vector<double> complement(log_l.size());
  for (std::size_t i = 0; i < log_l.size(); ++i) {
    complement[i] = log1m_exp(log_l[i]);
  }
  return compute_split_field(topology, log_l, complement);
}

SplitField compute_split_field(const CompleteTreeTopology& topology,
                               std::span<const double> log_l,
                               std::span<const double> log_one_minus_l) {
  const std::size_t m = topology.vertex_count();
  if (log_l.size() != m || log_one_minus_l.size() != m) {
    throw DomainError("split field needs one value per vertex (" +
                      std::to_string(m) + ")");
  }
  for (std::size_t i = 0; i < m; ++i) {
    if (!(log_l[i] <= 0.0) || !(log_one_minus_l[i] <= 0.0)) {
      throw DomainError("log split probability must be <= 0 at vertex " +
                        std::to_string(i + 1));
    }
  }
  SplitField f;
  f.topology_ = &topology;
  f.log_l_.assign(log_l.begin(), log_l.end());
  f.log_one_minus_l_.assign(log_one_minus_l.begin(), log_one_minus_l.end());
  f.log_m_.resize(m);
  f.log_m_tilde_.resize(m);
  // Heap order visits every parent before its children.
  for (std::size_t s = 0; s < m; ++s) {
    const VertexId v = VertexId::from_slot(s);
    const double inherited =
        v == kRoot ? 0.0 : 0.5 * f.log_m_tilde_[v.parent().slot()];
    f.log_m_[s] = inherited + f.log_l_[s];
    f.log_m_tilde_[s] = inherited + f.log_one_minus_l_[s];
  }
  return f;
}

double tree_probability_pi(const SplitField& field, const InternalTree& tree) {
  check_tree(field, tree);
  return pi_recursive(field, tree, kRoot);
}

double tree_probability_from_m(const SplitField& field,
                               const InternalTree& tree) {
  check_tree(field, tree);
  double total = 0.0;
  for (VertexId v : tree.leaf_vertices) total += field.log_m(v);
  return total;
}

std::vector<double> clamp_bottom_level(const CompleteTreeTopology& topology,
                                       std::span<const double> log_l) {
  if (log_l.size() != topology.vertex_count()) {
    throw DomainError("clamp_bottom_level: size mismatch");
  }
  std::vector<double> out(log_l.begin(), log_l.end());
  const std::size_t first_bottom = topology.max_leaves() - 1;
  for (std::size_t s = first_bottom; s < out.size(); ++s) out[s] = 0.0;
  return out;
}

}  // namespace ctree
