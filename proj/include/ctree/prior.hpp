#pragma once

#include <span>
#include <vector>

#include "ctree/topology.hpp"

namespace ctree {

// Per-vertex log split probabilities and the memoized leaf values derived
// from them. l is the probability of stopping (emitting) at a vertex, 1 - l
// the probability of splitting it into two children.
//
//   log m(v)  = log m~(parent(v)) / 2 + log l(v)
//   log m~(v) = log m~(parent(v)) / 2 + log(1 - l(v)),   log m~(parent(root)) = 0
//
// so that the product of m over the leaves of any internal tree equals the
// tree's prior probability.
class SplitField {
 public:
  const CompleteTreeTopology& topology() const { return *topology_; }

  double log_l(VertexId v) const { return log_l_[v.slot()]; }
  double log_one_minus_l(VertexId v) const {
    return log_one_minus_l_[v.slot()];
  }
  double log_m(VertexId v) const { return log_m_[v.slot()]; }
  double log_m_tilde(VertexId v) const { return log_m_tilde_[v.slot()]; }

  std::span<const double> log_l_values() const { return log_l_; }
  std::span<const double> log_m_values() const { return log_m_; }

 private:
  friend SplitField compute_split_field(const CompleteTreeTopology&,
                                        std::span<const double>,
                                        std::span<const double>);

  const CompleteTreeTopology* topology_ = nullptr;
  std::vector<double> log_l_;
  std::vector<double> log_one_minus_l_;
  std::vector<double> log_m_;
  std::vector<double> log_m_tilde_;
};

// log_l holds one value per vertex in slot order; log(1 - l) is derived.
// Throws DomainError for a wrong size or any log_l > 0. The topology must
// outlive the returned field.
SplitField compute_split_field(const CompleteTreeTopology& topology,
                               std::span<const double> log_l);

// As above with log(1 - l) supplied (e.g. from a two-way log-softmax).
SplitField compute_split_field(const CompleteTreeTopology& topology,
                               std::span<const double> log_l,
                               std::span<const double> log_one_minus_l);

// Prior log-probability by the stop/split recursion over the tree.
double tree_probability_pi(const SplitField& field, const InternalTree& tree);

// Prior log-probability as the sum of log m over the tree's leaves.
double tree_probability_from_m(const SplitField& field,
                               const InternalTree& tree);

// Copy of log_l with every bottom-level vertex forced to l = 1, which makes
// the prior a proper distribution over internal trees.
std::vector<double> clamp_bottom_level(const CompleteTreeTopology& topology,
                                       std::span<const double> log_l);

}  // namespace ctree
