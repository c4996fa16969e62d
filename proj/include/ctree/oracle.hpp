#pragma once

// Brute-force reference computations built only on tree enumeration and the
// stop/split recursion. They share no code with the dynamic programs they
// are used to check, and are exponential in the depth.

#include <cstdint>
#include <optional>
#include <set>
#include <vector>

#include "ctree/marginalizer.hpp"
#include "ctree/prior.hpp"
#include "ctree/topology.hpp"

namespace ctree::oracle {

// n-th Catalan number by the convolution recurrence.
std::uint64_t catalan(std::size_t n);

// Union over all internal trees of their adjacent-leaf pairs.
std::set<Transition> harvest_adjacent_pairs(const CompleteTreeTopology& topology);

// Every internal tree of the topology, any number of leaves.
std::vector<InternalTree> all_internal_trees(const CompleteTreeTopology& topology);

// log sum_T p(T) over all internal trees.
double prior_total_log_mass(const SplitField& field);

// log sum over trees with n leaves of p(T) * prod_n p(x_n | L_n(T)).
double log_marginal(const SplitField& field, const EmissionGrid& emissions,
                    std::size_t n_tokens);

struct JointOptimum {
  std::vector<TokenId> tokens;
  InternalTree tree;
  double log_joint = 0.0;
  // Best score among (sequence, tree) pairs different from the optimum.
  double runner_up = 0.0;
};

// Exhaustive argmax over every token sequence of every length up to
// max_len and every tree with that many leaves.
JointOptimum decode_joint(const SplitField& field,
                          const TokenLogProbs& token_log_probs,
                          std::size_t max_len);

struct TreeOptimum {
  InternalTree tree;
  double log_joint = 0.0;
  double runner_up = 0.0;
};

// Exhaustive argmax over trees with n leaves for fixed tokens.
TreeOptimum best_tree(const SplitField& field, const EmissionGrid& emissions,
                      std::size_t n_tokens);

}  // namespace ctree::oracle
