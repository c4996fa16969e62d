#include "ctree/oracle.hpp"

#include <cmath>
#include <limits>

#include "ctree/error.hpp"
#include "ctree/log_math.hpp"

namespace ctree::oracle {

std::uint64_t catalan(std::size_t n) {
  std::vector<std::uint64_t> c(n + 1, 0);
  c[0] = 1;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 0; j < i; ++j) c[i] += c[j] * c[i - 1 - j];
  }
  return c[n];
}

std::vector<InternalTree> all_internal_trees(
    const CompleteTreeTopology& topology) {
  std::vector<InternalTree> all;
  for (std::size_t n = 1; n <= topology.max_leaves(); ++n) {
    auto trees = enumerate_internal_trees(topology, n);
    all.insert(all.end(), trees.begin(), trees.end());
  }
  return all;
}

std::set<Transition> harvest_adjacent_pairs(
    const CompleteTreeTopology& topology) {
  std::set<Transition> pairs;
  for (const auto& tree : all_internal_trees(topology)) {
    for (std::size_t i = 0; i + 1 < tree.leaf_vertices.size(); ++i) {
      pairs.emplace(tree.leaf_vertices[i], tree.leaf_vertices[i + 1]);
    }
  }
  return pairs;
}

double prior_total_log_mass(const SplitField& field) {
  std::vector<double> terms;
  for (const auto& tree : all_internal_trees(field.topology())) {
    terms.push_back(tree_probability_pi(field, tree));
  }
  return log_sum_exp(terms);
}

namespace {

double tree_joint(const SplitField& field, const EmissionGrid& emissions,
                  const InternalTree& tree) {
  double score = tree_probability_pi(field, tree);
  for (std::size_t n = 0; n < tree.leaf_count(); ++n) {
    score += emissions.at(tree.leaf_vertices[n], n);
  }
  return score;
}

}  // namespace

double log_marginal(const SplitField& field, const EmissionGrid& emissions,
                    std::size_t n_tokens) {
  if (n_tokens == 0) throw DomainError("n_tokens must be positive");
  std::vector<double> terms;
  for (const auto& tree : enumerate_internal_trees(field.topology(), n_tokens)) {
    terms.push_back(tree_joint(field, emissions, tree));
  }
  return log_sum_exp(terms);
}

JointOptimum decode_joint(const SplitField& field,
                          const TokenLogProbs& token_log_probs,
                          std::size_t max_len) {
  const std::size_t vocab = token_log_probs.vocab_size();
  JointOptimum best;
  best.log_joint = kLogZero;
  best.runner_up = kLogZero;
  bool found = false;
  for (std::size_t n = 1; n <= max_len; ++n) {
    const auto trees = enumerate_internal_trees(field.topology(), n);
    if (trees.empty()) continue;
    std::vector<TokenId> seq(n, 0);
    while (true) {
      for (const auto& tree : trees) {
        double score = tree_probability_pi(field, tree);
        for (std::size_t i = 0; i < n; ++i) {
          score += token_log_probs.at(tree.leaf_vertices[i], seq[i]);
        }
        if (!found || score > best.log_joint) {
          if (found) best.runner_up = std::max(best.runner_up, best.log_joint);
          best.log_joint = score;
          best.tokens = seq;
          best.tree = tree;
          found = true;
        } else {
          best.runner_up = std::max(best.runner_up, score);
        }
      }
      // Next sequence in lexicographic order.
      std::size_t i = n;
      while (i > 0 && static_cast<std::size_t>(seq[i - 1]) + 1 == vocab) {
        seq[i - 1] = 0;
        --i;
      }
      if (i == 0) break;
      ++seq[i - 1];
    }
  }
  if (!found) throw NoDecodeError("no internal tree within max_len");
  return best;
}

TreeOptimum best_tree(const SplitField& field, const EmissionGrid& emissions,
                      std::size_t n_tokens) {
  TreeOptimum best;
  best.log_joint = kLogZero;
  best.runner_up = kLogZero;
  bool found = false;
  for (const auto& tree : enumerate_internal_trees(field.topology(), n_tokens)) {
    const double score = tree_joint(field, emissions, tree);
    if (!found || score > best.log_joint) {
      if (found) best.runner_up = std::max(best.runner_up, best.log_joint);
      best.log_joint = score;
      best.tree = tree;
      found = true;
    } else {
      best.runner_up = std::max(best.runner_up, score);
    }
  }
  if (!found) throw NoDecodeError("no internal tree has that many leaves");
  return best;
}

}  // namespace ctree::oracle
