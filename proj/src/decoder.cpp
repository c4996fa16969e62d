#include "ctree/decoder.hpp"

#include <algorithm>
#include <string>

#include "ctree/error.hpp"
#include "ctree/log_math.hpp"

namespace ctree {

namespace {

// Max-product lattice over columns with back-pointers.
struct ViterbiLattice {
  std::size_t vertex_count = 0;
  std::vector<std::vector<double>> columns;
  std::vector<std::vector<VertexId>> back;  // back[n][v]; unused for n == 0

  void start(const CompleteTreeTopology& topology,
             std::span<const double> weights) {
    vertex_count = topology.vertex_count();
    std::vector<double> col(vertex_count, kLogZero);
    for (VertexId v : topology.left_boundary()) col[v.slot()] = weights[v.slot()];
    columns.push_back(std::move(col));
    back.emplace_back(vertex_count);
  }

  // Appends column n = weights[v] + max over predecessors of column n-1.
  void extend(const CompleteTreeTopology& topology,
              std::span<const double> weights) {
    const std::vector<double>& prev = columns.back();
    std::vector<double> col(vertex_count, kLogZero);
    std::vector<VertexId> ptr(vertex_count);
    for (std::size_t s = 0; s < vertex_count; ++s) {
      const VertexId v = VertexId::from_slot(s);
      double best = kLogZero;
      VertexId arg;
      for (VertexId u : topology.incoming(v)) {  // ascending index
        if (prev[u.slot()] > best) {
          best = prev[u.slot()];
          arg = u;
        }
      }
      if (!is_log_zero(best)) {
        col[s] = weights[s] + best;
        ptr[s] = arg;
      }
    }
    columns.push_back(std::move(col));
    back.push_back(std::move(ptr));
  }

  // Best right-boundary cell of column n; lowest index wins ties.
  std::pair<double, VertexId> best_complete(const CompleteTreeTopology& topology,
                                            std::size_t n) const {
    std::vector<VertexId> candidates(topology.right_boundary().begin(),
                                     topology.right_boundary().end());
    std::sort(candidates.begin(), candidates.end());
    double best = kLogZero;
    VertexId arg;
    for (VertexId v : candidates) {
      if (columns[n][v.slot()] > best) {
        best = columns[n][v.slot()];
        arg = v;
      }
    }
    return {best, arg};
  }

  std::vector<VertexId> backtrace(std::size_t last_column, VertexId end) const {
    std::vector<VertexId> leaves(last_column + 1);
    VertexId v = end;
    for (std::size_t n = last_column; n > 0; --n) {
      leaves[n] = v;
      v = back[n][v.slot()];
    }
    leaves[0] = v;
    return leaves;
  }
};

}  // namespace

DecodeResult decode_joint(const SplitField& field,
                          const TokenLogProbs& token_log_probs,
                          std::optional<std::size_t> max_len) {
  const auto& topology = field.topology();
  const std::size_t m = topology.vertex_count();
  if (token_log_probs.vertex_count() != m) {
    throw DomainError("token distribution table does not match the topology");
  }
  if (token_log_probs.vocab_size() == 0) throw DomainError("empty vocabulary");
  const std::size_t cap = max_len.value_or(topology.max_leaves());
  if (cap == 0) throw DomainError("max_len must be positive");

  // Best token per vertex and its weight log p(x*|v) + log m(v).
  std::vector<TokenId> best_token(m, 0);
  std::vector<double> weight(m);
  for (std::size_t s = 0; s < m; ++s) {
    const VertexId v = VertexId::from_slot(s);
    auto row = token_log_probs.row(v);
    std::size_t arg = 0;
    for (std::size_t x = 1; x < row.size(); ++x) {
      if (row[x] > row[arg]) arg = x;
    }
    best_token[s] = static_cast<TokenId>(arg);
    weight[s] = row[arg] + field.log_m(v);
  }

  ViterbiLattice lattice;
  lattice.start(topology, weight);
  double best = kLogZero;
  std::size_t best_column = 0;
  VertexId best_end;
  for (std::size_t n = 0;; ++n) {
    const auto [complete, end] = lattice.best_complete(topology, n);
    if (complete > best) {
      best = complete;
      best_column = n;
      best_end = end;
    }
    if (n + 1 >= cap) break;
    lattice.extend(topology, weight);
    const auto& frontier = lattice.columns.back();
    const double frontier_max =
        *std::max_element(frontier.begin(), frontier.end());
    // Every later cell is a frontier cell times factors <= 1.
    if (is_log_zero(frontier_max) || frontier_max < best) break;
  }
  if (is_log_zero(best)) {
    throw NoDecodeError("no complete tree with non-zero probability within " +
                        std::to_string(cap) + " leaves");
  }

  DecodeResult result;
  const auto leaves = lattice.backtrace(best_column, best_end);
  result.tree = InternalTree::from_leaves(topology, leaves);
  for (VertexId v : leaves) result.tokens.push_back(best_token[v.slot()]);
  result.log_joint = best;
  return result;
}

DecodeResult best_tree_given_tokens(const SplitField& field,
                                    const EmissionGrid& emissions,
                                    std::size_t n_tokens) {
  const auto& topology = field.topology();
  const std::size_t m = topology.vertex_count();
  if (n_tokens == 0) throw DomainError("n_tokens must be positive");
  if (n_tokens > topology.max_leaves()) {
    throw DomainError(std::to_string(n_tokens) + " tokens exceed the " +
                      std::to_string(topology.max_leaves()) +
                      " leaves of a depth-" + std::to_string(topology.depth()) +
                      " tree");
  }
  if (emissions.vertex_count() != m || emissions.length() < n_tokens) {
    throw DomainError("emission grid does not cover the request");
  }

  ViterbiLattice lattice;
  std::vector<double> weight(m);
  auto fill_weights = [&](std::size_t n) {
    for (std::size_t s = 0; s < m; ++s) {
      const VertexId v = VertexId::from_slot(s);
      weight[s] = emissions.at(v, n) + field.log_m(v);
    }
  };
  fill_weights(0);
  lattice.start(topology, weight);
  for (std::size_t n = 1; n < n_tokens; ++n) {
    fill_weights(n);
    lattice.extend(topology, weight);
  }
  const auto [best, end] = lattice.best_complete(topology, n_tokens - 1);
  if (is_log_zero(best)) {
    throw NoDecodeError("sentence has zero probability under every tree");
  }
  DecodeResult result;
  const auto leaves = lattice.backtrace(n_tokens - 1, end);
  result.tree = InternalTree::from_leaves(topology, leaves);
  result.log_joint = best;
  return result;
}

double score_joint(const SplitField& field, const TokenLogProbs& token_log_probs,
                   const InternalTree& tree, std::span<const TokenId> tokens) {
  if (tokens.size() != tree.leaf_count()) {
    throw DomainError("score_joint: token/leaf count mismatch");
  }
  double total = 0.0;
  for (std::size_t n = 0; n < tokens.size(); ++n) {
    const VertexId v = tree.leaf_vertices[n];
    const double w = token_log_probs.at(v, tokens[n]) + field.log_m(v);
    total = n == 0 ? w : w + total;
  }
  return total;
}

double score_joint(const SplitField& field, const EmissionGrid& emissions,
                   const InternalTree& tree) {
  if (emissions.length() < tree.leaf_count()) {
    throw DomainError("score_joint: emission grid shorter than the tree");
  }
  double total = 0.0;
  for (std::size_t n = 0; n < tree.leaf_count(); ++n) {
    const VertexId v = tree.leaf_vertices[n];
    const double w = emissions.at(v, n) + field.log_m(v);
    total = n == 0 ? w : w + total;
  }
  return total;
}

}  // namespace ctree
