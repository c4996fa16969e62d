#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ctree/prior.hpp"
#include "ctree/topology.hpp"

namespace ctree {

using TokenId = int;

// Per-vertex log distribution over a vocabulary: at(v, x) = log p(x | v).
class TokenLogProbs {
 public:
  TokenLogProbs() = default;
  TokenLogProbs(std::size_t vertex_count, std::size_t vocab_size,
                std::vector<double> values);

  std::size_t vertex_count() const { return vertex_count_; }
  std::size_t vocab_size() const { return vocab_size_; }
  double at(VertexId v, TokenId x) const {
    return values_[v.slot() * vocab_size_ + static_cast<std::size_t>(x)];
  }
  std::span<const double> row(VertexId v) const {
    return {values_.data() + v.slot() * vocab_size_, vocab_size_};
  }

 private:
  std::size_t vertex_count_ = 0;
  std::size_t vocab_size_ = 0;
  std::vector<double> values_;
};

// Emission log-probabilities of one observed sequence: at(v, n) =
// log p(x_n | v), with n zero-based.
class EmissionGrid {
 public:
  EmissionGrid() = default;
  EmissionGrid(std::size_t vertex_count, std::size_t length,
               std::vector<double> values);

  // Gathers the columns of `table` for the observed tokens.
  static EmissionGrid gather(const TokenLogProbs& table,
                             std::span<const TokenId> tokens);

  std::size_t vertex_count() const { return vertex_count_; }
  std::size_t length() const { return length_; }
  double at(VertexId v, std::size_t n) const {
    return values_[v.slot() * length_ + n];
  }

 private:
  std::size_t vertex_count_ = 0;
  std::size_t length_ = 0;
  std::vector<double> values_;
};

// The prefix table log M(v, n): log-probability that the n-th token is emitted
// at v, summed over all partial trees. Columns are zero-based.
class MarginalTable {
 public:
  std::size_t vertex_count() const { return vertex_count_; }
  std::size_t length() const { return length_; }
  double log_M(VertexId v, std::size_t n) const {
    return cells_[n * vertex_count_ + v.slot()];
  }
  // Whether some walk of n+1 transitions from the left boundary ends at v,
  // regardless of parameter values.
  bool reached(VertexId v, std::size_t n) const {
    return reached_[n * vertex_count_ + v.slot()];
  }
  double log_marginal() const { return log_marginal_; }

 private:
  friend MarginalTable marginal_log_likelihood(const SplitField&,
                                               const EmissionGrid&,
                                               std::size_t);
  friend std::vector<double> prefix_marginals(const MarginalTable&);

  const CompleteTreeTopology* topology_ = nullptr;
  std::size_t vertex_count_ = 0;
  std::size_t length_ = 0;
  std::vector<double> cells_;  // column-major: one column per position
  std::vector<bool> reached_;
  double log_marginal_ = 0.0;
};

// log p(x_1..x_N) summed over every internal tree with N leaves. Lengths
// above 2^depth have probability zero (log_marginal() == kLogZero). Throws
// DomainError when n_tokens is 0 or exceeds the grid.
MarginalTable marginal_log_likelihood(const SplitField& field,
                                      const EmissionGrid& emissions,
                                      std::size_t n_tokens);

// Same value as marginal_log_likelihood(...).log_marginal() keeping only two
// columns in memory.
double marginal_log_likelihood_rolling(const SplitField& field,
                                       const EmissionGrid& emissions,
                                       std::size_t n_tokens);

// Entry n is the log-marginal of the prefix of length n+1.
std::vector<double> prefix_marginals(const MarginalTable& table);

}  // namespace ctree
