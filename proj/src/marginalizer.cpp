#include "ctree/marginalizer.hpp"

#include <string>

#include "ctree/error.hpp"
#include "ctree/log_math.hpp"

namespace ctree {

TokenLogProbs::TokenLogProbs(std::size_t vertex_count, std::size_t vocab_size,
                             std::vector<double> values)
    : vertex_count_(vertex_count),
      vocab_size_(vocab_size),
      values_(std::move(values)) {
  if (values_.size() != vertex_count_ * vocab_size_) {
    throw DomainError("TokenLogProbs: expected " +
                      std::to_string(vertex_count_ * vocab_size_) +
                      " values, got " + std::to_string(values_.size()));
  }
}

EmissionGrid::EmissionGrid(std::size_t vertex_count, std::size_t length,
                           std::vector<double> values)
    : vertex_count_(vertex_count), length_(length), values_(std::move(values)) {
  if (values_.size() != vertex_count_ * length_) {
    throw DomainError("EmissionGrid: expected " +
                      std::to_string(vertex_count_ * length_) +
                      " values, got " + std::to_string(values_.size()));
  }
}

EmissionGrid EmissionGrid::gather(const TokenLogProbs& table,
                                  std::span<const TokenId> tokens) {
  const std::size_t m = table.vertex_count();
  const std::size_t n = tokens.size();
  for (TokenId x : tokens) {
    if (x < 0 || static_cast<std::size_t>(x) >= table.vocab_size()) {
      throw DomainError("token id " + std::to_string(x) +
                        " is outside the vocabulary");
    }
  }
  std::vector<double> values(m * n);
  for (std::size_t s = 0; s < m; ++s) {
    const VertexId v = VertexId::from_slot(s);
    for (std::size_t i = 0; i < n; ++i) {
      values[s * n + i] = table.at(v, tokens[i]);
    }
  }
  return EmissionGrid(m, n, std::move(values));
}

namespace {

void check_inputs(const SplitField& field, const EmissionGrid& emissions,
                  std::size_t n_tokens) {
  if (n_tokens == 0) throw DomainError("n_tokens must be positive");
  if (emissions.vertex_count() != field.topology().vertex_count()) {
    throw DomainError("emission grid does not match the topology");
  }
  if (emissions.length() < n_tokens) {
    throw DomainError("emission grid covers " +
                      std::to_string(emissions.length()) + " positions, " +
                      std::to_string(n_tokens) + " requested");
  }
}

// One DP step: next[v] = e(v, n) + log m(v) + logsumexp over predecessors.
void advance_column(const SplitField& field, const EmissionGrid& emissions,
                    std::size_t n, std::span<const double> prev,
                    std::span<double> next) {
  const auto& topology = field.topology();
  std::vector<double> terms;
  for (std::size_t s = 0; s < next.size(); ++s) {
    const VertexId v = VertexId::from_slot(s);
    terms.clear();
    for (VertexId u : topology.incoming(v)) {
      if (!is_log_zero(prev[u.slot()])) terms.push_back(prev[u.slot()]);
    }
    const double incoming = log_sum_exp(terms);
    next[s] = is_log_zero(incoming)
                  ? kLogZero
                  : emissions.at(v, n) + field.log_m(v) + incoming;
  }
}

void first_column(const SplitField& field, const EmissionGrid& emissions,
                  std::span<double> column) {
  const auto& topology = field.topology();
  for (std::size_t s = 0; s < column.size(); ++s) {
    const VertexId v = VertexId::from_slot(s);
    column[s] = topology.in_left_boundary(v)
                    ? emissions.at(v, 0) + field.log_m(v)
                    : kLogZero;
  }
}

double right_boundary_sum(const CompleteTreeTopology& topology,
                          std::span<const double> column) {
  std::vector<double> terms;
  for (VertexId v : topology.right_boundary()) terms.push_back(column[v.slot()]);
  return log_sum_exp(terms);
}

}  // namespace

MarginalTable marginal_log_likelihood(const SplitField& field,
                                      const EmissionGrid& emissions,
                                      std::size_t n_tokens) {
  check_inputs(field, emissions, n_tokens);
  const auto& topology = field.topology();
  const std::size_t m = topology.vertex_count();

  MarginalTable table;
  table.topology_ = &topology;
  table.vertex_count_ = m;
  table.length_ = n_tokens;
  table.cells_.assign(m * n_tokens, kLogZero);
  table.reached_.assign(m * n_tokens, false);

  std::span<double> cells(table.cells_);
  first_column(field, emissions, cells.subspan(0, m));
  for (VertexId v : topology.left_boundary()) table.reached_[v.slot()] = true;

  for (std::size_t n = 1; n < n_tokens; ++n) {
    advance_column(field, emissions, n, cells.subspan((n - 1) * m, m),
                   cells.subspan(n * m, m));
    for (std::size_t s = 0; s < m; ++s) {
      for (VertexId u : topology.incoming(VertexId::from_slot(s))) {
        if (table.reached_[(n - 1) * m + u.slot()]) {
          table.reached_[n * m + s] = true;
          break;
        }
      }
    }
  }
  table.log_marginal_ =
      right_boundary_sum(topology, cells.subspan((n_tokens - 1) * m, m));
  return table;
}

double marginal_log_likelihood_rolling(const SplitField& field,
                                       const EmissionGrid& emissions,
                                       std::size_t n_tokens) {
  check_inputs(field, emissions, n_tokens);
  const std::size_t m = field.topology().vertex_count();
  std::vector<double> prev(m);
  std::vector<double> next(m);
  first_column(field, emissions, prev);
  for (std::size_t n = 1; n < n_tokens; ++n) {
    advance_column(field, emissions, n, prev, next);
    prev.swap(next);
  }
  return right_boundary_sum(field.topology(), prev);
}

std::vector<double> prefix_marginals(const MarginalTable& table) {
  std::vector<double> out;
  out.reserve(table.length_);
  const std::span<const double> cells(table.cells_);
  for (std::size_t n = 0; n < table.length_; ++n) {
    out.push_back(right_boundary_sum(
        *table.topology_, cells.subspan(n * table.vertex_count_,
                                        table.vertex_count_)));
  }
  return out;
}

}  // namespace ctree
