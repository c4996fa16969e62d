#include "ctree/autodiff.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "ctree/error.hpp"
#include "ctree/log_math.hpp"

namespace ctree::ad {

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw DomainError("tensor data size does not match its shape");
  }
}

std::size_t ParameterSet::add(std::string name, std::vector<std::size_t> shape) {
  if (shape.empty() || shape.size() > 2) {
    throw DomainError("parameter '" + name + "' must have rank 1 or 2");
  }
  const std::size_t n = std::accumulate(shape.begin(), shape.end(),
                                        std::size_t{1}, std::multiplies<>());
  Parameter p;
  p.name = std::move(name);
  p.shape = std::move(shape);
  p.values.assign(n, 0.0);
  p.grad.assign(n, 0.0);
  p.index = params_.size();
  params_.push_back(std::move(p));
  return params_.size() - 1;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.size();
  return n;
}

Parameter& ParameterSet::find(std::string_view name) {
  for (auto& p : params_) {
    if (p.name == name) return p;
  }
  throw DomainError("no parameter named '" + std::string(name) + "'");
}

const Parameter& ParameterSet::find(std::string_view name) const {
  return const_cast<ParameterSet*>(this)->find(name);
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

Gradients zero_gradients(const ParameterSet& params) {
  Gradients g;
  g.reserve(params.size());
  for (const auto& p : params) g.emplace_back(p.size(), 0.0);
  return g;
}

const Tensor& Var::value() const { return tape_->value(id_); }

Var Tape::constant(Tensor value) { return record(std::move(value), {}, {}); }

Var Tape::parameter(const Parameter& p) {
  Var v = record(Tensor(p.rows(), p.cols(), p.values), {}, {});
  nodes_[v.id()].parameter = p.index;
  return v;
}

Var Tape::record(Tensor value, std::vector<std::size_t> inputs,
                 Backward backward) {
  Node node;
  node.value = std::move(value);
  node.inputs = std::move(inputs);
  node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Tensor& Tape::grad_ref(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad_empty) {
    n.grad = Tensor(n.value.rows(), n.value.cols());
    n.grad_empty = false;
  }
  return n.grad;
}

void Tape::backward(Var output) {
  if (output.tape() != this || output.value().size() != 1) {
    throw DomainError("backward needs a scalar output on this tape");
  }
  grad_ref(output.id())[0] = 1.0;
  for (std::size_t id = output.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (n.grad_empty || !n.backward) continue;
    n.backward(*this, id);
  }
}

void Tape::accumulate_gradients(Gradients& out) const {
  for (const Node& n : nodes_) {
    if (n.parameter == static_cast<std::size_t>(-1) || n.grad_empty) continue;
    auto& dst = out.at(n.parameter);
    const auto src = n.grad.data();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
  }
}

namespace {

Tape& same_tape(Var a, Var b) {
  if (a.tape() == nullptr || a.tape() != b.tape()) {
    throw DomainError("operands live on different tapes");
  }
  return *a.tape();
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw DomainError(std::string(op) + ": shape mismatch (" +
                      std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                      " vs " + std::to_string(b.rows()) + "x" +
                      std::to_string(b.cols()) + ")");
  }
}

// Elementwise unary op given f(x) and df/dx expressed through (x, y).
template <typename F, typename D>
Var unary(Var a, F f, D dfdx) {
  Tape& t = *a.tape();
  const Tensor& x = a.value();
  Tensor y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  const std::size_t ia = a.id();
  return t.record(std::move(y), {ia}, [ia, dfdx](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad_ref(self);
    const Tensor& xv = tp.value(ia);
    const Tensor& yv = tp.value(self);
    Tensor& ga = tp.grad_ref(ia);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (g[i] != 0.0) ga[i] += g[i] * dfdx(xv[i], yv[i]);
    }
  });
}

}  // namespace

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require_same_shape(a.value(), b.value(), "add");
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(std::move(y), {ia, ib}, [ia, ib](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad_ref(self);
    Tensor& ga = tp.grad_ref(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    Tensor& gb = tp.grad_ref(ib);
    for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
  });
}

Var sub(Var a, Var b) { return add(a, neg(b)); }

Var mul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require_same_shape(a.value(), b.value(), "mul");
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(std::move(y), {ia, ib}, [ia, ib](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad_ref(self);
    const Tensor& av = tp.value(ia);
    const Tensor& bv2 = tp.value(ib);
    Tensor& ga = tp.grad_ref(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv2[i];
    Tensor& gb = tp.grad_ref(ib);
    for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
  });
}

Var scale(Var a, double s) {
  return unary(a, [s](double x) { return s * x; },
               [s](double, double) { return s; });
}

Var halve(Var a) { return scale(a, 0.5); }

Var neg(Var a) { return scale(a, -1.0); }

Var add_row(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (bv.rows() != 1 || bv.cols() != av.cols()) {
    throw DomainError("add_row: bias must be 1 x " + std::to_string(av.cols()));
  }
  Tensor y = av;
  for (std::size_t r = 0; r < y.rows(); ++r) {
    for (std::size_t c = 0; c < y.cols(); ++c) y(r, c) += bv[c];
  }
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(std::move(y), {ia, ib}, [ia, ib](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad_ref(self);
    Tensor& ga = tp.grad_ref(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    Tensor& gb = tp.grad_ref(ib);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      for (std::size_t c = 0; c < g.cols(); ++c) gb[c] += g(r, c);
    }
  });
}

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw DomainError("matmul: inner dimensions " + std::to_string(av.cols()) +
                      " and " + std::to_string(bv.rows()) + " differ");
  }
  const std::size_t n = av.rows(), k = av.cols(), m = bv.cols();
  Tensor y(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av(i, p);
      if (aip == 0.0) continue;
      for (std::size_t j = 0; j < m; ++j) y(i, j) += aip * bv(p, j);
    }
  }
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(std::move(y), {ia, ib}, [ia, ib](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad_ref(self);
    const Tensor& A = tp.value(ia);
    const Tensor& B = tp.value(ib);
    const std::size_t n2 = A.rows(), k2 = A.cols(), m2 = B.cols();
    Tensor& gA = tp.grad_ref(ia);
    for (std::size_t i = 0; i < n2; ++i) {
      for (std::size_t p = 0; p < k2; ++p) {
        double acc = 0.0;
        for (std::size_t j = 0; j < m2; ++j) acc += g(i, j) * B(p, j);
        gA(i, p) += acc;
      }
    }
    Tensor& gB = tp.grad_ref(ib);
    for (std::size_t i = 0; i < n2; ++i) {
      for (std::size_t p = 0; p < k2; ++p) {
        const double aip = A(i, p);
        if (aip == 0.0) continue;
        for (std::size_t j = 0; j < m2; ++j) gB(p, j) += aip * g(i, j);
      }
    }
  });
}

Var matmul_transposed(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.cols()) {
    throw DomainError("matmul_transposed: column counts differ");
  }
  const std::size_t n = av.rows(), k = av.cols(), m = bv.rows();
  Tensor y(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += av(i, p) * bv(j, p);
      y(i, j) = acc;
    }
  }
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(std::move(y), {ia, ib}, [ia, ib](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad_ref(self);
    const Tensor& A = tp.value(ia);
    const Tensor& B = tp.value(ib);
    const std::size_t n2 = A.rows(), k2 = A.cols(), m2 = B.rows();
    Tensor& gA = tp.grad_ref(ia);
    Tensor& gB = tp.grad_ref(ib);
    for (std::size_t i = 0; i < n2; ++i) {
      for (std::size_t j = 0; j < m2; ++j) {
        const double gij = g(i, j);
        if (gij == 0.0) continue;
        for (std::size_t p = 0; p < k2; ++p) {
          gA(i, p) += gij * B(j, p);
          gB(j, p) += gij * A(i, p);
        }
      }
    }
  });
}

Var affine(Var x, Var w, Var b) { return add_row(matmul(x, w), b); }

void Tape::mix_kink_signature(std::uint64_t bits) {
  kink_signature_ = (kink_signature_ ^ bits) * 0x100000001b3ull;
}

Var relu(Var a) {
  std::uint64_t word = 0;
  std::size_t filled = 0;
  for (double x : a.value().data()) {
    word = (word << 1) | (x > 0.0 ? 1u : 0u);
    if (++filled == 64) {
      a.tape()->mix_kink_signature(word);
      word = 0;
      filled = 0;
    }
  }
  a.tape()->mix_kink_signature(word ^ (filled << 1));
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var tanh(Var a) {
  return unary(a, [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var log(Var a) {
  return unary(a, [](double x) { return std::log(x); },
               [](double x, double) { return 1.0 / x; });
}

Var layernorm_rows(Var a, double eps) {
  Tape& t = *a.tape();
  const Tensor& x = a.value();
  const std::size_t rows = x.rows(), cols = x.cols();
  Tensor y(rows, cols);
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double mean = 0.0;
    for (std::size_t c = 0; c < cols; ++c) mean += x(r, c);
    mean /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double d = x(r, c) - mean;
      var += d * d;
    }
    var /= static_cast<double>(cols);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < cols; ++c) y(r, c) = (x(r, c) - mean) * inv_std[r];
  }
  const std::size_t ia = a.id();
  return t.record(std::move(y), {ia},
                  [ia, inv_std = std::move(inv_std)](Tape& tp, std::size_t self) {
                    const Tensor& g = tp.grad_ref(self);
                    const Tensor& yv = tp.value(self);
                    Tensor& ga = tp.grad_ref(ia);
                    const std::size_t cols2 = g.cols();
                    const double inv_n = 1.0 / static_cast<double>(cols2);
                    for (std::size_t r = 0; r < g.rows(); ++r) {
                      double mean_g = 0.0, mean_gy = 0.0;
                      for (std::size_t c = 0; c < cols2; ++c) {
                        mean_g += g(r, c);
                        mean_gy += g(r, c) * yv(r, c);
                      }
                      mean_g *= inv_n;
                      mean_gy *= inv_n;
                      for (std::size_t c = 0; c < cols2; ++c) {
                        ga(r, c) += inv_std[r] *
                                    (g(r, c) - mean_g - yv(r, c) * mean_gy);
                      }
                    }
                  });
}

Var log_softmax_rows(Var a) {
  Tape& t = *a.tape();
  const Tensor& x = a.value();
  Tensor y(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const double lse = log_sum_exp(x.row(r));
    for (std::size_t c = 0; c < x.cols(); ++c) y(r, c) = x(r, c) - lse;
  }
  const std::size_t ia = a.id();
  return t.record(std::move(y), {ia}, [ia](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad_ref(self);
    const Tensor& yv = tp.value(self);
    Tensor& ga = tp.grad_ref(ia);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      double total = 0.0;
      for (std::size_t c = 0; c < g.cols(); ++c) total += g(r, c);
      for (std::size_t c = 0; c < g.cols(); ++c) {
        ga(r, c) += g(r, c) - std::exp(yv(r, c)) * total;
      }
    }
  });
}

Var softmax_rows(Var a) {
  Tape& t = *a.tape();
  const Tensor& x = a.value();
  Tensor y(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const double lse = log_sum_exp(x.row(r));
    for (std::size_t c = 0; c < x.cols(); ++c) y(r, c) = std::exp(x(r, c) - lse);
  }
  const std::size_t ia = a.id();
  return t.record(std::move(y), {ia}, [ia](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad_ref(self);
    const Tensor& s = tp.value(self);
    Tensor& ga = tp.grad_ref(ia);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < g.cols(); ++c) dot += g(r, c) * s(r, c);
      for (std::size_t c = 0; c < g.cols(); ++c) {
        ga(r, c) += s(r, c) * (g(r, c) - dot);
      }
    }
  });
}

Var logsumexp_groups(Var a, std::shared_ptr<const IndexGroups> groups) {
  Tape& t = *a.tape();
  const Tensor& x = a.value();
  Tensor y(groups->size(), 1);
  std::vector<double> terms;
  for (std::size_t i = 0; i < groups->size(); ++i) {
    terms.clear();
    for (std::size_t j : (*groups)[i]) {
      if (j >= x.size()) throw DomainError("logsumexp_groups: index out of range");
      terms.push_back(x[j]);
    }
    y[i] = log_sum_exp(terms);
  }
  const std::size_t ia = a.id();
  return t.record(std::move(y), {ia},
                  [ia, groups = std::move(groups)](Tape& tp, std::size_t self) {
                    const Tensor& g = tp.grad_ref(self);
                    const Tensor& out = tp.value(self);
                    const Tensor& xv = tp.value(ia);
                    Tensor& ga = tp.grad_ref(ia);
                    for (std::size_t i = 0; i < groups->size(); ++i) {
                      if (g[i] == 0.0 || is_log_zero(out[i])) continue;
                      for (std::size_t j : (*groups)[i]) {
                        if (is_log_zero(xv[j])) continue;
                        ga[j] += g[i] * std::exp(xv[j] - out[i]);
                      }
                    }
                  });
}

Var logsumexp_groups(Var a, IndexGroups groups) {
  return logsumexp_groups(
      a, std::make_shared<const IndexGroups>(std::move(groups)));
}

Var logsumexp_all(Var a) {
  std::vector<std::size_t> all(a.value().size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return logsumexp_groups(a, IndexGroups{std::move(all)});
}

Var gather_rows(Var a, std::vector<std::size_t> rows) {
  Tape& t = *a.tape();
  const Tensor& x = a.value();
  Tensor y(rows.size(), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= x.rows()) throw DomainError("gather_rows: row out of range");
    for (std::size_t c = 0; c < x.cols(); ++c) y(i, c) = x(rows[i], c);
  }
  const std::size_t ia = a.id();
  return t.record(std::move(y), {ia},
                  [ia, rows = std::move(rows)](Tape& tp, std::size_t self) {
                    const Tensor& g = tp.grad_ref(self);
                    Tensor& ga = tp.grad_ref(ia);
                    for (std::size_t i = 0; i < rows.size(); ++i) {
                      for (std::size_t c = 0; c < g.cols(); ++c) {
                        ga(rows[i], c) += g(i, c);
                      }
                    }
                  });
}

Var gather(Var a, std::vector<std::size_t> flat_indices) {
  Tape& t = *a.tape();
  const Tensor& x = a.value();
  Tensor y(flat_indices.size(), 1);
  for (std::size_t i = 0; i < flat_indices.size(); ++i) {
    if (flat_indices[i] >= x.size()) throw DomainError("gather: index out of range");
    y[i] = x[flat_indices[i]];
  }
  const std::size_t ia = a.id();
  return t.record(std::move(y), {ia},
                  [ia, idx = std::move(flat_indices)](Tape& tp, std::size_t self) {
                    const Tensor& g = tp.grad_ref(self);
                    Tensor& ga = tp.grad_ref(ia);
                    for (std::size_t i = 0; i < idx.size(); ++i) ga[idx[i]] += g[i];
                  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw DomainError("concat_rows: nothing to concatenate");
  Tape& t = *parts.front().tape();
  const std::size_t cols = parts.front().cols();
  std::size_t rows = 0;
  std::vector<std::size_t> ids;
  for (const Var& p : parts) {
    if (p.tape() != &t) throw DomainError("concat_rows: operands on different tapes");
    if (p.cols() != cols) throw DomainError("concat_rows: column counts differ");
    rows += p.rows();
    ids.push_back(p.id());
  }
  Tensor y(rows, cols);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const auto src = p.value().data();
    std::copy(src.begin(), src.end(), y.data().begin() + offset);
    offset += src.size();
  }
  auto inputs = ids;
  return t.record(std::move(y), std::move(inputs),
                  [ids = std::move(ids)](Tape& tp, std::size_t self) {
                    const Tensor& g = tp.grad_ref(self);
                    std::size_t off = 0;
                    for (std::size_t id : ids) {
                      Tensor& gi = tp.grad_ref(id);
                      for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += g[off + i];
                      off += gi.size();
                    }
                  });
}

Var concat_cols(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rows() != bv.rows()) throw DomainError("concat_cols: row counts differ");
  const std::size_t ca = av.cols(), cb = bv.cols();
  Tensor y(av.rows(), ca + cb);
  for (std::size_t r = 0; r < av.rows(); ++r) {
    for (std::size_t c = 0; c < ca; ++c) y(r, c) = av(r, c);
    for (std::size_t c = 0; c < cb; ++c) y(r, ca + c) = bv(r, c);
  }
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(std::move(y), {ia, ib},
                  [ia, ib, ca, cb](Tape& tp, std::size_t self) {
                    const Tensor& g = tp.grad_ref(self);
                    Tensor& ga = tp.grad_ref(ia);
                    Tensor& gb = tp.grad_ref(ib);
                    for (std::size_t r = 0; r < g.rows(); ++r) {
                      for (std::size_t c = 0; c < ca; ++c) ga(r, c) += g(r, c);
                      for (std::size_t c = 0; c < cb; ++c) gb(r, c) += g(r, ca + c);
                    }
                  });
}

Var slice_cols(Var a, std::size_t begin, std::size_t count) {
  Tape& t = *a.tape();
  const Tensor& x = a.value();
  if (begin + count > x.cols()) throw DomainError("slice_cols: out of range");
  Tensor y(x.rows(), count);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < count; ++c) y(r, c) = x(r, begin + c);
  }
  const std::size_t ia = a.id();
  return t.record(std::move(y), {ia}, [ia, begin](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad_ref(self);
    Tensor& ga = tp.grad_ref(ia);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      for (std::size_t c = 0; c < g.cols(); ++c) ga(r, begin + c) += g(r, c);
    }
  });
}

Var slice_rows(Var a, std::size_t begin, std::size_t count) {
  if (begin + count > a.rows()) throw DomainError("slice_rows: out of range");
  std::vector<std::size_t> rows(count);
  std::iota(rows.begin(), rows.end(), begin);
  return gather_rows(a, std::move(rows));
}

Var interleave_rows(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require_same_shape(a.value(), b.value(), "interleave_rows");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const std::size_t cols = av.cols();
  Tensor y(2 * av.rows(), cols);
  for (std::size_t r = 0; r < av.rows(); ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      y(2 * r, c) = av(r, c);
      y(2 * r + 1, c) = bv(r, c);
    }
  }
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(std::move(y), {ia, ib}, [ia, ib](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad_ref(self);
    Tensor& ga = tp.grad_ref(ia);
    Tensor& gb = tp.grad_ref(ib);
    for (std::size_t r = 0; r < ga.rows(); ++r) {
      for (std::size_t c = 0; c < ga.cols(); ++c) {
        ga(r, c) += g(2 * r, c);
        gb(r, c) += g(2 * r + 1, c);
      }
    }
  });
}

Var repeat_rows(Var a, std::size_t n) {
  if (a.rows() != 1) throw DomainError("repeat_rows: expects a single row");
  return gather_rows(a, std::vector<std::size_t>(n, 0));
}

Var mean_rows(Var a) {
  Tape& t = *a.tape();
  const Tensor& x = a.value();
  if (x.rows() == 0) throw DomainError("mean_rows: no rows");
  Tensor y(1, x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) y[c] += x(r, c);
  }
  const double inv = 1.0 / static_cast<double>(x.rows());
  for (std::size_t c = 0; c < x.cols(); ++c) y[c] *= inv;
  const std::size_t ia = a.id();
  return t.record(std::move(y), {ia}, [ia, inv](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad_ref(self);
    Tensor& ga = tp.grad_ref(ia);
    for (std::size_t r = 0; r < ga.rows(); ++r) {
      for (std::size_t c = 0; c < ga.cols(); ++c) ga(r, c) += g[c] * inv;
    }
  });
}

Var sum(Var a) {
  Tape& t = *a.tape();
  const Tensor& x = a.value();
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) total += x[i];
  const std::size_t ia = a.id();
  return t.record(Tensor(1, 1, total), {ia}, [ia](Tape& tp, std::size_t self) {
    const double g = tp.grad_ref(self)[0];
    Tensor& ga = tp.grad_ref(ia);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
  });
}

Var gate_blend(Var g, Var a, Var b) {
  Tape& t = same_tape(g, a);
  same_tape(a, b);
  require_same_shape(g.value(), a.value(), "gate_blend");
  require_same_shape(a.value(), b.value(), "gate_blend");
  const Tensor& gv = g.value();
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor y(gv.rows(), gv.cols());
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] = gv[i] * av[i] + (1.0 - gv[i]) * bv[i];
  }
  const std::size_t ig = g.id(), ia = a.id(), ib = b.id();
  return t.record(std::move(y), {ig, ia, ib},
                  [ig, ia, ib](Tape& tp, std::size_t self) {
                    const Tensor& d = tp.grad_ref(self);
                    const Tensor& G = tp.value(ig);
                    const Tensor& A = tp.value(ia);
                    const Tensor& B = tp.value(ib);
                    Tensor& dg = tp.grad_ref(ig);
                    for (std::size_t i = 0; i < d.size(); ++i) dg[i] += d[i] * (A[i] - B[i]);
                    Tensor& da = tp.grad_ref(ia);
                    for (std::size_t i = 0; i < d.size(); ++i) da[i] += d[i] * G[i];
                    Tensor& db = tp.grad_ref(ib);
                    for (std::size_t i = 0; i < d.size(); ++i) db[i] += d[i] * (1.0 - G[i]);
                  });
}

}  // namespace ctree::ad
