#pragma once

// Reverse-mode differentiation over small dense matrices. Every value on the
// tape is a row-major rows x cols tensor of doubles; vectors are 1 x n or
// n x 1. Nodes are appended in evaluation order, so replaying them backwards
// visits each node after all of its consumers.

#include <cstddef>
#include <cstdint>
#include <algorithm>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ctree::ad {

class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool same_shape(const Tensor& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// A named trainable tensor. Rank 1 shapes behave as 1 x n on the tape.
struct Parameter {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> values;
  std::vector<double> grad;
  std::size_t index = 0;  // position inside its ParameterSet

  std::size_t rows() const { return shape.size() == 2 ? shape[0] : 1; }
  std::size_t cols() const { return shape.empty() ? 1 : shape.back(); }
  std::size_t size() const { return values.size(); }
  void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
};

class ParameterSet {
 public:
  // Registers a zero-initialized parameter and returns its index.
  std::size_t add(std::string name, std::vector<std::size_t> shape);

  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;

  // Throws DomainError when absent.
  Parameter& find(std::string_view name);
  const Parameter& find(std::string_view name) const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad();

 private:
  std::vector<Parameter> params_;
};

// Per-parameter gradient buffers laid out like a ParameterSet.
using Gradients = std::vector<std::vector<double>>;

Gradients zero_gradients(const ParameterSet& params);

class Tape;

// Handle to a node on a tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  double scalar() const { return value()[0]; }
  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t self)>;

  Var constant(Tensor value);
  Var parameter(const Parameter& p);

  // Records a node computed from `inputs`; `backward` reads grad(self) and
  // accumulates into the inputs through grad_ref().
  Var record(Tensor value, std::vector<std::size_t> inputs, Backward backward);

  // Seeds d(output)/d(output) = 1 for a 1 x 1 output and propagates.
  void backward(Var output);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  const Tensor& grad(Var v) const { return nodes_[v.id()].grad; }
  // Gradient accumulator of a node, allocated on first use.
  Tensor& grad_ref(std::size_t id);
  bool has_grad(std::size_t id) const { return !nodes_[id].grad_empty; }
  std::span<const std::size_t> inputs(std::size_t id) const {
    return nodes_[id].inputs;
  }

  std::size_t size() const { return nodes_.size(); }

  // Adds the gradients of every parameter leaf into `out`.
  void accumulate_gradients(Gradients& out) const;

  // Hash of which side of zero every relu input fell on. Two evaluations
  // with different signatures lie on different linear pieces, so a central
  // difference between them is not a derivative estimate.
  std::uint64_t kink_signature() const { return kink_signature_; }
  void mix_kink_signature(std::uint64_t bits);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool grad_empty = true;
    std::vector<std::size_t> inputs;
    Backward backward;
    std::size_t parameter = static_cast<std::size_t>(-1);
  };
  std::vector<Node> nodes_;
  std::uint64_t kink_signature_ = 0xcbf29ce484222325ull;
};

// Elementwise arithmetic; shapes must match unless stated.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var halve(Var a);
Var neg(Var a);
// a + b where b is 1 x cols, added to every row.
Var add_row(Var a, Var b);

Var matmul(Var a, Var b);
// a * b^T.
Var matmul_transposed(Var a, Var b);
// x W + b with b broadcast over rows.
Var affine(Var x, Var w, Var b);

Var relu(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
Var log(Var a);
// Normalizes each row to zero mean and unit variance (no gain or bias).
Var layernorm_rows(Var a, double eps = 1e-5);
Var softmax_rows(Var a);
Var log_softmax_rows(Var a);

// out[i] = log sum_j exp(flat(a)[groups[i][j]]) as a groups.size() x 1 column.
// Empty groups and groups of log-zero entries produce log-zero and pass no
// gradient.
using IndexGroups = std::vector<std::vector<std::size_t>>;
Var logsumexp_groups(Var a, std::shared_ptr<const IndexGroups> groups);
Var logsumexp_groups(Var a, IndexGroups groups);
// Log-sum-exp of all entries, 1 x 1.
Var logsumexp_all(Var a);

// Rows of a selected by index (repeats allowed).
Var gather_rows(Var a, std::vector<std::size_t> rows);
// Entries of a (flattened row-major) as a k x 1 column.
Var gather(Var a, std::vector<std::size_t> flat_indices);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(Var a, Var b);
Var slice_cols(Var a, std::size_t begin, std::size_t count);
Var slice_rows(Var a, std::size_t begin, std::size_t count);
// Row 2i from a, row 2i+1 from b.
Var interleave_rows(Var a, Var b);
// A 1 x c row repeated n times.
Var repeat_rows(Var a, std::size_t n);
Var mean_rows(Var a);
Var sum(Var a);
// g * a + (1 - g) * b.
Var gate_blend(Var g, Var a, Var b);

}  // namespace ctree::ad
