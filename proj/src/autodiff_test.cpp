#include "ctree/autodiff.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ctree/error.hpp"
#include "ctree/gradcheck.hpp"
#include "ctree/log_math.hpp"

namespace ctree::ad {
namespace {

ParameterSet random_params(std::vector<std::vector<std::size_t>> shapes,
                           std::uint64_t seed) {
  ParameterSet ps;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    auto idx = ps.add("p" + std::to_string(i), shapes[i]);
    for (auto& v : ps[idx].values) v = n(rng);
  }
  return ps;
}

// sum(out * W) for a fixed random W, so every output entry matters.
Var weighted_sum(Var out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Tensor w(out.rows(), out.cols());
  for (auto& x : w.data()) x = n(rng);
  return sum(mul(out, out.tape()->constant(std::move(w))));
}

void expect_gradients_match(ParameterSet& ps,
                            const std::function<Var(Tape&, std::vector<Var>&)>& f,
                            double tol = 1e-6) {
  LossBuilder loss = [&](Tape& tape) {
    std::vector<Var> vars;
    for (const auto& p : ps) vars.push_back(tape.parameter(p));
    return weighted_sum(f(tape, vars), 99);
  };
  GradCheckOptions opts;
  opts.tolerance = tol;
  opts.max_coords_per_tensor = 64;
  auto report = check_gradients(loss, ps, opts);
  EXPECT_TRUE(report.passed) << report.worst_parameter << "[" << report.worst_coordinate
                             << "] analytic " << report.worst_analytic << " numeric "
                             << report.worst_numeric;
  EXPECT_GT(report.coordinates_checked, 0u);
}

TEST(Autodiff, IdentityChainHasUnitGradient) {
  ParameterSet ps;
  ps.add("x", {1});
  ps[0].values[0] = 0.7;
  Tape tape;
  Var x = tape.parameter(ps[0]);
  Var y = scale(scale(x, 1.0), 1.0);
  tape.backward(y);
  EXPECT_DOUBLE_EQ(tape.grad(x)[0], 1.0);
}

TEST(Autodiff, LogSumExpAdjointIsUniformAtEqualInputs) {
  for (std::size_t k : {1u, 2u, 5u}) {
    Tape tape;
    Var a = tape.constant(Tensor(1, k, 0.3));
    Var out = logsumexp_all(a);
    tape.backward(out);
    for (std::size_t i = 0; i < k; ++i) {
      EXPECT_NEAR(tape.grad(a)[i], 1.0 / static_cast<double>(k), 1e-15);
    }
  }
}

TEST(Autodiff, LogSumExpGroupsIgnoresLogZero) {
  Tape tape;
  Var a = tape.constant(Tensor(1, 4, std::vector<double>{0.0, kLogZero, 1.0, kLogZero}));
  Var out = logsumexp_groups(a, IndexGroups{{0, 1, 2}, {1, 3}, {}});
  EXPECT_NEAR(out.value()[0], std::log(1.0 + std::exp(1.0)), 1e-15);
  EXPECT_TRUE(is_log_zero(out.value()[1]));
  EXPECT_TRUE(is_log_zero(out.value()[2]));
  Var s = sum(gather(out, {0}));
  tape.backward(s);
  EXPECT_EQ(tape.grad(a)[1], 0.0);
  EXPECT_EQ(tape.grad(a)[3], 0.0);
  EXPECT_NEAR(tape.grad(a)[0] + tape.grad(a)[2], 1.0, 1e-15);
}

TEST(Autodiff, QuadraticExact) {
  ParameterSet ps;
  ps.add("x", {1});
  ps[0].values[0] = 1.5;
  LossBuilder loss = [&](Tape& tape) {
    Var x = tape.parameter(ps[0]);
    return sum(mul(x, x));
  };
  GradCheckOptions opts;
  opts.tolerance = 1e-9;
  auto report = check_gradients(loss, ps, opts);
  EXPECT_TRUE(report.passed);
  EXPECT_NEAR(report.worst_analytic, 3.0, 1e-12);
}

TEST(Autodiff, ElementwiseOps) {
  auto ps = random_params({{3, 4}, {3, 4}}, 1);
  expect_gradients_match(ps, [](Tape&, std::vector<Var>& v) {
    return add(mul(tanh(v[0]), sigmoid(v[1])), sub(scale(v[0], 0.5), halve(neg(v[1]))));
  });
}

TEST(Autodiff, ReluAwayFromKink) {
  auto ps = random_params({{4, 4}}, 2);
  for (auto& x : ps[0].values) x = (x >= 0 ? 0.1 : -0.1) + x;
  expect_gradients_match(ps, [](Tape&, std::vector<Var>& v) { return relu(v[0]); });
}

TEST(Autodiff, LogOfPositive) {
  auto ps = random_params({{2, 3}}, 3);
  for (auto& x : ps[0].values) x = 0.5 + std::abs(x);
  expect_gradients_match(ps, [](Tape&, std::vector<Var>& v) { return log(v[0]); });
}

TEST(Autodiff, MatrixProducts) {
  auto ps = random_params({{3, 4}, {4, 2}, {2}, {5, 4}}, 4);
  expect_gradients_match(ps, [](Tape&, std::vector<Var>& v) {
    return concat_cols(affine(v[0], v[1], v[2]), matmul_transposed(v[0], v[3]));
  });
  expect_gradients_match(ps, [](Tape&, std::vector<Var>& v) {
    return add_row(matmul(v[0], v[1]), v[2]);
  });
}

TEST(Autodiff, Normalizers) {
  auto ps = random_params({{3, 5}}, 5);
  expect_gradients_match(ps, [](Tape&, std::vector<Var>& v) { return layernorm_rows(v[0]); });
  expect_gradients_match(ps, [](Tape&, std::vector<Var>& v) { return softmax_rows(v[0]); });
  expect_gradients_match(ps, [](Tape&, std::vector<Var>& v) { return log_softmax_rows(v[0]); });
}

TEST(Autodiff, LayernormRowsAreStandardized) {
  Tape tape;
  Var a = tape.constant(Tensor(1, 4, std::vector<double>{1, 2, 3, 4}));
  Var out = layernorm_rows(a);
  double mean = 0, var = 0;
  for (double x : out.value().data()) mean += x / 4;
  for (double x : out.value().data()) var += (x - mean) * (x - mean) / 4;
  EXPECT_NEAR(mean, 0.0, 1e-12);
  EXPECT_NEAR(var, 1.0, 1e-5);
}

TEST(Autodiff, ShapeOps) {
  auto ps = random_params({{4, 3}, {4, 3}, {1, 3}}, 6);
  expect_gradients_match(ps, [](Tape&, std::vector<Var>& v) {
    return interleave_rows(v[0], v[1]);
  });
  expect_gradients_match(ps, [](Tape&, std::vector<Var>& v) {
    std::vector<Var> parts = {v[2], slice_rows(v[0], 1, 2), gather_rows(v[1], {3, 3, 0})};
    return concat_rows(parts);
  });
  expect_gradients_match(ps, [](Tape&, std::vector<Var>& v) {
    return add(slice_cols(v[0], 1, 2), repeat_rows(slice_cols(v[2], 0, 2), 4));
  });
  expect_gradients_match(ps, [](Tape&, std::vector<Var>& v) {
    return concat_rows(std::vector<Var>{mean_rows(v[0]), v[2]});
  });
  expect_gradients_match(ps, [](Tape&, std::vector<Var>& v) {
    return gather(v[1], {0, 5, 11, 5});
  });
  expect_gradients_match(ps, [](Tape&, std::vector<Var>& v) {
    return gate_blend(sigmoid(v[0]), v[1], repeat_rows(v[2], 4));
  });
}

TEST(Autodiff, LogSumExpGroupsGradient) {
  auto ps = random_params({{3, 3}}, 7);
  expect_gradients_match(ps, [](Tape&, std::vector<Var>& v) {
    return logsumexp_groups(v[0], IndexGroups{{0, 1, 2}, {4}, {8, 3, 3}});
  });
  expect_gradients_match(ps, [](Tape&, std::vector<Var>& v) { return logsumexp_all(v[0]); });
}

TEST(Autodiff, SharedSubexpressionsAccumulate) {
  ParameterSet ps;
  ps.add("x", {1});
  ps[0].values[0] = 2.0;
  Tape tape;
  Var x = tape.parameter(ps[0]);
  Var y = add(mul(x, x), x);  // x^2 + x
  tape.backward(sum(y));
  EXPECT_DOUBLE_EQ(tape.grad(x)[0], 5.0);
  Gradients g = zero_gradients(ps);
  tape.accumulate_gradients(g);
  EXPECT_DOUBLE_EQ(g[0][0], 5.0);
}

TEST(Autodiff, ShapeMismatchThrows) {
  Tape tape;
  Var a = tape.constant(Tensor(2, 3));
  Var b = tape.constant(Tensor(3, 2));
  EXPECT_THROW(add(a, b), DomainError);
  EXPECT_THROW(matmul(a, a), DomainError);
}

TEST(ParameterSet, FindAndCount) {
  ParameterSet ps;
  ps.add("a", {2, 3});
  ps.add("b", {4});
  EXPECT_EQ(ps.scalar_count(), 10u);
  EXPECT_EQ(ps.find("b").index, 1u);
  EXPECT_THROW(ps.find("c"), DomainError);
}

}  // namespace
}  // namespace ctree::ad
