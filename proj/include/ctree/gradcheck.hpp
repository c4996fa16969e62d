#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>

#include "ctree/autodiff.hpp"

namespace ctree::ad {

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  // Coordinates sampled per tensor; tensors at most this large are checked
  // exhaustively.
  std::size_t max_coords_per_tensor = 16;
  // Relative error uses max(|analytic|, |numeric|, abs_floor) as denominator.
  double abs_floor = 1e-6;
  // Leave out coordinates whose +-step evaluations put some relu input on
  // the other side of zero: the difference quotient then spans a kink and
  // says nothing about the derivative. They are counted in the report.
  bool skip_kinks = true;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_coordinate = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  // Central difference at step / 10 for the worst coordinate; agreement with
  // the analytic value there points at truncation error or a relu kink
  // inside the step rather than a wrong adjoint.
  double worst_numeric_fine = 0.0;
  std::size_t coordinates_checked = 0;
  std::size_t kink_coordinates = 0;  // left out, see skip_kinks
  bool passed = false;
};

// Builds the scalar loss on a fresh tape from the current parameter values.
using LossBuilder = std::function<Var(Tape&)>;

// Compares reverse-mode gradients with central differences
// (f(x + h) - f(x - h)) / 2h coordinate by coordinate. Parameter values are
// restored afterwards.
GradCheckReport check_gradients(const LossBuilder& loss, ParameterSet& params,
                                const GradCheckOptions& options = {});

}  // namespace ctree::ad
