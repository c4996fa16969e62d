#include "ctree/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace ctree::ad {

namespace {

struct Evaluation {
  double value;
  std::uint64_t kinks;
};

Evaluation evaluate(const LossBuilder& loss) {
  Tape tape;
  const double v = loss(tape).scalar();
  return {v, tape.kink_signature()};
}

}  // namespace

GradCheckReport check_gradients(const LossBuilder& loss, ParameterSet& params,
                                const GradCheckOptions& options) {
  Gradients analytic = zero_gradients(params);
  std::uint64_t base_kinks = 0;
  {
    Tape tape;
    Var out = loss(tape);
    tape.backward(out);
    tape.accumulate_gradients(analytic);
    base_kinks = tape.kink_signature();
  }

  std::mt19937_64 rng(options.seed);
  GradCheckReport report;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter& p = params[pi];
    std::vector<std::size_t> coords(p.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (coords.size() > options.max_coords_per_tensor) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.max_coords_per_tensor);
      std::sort(coords.begin(), coords.end());
    }
    for (std::size_t i : coords) {
      const double saved = p.values[i];
      p.values[i] = saved + options.step;
      const auto up = evaluate(loss);
      p.values[i] = saved - options.step;
      const auto down = evaluate(loss);
      p.values[i] = saved;
      if (options.skip_kinks && (up.kinks != base_kinks || down.kinks != base_kinks)) {
        ++report.kink_coordinates;
        continue;
      }

      const double numeric = (up.value - down.value) / (2.0 * options.step);
      const double a = analytic[pi][i];
      const double denom =
          std::max({std::abs(a), std::abs(numeric), options.abs_floor});
      const double rel = std::abs(a - numeric) / denom;
      ++report.coordinates_checked;
      if (rel > report.max_relative_error || report.worst_parameter.empty()) {
        report.max_relative_error = rel;
        report.worst_parameter = p.name;
        report.worst_coordinate = i;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  if (!report.worst_parameter.empty()) {
    Parameter& p = params[params.find(report.worst_parameter).index];
    const std::size_t i = report.worst_coordinate;
    const double h = options.step / 10.0;
    const double saved = p.values[i];
    p.values[i] = saved + h;
    const double up = evaluate(loss).value;
    p.values[i] = saved - h;
    const double down = evaluate(loss).value;
    p.values[i] = saved;
    report.worst_numeric_fine = (up - down) / (2.0 * h);
  }
  report.passed = report.max_relative_error < options.tolerance;
  return report;
}

}  // namespace ctree::ad
