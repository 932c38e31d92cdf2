#include "partfuse/numerics/finite_difference.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace partfuse::numerics {
namespace {

double checked(const ScalarFunction& f, const Matrix& x) {
  const double v = f(x);
  if (!std::isfinite(v)) throw NumericError("finite_difference_gradient: non-finite evaluation");
  return v;
}

}  // namespace

Matrix finite_difference_gradient(const ScalarFunction& f, const Matrix& x, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("finite_difference_gradient: step must be > 0");
  Matrix grad(x.rows(), x.cols());
  Matrix probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double original = probe.data()[i];
    probe.data()[i] = original + step;
    const double up = checked(f, probe);
    probe.data()[i] = original - step;
    const double down = checked(f, probe);
    probe.data()[i] = original;
    grad.data()[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

bool gradient_entry_matches(double analytic, double numeric, GradientTolerance tol) {
  const double bound = std::max(tol.absolute, tol.relative * std::max(std::abs(analytic), std::abs(numeric)));
  return std::abs(analytic - numeric) <= bound;
}

double gradient_mismatch(const Matrix& analytic, const Matrix& numeric, GradientTolerance tol) {
  if (analytic.rows() != numeric.rows() || analytic.cols() != numeric.cols()) {
    throw ShapeError("gradient_mismatch: " + shape_string(analytic) + " vs " + shape_string(numeric));
  }
  double worst = 0.0;
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    const double a = analytic.data()[i];
    const double n = numeric.data()[i];
    const double bound = std::max(tol.absolute, tol.relative * std::max(std::abs(a), std::abs(n)));
    worst = std::max(worst, std::abs(a - n) / bound);
  }
  return worst;
}

}  // namespace partfuse::numerics
