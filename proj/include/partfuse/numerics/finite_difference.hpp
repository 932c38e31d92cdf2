#pragma once

#include <functional>

#include "partfuse/numerics/matrix.hpp"

namespace partfuse::numerics {

using ScalarFunction = std::function<double(const Matrix&)>;

/// Central-difference gradient (f(x+he) - f(x-he)) / 2h for every entry of x.
/// Throws std::invalid_argument for step <= 0 and NumericError when f returns
/// a non-finite value.
Matrix finite_difference_gradient(const ScalarFunction& f, const Matrix& x, double step);

struct GradientTolerance {
  double absolute = 1e-6;
  double relative = 1e-4;
};

/// |a - b| <= max(absolute, relative * max(|a|, |b|)).
bool gradient_entry_matches(double analytic, double numeric, GradientTolerance tol = {});

/// Largest violation ratio |a - b| / max(absolute, relative * max(|a|, |b|))
/// across all entries; <= 1 means every entry matches.
double gradient_mismatch(const Matrix& analytic, const Matrix& numeric, GradientTolerance tol = {});

}  // namespace partfuse::numerics
