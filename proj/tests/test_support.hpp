#pragma once

#include <vector>

#include "partfuse/data/shape.hpp"
#include "partfuse/numerics/matrix.hpp"
#include "partfuse/numerics/random.hpp"

namespace partfuse::testing {

inline Matrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double lo = -1.0, double hi = 1.0) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(lo, hi);
  }
  return m;
}

/// Rows are strictly positive and sum to 1.
inline Matrix random_probs(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Matrix m = random_matrix(rng, rows, cols, 0.05, 1.0);
  for (Eigen::Index i = 0; i < rows; ++i) m.row(i) /= m.row(i).sum();
  return m;
}

inline Matrix one_hot(const std::vector<int>& labels_1based, int classes) {
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(labels_1based.size()), classes);
  for (std::size_t i = 0; i < labels_1based.size(); ++i) m(static_cast<Eigen::Index>(i), labels_1based[i] - 1) = 1.0;
  return m;
}

}  // namespace partfuse::testing
