#pragma once

#include <initializer_list>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace partfuse {

/// Dense row-major matrix of 64-bit reals. Every operand in the pipeline
/// (point sets, probabilities, features, weights) is one of these.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Denominators below this value are clamped before elementwise division.
inline constexpr double kDivisionFloor = 1e-12;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Builds a matrix from nested row lists; all rows must have equal length.
Matrix matrix_from_rows(std::initializer_list<std::initializer_list<double>> rows);

std::string shape_string(const Matrix& m);

/// True when no entry is NaN or infinite.
bool all_finite(const Matrix& m);

/// Exact equality including dimensions (Eigen's operator== assumes equal sizes).
inline bool same_matrix(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.size() == 0 || a == b);
}

}  // namespace partfuse
