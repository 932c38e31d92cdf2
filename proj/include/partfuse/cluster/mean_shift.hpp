#pragma once

#include <vector>

#include "partfuse/numerics/matrix.hpp"

namespace partfuse::cluster {

struct ClusterParams {
  double bandwidth = 0.1;
  double lambda = 0.05;
  double epsilon = 1e-8;   // below this |O_I - O_S| the push is skipped
  int max_iterations = 300;
  double tolerance = 1e-6;  // stop when a mode moves at most this far

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// p + O_I + lambda (O_I - O_S) / |O_I - O_S|, dropping the last term when
/// |O_I - O_S| < epsilon. All inputs N x 3.
Matrix apply_region_push(const Matrix& points, const Matrix& inst_offset, const Matrix& region_offset,
                         const ClusterParams& params);

struct MeanShiftResult {
  Matrix modes;                 // M x D, ordered by descending support
  std::vector<int> support;     // points within bandwidth of each mode at convergence
  std::vector<int> assignment;  // per point, index into modes
};

/// Flat-kernel mean-shift with every point as a seed. A seed repeatedly moves
/// to the mean of the points within `bandwidth` (inclusive) until it moves at
/// most `tolerance` or `max_iterations` is reached. Converged modes are visited
/// by descending support (ties: lower seed index) and kept unless a kept mode
/// lies within `bandwidth`. Each point joins its nearest kept mode (ties: lower
/// mode index). Works in any dimension D.
MeanShiftResult mean_shift(const Matrix& points, const ClusterParams& params);

}  // namespace partfuse::cluster
