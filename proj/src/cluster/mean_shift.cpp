#include "partfuse/cluster/mean_shift.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace partfuse::cluster {

void ClusterParams::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("cluster params: " + what); };
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) fail("bandwidth must be positive");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) fail("lambda must be non-negative");
  if (!(epsilon > 0.0)) fail("epsilon must be positive");
  if (max_iterations < 1) fail("max_iterations must be >= 1");
  if (!(tolerance >= 0.0)) fail("tolerance must be non-negative");
}

Matrix apply_region_push(const Matrix& points, const Matrix& inst_offset, const Matrix& region_offset,
                         const ClusterParams& params) {
  params.validate();
  if (points.cols() != 3 || inst_offset.rows() != points.rows() || inst_offset.cols() != 3 ||
      region_offset.rows() != points.rows() || region_offset.cols() != 3) {
    throw ShapeError("apply_region_push: expected N x 3 inputs, got " + shape_string(points) + ", " +
                     shape_string(inst_offset) + ", " + shape_string(region_offset));
  }
  Matrix out = points + inst_offset;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const Eigen::RowVector3d d = inst_offset.row(i) - region_offset.row(i);
    const double norm = d.norm();
    if (norm >= params.epsilon) out.row(i) += (params.lambda / norm) * d;
  }
  return out;
}

MeanShiftResult mean_shift(const Matrix& points, const ClusterParams& params) {
  params.validate();
  const Eigen::Index n = points.rows();
  const Eigen::Index dim = points.cols();
  if (n < 1) throw std::invalid_argument("mean_shift: no points");
  const double radius2 = params.bandwidth * params.bandwidth;
  const double tol2 = params.tolerance * params.tolerance;

  struct Candidate {
    std::vector<double> mode;
    int support;
  };
  std::vector<Candidate> candidates;
  candidates.reserve(static_cast<std::size_t>(n));

  const auto d = static_cast<std::size_t>(dim);
  const double* data = points.data();
  auto dist2 = [d](const double* a, const double* b) {
    double s = 0.0;
    for (std::size_t k = 0; k < d; ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
    return s;
  };
  std::vector<double> x(d);
  std::vector<double> next(d);
  for (Eigen::Index seed = 0; seed < n; ++seed) {
    std::copy_n(data + seed * dim, d, x.begin());
    for (int it = 0;; ++it) {
      std::fill(next.begin(), next.end(), 0.0);
      int count = 0;
      for (Eigen::Index j = 0; j < n; ++j) {
        const double* pj = data + j * dim;
        if (dist2(pj, x.data()) <= radius2) {
          for (std::size_t k = 0; k < d; ++k) next[k] += pj[k];
          ++count;
        }
      }
      if (count == 0) break;  // window emptied; the seed is dropped
      for (double& v : next) v /= static_cast<double>(count);
      const double moved2 = dist2(next.data(), x.data());
      x.swap(next);
      if (moved2 <= tol2 || it + 1 >= params.max_iterations) {
        candidates.push_back({x, count});
        break;
      }
    }
  }
  if (candidates.empty()) throw NumericError("mean_shift: every seed window emptied");

  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& a, const Candidate& b) { return a.support > b.support; });
  std::vector<const Candidate*> kept;
  for (const auto& c : candidates) {
    const bool near = std::any_of(kept.begin(), kept.end(), [&](const Candidate* k) {
      return dist2(k->mode.data(), c.mode.data()) <= radius2;
    });
    if (!near) kept.push_back(&c);
  }

  MeanShiftResult result;
  result.modes.resize(static_cast<Eigen::Index>(kept.size()), dim);
  for (std::size_t m = 0; m < kept.size(); ++m) {
    std::copy_n(kept[m]->mode.begin(), d, result.modes.data() + static_cast<Eigen::Index>(m) * dim);
    result.support.push_back(kept[m]->support);
  }
  result.assignment.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index m = 0; m < result.modes.rows(); ++m) {
      const double dm = dist2(result.modes.data() + m * dim, data + i * dim);
      if (dm < best_d) {
        best_d = dm;
        best = static_cast<int>(m);
      }
    }
    result.assignment[static_cast<std::size_t>(i)] = best;
  }
  return result;
}

}  // namespace partfuse::cluster
