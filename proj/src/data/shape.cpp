#include "partfuse/data/shape.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>
#include <string>

namespace partfuse::data {

std::vector<int> LabeledShape::class_counts() const {
  std::vector<int> counts;
  counts.reserve(levels.size());
  for (const auto& level : levels) counts.push_back(level.class_count);
  return counts;
}

Matrix normalize_to_unit_sphere(const Matrix& points) {
  if (points.cols() != 3) throw ShapeError("normalize_to_unit_sphere: expected N x 3, got " + shape_string(points));
  if (points.rows() == 0) return points;
  const Eigen::RowVector3d centroid = points.colwise().sum() / static_cast<double>(points.rows());
  Matrix centered = points.rowwise() - centroid;
  const double radius = centered.rowwise().norm().maxCoeff();
  if (radius <= 0.0) return Matrix::Zero(points.rows(), 3);
  centered /= radius;
  return centered;
}

GtOffsets compute_gt_offsets(const Matrix& points, std::span<const int> sem_labels,
                             std::span<const int> inst_ids) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (sem_labels.size() != n || inst_ids.size() != n) {
    throw ShapeError("compute_gt_offsets: label count does not match point count");
  }
  struct Accum {
    Eigen::RowVector3d sum = Eigen::RowVector3d::Zero();
    std::size_t count = 0;
    int label = 0;
  };
  std::map<int, Accum> instances;
  for (std::size_t i = 0; i < n; ++i) {
    Accum& a = instances[inst_ids[i]];
    a.sum += points.row(static_cast<Eigen::Index>(i));
    a.count += 1;
    a.label = sem_labels[i];
  }
  std::map<int, Eigen::RowVector3d> inst_center;
  std::map<int, std::pair<Eigen::RowVector3d, std::size_t>> region_sum;
  for (const auto& [id, a] : instances) {
    const Eigen::RowVector3d c = a.sum / static_cast<double>(a.count);
    inst_center[id] = c;
    auto [it, inserted] = region_sum.try_emplace(a.label, Eigen::RowVector3d::Zero(), 0);
    it->second.first += c;
    it->second.second += 1;
  }
  std::map<int, Eigen::RowVector3d> region_center;
  for (const auto& [label, acc] : region_sum) {
    region_center[label] = acc.first / static_cast<double>(acc.second);
  }

  GtOffsets out{Matrix(points.rows(), 3), Matrix(points.rows(), 3)};
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    out.inst_offset.row(r) = inst_center[inst_ids[i]] - points.row(r);
    out.region_offset.row(r) = region_center[sem_labels[i]] - points.row(r);
  }
  return out;
}

void compute_gt_centers(LabeledShape& shape) {
  for (auto& level : shape.levels) {
    auto offsets = compute_gt_offsets(shape.points, level.sem_labels, level.inst_ids);
    level.inst_offset = std::move(offsets.inst_offset);
    level.region_offset = std::move(offsets.region_offset);
  }
}

LabeledShape duplicate_missing_levels(const LabeledShape& shape, std::span<const int> annotated,
                                      int level_count) {
  if (shape.levels.empty()) throw std::invalid_argument("duplicate_missing_levels: shape has no levels");
  if (annotated.size() != shape.levels.size()) {
    throw std::invalid_argument("duplicate_missing_levels: one target level per existing level required");
  }
  if (level_count < shape.level_count()) {
    throw std::invalid_argument("duplicate_missing_levels: K=" + std::to_string(level_count) +
                                " is smaller than the " + std::to_string(shape.level_count()) +
                                " existing levels");
  }
  for (std::size_t i = 0; i < annotated.size(); ++i) {
    if (annotated[i] < 1 || annotated[i] > level_count || (i > 0 && annotated[i] <= annotated[i - 1])) {
      throw std::invalid_argument("duplicate_missing_levels: annotated levels must be ascending in 1..K");
    }
  }
  if (annotated.front() != 1) {
    throw std::invalid_argument("duplicate_missing_levels: level 1 has no annotation to copy from");
  }

  LabeledShape out;
  out.points = shape.points;
  out.levels.reserve(static_cast<std::size_t>(level_count));
  std::size_t source = 0;
  for (int k = 1; k <= level_count; ++k) {
    if (source + 1 < annotated.size() && annotated[source + 1] == k) ++source;
    out.levels.push_back(shape.levels[source]);
  }
  return out;
}

LabeledShape duplicate_missing_levels(const LabeledShape& shape, int level_count) {
  std::vector<int> annotated(shape.levels.size());
  for (std::size_t i = 0; i < annotated.size(); ++i) annotated[i] = static_cast<int>(i) + 1;
  return duplicate_missing_levels(shape, annotated, level_count);
}

bool hierarchy_refines(const LabeledShape& shape) {
  for (std::size_t k = 0; k + 1 < shape.levels.size(); ++k) {
    std::map<int, int> parent;
    const auto& coarse = shape.levels[k].inst_ids;
    const auto& fine = shape.levels[k + 1].inst_ids;
    for (std::size_t i = 0; i < fine.size(); ++i) {
      auto [it, inserted] = parent.try_emplace(fine[i], coarse[i]);
      if (!inserted && it->second != coarse[i]) return false;
    }
  }
  return true;
}

void validate_shape(const LabeledShape& shape, bool check_hierarchy) {
  const auto n = shape.size();
  if (shape.points.cols() != 3) throw std::invalid_argument("shape: points must be N x 3");
  if (!shape.points.allFinite()) throw std::invalid_argument("shape: non-finite point");
  for (std::size_t k = 0; k < shape.levels.size(); ++k) {
    const auto& level = shape.levels[k];
    const std::string where = "shape level " + std::to_string(k + 1) + ": ";
    if (level.class_count < 1) throw std::invalid_argument(where + "class count must be >= 1");
    if (level.sem_labels.size() != n || level.inst_ids.size() != n) {
      throw std::invalid_argument(where + "label count does not match point count");
    }
    std::map<int, int> inst_label;
    for (std::size_t i = 0; i < n; ++i) {
      const int s = level.sem_labels[i];
      if (s < 1 || s > level.class_count) {
        throw std::invalid_argument(where + "semantic label " + std::to_string(s) + " outside 1.." +
                                    std::to_string(level.class_count));
      }
      if (level.inst_ids[i] < 0) throw std::invalid_argument(where + "negative instance id");
      auto [it, inserted] = inst_label.try_emplace(level.inst_ids[i], s);
      if (!inserted && it->second != s) {
        throw std::invalid_argument(where + "instance " + std::to_string(level.inst_ids[i]) +
                                    " mixes semantic labels");
      }
    }
    for (const Matrix* m : {&level.inst_offset, &level.region_offset}) {
      if (m->size() != 0 && (m->rows() != shape.points.rows() || m->cols() != 3 || !m->allFinite())) {
        throw std::invalid_argument(where + "offset field must be a finite N x 3 matrix");
      }
    }
  }
  if (check_hierarchy && !hierarchy_refines(shape)) {
    throw std::invalid_argument("shape: finer instances do not refine coarser instances");
  }
}

}  // namespace partfuse::data
