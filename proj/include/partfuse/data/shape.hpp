#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "partfuse/numerics/matrix.hpp"

namespace partfuse::data {

/// One granularity level of part annotation.
struct LevelAnnotation {
  int class_count = 0;
  std::vector<int> sem_labels;  // 1-based, one per point
  std::vector<int> inst_ids;    // non-negative, one per point
  Matrix inst_offset;           // N x 3, point -> instance center
  Matrix region_offset;         // N x 3, point -> semantic region center

  friend bool operator==(const LevelAnnotation& a, const LevelAnnotation& b) {
    return a.class_count == b.class_count && a.sem_labels == b.sem_labels &&
           a.inst_ids == b.inst_ids && same_matrix(a.inst_offset, b.inst_offset) &&
           same_matrix(a.region_offset, b.region_offset);
  }
};

/// A point cloud with K levels of (semantic label, instance id) annotations.
/// Level 0 is the coarsest.
struct LabeledShape {
  Matrix points;  // N x 3
  std::vector<LevelAnnotation> levels;

  std::size_t size() const { return static_cast<std::size_t>(points.rows()); }
  int level_count() const { return static_cast<int>(levels.size()); }
  std::vector<int> class_counts() const;

  friend bool operator==(const LabeledShape& a, const LabeledShape& b) {
    return same_matrix(a.points, b.points) && a.levels == b.levels;
  }
};

/// Centers the cloud at its centroid and scales the farthest point to norm 1.
/// A zero-extent cloud maps to all zeros.
Matrix normalize_to_unit_sphere(const Matrix& points);

struct GtOffsets {
  Matrix inst_offset;
  Matrix region_offset;
};

/// Instance center = point centroid of the instance. Region center of class m
/// = unweighted mean of the centers of the instances labelled m.
GtOffsets compute_gt_offsets(const Matrix& points, std::span<const int> sem_labels,
                             std::span<const int> inst_ids);

/// Recomputes both offset fields on every level of `shape` in place.
void compute_gt_centers(LabeledShape& shape);

/// Expands `shape` to exactly `level_count` levels. `annotated` lists the
/// 1-based target level of each existing level (ascending); missing levels
/// copy the nearest coarser annotated level. Throws std::invalid_argument when
/// level_count is smaller than the number of existing levels or level 1 has
/// no annotation.
LabeledShape duplicate_missing_levels(const LabeledShape& shape, std::span<const int> annotated,
                                      int level_count);

/// Existing levels are taken to be levels 1..L.
LabeledShape duplicate_missing_levels(const LabeledShape& shape, int level_count);

/// Checks the structural invariants (sizes, label ranges, instance label
/// consistency, finite values, hierarchy refinement when `check_hierarchy`).
/// Throws std::invalid_argument describing the first violation.
void validate_shape(const LabeledShape& shape, bool check_hierarchy = true);

/// True when every instance of level k+1 lies inside a single instance of level k.
bool hierarchy_refines(const LabeledShape& shape);

}  // namespace partfuse::data
