#pragma once

#include <optional>
#include <span>
#include <vector>

namespace partfuse::metrics {

/// One instance as a sorted set of point indices.
struct Instance {
  int label = 0;             // 1-based semantic class
  std::vector<int> points;   // ascending point indices
  double confidence = 1.0;   // ranking score (predictions only)
};

/// Ground-truth and predicted instances of one shape at one level.
struct ShapeInstances {
  std::vector<Instance> gt;
  std::vector<Instance> pred;
};

/// Groups per-point (label, instance id) into instances ordered by id.
/// `confidence`, when given, holds each point's instance confidence.
std::vector<Instance> group_instances(std::span<const int> labels, std::span<const int> inst_ids,
                                      std::span<const double> confidence = {});

/// |A n B| / |A u B| over ascending index sets; 0 when both are empty.
double mask_iou(std::span<const int> a, std::span<const int> b);

/// AP of one category pooled over shapes. Predictions of `category` are
/// ranked by descending confidence (ties: shape order, then instance order).
/// Each prediction takes the unmatched same-shape GT of the category with the
/// highest IoU and is a true positive when that IoU exceeds `threshold`.
/// AP sums recall increments times the running right-max of precision.
/// Returns nullopt when the category has no GT instance.
std::optional<double> average_precision(std::span<const ShapeInstances> shapes, int category, double threshold);

/// Per shape, the mean AP over categories present in its GT; then the mean
/// over shapes that have any GT instance. nullopt if none has.
std::optional<double> shape_ap(std::span<const ShapeInstances> shapes, double threshold);

/// Mean over classes present in either labelling of the per-class point IoU.
double semantic_miou(std::span<const int> pred, std::span<const int> gt, int class_count);

struct Coverage {
  double mcov = 0;
  double mwcov = 0;
  double mprec = 0;
  double mrec = 0;
};

/// Pooled over all shapes. Coverage of a GT instance is its best IoU against
/// same-label predictions of its shape; mWCov weights it by its point share
/// of all GT points. Precision and recall use the greedy matching of
/// average_precision at IoU > 0.5 over all labels at once.
Coverage coverage_metrics(std::span<const ShapeInstances> shapes);

}  // namespace partfuse::metrics
