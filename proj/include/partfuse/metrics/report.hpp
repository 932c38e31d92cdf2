#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <vector>

#include "partfuse/data/pls_io.hpp"
#include "partfuse/data/shape.hpp"
#include "partfuse/metrics/metrics.hpp"

namespace partfuse::metrics {

struct CategoryAp {
  int label = 0;
  int gt_instances = 0;
  double ap25 = 0;
  double ap50 = 0;
  double ap75 = 0;
};

struct LevelReport {
  int level = 0;  // 1-based
  std::vector<CategoryAp> categories;  // only categories with GT instances
  double mean_ap25 = 0;
  double mean_ap50 = 0;
  double mean_ap75 = 0;
  double s_ap50 = 0;
  double miou = 0;
  Coverage coverage;
};

struct MetricsReport {
  std::vector<LevelReport> levels;
  double mean_ap50 = 0;  // mean over levels of the per-level category mean

  double mean_s_ap50() const;
  double mean_miou() const;
};

/// Per-level instances of one shape.
ShapeInstances shape_instances(const data::LevelAnnotation& gt, const data::PredictedLevel& pred);

/// Throws std::invalid_argument when shape counts, point counts or level
/// structure disagree.
MetricsReport evaluate(const std::vector<data::LabeledShape>& gt, const std::vector<data::PredictedShape>& pred);

/// One row per (level, category) plus a per-level summary block; values in
/// percent with two decimals.
void write_tsv(std::ostream& os, const MetricsReport& report);
/// key=value lines with fractions in shortest round-trip form.
void write_summary(std::ostream& os, const MetricsReport& report);
void write_report_files(const std::filesystem::path& dir, const MetricsReport& report);

}  // namespace partfuse::metrics
