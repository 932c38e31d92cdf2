#include "partfuse/metrics/report.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>

namespace partfuse::metrics {
namespace {

std::string shortest(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

double mean_of(const std::vector<CategoryAp>& cats, double CategoryAp::*field) {
  if (cats.empty()) return 0.0;
  double total = 0.0;
  for (const auto& c : cats) total += c.*field;
  return total / static_cast<double>(cats.size());
}

}  // namespace

double MetricsReport::mean_s_ap50() const {
  if (levels.empty()) return 0.0;
  double t = 0.0;
  for (const auto& l : levels) t += l.s_ap50;
  return t / static_cast<double>(levels.size());
}

double MetricsReport::mean_miou() const {
  if (levels.empty()) return 0.0;
  double t = 0.0;
  for (const auto& l : levels) t += l.miou;
  return t / static_cast<double>(levels.size());
}

ShapeInstances shape_instances(const data::LevelAnnotation& gt, const data::PredictedLevel& pred) {
  return {group_instances(gt.sem_labels, gt.inst_ids), group_instances(pred.sem_labels, pred.inst_ids, pred.confidence)};
}

MetricsReport evaluate(const std::vector<data::LabeledShape>& gt, const std::vector<data::PredictedShape>& pred) {
  if (gt.size() != pred.size()) {
    throw std::invalid_argument("evaluate: " + std::to_string(gt.size()) + " GT shapes but " +
                                std::to_string(pred.size()) + " predictions");
  }
  if (gt.empty()) throw std::invalid_argument("evaluate: no shapes");
  const int levels = gt.front().level_count();
  for (std::size_t s = 0; s < gt.size(); ++s) {
    if (gt[s].level_count() != levels || static_cast<int>(pred[s].levels.size()) != levels) {
      throw std::invalid_argument("evaluate: shape " + std::to_string(s) + " has a different level count");
    }
    if (static_cast<Eigen::Index>(gt[s].size()) != pred[s].points.rows()) {
      throw std::invalid_argument("evaluate: shape " + std::to_string(s) + " point counts differ");
    }
  }

  MetricsReport report;
  double ap50_sum = 0.0;
  for (int k = 0; k < levels; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    const int classes = gt.front().levels[ku].class_count;
    std::vector<ShapeInstances> inst;
    std::vector<int> all_pred, all_gt;
    for (std::size_t s = 0; s < gt.size(); ++s) {
      const auto& g = gt[s].levels[ku];
      const auto& p = pred[s].levels[ku];
      if (g.class_count != classes || p.class_count != classes) {
        throw std::invalid_argument("evaluate: level " + std::to_string(k + 1) + " class counts differ");
      }
      inst.push_back(shape_instances(g, p));
      all_pred.insert(all_pred.end(), p.sem_labels.begin(), p.sem_labels.end());
      all_gt.insert(all_gt.end(), g.sem_labels.begin(), g.sem_labels.end());
    }

    LevelReport lr;
    lr.level = k + 1;
    std::map<int, int> gt_counts;
    for (const auto& si : inst) {
      for (const auto& g : si.gt) ++gt_counts[g.label];
    }
    for (const auto& [label, count] : gt_counts) {
      lr.categories.push_back({label, count, *average_precision(inst, label, 0.25),
                               *average_precision(inst, label, 0.5), *average_precision(inst, label, 0.75)});
    }
    lr.mean_ap25 = mean_of(lr.categories, &CategoryAp::ap25);
    lr.mean_ap50 = mean_of(lr.categories, &CategoryAp::ap50);
    lr.mean_ap75 = mean_of(lr.categories, &CategoryAp::ap75);
    lr.s_ap50 = shape_ap(inst, 0.5).value_or(0.0);
    lr.miou = semantic_miou(all_pred, all_gt, classes);
    lr.coverage = coverage_metrics(inst);
    ap50_sum += lr.mean_ap50;
    report.levels.push_back(std::move(lr));
  }
  report.mean_ap50 = ap50_sum / static_cast<double>(levels);
  return report;
}

void write_tsv(std::ostream& os, const MetricsReport& report) {
  os << "level\tcategory\tgt_instances\tAP25\tAP50\tAP75\n";
  for (const auto& l : report.levels) {
    for (const auto& c : l.categories) {
      os << l.level << '\t' << c.label << '\t' << c.gt_instances << '\t' << percent(c.ap25) << '\t'
         << percent(c.ap50) << '\t' << percent(c.ap75) << '\n';
    }
  }
  os << "\nlevel\tmAP25\tmAP50\tmAP75\ts-AP50\tmIoU\tmCov\tmWCov\tmPrec\tmRec\n";
  for (const auto& l : report.levels) {
    os << l.level << '\t' << percent(l.mean_ap25) << '\t' << percent(l.mean_ap50) << '\t' << percent(l.mean_ap75)
       << '\t' << percent(l.s_ap50) << '\t' << percent(l.miou) << '\t' << percent(l.coverage.mcov) << '\t'
       << percent(l.coverage.mwcov) << '\t' << percent(l.coverage.mprec) << '\t' << percent(l.coverage.mrec)
       << '\n';
  }
}

void write_summary(std::ostream& os, const MetricsReport& report) {
  for (const auto& l : report.levels) {
    const std::string p = "level" + std::to_string(l.level) + ".";
    os << p << "mAP25=" << shortest(l.mean_ap25) << '\n'
       << p << "mAP50=" << shortest(l.mean_ap50) << '\n'
       << p << "mAP75=" << shortest(l.mean_ap75) << '\n'
       << p << "s-AP50=" << shortest(l.s_ap50) << '\n'
       << p << "mIoU=" << shortest(l.miou) << '\n'
       << p << "mCov=" << shortest(l.coverage.mcov) << '\n'
       << p << "mWCov=" << shortest(l.coverage.mwcov) << '\n'
       << p << "mPrec=" << shortest(l.coverage.mprec) << '\n'
       << p << "mRec=" << shortest(l.coverage.mrec) << '\n';
  }
  os << "mean.mAP50=" << shortest(report.mean_ap50) << '\n'
     << "mean.s-AP50=" << shortest(report.mean_s_ap50()) << '\n'
     << "mean.mIoU=" << shortest(report.mean_miou()) << '\n';
}

void write_report_files(const std::filesystem::path& dir, const MetricsReport& report) {
  std::filesystem::create_directories(dir);
  auto write = [&](const char* name, auto&& fn) {
    std::ofstream os(dir / name, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + (dir / name).string() + " for writing");
    fn(os);
    if (!os) throw std::runtime_error("failed writing " + (dir / name).string());
  };
  write("metrics.tsv", [&](std::ostream& os) { write_tsv(os, report); });
  write("metrics.txt", [&](std::ostream& os) { write_summary(os, report); });
}

}  // namespace partfuse::metrics
