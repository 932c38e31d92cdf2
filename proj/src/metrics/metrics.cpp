#include "partfuse/metrics/metrics.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>
#include <string>

namespace partfuse::metrics {
namespace {

struct Ranked {
  std::size_t shape;
  std::size_t index;
  double confidence;
};

// Ranked predictions (optionally of one category) across all shapes.
std::vector<Ranked> rank_predictions(std::span<const ShapeInstances> shapes, std::optional<int> category) {
  std::vector<Ranked> out;
  for (std::size_t s = 0; s < shapes.size(); ++s) {
    for (std::size_t i = 0; i < shapes[s].pred.size(); ++i) {
      if (!category || shapes[s].pred[i].label == *category) out.push_back({s, i, shapes[s].pred[i].confidence});
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const Ranked& a, const Ranked& b) { return a.confidence > b.confidence; });
  return out;
}

// Greedy matching in rank order; returns the TP flag of each ranked prediction.
std::vector<bool> greedy_match(std::span<const ShapeInstances> shapes, const std::vector<Ranked>& ranked,
                               double threshold) {
  std::vector<std::vector<bool>> taken(shapes.size());
  for (std::size_t s = 0; s < shapes.size(); ++s) taken[s].assign(shapes[s].gt.size(), false);
  std::vector<bool> tp;
  tp.reserve(ranked.size());
  for (const auto& r : ranked) {
    const Instance& p = shapes[r.shape].pred[r.index];
    double best = -1.0;
    std::size_t best_g = 0;
    for (std::size_t g = 0; g < shapes[r.shape].gt.size(); ++g) {
      const Instance& gt = shapes[r.shape].gt[g];
      if (taken[r.shape][g] || gt.label != p.label) continue;
      const double iou = mask_iou(p.points, gt.points);
      if (iou > best) {
        best = iou;
        best_g = g;
      }
    }
    const bool hit = best > threshold;
    if (hit) taken[r.shape][best_g] = true;
    tp.push_back(hit);
  }
  return tp;
}

}  // namespace

std::vector<Instance> group_instances(std::span<const int> labels, std::span<const int> inst_ids,
                                      std::span<const double> confidence) {
  if (labels.size() != inst_ids.size() || (!confidence.empty() && confidence.size() != labels.size())) {
    throw std::invalid_argument("group_instances: per-point arrays differ in length");
  }
  std::map<int, Instance> by_id;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto [it, inserted] = by_id.try_emplace(inst_ids[i]);
    Instance& inst = it->second;
    if (inserted) {
      inst.label = labels[i];
      inst.confidence = confidence.empty() ? 1.0 : confidence[i];
    } else if (inst.label != labels[i]) {
      throw std::invalid_argument("group_instances: instance " + std::to_string(inst_ids[i]) +
                                  " has conflicting labels");
    }
    inst.points.push_back(static_cast<int>(i));
  }
  std::vector<Instance> out;
  out.reserve(by_id.size());
  for (auto& [id, inst] : by_id) out.push_back(std::move(inst));
  return out;
}

double mask_iou(std::span<const int> a, std::span<const int> b) {
  std::size_t i = 0, j = 0, inter = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] < b[j]) {
      ++i;
    } else if (b[j] < a[i]) {
      ++j;
    } else {
      ++inter;
      ++i;
      ++j;
    }
  }
  const std::size_t uni = a.size() + b.size() - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::optional<double> average_precision(std::span<const ShapeInstances> shapes, int category, double threshold) {
  std::size_t gt_count = 0;
  for (const auto& s : shapes) {
    gt_count += static_cast<std::size_t>(
        std::count_if(s.gt.begin(), s.gt.end(), [&](const Instance& g) { return g.label == category; }));
  }
  if (gt_count == 0) return std::nullopt;

  const auto ranked = rank_predictions(shapes, category);
  const auto tp = greedy_match(shapes, ranked, threshold);
  const std::size_t n = ranked.size();
  std::vector<double> precision(n), recall(n);
  std::size_t hits = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (tp[k]) ++hits;
    precision[k] = static_cast<double>(hits) / static_cast<double>(k + 1);
    recall[k] = static_cast<double>(hits) / static_cast<double>(gt_count);
  }
  for (std::size_t k = n; k-- > 1;) precision[k - 1] = std::max(precision[k - 1], precision[k]);
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    ap += (recall[k] - prev_recall) * precision[k];
    prev_recall = recall[k];
  }
  return ap;
}

std::optional<double> shape_ap(std::span<const ShapeInstances> shapes, double threshold) {
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t s = 0; s < shapes.size(); ++s) {
    std::set<int> categories;
    for (const auto& g : shapes[s].gt) categories.insert(g.label);
    if (categories.empty()) continue;
    double sum = 0.0;
    for (int c : categories) sum += *average_precision(shapes.subspan(s, 1), c, threshold);
    total += sum / static_cast<double>(categories.size());
    ++counted;
  }
  if (counted == 0) return std::nullopt;
  return total / static_cast<double>(counted);
}

double semantic_miou(std::span<const int> pred, std::span<const int> gt, int class_count) {
  if (pred.size() != gt.size()) throw std::invalid_argument("semantic_miou: label arrays differ in length");
  std::vector<std::size_t> inter(static_cast<std::size_t>(class_count), 0);
  std::vector<std::size_t> uni(static_cast<std::size_t>(class_count), 0);
  auto check = [&](int y) {
    if (y < 1 || y > class_count) {
      throw std::invalid_argument("semantic_miou: label " + std::to_string(y) + " outside 1.." +
                                  std::to_string(class_count));
    }
    return static_cast<std::size_t>(y - 1);
  };
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const auto p = check(pred[i]);
    const auto g = check(gt[i]);
    if (p == g) {
      ++inter[p];
      ++uni[p];
    } else {
      ++uni[p];
      ++uni[g];
    }
  }
  double total = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < uni.size(); ++c) {
    if (uni[c] == 0) continue;
    total += static_cast<double>(inter[c]) / static_cast<double>(uni[c]);
    ++present;
  }
  return present == 0 ? 0.0 : total / static_cast<double>(present);
}

Coverage coverage_metrics(std::span<const ShapeInstances> shapes) {
  Coverage cov;
  std::size_t gt_instances = 0;
  std::size_t gt_points = 0;
  double cov_sum = 0.0;
  double weighted = 0.0;
  for (const auto& s : shapes) {
    for (const auto& g : s.gt) {
      double best = 0.0;
      for (const auto& p : s.pred) {
        if (p.label == g.label) best = std::max(best, mask_iou(p.points, g.points));
      }
      cov_sum += best;
      weighted += best * static_cast<double>(g.points.size());
      gt_points += g.points.size();
      ++gt_instances;
    }
  }
  if (gt_instances > 0) cov.mcov = cov_sum / static_cast<double>(gt_instances);
  if (gt_points > 0) cov.mwcov = weighted / static_cast<double>(gt_points);

  const auto ranked = rank_predictions(shapes, std::nullopt);
  const auto tp = greedy_match(shapes, ranked, 0.5);
  const auto hits = static_cast<double>(std::count(tp.begin(), tp.end(), true));
  if (!ranked.empty()) cov.mprec = hits / static_cast<double>(ranked.size());
  if (gt_instances > 0) cov.mrec = hits / static_cast<double>(gt_instances);
  return cov;
}

}  // namespace partfuse::metrics
