#include "partfuse/cluster/cluster.hpp"

#include <stdexcept>

namespace partfuse::cluster {

std::vector<int> argmax_labels(const Matrix& probs) {
  std::vector<int> labels(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < probs.cols(); ++c) {
      if (probs(r, c) > probs(r, best)) best = c;
    }
    labels[static_cast<std::size_t>(r)] = static_cast<int>(best) + 1;
  }
  return labels;
}

data::PredictedLevel cluster_level(const Matrix& points, const model::LevelOutputs& outputs,
                                   const ClusterParams& params) {
  if (outputs.probs.rows() != points.rows() || outputs.probs.cols() < 1) {
    throw ShapeError("cluster_level: probabilities " + shape_string(outputs.probs) + " do not match points " +
                     shape_string(points));
  }
  const Matrix shifted = apply_region_push(points, outputs.inst_offset, outputs.region_offset, params);
  const auto n = static_cast<std::size_t>(points.rows());
  const int classes = static_cast<int>(outputs.probs.cols());

  data::PredictedLevel level;
  level.class_count = classes;
  level.sem_labels = argmax_labels(outputs.probs);
  level.inst_ids.assign(n, -1);
  level.confidence.assign(n, 0.0);

  std::vector<std::vector<Eigen::Index>> members(static_cast<std::size_t>(classes));
  for (std::size_t i = 0; i < n; ++i) {
    members[static_cast<std::size_t>(level.sem_labels[i] - 1)].push_back(static_cast<Eigen::Index>(i));
  }
  int next_id = 0;
  for (int c = 0; c < classes; ++c) {
    const auto& idx = members[static_cast<std::size_t>(c)];
    if (idx.empty()) continue;
    Matrix subset(static_cast<Eigen::Index>(idx.size()), 3);
    for (std::size_t j = 0; j < idx.size(); ++j) subset.row(static_cast<Eigen::Index>(j)) = shifted.row(idx[j]);
    const MeanShiftResult ms = mean_shift(subset, params);

    const auto modes = static_cast<std::size_t>(ms.modes.rows());
    std::vector<double> prob_sum(modes, 0.0);
    std::vector<int> count(modes, 0);
    for (std::size_t j = 0; j < idx.size(); ++j) {
      const auto m = static_cast<std::size_t>(ms.assignment[j]);
      prob_sum[m] += outputs.probs(idx[j], c);
      ++count[m];
    }
    // Modes that attracted no point get no id, keeping ids dense.
    std::vector<int> id_of(modes, -1);
    for (std::size_t m = 0; m < modes; ++m) {
      if (count[m] > 0) id_of[m] = next_id++;
    }
    for (std::size_t j = 0; j < idx.size(); ++j) {
      const auto m = static_cast<std::size_t>(ms.assignment[j]);
      const auto i = static_cast<std::size_t>(idx[j]);
      level.inst_ids[i] = id_of[m];
      level.confidence[i] = prob_sum[m] / count[m];
    }
  }
  return level;
}

data::PredictedShape cluster_instances(const Matrix& points, const model::ForwardOutputs& outputs,
                                       const ClusterParams& params) {
  data::PredictedShape shape;
  shape.points = points;
  for (const auto& lv : outputs.levels) shape.levels.push_back(cluster_level(points, lv, params));
  return shape;
}

}  // namespace partfuse::cluster
