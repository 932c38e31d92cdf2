#include "partfuse/fusion/fusion.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace partfuse::fusion {
namespace {

// P / (1_N P): each column divided by its (clamped) column sum.
NodeId column_normalized(Graph& g, NodeId probs) {
  const Eigen::Index n = g.value(probs).rows();
  const NodeId totals = g.column_sum(probs);
  return g.div(probs, g.broadcast_rows(totals, n));
}

void require_same_rows(const Graph& g, NodeId a, NodeId b, const char* what) {
  if (g.value(a).rows() != g.value(b).rows()) {
    throw ShapeError(std::string(what) + ": node " + std::to_string(a.index) + " has " +
                     std::to_string(g.value(a).rows()) + " rows, node " + std::to_string(b.index) + " has " +
                     std::to_string(g.value(b).rows()));
  }
}

}  // namespace

NodeId aggregate_part_features(Graph& g, NodeId probs, NodeId features) {
  require_same_rows(g, probs, features, "aggregate_part_features");
  return g.matmul_tn(column_normalized(g, probs), features);
}

NodeId fuse_point_features(Graph& g, NodeId probs, NodeId part_features) {
  return g.matmul(probs, part_features);
}

NodeId materialize(Graph& g, const FusedBlock& block) {
  return block.right ? fuse_point_features(g, block.left, *block.right) : block.left;
}

namespace {

NodeId concat_blocks(Graph& g, const std::vector<FusedBlock>& blocks) {
  std::vector<NodeId> parts;
  for (const auto& b : blocks) parts.push_back(materialize(g, b));
  return g.concat_cols(parts);
}

}  // namespace

std::vector<FusedBlock> fuse_single_level_blocks(Graph& g, NodeId probs, NodeId features, NodeId positions,
                                                 bool stop_grad) {
  require_same_rows(g, probs, features, "fuse_single_level");
  require_same_rows(g, probs, positions, "fuse_single_level");
  const NodeId p = stop_grad ? g.stop_gradient(probs) : probs;
  return {{p, aggregate_part_features(g, p, features)}, {features, {}}, {positions, {}}};
}

NodeId fuse_single_level(Graph& g, NodeId probs, NodeId features, NodeId positions, bool stop_grad) {
  return concat_blocks(g, fuse_single_level_blocks(g, probs, features, positions, stop_grad));
}

std::vector<NodeId> fuse_cross_level(Graph& g, std::span<const NodeId> probs, std::span<const NodeId> features,
                                     NodeId positions, bool stop_grad) {
  std::vector<NodeId> fused;
  for (const auto& blocks : fuse_cross_level_blocks(g, probs, features, positions, stop_grad)) {
    fused.push_back(concat_blocks(g, blocks));
  }
  return fused;
}

std::vector<std::vector<FusedBlock>> fuse_cross_level_blocks(Graph& g, std::span<const NodeId> probs,
                                                             std::span<const NodeId> features, NodeId positions,
                                                             bool stop_grad) {
  if (probs.size() != features.size() || probs.empty()) {
    throw ShapeError("fuse_cross_level: need one probability and one feature matrix per level");
  }
  const std::size_t levels = probs.size();
  std::vector<NodeId> p(levels);
  std::vector<NodeId> weights(levels);
  for (std::size_t r = 0; r < levels; ++r) {
    require_same_rows(g, probs[r], positions, "fuse_cross_level");
    require_same_rows(g, features[r], positions, "fuse_cross_level");
    p[r] = stop_grad ? g.stop_gradient(probs[r]) : probs[r];
    weights[r] = column_normalized(g, p[r]);
  }
  std::vector<std::vector<FusedBlock>> fused(levels);
  for (std::size_t k = 0; k < levels; ++k) {
    auto& parts = fused[k];
    parts.reserve(levels + 2);
    for (std::size_t r = 0; r < levels; ++r) parts.push_back({p[r], g.matmul_tn(weights[r], features[k])});
    parts.push_back({features[k], {}});
    parts.push_back({positions, {}});
  }
  return fused;
}

Matrix aggregate_part_features(const Matrix& probs, const Matrix& features) {
  Graph g;
  return g.value(aggregate_part_features(g, g.constant(probs), g.constant(features)));
}

Matrix fuse_point_features(const Matrix& probs, const Matrix& part_features) {
  Graph g;
  return g.value(fuse_point_features(g, g.constant(probs), g.constant(part_features)));
}

Matrix fuse_single_level(const Matrix& probs, const Matrix& features, const Matrix& positions) {
  Graph g;
  return g.value(fuse_single_level(g, g.constant(probs), g.constant(features), g.constant(positions), false));
}

std::vector<Matrix> fuse_cross_level(std::span<const Matrix> probs, std::span<const Matrix> features,
                                     const Matrix& positions) {
  Graph g;
  std::vector<NodeId> p;
  std::vector<NodeId> f;
  for (const auto& m : probs) p.push_back(g.constant(m));
  for (const auto& m : features) f.push_back(g.constant(m));
  std::vector<Matrix> out;
  for (NodeId id : fuse_cross_level(g, p, f, g.constant(positions), false)) out.push_back(g.value(id));
  return out;
}

Matrix one_hot_projection(const Matrix& probs) {
  Graph g;
  return g.value(g.one_hot_rows(g.constant(probs)));
}

void check_probabilities(const Matrix& probs, double tol) {
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    double total = 0.0;
    for (Eigen::Index c = 0; c < probs.cols(); ++c) {
      const double v = probs(r, c);
      if (!(v >= 0.0 && v <= 1.0)) {
        throw std::invalid_argument("probabilities: entry outside [0, 1] in row " + std::to_string(r));
      }
      total += v;
    }
    if (std::abs(total - 1.0) > tol) {
      throw std::invalid_argument("probabilities: row " + std::to_string(r) + " sums to " + std::to_string(total));
    }
  }
}

}  // namespace partfuse::fusion
