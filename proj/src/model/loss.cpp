#include "partfuse/model/loss.hpp"

#include <stdexcept>
#include <string>

namespace partfuse::model {

NodeId loss_semantic(Graph& g, NodeId probs, std::span<const int> labels) {
  const auto c = static_cast<int>(g.value(probs).cols());
  std::vector<int> zero_based;
  zero_based.reserve(labels.size());
  for (int y : labels) {
    if (y < 1 || y > c) {
      throw std::invalid_argument("loss_semantic: label " + std::to_string(y) + " outside 1.." + std::to_string(c));
    }
    zero_based.push_back(y - 1);
  }
  return g.cross_entropy(probs, std::move(zero_based));
}

NodeId loss_offset(Graph& g, NodeId pred, const Matrix& target) {
  return g.mean(g.row_norm(g.sub(pred, g.constant(target))));
}

NodeId total_loss(Graph& g, std::span<const LevelNodes> levels, const data::LabeledShape& shape) {
  if (static_cast<int>(levels.size()) != shape.level_count()) {
    throw std::invalid_argument("total_loss: " + std::to_string(levels.size()) + " predicted levels, shape has " +
                                std::to_string(shape.level_count()));
  }
  if (levels.empty()) throw std::invalid_argument("total_loss: no levels");
  NodeId total{};
  for (std::size_t k = 0; k < levels.size(); ++k) {
    const auto& gt = shape.levels[k];
    NodeId term = loss_semantic(g, levels[k].probs, gt.sem_labels);
    term = g.add(term, loss_offset(g, levels[k].inst_offset, gt.inst_offset));
    term = g.add(term, loss_offset(g, levels[k].region_offset, gt.region_offset));
    total = k == 0 ? term : g.add(total, term);
  }
  return total;
}

double loss_semantic(const Matrix& probs, std::span<const int> labels) {
  Graph g;
  return g.value(loss_semantic(g, g.constant(probs), labels))(0, 0);
}

double loss_offset(const Matrix& pred, const Matrix& target) {
  Graph g;
  return g.value(loss_offset(g, g.constant(pred), target))(0, 0);
}

double total_loss(const ForwardOutputs& outputs, const data::LabeledShape& shape) {
  Graph g;
  std::vector<LevelNodes> nodes;
  for (const auto& lv : outputs.levels) {
    nodes.push_back({g.constant(lv.f_sem), g.constant(lv.f_ins), g.constant(lv.probs), g.constant(lv.inst_offset),
                     g.constant(lv.region_offset)});
  }
  return g.value(total_loss(g, nodes, shape))(0, 0);
}

}  // namespace partfuse::model
