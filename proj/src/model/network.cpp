#include "partfuse/model/network.hpp"

#include <span>
#include <stdexcept>
#include <string>

#include "partfuse/fusion/fusion.hpp"

namespace partfuse::model {
namespace {

std::string name(std::string_view prefix, int k, std::string_view suffix) {
  return std::string(prefix) + "." + std::to_string(k) + "." + std::string(suffix);
}

NodeId affine(Graph& g, NodeId x, NodeId w, NodeId b) { return g.add_row_broadcast(g.matmul(x, w), b); }

NodeId dense(Graph& g, const ParamNodes& p, NodeId x, const std::string& layer) {
  return affine(g, x, p.at(layer + ".w"), p.at(layer + ".b"));
}

struct Trunk {
  NodeId point;   // N x w
  NodeId global;  // 1 x w
};

Trunk encoder(Graph& g, const ParamNodes& p, NodeId x, const std::string& prefix) {
  const NodeId h = g.relu(dense(g, p, x, prefix + ".0"));
  const NodeId e = g.relu(dense(g, p, h, prefix + ".1"));
  return {e, g.column_max(e)};
}

// relu([e, 1 g] W + b), evaluated as e W_top + 1 (g W_bottom + b) so the
// global code is multiplied once instead of once per point.
NodeId decoder(Graph& g, const ParamNodes& p, const Trunk& t, const std::string& layer) {
  const NodeId w = p.at(layer + ".w");
  const Eigen::Index width = g.value(t.point).cols();
  const NodeId global = g.add(g.matmul(t.global, g.row_block(w, width, width)), p.at(layer + ".b"));
  return g.relu(g.add_row_broadcast(g.matmul(t.point, g.row_block(w, 0, width)), global));
}

// [X_1, ..., X_m] W + b without materialising the concatenation; a factored
// block P Z contributes P (Z W_j).
NodeId dense_blocks(Graph& g, const ParamNodes& p, std::span<const fusion::FusedBlock> blocks,
                    const std::string& layer) {
  const NodeId w = p.at(layer + ".w");
  NodeId acc{};
  Eigen::Index offset = 0;
  for (std::size_t j = 0; j < blocks.size(); ++j) {
    const auto& b = blocks[j];
    const Eigen::Index width = g.value(b.right ? *b.right : b.left).cols();
    const NodeId wj = g.row_block(w, offset, width);
    const NodeId term = b.right ? g.matmul(b.left, g.matmul(*b.right, wj)) : g.matmul(b.left, wj);
    acc = j == 0 ? term : g.add(acc, term);
    offset += width;
  }
  if (offset != g.value(w).rows()) {
    throw ShapeError(layer + ": input blocks have " + std::to_string(offset) + " columns, weight expects " +
                     std::to_string(g.value(w).rows()));
  }
  return g.add_row_broadcast(acc, p.at(layer + ".b"));
}

}  // namespace

ParamNodes add_param_leaves(Graph& g, const ModelParams& params, bool requires_grad) {
  ParamNodes out;
  out.params = &params;
  out.nodes.reserve(params.tensors.size());
  for (const auto& t : params.tensors) out.nodes.push_back(g.leaf(t.value, requires_grad));
  return out;
}

std::vector<LevelNodes> build_forward(Graph& g, const ParamNodes& p, const ModelConfig& config, NodeId positions) {
  if (g.value(positions).cols() != 3 || g.value(positions).rows() < 1) {
    throw ShapeError("forward: positions must be N x 3 with N >= 1, got " + shape_string(g.value(positions)));
  }
  const int levels = config.levels();
  const Trunk shared = encoder(g, p, positions, "enc");

  std::vector<LevelNodes> out(static_cast<std::size_t>(levels));
  std::vector<NodeId> fusion_probs(static_cast<std::size_t>(levels));
  std::vector<NodeId> f_ins(static_cast<std::size_t>(levels));
  for (int k = 0; k < levels; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    Trunk trunk = shared;
    if (config.fusion == FusionMode::kSingle && k > 0) {
      trunk = encoder(g, p, positions, "trunk." + std::to_string(k));
    }
    auto& lv = out[ku];
    lv.f_sem = decoder(g, p, trunk, "dec_sem." + std::to_string(k));
    lv.f_ins = decoder(g, p, trunk, "dec_ins." + std::to_string(k));
    if (config.two_dir) lv.f_ins = g.add(lv.f_ins, g.matmul(lv.f_sem, p.at("two_dir." + std::to_string(k) + ".w")));
    const NodeId hidden = g.relu(dense(g, p, lv.f_sem, name("sem", k, "0")));
    lv.probs = g.row_softmax(dense(g, p, hidden, name("sem", k, "1")));
    fusion_probs[ku] = config.one_hot ? g.one_hot_rows(lv.probs) : lv.probs;
    f_ins[ku] = lv.f_ins;
  }

  // Column blocks of each level's offset-head input (the fused feature when fusing).
  std::vector<std::vector<fusion::FusedBlock>> head_input(static_cast<std::size_t>(levels));
  switch (config.fusion) {
    case FusionMode::kNone:
      for (std::size_t k = 0; k < head_input.size(); ++k) head_input[k] = {{f_ins[k], {}}};
      break;
    case FusionMode::kSingle:
    case FusionMode::kMulti:
      for (std::size_t k = 0; k < head_input.size(); ++k) {
        head_input[k] = fusion::fuse_single_level_blocks(g, fusion_probs[k], f_ins[k], positions, config.stop_grad);
      }
      break;
    case FusionMode::kCross:
      head_input = fusion::fuse_cross_level_blocks(g, fusion_probs, f_ins, positions, config.stop_grad);
      break;
  }

  for (int k = 0; k < levels; ++k) {
    auto& lv = out[static_cast<std::size_t>(k)];
    NodeId h = g.relu(dense_blocks(g, p, head_input[static_cast<std::size_t>(k)], name("off", k, "0")));
    for (int j = 1; j < config.offset_layers; ++j) h = g.relu(dense(g, p, h, name("off", k, std::to_string(j))));
    lv.inst_offset = dense(g, p, h, name("off", k, "inst"));
    lv.region_offset = dense(g, p, h, name("off", k, "region"));
  }
  return out;
}

ForwardOutputs forward(const ModelParams& params, const Matrix& points, const ModelConfig& config) {
  Graph g;
  const ParamNodes p = add_param_leaves(g, params, false);
  const auto nodes = build_forward(g, p, config, g.constant(points));
  ForwardOutputs out;
  for (const auto& lv : nodes) {
    out.levels.push_back({g.value(lv.f_sem), g.value(lv.f_ins), g.value(lv.probs), g.value(lv.inst_offset),
                          g.value(lv.region_offset)});
  }
  return out;
}

ForwardOutputs forward(const ModelParams& params, const data::LabeledShape& shape, const ModelConfig& config) {
  if (shape.class_counts() != config.class_counts) {
    throw std::invalid_argument("forward: shape has " + std::to_string(shape.level_count()) +
                                " levels / class counts that do not match the model (" +
                                std::to_string(config.levels()) + " levels)");
  }
  return forward(params, shape.points, config);
}

}  // namespace partfuse::model
