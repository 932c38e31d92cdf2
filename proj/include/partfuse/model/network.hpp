#pragma once

#include <vector>

#include "partfuse/data/shape.hpp"
#include "partfuse/model/config.hpp"
#include "partfuse/model/params.hpp"
#include "partfuse/numerics/graph.hpp"

namespace partfuse::model {

using numerics::Graph;
using numerics::NodeId;

/// Graph leaves mirroring ModelParams::tensors, index for index.
struct ParamNodes {
  const ModelParams* params = nullptr;
  std::vector<NodeId> nodes;

  NodeId at(std::string_view name) const { return nodes[params->index_of(name)]; }
};

ParamNodes add_param_leaves(Graph& g, const ModelParams& params, bool requires_grad = true);

struct LevelNodes {
  NodeId f_sem;
  NodeId f_ins;
  NodeId probs;          // row-softmax output, N x c
  NodeId inst_offset;    // O_I, N x 3
  NodeId region_offset;  // O_S, N x 3
};

/// Builds the network on `positions` (N x 3) inside `g`:
///   encoder  e = relu(relu(x W0 + b0) W1 + b1), trunk = [e, 1 max_rows(e)]
///   level k  F_sem = relu(trunk Ds + bs), F_ins = relu(trunk Di + bi)
///            (the global rows of D act on max_rows(e) once, then broadcast)
///            P = softmax(relu(F_sem S0 + c0) S1 + c1)
///            h = relu(X O0 + d0), O_I = h Oi + di, O_S = h Os + ds
/// where X is F_ins or the fused feature selected by config.fusion.
std::vector<LevelNodes> build_forward(Graph& g, const ParamNodes& params, const ModelConfig& config,
                                      NodeId positions);

struct LevelOutputs {
  Matrix f_sem;
  Matrix f_ins;
  Matrix probs;
  Matrix inst_offset;
  Matrix region_offset;
};

struct ForwardOutputs {
  std::vector<LevelOutputs> levels;
};

/// Inference on frozen parameters. Pure; safe to call concurrently.
ForwardOutputs forward(const ModelParams& params, const Matrix& points, const ModelConfig& config);

/// As above; throws std::invalid_argument when the shape's level count or
/// class counts disagree with the config.
ForwardOutputs forward(const ModelParams& params, const data::LabeledShape& shape, const ModelConfig& config);

}  // namespace partfuse::model
