#pragma once

#include <span>
#include <vector>

#include "partfuse/data/shape.hpp"
#include "partfuse/model/network.hpp"

namespace partfuse::model {

/// Mean cross-entropy with probabilities clamped to [1e-12, 1]. `labels` are
/// 1-based; throws std::invalid_argument for labels outside 1..c.
NodeId loss_semantic(Graph& g, NodeId probs, std::span<const int> labels);

/// Mean over points of the Euclidean norm of (pred - target).
NodeId loss_offset(Graph& g, NodeId pred, const Matrix& target);

/// Sum over levels of semantic, instance-offset and region-offset losses.
NodeId total_loss(Graph& g, std::span<const LevelNodes> levels, const data::LabeledShape& shape);

double loss_semantic(const Matrix& probs, std::span<const int> labels);
double loss_offset(const Matrix& pred, const Matrix& target);
double total_loss(const ForwardOutputs& outputs, const data::LabeledShape& shape);

}  // namespace partfuse::model
