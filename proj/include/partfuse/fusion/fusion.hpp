#pragma once

#include <optional>
#include <span>
#include <vector>

#include "partfuse/numerics/graph.hpp"

namespace partfuse::fusion {

using numerics::Graph;
using numerics::NodeId;

// Semantic-probability-guided instance feature aggregation.
//
// With P the N x c semantic probabilities and F the N x l instance features,
// the part feature of class m is the P[:, m]-weighted mean of F,
//
//   Z = (P / (1_N P))^T F            (c x l, "/" elementwise, 1_N all-ones N x N)
//
// and every point receives the P-weighted combination of part features,
//
//   F_hat = P Z                      (N x l).
//
// The fused feature handed to the offset heads is [F_hat, F, positions].
// Cross-level fusion at level k concatenates F_hat^(k, r) for every level r,
// where F_hat^(k, r) aggregates level-k features with level-r probabilities.
// Column sums below kDivisionFloor are clamped, so an unused class yields a
// zero part feature instead of NaN.

/// Z (c x l). Throws ShapeError when P and F disagree on N.
NodeId aggregate_part_features(Graph& g, NodeId probs, NodeId features);

/// F_hat = P Z (N x l).
NodeId fuse_point_features(Graph& g, NodeId probs, NodeId part_features);

/// [F_hat, F, positions] (N x (2l + 3)). With `stop_grad`, the probabilities
/// enter through a stop-gradient node so no gradient reaches P.
NodeId fuse_single_level(Graph& g, NodeId probs, NodeId features, NodeId positions, bool stop_grad);

/// One fused feature per level k: [F_hat^(k,1), ..., F_hat^(k,K), F^(k), positions]
/// (N x (K l + l + 3)). Throws ShapeError on inconsistent N or level counts.
std::vector<NodeId> fuse_cross_level(Graph& g, std::span<const NodeId> probs, std::span<const NodeId> features,
                                     NodeId positions, bool stop_grad);

/// One column block of a fused feature: `left` itself, or the product
/// left * right when `right` is set (F_hat = P Z kept factored, so a consumer
/// can form P (Z W) instead of the N x l product).
struct FusedBlock {
  NodeId left;
  std::optional<NodeId> right;
};

/// The column blocks of the fused features above, unconcatenated, for
/// consumers that multiply them by a weight matrix block by block.
std::vector<FusedBlock> fuse_single_level_blocks(Graph& g, NodeId probs, NodeId features, NodeId positions,
                                                 bool stop_grad);
std::vector<std::vector<FusedBlock>> fuse_cross_level_blocks(Graph& g, std::span<const NodeId> probs,
                                                             std::span<const NodeId> features, NodeId positions,
                                                             bool stop_grad);
NodeId materialize(Graph& g, const FusedBlock& block);

// Value-level conveniences built on the graph operations above.
Matrix aggregate_part_features(const Matrix& probs, const Matrix& features);
Matrix fuse_point_features(const Matrix& probs, const Matrix& part_features);
Matrix fuse_single_level(const Matrix& probs, const Matrix& features, const Matrix& positions);
std::vector<Matrix> fuse_cross_level(std::span<const Matrix> probs, std::span<const Matrix> features,
                                     const Matrix& positions);

/// Row-wise argmax indicator; ties go to the lowest class index.
Matrix one_hot_projection(const Matrix& probs);

/// Throws std::invalid_argument unless entries lie in [0, 1] and rows sum to 1 within `tol`.
void check_probabilities(const Matrix& probs, double tol = 1e-9);

}  // namespace partfuse::fusion
