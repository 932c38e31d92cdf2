#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "partfuse/numerics/matrix.hpp"

namespace partfuse::numerics {

/// Handle to a node inside one Graph.
struct NodeId {
  std::size_t index = 0;
  friend bool operator==(NodeId, NodeId) = default;
};

enum class OpKind {
  kLeaf,
  kMatmul,          // A * B
  kMatmulTN,        // A^T * B
  kAdd,
  kSub,
  kMul,             // elementwise
  kDiv,             // elementwise, denominator clamped at kDivisionFloor
  kAddRowBroadcast, // A + 1 * b, b is 1 x cols
  kScale,
  kRelu,
  kConcatCols,
  kRowSoftmax,
  kOneHotRows,      // row argmax indicator, no gradient
  kColumnSum,       // 1 x cols
  kColumnMax,       // 1 x cols, ties to lowest row
  kBroadcastRows,   // 1 x cols -> n x cols
  kSum,             // 1 x 1
  kMean,            // 1 x 1
  kRowNorm,         // n x 1 Euclidean norms
  kCrossEntropy,    // 1 x 1 mean negative log-likelihood of labelled columns
  kStopGradient,
  kRowBlock,        // rows [start, start + count) of the input
};

/// Reverse-mode tape over matrix-valued nodes.
///
/// Nodes are evaluated eagerly as they are appended, so construction order is
/// a valid evaluation order. `forward` re-evaluates every node after leaf
/// values were replaced with `set_value`; `backward` accumulates d(output)/d(node)
/// into every node that depends on a gradient-requiring leaf.
///
/// Shape mismatches are reported at construction time as ShapeError naming the
/// node ids involved. Any non-finite intermediate raises NumericError.
class Graph {
 public:
  NodeId leaf(Matrix value, bool requires_grad = true);
  NodeId constant(Matrix value) { return leaf(std::move(value), false); }

  NodeId matmul(NodeId a, NodeId b);
  NodeId matmul_tn(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId div(NodeId a, NodeId b);
  NodeId add_row_broadcast(NodeId a, NodeId row);
  NodeId scale(NodeId a, double factor);
  NodeId relu(NodeId a);
  NodeId concat_cols(std::span<const NodeId> parts);
  NodeId row_softmax(NodeId a);
  NodeId one_hot_rows(NodeId a);
  NodeId column_sum(NodeId a);
  NodeId column_max(NodeId a);
  NodeId broadcast_rows(NodeId row, Eigen::Index rows);
  NodeId sum(NodeId a);
  NodeId mean(NodeId a);
  NodeId row_norm(NodeId a);
  /// `labels` are 0-based column indices, one per row of `probs`.
  NodeId cross_entropy(NodeId probs, std::vector<int> labels);
  NodeId stop_gradient(NodeId a);
  NodeId row_block(NodeId a, Eigen::Index start, Eigen::Index count);

  const Matrix& value(NodeId id) const;
  /// Gradient of the last backward output w.r.t. this node; zeros when the
  /// node received none.
  Matrix grad(NodeId id) const;
  bool requires_grad(NodeId id) const;
  OpKind op(NodeId id) const;

  /// Replaces a leaf value; shape must match. Call `forward` afterwards.
  void set_value(NodeId leaf, Matrix value);

  /// Re-evaluates nodes [0, output] in construction order.
  const Matrix& forward(NodeId output);

  /// Reverse sweep from a 1x1 output. Clears all previously stored gradients.
  void backward(NodeId output);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    OpKind op = OpKind::kLeaf;
    std::vector<std::size_t> inputs;
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    bool has_grad = false;
    double factor = 0.0;
    Eigen::Index rows = 0;
    Eigen::Index start = 0;
    std::vector<int> labels;
    std::vector<Eigen::Index> argmax;
  };

  NodeId push(Node node);
  const Node& at(NodeId id) const;
  void evaluate(std::size_t index);
  void propagate(std::size_t index);
  void accumulate(std::size_t index, const Matrix& delta);
  template <typename Expr>
  void accumulate_expr(std::size_t index, const Expr& delta);

  std::vector<Node> nodes_;
};

}  // namespace partfuse::numerics
