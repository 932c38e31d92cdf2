#include "partfuse/numerics/graph.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

namespace partfuse {

Matrix matrix_from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto c = n == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(rows.begin()->size());
  Matrix m(n, c);
  Eigen::Index r = 0;
  for (const auto& row : rows) {
    if (static_cast<Eigen::Index>(row.size()) != c) {
      throw ShapeError("matrix_from_rows: ragged rows");
    }
    Eigen::Index j = 0;
    for (double v : row) m(r, j++) = v;
    ++r;
  }
  return m;
}

std::string shape_string(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

bool all_finite(const Matrix& m) {
  // x * 0 is 0 for finite x and NaN otherwise; independent lanes let this vectorize.
  constexpr std::size_t kLanes = 8;
  double acc[kLanes] = {};
  const double* d = m.data();
  const auto n = static_cast<std::size_t>(m.size());
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    for (std::size_t j = 0; j < kLanes; ++j) acc[j] += d[i + j] * 0.0;
  }
  for (; i < n; ++i) acc[0] += d[i] * 0.0;
  double total = 0.0;
  for (double a : acc) total += a;
  return total == 0.0;
}

}  // namespace partfuse

namespace partfuse::numerics {
namespace {

const char* op_name(OpKind op) {
  switch (op) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kMatmul: return "matmul";
    case OpKind::kMatmulTN: return "matmul_tn";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kDiv: return "div";
    case OpKind::kAddRowBroadcast: return "add_row_broadcast";
    case OpKind::kScale: return "scale";
    case OpKind::kRelu: return "relu";
    case OpKind::kConcatCols: return "concat_cols";
    case OpKind::kRowSoftmax: return "row_softmax";
    case OpKind::kOneHotRows: return "one_hot_rows";
    case OpKind::kColumnSum: return "column_sum";
    case OpKind::kColumnMax: return "column_max";
    case OpKind::kBroadcastRows: return "broadcast_rows";
    case OpKind::kSum: return "sum";
    case OpKind::kMean: return "mean";
    case OpKind::kRowNorm: return "row_norm";
    case OpKind::kCrossEntropy: return "cross_entropy";
    case OpKind::kStopGradient: return "stop_gradient";
    case OpKind::kRowBlock: return "row_block";
  }
  return "?";
}

[[noreturn]] void shape_mismatch(OpKind op, std::size_t a, const Matrix& va, std::size_t b,
                                 const Matrix& vb) {
  std::ostringstream os;
  os << op_name(op) << ": node " << a << " (" << shape_string(va) << ") incompatible with node "
     << b << " (" << shape_string(vb) << ")";
  throw ShapeError(os.str());
}

double clamp_denominator(double d) { return d < kDivisionFloor ? kDivisionFloor : d; }

template <typename Node>
Node make_node(OpKind op, std::vector<std::size_t> inputs) {
  Node n;
  n.op = op;
  n.inputs = std::move(inputs);
  return n;
}

}  // namespace

NodeId Graph::push(Node node) {
  const std::size_t index = nodes_.size();
  if (node.op != OpKind::kLeaf && node.op != OpKind::kStopGradient &&
      node.op != OpKind::kOneHotRows) {
    node.requires_grad = std::any_of(node.inputs.begin(), node.inputs.end(),
                                     [&](std::size_t i) { return nodes_[i].requires_grad; });
  }
  nodes_.push_back(std::move(node));
  evaluate(index);
  return NodeId{index};
}

const Graph::Node& Graph::at(NodeId id) const {
  if (id.index >= nodes_.size()) throw std::out_of_range("graph: unknown node id");
  return nodes_[id.index];
}

NodeId Graph::leaf(Matrix value, bool requires_grad) {
  if (!all_finite(value)) throw NumericError("leaf: non-finite value");
  Node n;
  n.op = OpKind::kLeaf;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  return push(std::move(n));
}

NodeId Graph::matmul(NodeId a, NodeId b) {
  const auto& va = at(a).value;
  const auto& vb = at(b).value;
  if (va.cols() != vb.rows()) shape_mismatch(OpKind::kMatmul, a.index, va, b.index, vb);
  return push(make_node<Node>(OpKind::kMatmul, {a.index, b.index}));
}

NodeId Graph::matmul_tn(NodeId a, NodeId b) {
  const auto& va = at(a).value;
  const auto& vb = at(b).value;
  if (va.rows() != vb.rows()) shape_mismatch(OpKind::kMatmulTN, a.index, va, b.index, vb);
  return push(make_node<Node>(OpKind::kMatmulTN, {a.index, b.index}));
}

#define PARTFUSE_SAME_SHAPE_OP(fn, kind)                                        \
  NodeId Graph::fn(NodeId a, NodeId b) {                                        \
    const auto& va = at(a).value;                                               \
    const auto& vb = at(b).value;                                               \
    if (va.rows() != vb.rows() || va.cols() != vb.cols())                       \
      shape_mismatch(kind, a.index, va, b.index, vb);                           \
    return push(make_node<Node>(kind, {a.index, b.index}));                \
  }

PARTFUSE_SAME_SHAPE_OP(add, OpKind::kAdd)
PARTFUSE_SAME_SHAPE_OP(sub, OpKind::kSub)
PARTFUSE_SAME_SHAPE_OP(mul, OpKind::kMul)
PARTFUSE_SAME_SHAPE_OP(div, OpKind::kDiv)
#undef PARTFUSE_SAME_SHAPE_OP

NodeId Graph::add_row_broadcast(NodeId a, NodeId row) {
  const auto& va = at(a).value;
  const auto& vr = at(row).value;
  if (vr.rows() != 1 || vr.cols() != va.cols()) {
    shape_mismatch(OpKind::kAddRowBroadcast, a.index, va, row.index, vr);
  }
  return push(make_node<Node>(OpKind::kAddRowBroadcast, {a.index, row.index}));
}

NodeId Graph::scale(NodeId a, double factor) {
  at(a);
  Node n = make_node<Node>(OpKind::kScale, {a.index});
  n.factor = factor;
  return push(std::move(n));
}

NodeId Graph::relu(NodeId a) {
  at(a);
  return push(make_node<Node>(OpKind::kRelu, {a.index}));
}

NodeId Graph::concat_cols(std::span<const NodeId> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  Node n = make_node<Node>(OpKind::kConcatCols, {});
  const auto& first = at(parts.front()).value;
  for (NodeId p : parts) {
    const auto& vp = at(p).value;
    if (vp.rows() != first.rows()) {
      shape_mismatch(OpKind::kConcatCols, parts.front().index, first, p.index, vp);
    }
    n.inputs.push_back(p.index);
  }
  return push(std::move(n));
}

NodeId Graph::row_softmax(NodeId a) {
  at(a);
  return push(make_node<Node>(OpKind::kRowSoftmax, {a.index}));
}

NodeId Graph::one_hot_rows(NodeId a) {
  at(a);
  return push(make_node<Node>(OpKind::kOneHotRows, {a.index}));
}

NodeId Graph::column_sum(NodeId a) {
  at(a);
  return push(make_node<Node>(OpKind::kColumnSum, {a.index}));
}

NodeId Graph::column_max(NodeId a) {
  if (at(a).value.rows() == 0) throw ShapeError("column_max: empty input");
  return push(make_node<Node>(OpKind::kColumnMax, {a.index}));
}

NodeId Graph::broadcast_rows(NodeId row, Eigen::Index rows) {
  if (at(row).value.rows() != 1) throw ShapeError("broadcast_rows: input must be a single row");
  Node n = make_node<Node>(OpKind::kBroadcastRows, {row.index});
  n.rows = rows;
  return push(std::move(n));
}

NodeId Graph::sum(NodeId a) {
  at(a);
  return push(make_node<Node>(OpKind::kSum, {a.index}));
}

NodeId Graph::mean(NodeId a) {
  if (at(a).value.size() == 0) throw ShapeError("mean: empty input");
  return push(make_node<Node>(OpKind::kMean, {a.index}));
}

NodeId Graph::row_norm(NodeId a) {
  at(a);
  return push(make_node<Node>(OpKind::kRowNorm, {a.index}));
}

NodeId Graph::cross_entropy(NodeId probs, std::vector<int> labels) {
  const auto& vp = at(probs).value;
  if (static_cast<Eigen::Index>(labels.size()) != vp.rows() || vp.rows() == 0) {
    throw ShapeError("cross_entropy: node " + std::to_string(probs.index) + " has " +
                     std::to_string(vp.rows()) + " rows but " + std::to_string(labels.size()) +
                     " labels");
  }
  for (int y : labels) {
    if (y < 0 || y >= vp.cols()) {
      throw std::out_of_range("cross_entropy: label " + std::to_string(y) + " outside [0, " +
                              std::to_string(vp.cols()) + ")");
    }
  }
  Node n = make_node<Node>(OpKind::kCrossEntropy, {probs.index});
  n.labels = std::move(labels);
  return push(std::move(n));
}

NodeId Graph::stop_gradient(NodeId a) {
  at(a);
  return push(make_node<Node>(OpKind::kStopGradient, {a.index}));
}

NodeId Graph::row_block(NodeId a, Eigen::Index start, Eigen::Index count) {
  const auto& va = at(a).value;
  if (start < 0 || count < 0 || start + count > va.rows()) {
    throw ShapeError("row_block: rows [" + std::to_string(start) + ", " + std::to_string(start + count) +
                     ") outside node " + std::to_string(a.index) + " (" + shape_string(va) + ")");
  }
  Node n = make_node<Node>(OpKind::kRowBlock, {a.index});
  n.start = start;
  n.rows = count;
  return push(std::move(n));
}

const Matrix& Graph::value(NodeId id) const { return at(id).value; }

Matrix Graph::grad(NodeId id) const {
  const Node& n = at(id);
  if (n.has_grad) return n.grad;
  return Matrix::Zero(n.value.rows(), n.value.cols());
}

bool Graph::requires_grad(NodeId id) const { return at(id).requires_grad; }

OpKind Graph::op(NodeId id) const { return at(id).op; }

void Graph::set_value(NodeId id, Matrix value) {
  if (id.index >= nodes_.size()) throw std::out_of_range("graph: unknown node id");
  Node& n = nodes_[id.index];
  if (n.op != OpKind::kLeaf) throw std::invalid_argument("set_value: node is not a leaf");
  if (value.rows() != n.value.rows() || value.cols() != n.value.cols()) {
    shape_mismatch(OpKind::kLeaf, id.index, n.value, id.index, value);
  }
  if (!all_finite(value)) throw NumericError("set_value: non-finite value");
  n.value = std::move(value);
}

const Matrix& Graph::forward(NodeId output) {
  at(output);
  for (std::size_t i = 0; i <= output.index; ++i) evaluate(i);
  return nodes_[output.index].value;
}

void Graph::evaluate(std::size_t index) {
  Node& n = nodes_[index];
  auto in = [&](std::size_t k) -> const Matrix& { return nodes_[n.inputs[k]].value; };

  switch (n.op) {
    case OpKind::kLeaf:
      return;
    case OpKind::kMatmul:
      n.value.noalias() = in(0) * in(1);
      break;
    case OpKind::kMatmulTN:
      n.value.noalias() = in(0).transpose() * in(1);
      break;
    case OpKind::kAdd:
      n.value = in(0) + in(1);
      break;
    case OpKind::kSub:
      n.value = in(0) - in(1);
      break;
    case OpKind::kMul:
      n.value = in(0).cwiseProduct(in(1));
      break;
    case OpKind::kDiv:
      n.value = in(0).binaryExpr(in(1), [](double a, double b) { return a / clamp_denominator(b); });
      break;
    case OpKind::kAddRowBroadcast:
      n.value = in(0).rowwise() + in(1).row(0);
      break;
    case OpKind::kScale:
      n.value = n.factor * in(0);
      break;
    case OpKind::kRelu:
      n.value = in(0).cwiseMax(0.0);
      break;
    case OpKind::kConcatCols: {
      Eigen::Index cols = 0;
      for (std::size_t k = 0; k < n.inputs.size(); ++k) cols += in(k).cols();
      n.value.resize(in(0).rows(), cols);
      for (Eigen::Index r = 0; r < n.value.rows(); ++r) {
        double* dst = n.value.data() + r * cols;
        for (std::size_t k = 0; k < n.inputs.size(); ++k) {
          const Matrix& part = in(k);
          dst = std::copy_n(part.data() + r * part.cols(), part.cols(), dst);
        }
      }
      break;
    }
    case OpKind::kRowSoftmax: {
      const Matrix& x = in(0);
      n.value.resize(x.rows(), x.cols());
      for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const double mx = x.row(r).maxCoeff();
        n.value.row(r) = (x.row(r).array() - mx).exp();
        n.value.row(r) /= n.value.row(r).sum();
      }
      break;
    }
    case OpKind::kOneHotRows: {
      const Matrix& x = in(0);
      n.value = Matrix::Zero(x.rows(), x.cols());
      for (Eigen::Index r = 0; r < x.rows(); ++r) {
        Eigen::Index best = 0;
        for (Eigen::Index c = 1; c < x.cols(); ++c) {
          if (x(r, c) > x(r, best)) best = c;
        }
        if (x.cols() > 0) n.value(r, best) = 1.0;
      }
      break;
    }
    case OpKind::kColumnSum:
      n.value = in(0).colwise().sum();
      break;
    case OpKind::kColumnMax: {
      const Matrix& x = in(0);
      n.value.resize(1, x.cols());
      n.argmax.assign(static_cast<std::size_t>(x.cols()), 0);
      for (Eigen::Index c = 0; c < x.cols(); ++c) {
        Eigen::Index best = 0;
        for (Eigen::Index r = 1; r < x.rows(); ++r) {
          if (x(r, c) > x(best, c)) best = r;
        }
        n.argmax[static_cast<std::size_t>(c)] = best;
        n.value(0, c) = x(best, c);
      }
      break;
    }
    case OpKind::kBroadcastRows:
      n.value = in(0).replicate(n.rows, 1);
      break;
    case OpKind::kSum:
      n.value = Matrix::Constant(1, 1, in(0).sum());
      break;
    case OpKind::kMean:
      n.value = Matrix::Constant(1, 1, in(0).sum() / static_cast<double>(in(0).size()));
      break;
    case OpKind::kRowNorm:
      n.value = in(0).rowwise().norm();
      break;
    case OpKind::kCrossEntropy: {
      const Matrix& p = in(0);
      double total = 0.0;
      for (Eigen::Index r = 0; r < p.rows(); ++r) {
        const double q = std::clamp(p(r, n.labels[static_cast<std::size_t>(r)]), kDivisionFloor, 1.0);
        total -= std::log(q);
      }
      n.value = Matrix::Constant(1, 1, total / static_cast<double>(p.rows()));
      break;
    }
    case OpKind::kStopGradient:
      n.value = in(0);
      break;
    case OpKind::kRowBlock:
      n.value = in(0).middleRows(n.start, n.rows);
      break;
  }

  if (!all_finite(n.value)) {
    throw NumericError(std::string(op_name(n.op)) + ": node " + std::to_string(index) +
                       " produced a non-finite value");
  }
}

void Graph::accumulate(std::size_t index, const Matrix& delta) { accumulate_expr(index, delta); }

template <typename Expr>
void Graph::accumulate_expr(std::size_t index, const Expr& delta) {
  Node& n = nodes_[index];
  if (!n.requires_grad) return;
  if (n.has_grad) {
    n.grad.noalias() += delta;
  } else {
    n.grad.noalias() = delta;
    n.has_grad = true;
  }
}

void Graph::backward(NodeId output) {
  const Node& out = at(output);
  if (out.value.rows() != 1 || out.value.cols() != 1) {
    throw ShapeError("backward: output node " + std::to_string(output.index) + " is " +
                     shape_string(out.value) + ", expected 1x1");
  }
  for (Node& n : nodes_) {
    n.has_grad = false;
    n.grad.resize(0, 0);
  }
  if (!out.requires_grad) return;
  nodes_[output.index].grad = Matrix::Ones(1, 1);
  nodes_[output.index].has_grad = true;
  for (std::size_t i = output.index + 1; i-- > 0;) {
    if (nodes_[i].has_grad && nodes_[i].op != OpKind::kLeaf) propagate(i);
  }
}

void Graph::propagate(std::size_t index) {
  const Node& n = nodes_[index];
  const Matrix& g = n.grad;
  auto in = [&](std::size_t k) -> const Matrix& { return nodes_[n.inputs[k]].value; };
  auto wants = [&](std::size_t k) { return nodes_[n.inputs[k]].requires_grad; };

  switch (n.op) {
    case OpKind::kLeaf:
    case OpKind::kStopGradient:
    case OpKind::kOneHotRows:
      return;
    case OpKind::kMatmul:
      if (wants(0)) accumulate_expr(n.inputs[0], g * in(1).transpose());
      if (wants(1)) accumulate_expr(n.inputs[1], in(0).transpose() * g);
      return;
    case OpKind::kMatmulTN:
      if (wants(0)) accumulate_expr(n.inputs[0], in(1) * g.transpose());
      if (wants(1)) accumulate_expr(n.inputs[1], in(0) * g);
      return;
    case OpKind::kAdd:
      accumulate_expr(n.inputs[0], g);
      accumulate_expr(n.inputs[1], g);
      return;
    case OpKind::kSub:
      accumulate_expr(n.inputs[0], g);
      if (wants(1)) accumulate_expr(n.inputs[1], -g);
      return;
    case OpKind::kMul:
      if (wants(0)) accumulate_expr(n.inputs[0], g.cwiseProduct(in(1)));
      if (wants(1)) accumulate_expr(n.inputs[1], g.cwiseProduct(in(0)));
      return;
    case OpKind::kDiv: {
      const Matrix& a = in(0);
      const Matrix& b = in(1);
      if (wants(0)) {
        accumulate_expr(n.inputs[0], g.binaryExpr(b, [](double gg, double bb) {
          return gg / clamp_denominator(bb);
        }));
      }
      if (wants(1)) {
        Matrix db(b.rows(), b.cols());
        for (Eigen::Index r = 0; r < b.rows(); ++r) {
          for (Eigen::Index c = 0; c < b.cols(); ++c) {
            const double bb = b(r, c);
            db(r, c) = bb < kDivisionFloor ? 0.0 : -g(r, c) * a(r, c) / (bb * bb);
          }
        }
        accumulate(n.inputs[1], db);
      }
      return;
    }
    case OpKind::kAddRowBroadcast:
      accumulate_expr(n.inputs[0], g);
      if (wants(1)) accumulate_expr(n.inputs[1], g.colwise().sum());
      return;
    case OpKind::kScale:
      if (wants(0)) accumulate_expr(n.inputs[0], n.factor * g);
      return;
    case OpKind::kRelu:
      if (wants(0)) {
        accumulate_expr(n.inputs[0], g.binaryExpr(in(0), [](double gg, double x) {
          return x > 0.0 ? gg : 0.0;
        }));
      }
      return;
    case OpKind::kConcatCols: {
      Eigen::Index offset = 0;
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        const Eigen::Index w = in(k).cols();
        if (wants(k)) accumulate_expr(n.inputs[k], g.middleCols(offset, w));
        offset += w;
      }
      return;
    }
    case OpKind::kRowSoftmax: {
      if (!wants(0)) return;
      const Matrix& y = n.value;
      Matrix dx(y.rows(), y.cols());
      for (Eigen::Index r = 0; r < y.rows(); ++r) {
        const double dot = g.row(r).dot(y.row(r));
        dx.row(r) = y.row(r).cwiseProduct((g.row(r).array() - dot).matrix());
      }
      accumulate(n.inputs[0], dx);
      return;
    }
    case OpKind::kColumnSum:
      if (wants(0)) accumulate_expr(n.inputs[0], g.replicate(in(0).rows(), 1));
      return;
    case OpKind::kColumnMax: {
      if (!wants(0)) return;
      Matrix dx = Matrix::Zero(in(0).rows(), in(0).cols());
      for (Eigen::Index c = 0; c < dx.cols(); ++c) {
        dx(n.argmax[static_cast<std::size_t>(c)], c) = g(0, c);
      }
      accumulate(n.inputs[0], dx);
      return;
    }
    case OpKind::kBroadcastRows:
      if (wants(0)) accumulate_expr(n.inputs[0], g.colwise().sum());
      return;
    case OpKind::kSum:
      if (wants(0)) accumulate(n.inputs[0], Matrix::Constant(in(0).rows(), in(0).cols(), g(0, 0)));
      return;
    case OpKind::kMean:
      if (wants(0)) {
        accumulate(n.inputs[0], Matrix::Constant(in(0).rows(), in(0).cols(),
                                                 g(0, 0) / static_cast<double>(in(0).size())));
      }
      return;
    case OpKind::kRowNorm: {
      if (!wants(0)) return;
      const Matrix& a = in(0);
      Matrix dx(a.rows(), a.cols());
      for (Eigen::Index r = 0; r < a.rows(); ++r) {
        const double norm = n.value(r, 0);
        if (norm > 0.0) {
          dx.row(r) = a.row(r) * (g(r, 0) / norm);
        } else {
          dx.row(r).setZero();
        }
      }
      accumulate(n.inputs[0], dx);
      return;
    }
    case OpKind::kRowBlock: {
      if (!wants(0)) return;
      Node& src = nodes_[n.inputs[0]];
      if (!src.has_grad) {
        src.grad = Matrix::Zero(src.value.rows(), src.value.cols());
        src.has_grad = true;
      }
      src.grad.middleRows(n.start, n.rows) += g;
      return;
    }
    case OpKind::kCrossEntropy: {
      if (!wants(0)) return;
      const Matrix& p = in(0);
      Matrix dp = Matrix::Zero(p.rows(), p.cols());
      const double inv_n = 1.0 / static_cast<double>(p.rows());
      for (Eigen::Index r = 0; r < p.rows(); ++r) {
        const int y = n.labels[static_cast<std::size_t>(r)];
        const double q = p(r, y);
        if (q >= kDivisionFloor && q <= 1.0) dp(r, y) = -g(0, 0) * inv_n / q;
      }
      accumulate(n.inputs[0], dp);
      return;
    }
  }
}

}  // namespace partfuse::numerics
