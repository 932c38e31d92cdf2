#include <cmath>
#include <stdexcept>
#include <string>

#include "doctest.h"
#include "partfuse/fusion/fusion.hpp"
#include "partfuse/numerics/finite_difference.hpp"
#include "partfuse/numerics/graph.hpp"
#include "partfuse/numerics/random.hpp"
#include "test_support.hpp"

using namespace partfuse;
using numerics::Graph;
using numerics::NodeId;

namespace {

// Exercises every differentiable op once; the result is a scalar.
NodeId composite(Graph& g, NodeId a, NodeId b, NodeId w, const std::vector<int>& labels) {
  const auto n = g.value(a).rows();
  const NodeId probs = g.row_softmax(g.matmul(a, w));
  const NodeId fused = fusion::fuse_single_level(g, probs, b, g.row_block(g.concat_cols(std::vector{a, b}), 0, n),
                                                 false);
  const NodeId h = g.relu(g.add_row_broadcast(fused, g.column_max(fused)));
  const NodeId ratio = g.div(g.mul(h, h), g.add(g.broadcast_rows(g.column_sum(g.scale(h, 0.5)), n), h));
  const NodeId part = g.matmul_tn(probs, g.sub(b, g.row_block(b, 0, n)));
  return g.add(g.add(g.mean(g.row_norm(ratio)), g.sum(part)), g.cross_entropy(probs, labels));
}

}  // namespace

TEST_CASE("forward examples") {
  Graph g;
  CHECK(g.value(g.matmul(g.constant(matrix_from_rows({{2}})), g.constant(matrix_from_rows({{3}}))))(0, 0) == 6.0);
  const Matrix m = matrix_from_rows({{1.5, -2}, {0.25, 7}});
  CHECK(same_matrix(g.value(g.matmul(g.constant(Matrix::Identity(2, 2)), g.constant(m))), m));
  const Matrix s = g.value(g.row_softmax(g.constant(matrix_from_rows({{0, 0}}))));
  CHECK(s(0, 0) == 0.5);
  CHECK(s(0, 1) == 0.5);
}

TEST_CASE("backward examples") {
  Graph g;
  const NodeId x = g.leaf(matrix_from_rows({{3}}));
  g.backward(g.mul(x, x));
  CHECK(g.grad(x)(0, 0) == 6.0);

  Graph h;
  const NodeId a = h.leaf(matrix_from_rows({{2}}));
  const NodeId b = h.leaf(matrix_from_rows({{5}}));
  h.backward(h.mul(h.stop_gradient(a), b));
  CHECK(h.grad(a)(0, 0) == 0.0);
  CHECK(h.grad(b)(0, 0) == 2.0);
}

TEST_CASE("shape and output errors") {
  Graph g;
  const NodeId a = g.leaf(Matrix::Ones(2, 3));
  const NodeId b = g.leaf(Matrix::Ones(2, 3));
  try {
    g.matmul(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find(std::to_string(a.index)) != std::string::npos);
    CHECK(msg.find(std::to_string(b.index)) != std::string::npos);
  }
  CHECK_THROWS_AS(g.backward(g.add(a, b)), ShapeError);
  CHECK_THROWS_AS(g.leaf(matrix_from_rows({{std::nan("")}})), NumericError);
  CHECK_THROWS_AS(g.row_block(a, 1, 2), ShapeError);
}

TEST_CASE("row_block forward and scatter backward") {
  Graph g;
  const NodeId a = g.leaf(matrix_from_rows({{1, 2}, {3, 4}, {5, 6}}));
  const NodeId mid = g.row_block(a, 1, 2);
  CHECK(same_matrix(g.value(mid), matrix_from_rows({{3, 4}, {5, 6}})));
  g.backward(g.sum(g.mul(mid, mid)));
  CHECK(same_matrix(g.grad(a), matrix_from_rows({{0, 0}, {6, 8}, {10, 12}})));
}

TEST_CASE("finite difference examples") {
  const auto squares = [](const Matrix& x) { return x.squaredNorm(); };
  const Matrix grad = numerics::finite_difference_gradient(squares, matrix_from_rows({{1, 2}}), 1e-5);
  CHECK(grad(0, 0) == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(grad(0, 1) == doctest::Approx(4.0).epsilon(1e-9));
  const Matrix zero = numerics::finite_difference_gradient([](const Matrix&) { return 3.0; }, Matrix::Ones(2, 2), 1e-3);
  CHECK(zero.isZero(0.0));
  CHECK_THROWS_AS(numerics::finite_difference_gradient(squares, Matrix::Ones(1, 1), 0.0), std::invalid_argument);
  CHECK_THROWS_AS(numerics::finite_difference_gradient([](const Matrix& x) { return std::log(x(0, 0) - 1.0); },
                                                       Matrix::Ones(1, 1), 1e-3),
                  NumericError);
}

TEST_CASE("backward matches finite differences on random composite graphs") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(derive_seed({seed, 11}));
    const int n = 1 + static_cast<int>(rng.below(16));
    const int c = 1 + static_cast<int>(rng.below(4));
    const int l = 1 + static_cast<int>(rng.below(8));
    const Matrix a0 = testing::random_matrix(rng, n, 3);
    const Matrix b0 = testing::random_matrix(rng, n, l);
    const Matrix w0 = testing::random_matrix(rng, 3, c);
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (auto& y : labels) y = static_cast<int>(rng.below(static_cast<std::uint64_t>(c)));

    Graph g;
    const NodeId a = g.leaf(a0), b = g.leaf(b0), w = g.leaf(w0);
    g.backward(composite(g, a, b, w, labels));

    auto value_at = [&](int which) {
      return [&, which](const Matrix& x) {
        Graph h;
        const NodeId ha = h.constant(which == 0 ? x : a0);
        const NodeId hb = h.constant(which == 1 ? x : b0);
        const NodeId hw = h.constant(which == 2 ? x : w0);
        return h.value(composite(h, ha, hb, hw, labels))(0, 0);
      };
    };
    CAPTURE(seed);
    CHECK(numerics::gradient_mismatch(g.grad(a), numerics::finite_difference_gradient(value_at(0), a0, 1e-5)) <= 1.0);
    CHECK(numerics::gradient_mismatch(g.grad(b), numerics::finite_difference_gradient(value_at(1), b0, 1e-5)) <= 1.0);
    CHECK(numerics::gradient_mismatch(g.grad(w), numerics::finite_difference_gradient(value_at(2), w0, 1e-5)) <= 1.0);
  }
}

TEST_CASE("backward is linear in the output") {
  Rng rng(5);
  const Matrix a0 = testing::random_matrix(rng, 6, 3);
  const Matrix b0 = testing::random_matrix(rng, 6, 4);
  const Matrix w0 = testing::random_matrix(rng, 3, 3);
  const std::vector<int> labels = {0, 1, 2, 0, 1, 2};
  auto grads = [&](double alpha, double beta) {
    Graph g;
    const NodeId a = g.leaf(a0), b = g.leaf(b0), w = g.leaf(w0);
    const NodeId f = composite(g, a, b, w, labels);
    const NodeId second = g.sum(g.mul(g.matmul(a, w), g.matmul(a, w)));
    g.backward(g.add(g.scale(f, alpha), g.scale(second, beta)));
    return std::vector<Matrix>{g.grad(a), g.grad(b), g.grad(w)};
  };
  const auto f = grads(1, 0), s = grads(0, 1), mix = grads(2.5, -0.75);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK((mix[i] - (2.5 * f[i] - 0.75 * s[i])).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("stop_gradient blocks every path to a leaf") {
  Rng rng(9);
  Graph g;
  const NodeId a = g.leaf(testing::random_matrix(rng, 4, 3));
  const NodeId w = g.leaf(testing::random_matrix(rng, 3, 2));
  const NodeId cut = g.stop_gradient(a);
  const NodeId y = g.row_softmax(g.matmul(cut, w));
  g.backward(g.add(g.sum(g.mul(y, y)), g.mean(g.relu(g.matmul(cut, w)))));
  CHECK(g.grad(a).isZero(0.0));
  CHECK_FALSE(g.grad(w).isZero(0.0));
}

TEST_CASE("forward and backward are bit-identical across runs") {
  auto run = [] {
    Rng rng(21);
    Graph g;
    const NodeId a = g.leaf(testing::random_matrix(rng, 9, 3));
    const NodeId b = g.leaf(testing::random_matrix(rng, 9, 5));
    const NodeId w = g.leaf(testing::random_matrix(rng, 3, 4));
    const NodeId out = composite(g, a, b, w, {0, 1, 2, 3, 0, 1, 2, 3, 0});
    g.backward(out);
    return std::vector<Matrix>{g.value(out), g.grad(a), g.grad(b), g.grad(w)};
  };
  const auto x = run(), y = run();
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(same_matrix(x[i], y[i]));
}

TEST_CASE("all_finite") {
  CHECK(all_finite(Matrix::Ones(3, 17)));
  Matrix m = Matrix::Zero(5, 5);
  m(4, 3) = std::numeric_limits<double>::infinity();
  CHECK_FALSE(all_finite(m));
  m(4, 3) = std::nan("");
  CHECK_FALSE(all_finite(m));
  CHECK(all_finite(Matrix(0, 0)));
}

TEST_CASE("derive_seed is stable and order sensitive") {
  static_assert(derive_seed({1, 2}) == derive_seed({1, 2}));
  CHECK(derive_seed({1, 2}) != derive_seed({2, 1}));
  Rng a(derive_seed({3})), b(derive_seed({3}));
  for (int i = 0; i < 10; ++i) CHECK(a.canonical() == b.canonical());
}
