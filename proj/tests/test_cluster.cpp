#include <algorithm>
#include <map>
#include <numeric>
#include <set>

#include "doctest.h"
#include "partfuse/cluster/cluster.hpp"
#include "partfuse/cluster/mean_shift.hpp"
#include "partfuse/data/generator.hpp"
#include "test_support.hpp"

using namespace partfuse;
using namespace partfuse::cluster;

namespace {

// Canonical form of a labelling: each point maps to the first point sharing its id.
std::vector<std::size_t> partition_of(const std::vector<int>& ids) {
  std::map<int, std::size_t> first;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < ids.size(); ++i) out.push_back(first.try_emplace(ids[i], i).first->second);
  return out;
}

// Network outputs that carry the shape's own annotation.
model::ForwardOutputs oracle_outputs(const data::LabeledShape& s) {
  model::ForwardOutputs out;
  for (const auto& level : s.levels) {
    out.levels.push_back({Matrix(), Matrix(), testing::one_hot(level.sem_labels, level.class_count),
                          level.inst_offset, level.region_offset});
  }
  return out;
}

std::size_t count_ids(const std::vector<int>& ids, const std::vector<int>& labels, int label) {
  std::set<int> out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (labels[i] == label) out.insert(ids[i]);
  }
  return out.size();
}

}  // namespace

TEST_CASE("apply_region_push examples") {
  ClusterParams params;
  const Matrix p = Matrix::Zero(1, 3);
  const Matrix oi = matrix_from_rows({{1, 0, 0}});
  CHECK(same_matrix(apply_region_push(p, oi, Matrix::Zero(1, 3), params), matrix_from_rows({{1.05, 0, 0}})));
  Rng rng(1);
  const Matrix pts = testing::random_matrix(rng, 20, 3);
  const Matrix a = testing::random_matrix(rng, 20, 3);
  const Matrix b = testing::random_matrix(rng, 20, 3);
  params.lambda = 0.0;
  CHECK(same_matrix(apply_region_push(pts, a, b, params), Matrix(pts + a)));
  params.lambda = 0.05;
  CHECK(same_matrix(apply_region_push(pts, a, a, params), Matrix(pts + a)));
}

TEST_CASE("region push moves exactly lambda away from p + O_I") {
  Rng rng(2);
  ClusterParams params;
  for (int trial = 0; trial < 200; ++trial) {
    const Matrix p = testing::random_matrix(rng, 8, 3);
    const Matrix oi = testing::random_matrix(rng, 8, 3);
    const Matrix os = testing::random_matrix(rng, 8, 3);
    const Matrix shifted = apply_region_push(p, oi, os, params);
    for (Eigen::Index i = 0; i < 8; ++i) {
      CHECK(std::abs((shifted.row(i) - p.row(i) - oi.row(i)).norm() - params.lambda) <= 1e-12);
    }
  }
}

TEST_CASE("mean_shift examples") {
  ClusterParams params;
  SUBCASE("identical points") {
    const Matrix pts = Matrix::Constant(7, 3, 0.25);
    const auto r = mean_shift(pts, params);
    REQUIRE(r.modes.rows() == 1);
    CHECK(same_matrix(r.modes, Matrix::Constant(1, 3, 0.25)));
    CHECK(r.assignment == std::vector<int>(7, 0));
  }
  SUBCASE("two far groups") {
    Rng rng(3);
    Matrix pts(40, 3);
    for (Eigen::Index i = 0; i < 40; ++i) {
      pts.row(i) = testing::random_matrix(rng, 1, 3, -0.01, 0.01);
      if (i >= 25) pts(i, 0) += 1.0;
    }
    const auto r = mean_shift(pts, params);
    REQUIRE(r.modes.rows() == 2);
    CHECK(r.support == std::vector<int>{25, 15});
    CHECK((r.modes.row(0) - pts.topRows(25).colwise().mean()).norm() < 1e-12);
    CHECK((r.modes.row(1) - pts.bottomRows(15).colwise().mean()).norm() < 1e-12);
    for (Eigen::Index i = 0; i < 40; ++i) CHECK(r.assignment[static_cast<std::size_t>(i)] == (i < 25 ? 0 : 1));
  }
  SUBCASE("bandwidth above the diameter") {
    Rng rng(4);
    params.bandwidth = 5.0;
    const auto r = mean_shift(testing::random_matrix(rng, 30, 3), params);
    CHECK(r.modes.rows() == 1);
  }
}

TEST_CASE("mean_shift partitions are complete and order invariant on separated groups") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(derive_seed({seed, 0x5e}));
    ClusterParams params;
    // Arbitrary data: every point lands on a valid mode.
    const Eigen::Index m = 10 + static_cast<Eigen::Index>(rng.below(60));
    const auto any = mean_shift(testing::random_matrix(rng, m, 2, 0.0, 0.6), params);
    CHECK(any.assignment.size() == static_cast<std::size_t>(m));
    CHECK(any.modes.rows() <= m);
    for (int a : any.assignment) CHECK((a >= 0 && a < any.modes.rows()));

    // Groups of distinct sizes half a unit apart: the partition cannot depend on point order.
    const int groups = 2 + static_cast<int>(rng.below(4));
    std::vector<Eigen::RowVector2d> rows;
    for (int g = 0; g < groups; ++g) {
      for (int j = 0; j < 4 + 3 * g; ++j) {
        rows.push_back(Eigen::RowVector2d(0.5 * g, 0.0) + Eigen::RowVector2d(testing::random_matrix(rng, 1, 2, -0.02, 0.02)));
      }
    }
    const auto n = static_cast<Eigen::Index>(rows.size());
    Matrix pts(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) pts.row(i) = rows[static_cast<std::size_t>(i)];
    const auto r = mean_shift(pts, params);
    CHECK(r.modes.rows() == groups);

    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng.engine());
    Matrix shuffled(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) shuffled.row(i) = pts.row(perm[static_cast<std::size_t>(i)]);
    const auto s = mean_shift(shuffled, params);
    std::vector<int> back(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) back[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] = s.assignment[static_cast<std::size_t>(i)];
    CAPTURE(seed);
    CHECK(partition_of(back) == partition_of(r.assignment));
  }
}

TEST_CASE("spreading separated points never reduces the cluster count") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(derive_seed({seed, 0x33}));
    // Well-separated groups: centers on a grid with spacing 0.5.
    const int groups = 1 + static_cast<int>(rng.below(5));
    Matrix pts(groups * 6, 3);
    for (int g = 0; g < groups; ++g) {
      for (int j = 0; j < 6; ++j) {
        pts.row(g * 6 + j) = Eigen::RowVector3d(0.5 * g, 0.0, 0.0) + testing::random_matrix(rng, 1, 3, -0.02, 0.02);
      }
    }
    ClusterParams params;
    const auto base = mean_shift(pts, params).modes.rows();
    CHECK(base == groups);
    for (double factor : {1.5, 3.0}) CHECK(mean_shift(pts * factor, params).modes.rows() >= base);
  }
}

TEST_CASE("argmax_labels breaks ties toward the lower class") {
  CHECK(argmax_labels(matrix_from_rows({{0.2, 0.8}, {0.5, 0.5}, {0.1, 0.1}})) == std::vector<int>{2, 1, 1});
}

TEST_CASE("ground-truth offsets recover the ground-truth partition") {
  for (auto family : {data::ShapeFamily::kTable, data::ShapeFamily::kLamp, data::ShapeFamily::kWheelset}) {
    const auto s = data::generate_shape({family, 3, 0.05, 400}, 11);
    const auto pred = cluster_instances(s.points, oracle_outputs(s), ClusterParams{});
    for (std::size_t k = 0; k < s.levels.size(); ++k) {
      CHECK(pred.levels[k].sem_labels == s.levels[k].sem_labels);
      CHECK(partition_of(pred.levels[k].inst_ids) == partition_of(s.levels[k].inst_ids));
      for (double q : pred.levels[k].confidence) CHECK(q == 1.0);
    }
  }
}

TEST_CASE("region push separates nearby same-class instances") {
  const auto scene = data::make_scissor_scene(0.05, 300, 0);
  const auto outputs = oracle_outputs(scene);
  const std::size_t fine = scene.levels.size() - 1;
  const auto& labels = scene.levels[fine].sem_labels;
  ClusterParams params;
  params.lambda = 0.0;
  const auto merged = cluster_level(scene.points, outputs.levels[fine], params);
  CHECK(count_ids(merged.inst_ids, labels, 1) == 1);
  params.lambda = 0.05;
  const auto split = cluster_level(scene.points, outputs.levels[fine], params);
  CHECK(count_ids(split.inst_ids, labels, 1) == 2);
  CHECK(partition_of(split.inst_ids) == partition_of(scene.levels[fine].inst_ids));
}

TEST_CASE("cluster ids are dense and confidences are class probabilities") {
  Rng rng(6);
  const Eigen::Index n = 50;
  model::LevelOutputs lv;
  lv.probs = testing::random_probs(rng, n, 3);
  lv.inst_offset = testing::random_matrix(rng, n, 3, -0.05, 0.05);
  lv.region_offset = testing::random_matrix(rng, n, 3, -0.05, 0.05);
  const Matrix pts = testing::random_matrix(rng, n, 3, -0.5, 0.5);
  const auto level = cluster_level(pts, lv, ClusterParams{});
  const auto labels = argmax_labels(lv.probs);
  CHECK(level.sem_labels == labels);
  std::map<int, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < level.inst_ids.size(); ++i) members[level.inst_ids[i]].push_back(i);
  CHECK(members.begin()->first == 0);
  CHECK(members.rbegin()->first == static_cast<int>(members.size()) - 1);
  for (const auto& [id, pts_of] : members) {
    const int label = labels[pts_of.front()];
    double mean = 0.0;
    for (auto i : pts_of) {
      CHECK(labels[i] == label);
      mean += lv.probs(static_cast<Eigen::Index>(i), label - 1);
    }
    mean /= static_cast<double>(pts_of.size());
    for (auto i : pts_of) {
      CHECK(level.confidence[i] == doctest::Approx(mean).epsilon(1e-14));
      CHECK((level.confidence[i] >= 0.0 && level.confidence[i] <= 1.0));
    }
  }
}

TEST_CASE("cluster params validation") {
  ClusterParams p;
  CHECK_NOTHROW(p.validate());
  p.bandwidth = 0.0;
  CHECK_THROWS(p.validate());
  p = ClusterParams{};
  p.lambda = -0.1;
  CHECK_THROWS(p.validate());
}
