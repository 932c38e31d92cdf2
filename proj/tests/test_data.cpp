#include <map>
#include <set>
#include <sstream>

#include "doctest.h"
#include "partfuse/data/augment.hpp"
#include "partfuse/data/generator.hpp"
#include "partfuse/data/pls_io.hpp"
#include "partfuse/data/shape.hpp"

using namespace partfuse;
using namespace partfuse::data;

namespace {

Eigen::RowVector3d instance_center(const LabeledShape& s, int level, int id) {
  Eigen::RowVector3d c = Eigen::RowVector3d::Zero();
  int n = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s.levels[static_cast<std::size_t>(level)].inst_ids[i] == id) {
      c += s.points.row(static_cast<Eigen::Index>(i));
      ++n;
    }
  }
  return c / n;
}

std::set<int> ids_with_label(const LevelAnnotation& l, int label) {
  std::set<int> out;
  for (std::size_t i = 0; i < l.sem_labels.size(); ++i) {
    if (l.sem_labels[i] == label) out.insert(l.inst_ids[i]);
  }
  return out;
}

std::vector<LabeledShape> sample_shapes(int count) {
  CorpusSpec spec;
  spec.shapes = count;
  spec.points = 256;
  spec.seed = 77;
  return generate_corpus(spec);
}

}  // namespace

TEST_CASE("two-blade scissor") {
  // Dense sampling keeps the centroid noise well below the tolerances.
  const auto s = generate_shape({ShapeFamily::kScissor, 2, 0.05, 16384}, 0);
  const auto& mid = s.levels[1];
  REQUIRE(ids_with_label(mid, 1).size() == 2);
  CHECK(ids_with_label(mid, 2).size() == 1);
  const auto a = instance_center(s, 1, 0), b = instance_center(s, 1, 1);
  // Mirror images in y: equal x and z, opposite y, a few hundredths apart.
  CHECK(std::abs(a.x() - b.x()) < 0.02);
  CHECK(std::abs(a.y() + b.y()) < 0.02);
  CHECK((a - b).norm() < 0.1);
}

TEST_CASE("four-legged table") {
  const auto s = generate_shape({ShapeFamily::kTable, 4, 0.05, 1024}, 1);
  std::set<int> coarse(s.levels[0].sem_labels.begin(), s.levels[0].sem_labels.end());
  CHECK(coarse.size() == 2);
  const auto legs = ids_with_label(s.levels[2], 4);
  CHECK(legs.size() == 4);
}

TEST_CASE("generation is deterministic and seed dependent") {
  for (auto family : {ShapeFamily::kScissor, ShapeFamily::kTable, ShapeFamily::kLamp, ShapeFamily::kWheelset}) {
    const ShapeSpec spec{family, 2, 0.05, 300};
    CHECK(generate_shape(spec, 7) == generate_shape(spec, 7));
    CHECK_FALSE(generate_shape(spec, 7) == generate_shape(spec, 8));
  }
  CHECK_THROWS(generate_shape({ShapeFamily::kTable, 0, 0.05, 300}, 0));
}

TEST_CASE("normalize_to_unit_sphere examples") {
  const Matrix a = matrix_from_rows({{1, 0, 0}, {-1, 0, 0}});
  CHECK(same_matrix(normalize_to_unit_sphere(a), a));
  CHECK(same_matrix(normalize_to_unit_sphere(matrix_from_rows({{2, 0, 0}, {-2, 0, 0}})), a));
  CHECK(same_matrix(normalize_to_unit_sphere(matrix_from_rows({{3, 0, 0}, {5, 0, 0}})),
                    matrix_from_rows({{-1, 0, 0}, {1, 0, 0}})));
  CHECK(normalize_to_unit_sphere(matrix_from_rows({{2, 2, 2}, {2, 2, 2}})).isZero(0.0));
}

TEST_CASE("compute_gt_offsets examples") {
  SUBCASE("symmetric pair shares a region center at the origin") {
    const Matrix p = matrix_from_rows({{-0.3, 0, 0}, {-0.1, 0, 0}, {0.1, 0, 0}, {0.3, 0, 0}});
    const std::vector<int> sem = {1, 1, 1, 1}, ids = {0, 0, 1, 1};
    const auto o = compute_gt_offsets(p, sem, ids);
    CHECK((p + o.region_offset).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("a lone instance has region offset equal to instance offset") {
    const Matrix p = matrix_from_rows({{0.1, 0.2, 0.3}, {0.5, -0.2, 0.0}, {0.9, 0.9, 0.9}});
    const std::vector<int> sem = {1, 1, 2}, ids = {0, 0, 1};
    const auto o = compute_gt_offsets(p, sem, ids);
    CHECK(same_matrix(o.inst_offset, o.region_offset));
  }
  SUBCASE("three instance centers average to the region center") {
    // Instance 2 has three points so point-mass weighting would differ.
    const Matrix p = matrix_from_rows({{0, 0, 0}, {1, 0, 0}, {1.5, 0, 0}, {2, 0, 0}, {2.5, 0, 0}});
    const std::vector<int> sem = {1, 1, 1, 1, 1}, ids = {0, 1, 2, 2, 2};
    const auto o = compute_gt_offsets(p, sem, ids);
    for (Eigen::Index i = 0; i < 5; ++i) {
      CHECK((p.row(i) + o.region_offset.row(i) - Eigen::RowVector3d(1, 0, 0)).norm() < 1e-15);
    }
  }
}

TEST_CASE("duplicate_missing_levels") {
  const auto s = generate_shape({ShapeFamily::kLamp, 2, 0.05, 200}, 3);
  LabeledShape one = s;
  one.levels.resize(1);
  const auto three = duplicate_missing_levels(one, 3);
  REQUIRE(three.levels.size() == 3);
  CHECK(three.levels[1] == one.levels[0]);
  CHECK(three.levels[2] == one.levels[0]);
  CHECK(duplicate_missing_levels(s, 3) == s);

  LabeledShape sparse = s;
  sparse.levels = {s.levels[0], s.levels[2]};
  const std::vector<int> annotated = {1, 3};
  const auto filled = duplicate_missing_levels(sparse, annotated, 3);
  CHECK(filled.levels[1] == s.levels[0]);
  CHECK(filled.levels[2] == s.levels[2]);
  CHECK_THROWS_AS(duplicate_missing_levels(s, 2), std::invalid_argument);
}

TEST_CASE("augment examples") {
  const auto s = generate_shape({ShapeFamily::kWheelset, 2, 0.05, 256}, 4);
  SUBCASE("identity parameters") { CHECK(augment(s, {1.0, 1.0, 0.0, 0.0}, 3) == s); }
  SUBCASE("translation only") {
    const auto t = augment(s, {1.0, 1.0, 0.0, 0.125}, 3);
    const Eigen::RowVector3d shift = t.points.row(0) - s.points.row(0);
    CHECK(shift.cwiseAbs().maxCoeff() <= 0.125);
    CHECK(shift.norm() > 0.0);
    for (Eigen::Index i = 0; i < t.points.rows(); ++i) {
      CHECK((t.points.row(i) - s.points.row(i) - shift).cwiseAbs().maxCoeff() < 1e-12);
    }
    for (std::size_t k = 0; k < s.levels.size(); ++k) {
      CHECK(same_matrix(t.levels[k].inst_offset, s.levels[k].inst_offset));
      CHECK(same_matrix(t.levels[k].region_offset, s.levels[k].region_offset));
    }
  }
  SUBCASE("scale only") {
    const auto t = augment(s, {1.25, 1.25, 0.0, 0.0}, 3);
    for (std::size_t k = 0; k < s.levels.size(); ++k) {
      CHECK((t.levels[k].inst_offset - 1.25 * s.levels[k].inst_offset).cwiseAbs().maxCoeff() < 1e-14);
      CHECK((t.levels[k].region_offset - 1.25 * s.levels[k].region_offset).cwiseAbs().maxCoeff() < 1e-14);
    }
  }
}

TEST_CASE("augment preserves labels and offset consistency") {
  const AugmentParams params;
  for (const auto& s : sample_shapes(12)) {
    const auto t = augment(s, params, 99);
    CHECK(t == augment(s, params, 99));
    for (std::size_t k = 0; k < s.levels.size(); ++k) {
      CHECK(t.levels[k].sem_labels == s.levels[k].sem_labels);
      CHECK(t.levels[k].inst_ids == s.levels[k].inst_ids);
      // Offsets still point at the (transformed) instance centers.
      LabeledShape recomputed = t;
      compute_gt_centers(recomputed);
      CHECK((recomputed.levels[k].inst_offset - t.levels[k].inst_offset).cwiseAbs().maxCoeff() < 1e-12);
      CHECK((recomputed.levels[k].region_offset - t.levels[k].region_offset).cwiseAbs().maxCoeff() < 1e-12);
    }
    const double bound = params.scale_max + std::sqrt(3.0) * params.translation;
    CHECK(t.points.rowwise().norm().maxCoeff() <= bound);
    CHECK_NOTHROW(validate_shape(t));
  }
}

TEST_CASE("generated shapes satisfy the LabeledShape invariants") {
  for (const auto& s : sample_shapes(100)) {
    CHECK_NOTHROW(validate_shape(s));
    CHECK(hierarchy_refines(s));
    CHECK(s.points.rowwise().norm().maxCoeff() <= 1.0);
    for (const auto& level : s.levels) {
      std::map<int, Eigen::RowVector3d> sums;
      for (std::size_t i = 0; i < s.size(); ++i) {
        auto [it, fresh] = sums.try_emplace(level.inst_ids[i], Eigen::RowVector3d::Zero());
        it->second += level.inst_offset.row(static_cast<Eigen::Index>(i));
      }
      for (const auto& [id, sum] : sums) CHECK(sum.norm() <= 1e-9 * static_cast<double>(s.size()));
      CHECK(((s.points + level.inst_offset).rowwise().norm().array() <= 1.0 + 1e-12).all());
    }
  }
}

TEST_CASE("the scissor family places same-class centers inside the default bandwidth") {
  const auto s = generate_shape({ShapeFamily::kScissor, 3, 0.05, 600}, 5);
  CHECK((instance_center(s, 2, 0) - instance_center(s, 2, 1)).norm() < 0.1);
  const auto scene = make_scissor_scene(0.05, 400, 0);
  CHECK((instance_center(scene, 2, 0) - instance_center(scene, 2, 1)).norm() == doctest::Approx(0.05).epsilon(1e-6));
}

TEST_CASE("pls round trip") {
  for (const auto& s : sample_shapes(40)) {
    std::stringstream ss;
    write_pls(ss, s);
    CHECK(read_pls(ss) == s);
  }
}

TEST_CASE("pls parse errors carry line numbers") {
  auto parse_line = [](const std::string& text) {
    std::istringstream is(text);
    try {
      read_pls(is);
    } catch (const ParseError& e) {
      return e.line();
    }
    return 0;
  };
  CHECK(parse_line("PLS 1\n2 1\n3\n0 0 0 1 0\n") == 4);
  CHECK(parse_line("PLX 1\n1 1\n3\n0 0 0 1 0\n") == 1);
  CHECK(parse_line("PLS 1\n1 1\n3\n0 0 0 4 0\n") == 4);
  CHECK(parse_line("PLS 1\n2 1\n3\n0 0 0 1 0\n0 0 0 2 0\n") == 5);
  CHECK(parse_line("PLS 1\n1 2\n3\n0 0 0 1 0 1 0\n") == 3);
}

TEST_CASE("hand-written one-point file") {
  std::istringstream is("PLS 1\n1 1\n2\n0.5 -0.25 0 2 7\n");
  const auto s = read_pls(is);
  CHECK(s.size() == 1);
  CHECK(s.level_count() == 1);
  CHECK(s.levels[0].class_count == 2);
  CHECK(s.levels[0].sem_labels == std::vector<int>{2});
  CHECK(s.levels[0].inst_ids == std::vector<int>{7});
  CHECK(s.points(0, 1) == -0.25);
  CHECK(s.levels[0].inst_offset.isZero(0.0));
}

TEST_CASE("plp round trip") {
  PredictedShape p;
  p.points = matrix_from_rows({{0.1, 0.2, 0.3}, {-0.5, 0.25, 1e-7}});
  p.levels.push_back({3, {1, 3}, {0, 4}, {0.75, 1.0 / 3.0}});
  std::stringstream ss;
  write_plp(ss, p);
  const auto q = read_plp(ss);
  CHECK(same_matrix(q.points, p.points));
  CHECK(q.levels[0].sem_labels == p.levels[0].sem_labels);
  CHECK(q.levels[0].inst_ids == p.levels[0].inst_ids);
  CHECK(q.levels[0].confidence == p.levels[0].confidence);
}
