#include <cmath>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "partfuse/data/generator.hpp"
#include "partfuse/model/checkpoint.hpp"
#include "partfuse/model/loss.hpp"
#include "partfuse/model/network.hpp"
#include "partfuse/model/train.hpp"
#include "test_support.hpp"

using namespace partfuse;
using namespace partfuse::model;

namespace {

ModelConfig small_config(FusionMode mode) {
  ModelConfig c;
  c.feature_dim = 6;
  c.encoder_width = 8;
  c.head_hidden = 5;
  c.fusion = mode;
  return c;
}

data::LabeledShape small_shape(std::uint64_t seed, int points = 96) {
  return data::generate_shape({data::ShapeFamily::kTable, 4, 0.05, points}, seed);
}

// Outputs that reproduce the shape's annotation exactly.
ForwardOutputs perfect_outputs(const data::LabeledShape& s) {
  ForwardOutputs out;
  for (const auto& level : s.levels) {
    LevelOutputs lv;
    lv.probs = testing::one_hot(level.sem_labels, level.class_count);
    lv.inst_offset = level.inst_offset;
    lv.region_offset = level.region_offset;
    out.levels.push_back(lv);
  }
  return out;
}

constexpr FusionMode kModes[] = {FusionMode::kNone, FusionMode::kSingle, FusionMode::kMulti, FusionMode::kCross};

}  // namespace

TEST_CASE("lr_schedule examples") {
  ModelConfig c;
  c.iterations = 1000;
  CHECK(lr_schedule(0, c) == 0.1);
  CHECK(lr_schedule(499, c) == 0.1);
  CHECK(lr_schedule(500, c) == doctest::Approx(0.01).epsilon(1e-15));
  CHECK(lr_schedule(749, c) == doctest::Approx(0.01).epsilon(1e-15));
  CHECK(lr_schedule(750, c) == doctest::Approx(0.001).epsilon(1e-15));
  CHECK(lr_schedule(999, c) == doctest::Approx(0.001).epsilon(1e-15));
}

TEST_CASE("config validation") {
  CHECK_NOTHROW(ModelConfig{}.validate());
  ModelConfig c;
  c.milestones = {0.75, 0.5};
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c.milestones = {0.0, 0.5};
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = ModelConfig{};
  c.feature_dim = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  CHECK(parse_fusion("cross") == FusionMode::kCross);
  CHECK(fusion_name(FusionMode::kMulti) == "multi");
  CHECK_THROWS_AS(parse_fusion("both"), std::invalid_argument);
  ModelConfig d;
  CHECK(d.offset_input_dim() == 3 * 64 + 64 + 3);
  d.fusion = FusionMode::kSingle;
  CHECK(d.offset_input_dim() == 2 * 64 + 3);
  d.fusion = FusionMode::kNone;
  CHECK(d.offset_input_dim() == 64);
}

TEST_CASE("init_params") {
  const ModelConfig c;
  const auto a = init_params(c, 3);
  CHECK(a == init_params(c, 3));
  CHECK_FALSE(a == init_params(c, 4));
  CHECK(glorot_bound(64, 64) == doctest::Approx(0.2165).epsilon(1e-3));
  CHECK(glorot_bound(64, 64) == std::sqrt(6.0 / 128.0));
  for (const auto& t : a.tensors) {
    if (t.name.ends_with(".b")) {
      CHECK(t.value.isZero(0.0));
    } else {
      const double bound = glorot_bound(static_cast<int>(t.value.rows()), static_cast<int>(t.value.cols()));
      CHECK(t.value.cwiseAbs().maxCoeff() <= bound);
      CHECK(t.value.cwiseAbs().maxCoeff() > 0.5 * bound);
    }
  }
  CHECK_NOTHROW(check_params(a, c));
  ModelConfig other = c;
  other.fusion = FusionMode::kNone;
  CHECK_THROWS_AS(check_params(a, other), std::invalid_argument);
}

TEST_CASE("offset_layers adds square hidden layers to every offset head") {
  auto c = small_config(FusionMode::kCross);
  c.offset_layers = 1;
  const auto one = init_params(c, 5);
  c.offset_layers = 3;
  const auto three = init_params(c, 5);
  CHECK(three.tensors.size() == one.tensors.size() + 2 * 2 * static_cast<std::size_t>(c.levels()));
  int hidden = 0;
  for (const auto& t : three.tensors) {
    for (int k = 0; k < c.levels(); ++k) {
      for (int j = 1; j <= 2; ++j) {
        if (t.name == "off." + std::to_string(k) + "." + std::to_string(j) + ".w") {
          ++hidden;
          CHECK((t.value.rows() == c.head_hidden && t.value.cols() == c.head_hidden));
        }
      }
    }
  }
  CHECK(hidden == 2 * c.levels());
  CHECK_THROWS_AS(check_params(one, c), std::invalid_argument);
  c.offset_layers = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("semantic side is drawn identically in every fusion mode") {
  const auto base = init_params(small_config(FusionMode::kNone), 9);
  for (auto mode : kModes) {
    const auto p = init_params(small_config(mode), 9);
    for (const auto& t : base.tensors) {
      if (t.name.starts_with("off.")) continue;
      CHECK(same_matrix(p.at(t.name), t.value));
    }
  }
}

TEST_CASE("loss_semantic examples") {
  const std::vector<int> labels = {1, 2, 3};
  CHECK(loss_semantic(Matrix::Constant(3, 3, 1.0 / 3.0), labels) == doctest::Approx(std::log(3.0)).epsilon(1e-14));
  CHECK(loss_semantic(testing::one_hot(labels, 3), labels) == 0.0);
  const std::vector<int> one = {1};
  CHECK(loss_semantic(matrix_from_rows({{0.7, 0.3}}), one) == doctest::Approx(0.356675).epsilon(1e-6));
  const std::vector<int> bad = {3};
  CHECK_THROWS_AS(loss_semantic(matrix_from_rows({{0.7, 0.3}}), bad), std::invalid_argument);
  const std::vector<int> zero = {0};
  CHECK_THROWS_AS(loss_semantic(matrix_from_rows({{0.7, 0.3}}), zero), std::invalid_argument);
  // Clamp keeps a zero probability finite.
  const std::vector<int> second = {2};
  CHECK(loss_semantic(matrix_from_rows({{1.0, 0.0}}), second) == doctest::Approx(-std::log(1e-12)));
}

TEST_CASE("loss_offset examples") {
  const Matrix o = matrix_from_rows({{0.1, 0.2, 0.3}});
  CHECK(loss_offset(o, o) == 0.0);
  CHECK(loss_offset(matrix_from_rows({{1, 0, 0}}), Matrix::Zero(1, 3)) == 1.0);
  CHECK(loss_offset(matrix_from_rows({{1, 0, 0}, {0, 3, 4}}), Matrix::Zero(2, 3)) == 3.0);
}

TEST_CASE("total_loss examples") {
  const auto s = small_shape(2);
  CHECK(total_loss(perfect_outputs(s), s) == 0.0);

  Rng rng(31);
  ForwardOutputs out;
  double expected = 0.0;
  for (const auto& level : s.levels) {
    LevelOutputs lv;
    lv.probs = testing::random_probs(rng, static_cast<Eigen::Index>(s.size()), level.class_count);
    lv.inst_offset = testing::random_matrix(rng, static_cast<Eigen::Index>(s.size()), 3);
    lv.region_offset = testing::random_matrix(rng, static_cast<Eigen::Index>(s.size()), 3);
    expected += loss_semantic(lv.probs, level.sem_labels) + loss_offset(lv.inst_offset, level.inst_offset) +
                loss_offset(lv.region_offset, level.region_offset);
    out.levels.push_back(lv);
  }
  CHECK(total_loss(out, s) == doctest::Approx(expected).epsilon(1e-14));

  // K copies of one level.
  data::LabeledShape same = s;
  same.levels = {s.levels[0], s.levels[0], s.levels[0]};
  ForwardOutputs triple;
  triple.levels = {out.levels[0], out.levels[0], out.levels[0]};
  data::LabeledShape single = s;
  single.levels = {s.levels[0]};
  ForwardOutputs one;
  one.levels = {out.levels[0]};
  CHECK(total_loss(triple, same) == doctest::Approx(3.0 * total_loss(one, single)).epsilon(1e-14));
  CHECK(total_loss(out, s) >= 0.0);
}

TEST_CASE("forward shapes and probabilities") {
  for (auto mode : kModes) {
    const auto c = small_config(mode);
    const auto params = init_params(c, 1);
    const auto s = small_shape(5, 64);
    const auto out = forward(params, s, c);
    REQUIRE(out.levels.size() == 3);
    for (std::size_t k = 0; k < 3; ++k) {
      const auto& lv = out.levels[k];
      CHECK(lv.probs.rows() == 64);
      CHECK(lv.probs.cols() == c.class_counts[k]);
      CHECK(lv.f_sem.cols() == c.feature_dim);
      CHECK(lv.f_ins.cols() == c.feature_dim);
      CHECK(lv.inst_offset.cols() == 3);
      CHECK(lv.region_offset.cols() == 3);
      CHECK((lv.probs.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
      CHECK(all_finite(lv.inst_offset));
    }
    const auto lone = forward(params, matrix_from_rows({{0.1, -0.2, 0.3}}), c);
    for (const auto& lv : lone.levels) {
      CHECK(lv.probs.rows() == 1);
      CHECK(std::abs(lv.probs.sum() - 1.0) < 1e-12);
      CHECK((lv.probs.array() >= 0.0).all());
    }
  }
  data::LabeledShape two = small_shape(5, 64);
  two.levels.pop_back();
  CHECK_THROWS_AS(forward(init_params(small_config(FusionMode::kNone), 1), two, small_config(FusionMode::kNone)),
                  std::invalid_argument);
}

TEST_CASE("forward is permutation equivariant") {
  for (auto mode : kModes) {
    const auto c = small_config(mode);
    const auto params = init_params(c, 2);
    const Matrix pts = small_shape(6, 80).points;
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(pts.rows()));
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(7);
    for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    Matrix permuted(pts.rows(), 3);
    for (Eigen::Index i = 0; i < pts.rows(); ++i) permuted.row(i) = pts.row(perm[static_cast<std::size_t>(i)]);
    const auto a = forward(params, pts, c), b = forward(params, permuted, c);
    for (std::size_t k = 0; k < a.levels.size(); ++k) {
      for (Eigen::Index i = 0; i < pts.rows(); ++i) {
        const auto src = perm[static_cast<std::size_t>(i)];
        CHECK((b.levels[k].probs.row(i) - a.levels[k].probs.row(src)).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((b.levels[k].inst_offset.row(i) - a.levels[k].inst_offset.row(src)).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((b.levels[k].region_offset.row(i) - a.levels[k].region_offset.row(src)).cwiseAbs().maxCoeff() < 1e-12);
      }
    }
  }
}

TEST_CASE("fusion with zero weights on the fused columns reproduces the unfused offsets") {
  const auto base_cfg = small_config(FusionMode::kNone);
  const auto base = init_params(base_cfg, 4);
  const auto s = small_shape(8, 72);
  const auto ref = forward(base, s, base_cfg);
  const int l = base_cfg.feature_dim;
  for (auto mode : {FusionMode::kSingle, FusionMode::kMulti, FusionMode::kCross}) {
    const auto cfg = small_config(mode);
    auto params = init_params(cfg, 4);
    // Rows of off.k.0.w that read F_ins; everything else is zeroed.
    const int fins_row = mode == FusionMode::kCross ? cfg.levels() * l : l;
    for (int k = 0; k < cfg.levels(); ++k) {
      const std::string p = "off." + std::to_string(k) + ".";
      Matrix& w = params.at(p + "0.w");
      w.setZero();
      w.middleRows(fins_row, l) = base.at(p + "0.w");
      for (const char* name : {"0.b", "1.w", "1.b", "inst.w", "inst.b", "region.w", "region.b"}) {
        params.at(p + name) = base.at(p + name);
      }
    }
    const auto out = forward(params, s, cfg);
    // Single-level fusion gives levels 2.. their own encoder, so only level 1
    // shares the unfused network's instance features.
    const std::size_t levels = mode == FusionMode::kSingle ? 1 : out.levels.size();
    for (std::size_t k = 0; k < levels; ++k) {
      CAPTURE(fusion_name(mode));
      CHECK(same_matrix(out.levels[k].f_ins, ref.levels[k].f_ins));
      CHECK((out.levels[k].inst_offset - ref.levels[k].inst_offset).cwiseAbs().maxCoeff() < 1e-14);
      CHECK((out.levels[k].region_offset - ref.levels[k].region_offset).cwiseAbs().maxCoeff() < 1e-14);
    }
  }
}

TEST_CASE("with stop_grad the semantic heads get the same gradient in every fusion mode") {
  const auto s = small_shape(10, 64);
  auto semantic_grads = [&](FusionMode mode) {
    const auto cfg = small_config(mode);
    const auto params = init_params(cfg, 6);
    Graph g;
    const auto nodes = add_param_leaves(g, params);
    const auto levels = build_forward(g, nodes, cfg, g.constant(s.points));
    g.backward(total_loss(g, levels, s));
    std::vector<std::pair<std::string, Matrix>> out;
    for (std::size_t i = 0; i < params.tensors.size(); ++i) {
      if (params.tensors[i].name.starts_with("sem.")) out.emplace_back(params.tensors[i].name, g.grad(nodes.nodes[i]));
    }
    return out;
  };
  const auto ref = semantic_grads(FusionMode::kNone);
  REQUIRE(ref.size() == 12);
  for (auto mode : {FusionMode::kSingle, FusionMode::kMulti, FusionMode::kCross}) {
    const auto got = semantic_grads(mode);
    for (std::size_t i = 0; i < ref.size(); ++i) {
      // Single-level fusion feeds levels 2.. from their own encoders.
      if (mode == FusionMode::kSingle && !ref[i].first.starts_with("sem.0.")) continue;
      CAPTURE(ref[i].first);
      CHECK((got[i].second - ref[i].second).cwiseAbs().maxCoeff() <= 1e-14);
    }
  }
}

TEST_CASE("train") {
  data::CorpusSpec spec;
  spec.shapes = 12;
  spec.points = 96;
  spec.seed = 5;
  const auto ds = data::generate_corpus(spec);
  auto cfg = small_config(FusionMode::kCross);

  SUBCASE("zero iterations leave the initial parameters") {
    cfg.iterations = 0;
    const auto r = train(ds, cfg);
    CHECK(r.params == init_params(cfg, cfg.seed));
    CHECK(r.log.empty());
  }
  SUBCASE("deterministic and loss decreasing") {
    cfg.iterations = 200;
    cfg.learning_rate = 0.05;
    TrainOptions opts;
    opts.log_every = 50;
    const auto a = train(ds, cfg, opts);
    const auto b = train(ds, cfg, opts);
    CHECK(a.params == b.params);
    REQUIRE(a.log.size() == 4);
    CHECK(a.log[0].iteration == 49);
    CHECK(a.log[3].learning_rate == doctest::Approx(0.0005));
    CHECK(dataset_loss(a.params, cfg, ds) < dataset_loss(init_params(cfg, cfg.seed), cfg, ds));
  }
  SUBCASE("divergence names the iteration") {
    cfg.iterations = 100;
    cfg.learning_rate = 1e30;
    CHECK_THROWS_AS(train(ds, cfg), TrainingDiverged);
  }
  SUBCASE("mismatched class counts are rejected") {
    cfg.class_counts = {9, 9};
    CHECK_THROWS_AS(train(ds, cfg), std::invalid_argument);
  }
}

TEST_CASE("checkpoint round trip") {
  auto cfg = small_config(FusionMode::kMulti);
  cfg.one_hot = true;
  cfg.milestones = {0.3, 0.6, 0.9};
  cfg.learning_rate = 0.07;
  cfg.seed = 42;
  cfg.offset_layers = 3;
  const Checkpoint ckpt{cfg, init_params(cfg, 42)};
  std::stringstream ss;
  write_checkpoint(ss, ckpt);
  const std::string bytes = ss.str();
  const auto back = read_checkpoint(ss);
  CHECK(back.params == ckpt.params);
  CHECK(back.config.fusion == FusionMode::kMulti);
  CHECK(back.config.one_hot);
  CHECK(back.config.milestones == cfg.milestones);
  CHECK(back.config.learning_rate == 0.07);
  CHECK(back.config.seed == 42);
  CHECK(back.config.offset_layers == 3);
  std::stringstream again;
  write_checkpoint(again, back);
  CHECK(again.str() == bytes);

  std::istringstream truncated(bytes.substr(0, bytes.size() - 5));
  CHECK_THROWS_AS(read_checkpoint(truncated), std::runtime_error);
  std::istringstream wrong("PARTFUSE-CHECKPOINT 9\n");
  CHECK_THROWS_AS(read_checkpoint(wrong), std::runtime_error);
}

TEST_CASE("format_double round trips") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.0, 0.0}) CHECK(std::stod(format_double(v)) == v);
  CHECK(format_double(0.1) == "0.1");
}
