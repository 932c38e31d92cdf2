#include "partfuse/data/generator.hpp"

#include <charconv>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <Eigen/Geometry>

#include "partfuse/numerics/random.hpp"

namespace partfuse::data {
namespace {

constexpr double kPi = std::numbers::pi;

struct Primitive {
  enum class Kind { kBox, kCylinder, kSphere };
  Kind kind = Kind::kBox;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  // box: half extents; cylinder: (radius, radius, half length along local z);
  // sphere: x holds the radius.
  Eigen::Vector3d half = Eigen::Vector3d::Ones();
};

struct Part {
  Primitive shape;
  std::array<int, kLevelCount> sem{};
  std::array<int, kLevelCount> inst{};
};

Primitive box(Eigen::Vector3d center, Eigen::Vector3d half, double yaw = 0.0) {
  return {Primitive::Kind::kBox, center, Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()).toRotationMatrix(), half};
}

Primitive cylinder_z(Eigen::Vector3d center, double radius, double half_length) {
  return {Primitive::Kind::kCylinder, center, Eigen::Matrix3d::Identity(), {radius, radius, half_length}};
}

Primitive cylinder_y(Eigen::Vector3d center, double radius, double half_length) {
  return {Primitive::Kind::kCylinder, center,
          Eigen::AngleAxisd(kPi / 2, Eigen::Vector3d::UnitX()).toRotationMatrix(),
          {radius, radius, half_length}};
}

Primitive sphere(Eigen::Vector3d center, double radius) {
  return {Primitive::Kind::kSphere, center, Eigen::Matrix3d::Identity(), {radius, radius, radius}};
}

Eigen::Vector3d sample(const Primitive& p, Rng& rng) {
  Eigen::Vector3d local;
  switch (p.kind) {
    case Primitive::Kind::kBox:
      local = {rng.uniform(-p.half.x(), p.half.x()), rng.uniform(-p.half.y(), p.half.y()),
               rng.uniform(-p.half.z(), p.half.z())};
      break;
    case Primitive::Kind::kCylinder: {
      const double r = p.half.x() * std::sqrt(rng.canonical());
      const double phi = rng.uniform(0.0, 2 * kPi);
      local = {r * std::cos(phi), r * std::sin(phi), rng.uniform(-p.half.z(), p.half.z())};
      break;
    }
    case Primitive::Kind::kSphere: {
      const double z = rng.uniform(-1.0, 1.0);
      const double phi = rng.uniform(0.0, 2 * kPi);
      const double s = std::sqrt(1.0 - z * z);
      const double r = p.half.x() * std::cbrt(rng.canonical());
      local = {r * s * std::cos(phi), r * s * std::sin(phi), r * z};
      break;
    }
  }
  return p.center + p.rotation * local;
}

class Jitter {
 public:
  Jitter(Rng& rng, double amount) : rng_(rng), amount_(amount) {}
  double scale(double v) { return v * rng_.uniform(1.0 - amount_, 1.0 + amount_); }
  double shift(double v, double range) { return v + range * rng_.uniform(-amount_, amount_); }

 private:
  Rng& rng_;
  double amount_;
};

// Label indices (1-based) in the shared label space.
namespace l1 { enum { kBlades = 1, kHandles, kTop, kLegs, kBase, kPole, kHeads, kChassis, kWheels }; }
namespace l2 { enum { kBlade = 1, kHandlePair, kTop, kLegPair, kBase, kPole, kLampUnit, kChassis, kAxleUnit }; }
namespace l3 { enum { kBlade = 1, kRing, kTop, kLeg, kBase, kPole, kArm, kShade, kChassis, kAxle, kWheel }; }

std::vector<Part> scissor(int blades, Jitter& jit) {
  // Blades cross near a common pivot; their centers sit a few hundredths
  // apart, closer than the default clustering bandwidth. The whole shape is
  // mirror-symmetric in y.
  const double alpha = jit.scale(25.0) * kPi / 180.0;
  const double half_len = jit.scale(0.55);
  const double spread = 0.03;
  std::vector<Part> parts;
  auto t_of = [&](int i) { return blades == 1 ? 0.0 : -1.0 + 2.0 * i / (blades - 1); };
  for (int i = 0; i < blades; ++i) {
    const double t = t_of(i);
    parts.push_back({box({0.0, spread * t, 0.0}, {half_len, 0.05, 0.012}, alpha * t),
                     {l1::kBlades, l2::kBlade, l3::kBlade},
                     {0, i, i}});
  }
  for (int r = 0; r < 2; ++r) {
    const double t = r == 0 ? 1.0 : -1.0;
    const double theta = alpha * t;
    const Eigen::Vector3d c{-0.85 * std::cos(theta), spread * t - 0.85 * std::sin(theta), 0.0};
    parts.push_back({cylinder_z(c, 0.16, 0.015), {l1::kHandles, l2::kHandlePair, l3::kRing}, {1, blades, blades + r}});
  }
  return parts;
}

std::vector<Part> table(int legs, Jitter& jit) {
  const double top_z = 0.45;
  const double thick = 0.035;
  const double leg_half = jit.scale(0.42);
  std::vector<Part> parts;
  parts.push_back({box({0.0, 0.0, top_z}, {jit.scale(0.6), jit.scale(0.4), thick}), {l1::kTop, l2::kTop, l3::kTop}, {0, 0, 0}});
  for (int i = 0; i < legs; ++i) {
    const double phi = 2 * kPi * i / legs + kPi / legs;
    const Eigen::Vector3d c{jit.shift(0.52 * std::cos(phi), 0.2), jit.shift(0.32 * std::sin(phi), 0.2),
                            top_z - thick - leg_half};
    parts.push_back({cylinder_z(c, 0.035, leg_half), {l1::kLegs, l2::kLegPair, l3::kLeg}, {1, 1 + i / 2, 1 + i}});
  }
  return parts;
}

std::vector<Part> lamp(int heads, Jitter& jit) {
  const double pole_top = jit.scale(0.4);
  std::vector<Part> parts;
  parts.push_back({cylinder_z({0.0, 0.0, -0.5}, jit.scale(0.28), 0.025), {l1::kBase, l2::kBase, l3::kBase}, {0, 0, 0}});
  const double pole_half = (pole_top + 0.475) / 2;
  parts.push_back({cylinder_z({0.0, 0.0, -0.475 + pole_half}, 0.03, pole_half), {l1::kPole, l2::kPole, l3::kPole}, {1, 1, 1}});
  const double arm_len = jit.scale(0.18);
  for (int i = 0; i < heads; ++i) {
    const double psi = 2 * kPi * i / heads + kPi / 4;
    const Eigen::Vector3d dir{std::cos(psi), std::sin(psi), 0.0};
    parts.push_back({box(Eigen::Vector3d{0.0, 0.0, pole_top} + arm_len * dir, {arm_len, 0.02, 0.02}, psi),
                     {l1::kHeads, l2::kLampUnit, l3::kArm}, {2, 2 + i, 2 + i}});
    parts.push_back({sphere(Eigen::Vector3d{0.0, 0.0, pole_top - 0.07} + (2 * arm_len + 0.04) * dir, jit.scale(0.1)),
                     {l1::kHeads, l2::kLampUnit, l3::kShade}, {2, 2 + i, 2 + heads + i}});
  }
  return parts;
}

std::vector<Part> wheelset(int axles, Jitter& jit) {
  std::vector<Part> parts;
  const double half_x = jit.scale(0.7);
  parts.push_back({box({0.0, 0.0, 0.25}, {half_x, 0.25, 0.06}), {l1::kChassis, l2::kChassis, l3::kChassis}, {0, 0, 0}});
  const double wheel_r = jit.scale(0.14);
  for (int j = 0; j < axles; ++j) {
    const double x = axles == 1 ? 0.0 : -0.8 * half_x + 1.6 * half_x * j / (axles - 1);
    parts.push_back({cylinder_y({x, 0.0, 0.05}, 0.03, 0.38), {l1::kWheels, l2::kAxleUnit, l3::kAxle}, {1, 1 + j, 1 + j}});
    for (int s = 0; s < 2; ++s) {
      const double y = s == 0 ? 0.42 : -0.42;
      parts.push_back({cylinder_y({x, y, 0.05}, wheel_r, 0.04), {l1::kWheels, l2::kAxleUnit, l3::kWheel},
                       {1, 1 + j, 1 + axles + 2 * j + s}});
    }
  }
  return parts;
}

double quantize(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 9);
  double out = 0.0;
  std::from_chars(buf, res.ptr, out);
  return out;
}

LabeledShape assemble(const std::vector<Part>& parts, int points, Rng& rng) {
  const int n_parts = static_cast<int>(parts.size());
  LabeledShape shape;
  Matrix raw(points, 3);
  for (int k = 0; k < kLevelCount; ++k) {
    LevelAnnotation level;
    level.class_count = kClassCounts[static_cast<std::size_t>(k)];
    level.sem_labels.reserve(static_cast<std::size_t>(points));
    level.inst_ids.reserve(static_cast<std::size_t>(points));
    shape.levels.push_back(std::move(level));
  }
  int row = 0;
  for (int p = 0; p < n_parts; ++p) {
    const int count = points / n_parts + (p < points % n_parts ? 1 : 0);
    const Part& part = parts[static_cast<std::size_t>(p)];
    for (int i = 0; i < count; ++i, ++row) {
      raw.row(row) = sample(part.shape, rng).transpose();
      for (int k = 0; k < kLevelCount; ++k) {
        auto& level = shape.levels[static_cast<std::size_t>(k)];
        level.sem_labels.push_back(part.sem[static_cast<std::size_t>(k)]);
        level.inst_ids.push_back(part.inst[static_cast<std::size_t>(k)]);
      }
    }
  }
  // Shrink by 1e-8 so that 9-digit quantisation cannot leave the unit ball.
  shape.points = normalize_to_unit_sphere(raw) * (1.0 - 1e-8);
  shape.points = shape.points.unaryExpr(&quantize);
  compute_gt_centers(shape);
  return shape;
}

}  // namespace

std::string_view family_name(ShapeFamily family) {
  switch (family) {
    case ShapeFamily::kScissor: return "n-blade-scissor";
    case ShapeFamily::kTable: return "legged-table";
    case ShapeFamily::kLamp: return "multi-lamp";
    case ShapeFamily::kWheelset: return "wheelset";
  }
  return "?";
}

ShapeFamily parse_family(std::string_view name) {
  for (auto f : {ShapeFamily::kScissor, ShapeFamily::kTable, ShapeFamily::kLamp, ShapeFamily::kWheelset}) {
    if (family_name(f) == name) return f;
  }
  throw std::invalid_argument("unknown shape family: " + std::string(name));
}

const std::vector<std::string>& class_names(int level) {
  static const std::vector<std::vector<std::string>> names = {
      {"blades", "handles", "top", "legs", "base", "pole", "heads", "chassis", "wheels"},
      {"blade", "handle-pair", "top", "leg-pair", "base", "pole", "lamp-unit", "chassis", "axle-unit"},
      {"blade", "ring", "top", "leg", "base", "pole", "arm", "shade", "chassis", "axle", "wheel"},
  };
  if (level < 0 || level >= kLevelCount) throw std::out_of_range("class_names: level out of range");
  return names[static_cast<std::size_t>(level)];
}

LabeledShape generate_shape(const ShapeSpec& spec, std::uint64_t seed) {
  if (spec.part_count < 1) throw std::invalid_argument("generate_shape: part count must be >= 1");
  if (spec.points < 64) throw std::invalid_argument("generate_shape: at least 64 points per shape required");
  if (!(spec.jitter >= 0.0 && spec.jitter < 1.0)) throw std::invalid_argument("generate_shape: jitter must be in [0, 1)");
  Rng rng(derive_seed({seed, static_cast<std::uint64_t>(spec.family), static_cast<std::uint64_t>(spec.part_count)}));
  Jitter jit(rng, spec.jitter);
  std::vector<Part> parts;
  switch (spec.family) {
    case ShapeFamily::kScissor: parts = scissor(spec.part_count, jit); break;
    case ShapeFamily::kTable: parts = table(spec.part_count, jit); break;
    case ShapeFamily::kLamp: parts = lamp(spec.part_count, jit); break;
    case ShapeFamily::kWheelset: parts = wheelset(spec.part_count, jit); break;
  }
  if (static_cast<int>(parts.size()) > spec.points) {
    throw std::invalid_argument("generate_shape: more parts than points");
  }
  return assemble(parts, spec.points, rng);
}

LabeledShape make_scissor_scene(double center_gap, int points, std::uint64_t seed) {
  LabeledShape shape = generate_shape({ShapeFamily::kScissor, 2, 0.0, points}, seed);
  const auto& fine = shape.levels.back();
  Eigen::RowVector3d c[2] = {Eigen::RowVector3d::Zero(), Eigen::RowVector3d::Zero()};
  int count[2] = {0, 0};
  for (std::size_t i = 0; i < shape.size(); ++i) {
    const int id = fine.inst_ids[i];
    if (id < 2) {
      c[id] += shape.points.row(static_cast<Eigen::Index>(i));
      ++count[id];
    }
  }
  c[0] /= count[0];
  c[1] /= count[1];
  const Eigen::RowVector3d d = c[1] - c[0];
  const Eigen::RowVector3d step = d.normalized() * ((center_gap - d.norm()) / 2.0);
  for (std::size_t i = 0; i < shape.size(); ++i) {
    const int id = fine.inst_ids[i];
    if (id >= 2) continue;
    auto row = shape.points.row(static_cast<Eigen::Index>(i));
    row += id == 0 ? Eigen::RowVector3d(-step) : step;
    for (Eigen::Index j = 0; j < 3; ++j) row(j) = quantize(row(j));
  }
  compute_gt_centers(shape);
  return shape;
}

ShapeSpec corpus_entry(const CorpusSpec& corpus, int index) {
  static constexpr std::array<ShapeFamily, 4> kFamilies = {ShapeFamily::kScissor, ShapeFamily::kTable,
                                                           ShapeFamily::kLamp, ShapeFamily::kWheelset};
  const ShapeFamily family = kFamilies[static_cast<std::size_t>(index) % kFamilies.size()];
  Rng rng(derive_seed({corpus.seed, static_cast<std::uint64_t>(index), 0x5bec}));
  int parts = 1;
  switch (family) {
    case ShapeFamily::kScissor: parts = 2 + static_cast<int>(rng.below(2)); break;
    case ShapeFamily::kTable: parts = 3 + static_cast<int>(rng.below(4)); break;
    case ShapeFamily::kLamp: parts = 1 + static_cast<int>(rng.below(3)); break;
    case ShapeFamily::kWheelset: parts = 2 + static_cast<int>(rng.below(2)); break;
  }
  return {family, parts, corpus.jitter, corpus.points};
}

std::uint64_t corpus_shape_seed(const CorpusSpec& corpus, int index) {
  return derive_seed({corpus.seed, static_cast<std::uint64_t>(index), 0x5eed});
}

std::vector<LabeledShape> generate_corpus(const CorpusSpec& corpus) {
  std::vector<LabeledShape> shapes;
  shapes.reserve(static_cast<std::size_t>(corpus.shapes));
  for (int i = 0; i < corpus.shapes; ++i) {
    shapes.push_back(generate_shape(corpus_entry(corpus, i), corpus_shape_seed(corpus, i)));
  }
  return shapes;
}

}  // namespace partfuse::data
