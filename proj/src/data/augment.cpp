#include "partfuse/data/augment.hpp"

#include <numbers>
#include <stdexcept>

#include <Eigen/Geometry>

#include "partfuse/numerics/random.hpp"

namespace partfuse::data {

void AugmentParams::validate() const {
  if (!(scale_min > 0.0) || scale_max < scale_min) {
    throw std::invalid_argument("augment: scale range must be positive and ordered");
  }
  if (rotation_deg < 0.0 || translation < 0.0) {
    throw std::invalid_argument("augment: bounds must be non-negative");
  }
}

LabeledShape augment(const LabeledShape& shape, const AugmentParams& params, std::uint64_t seed) {
  params.validate();
  Rng rng(seed);
  const double s = rng.uniform(params.scale_min, params.scale_max);
  const double deg = std::numbers::pi / 180.0;
  const double roll = rng.uniform(-params.rotation_deg, params.rotation_deg) * deg;
  const double pitch = rng.uniform(-params.rotation_deg, params.rotation_deg) * deg;
  const double yaw = rng.uniform(-params.rotation_deg, params.rotation_deg) * deg;
  Eigen::RowVector3d t;
  for (Eigen::Index j = 0; j < 3; ++j) t(j) = rng.uniform(-params.translation, params.translation);

  const Eigen::Matrix3d rot = (Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()) *
                               Eigen::AngleAxisd(pitch, Eigen::Vector3d::UnitY()) *
                               Eigen::AngleAxisd(roll, Eigen::Vector3d::UnitX()))
                                  .toRotationMatrix();
  // Row vectors: p' = s p R^T.
  const Eigen::Matrix3d linear = s * rot.transpose();

  LabeledShape out = shape;
  out.points = (shape.points * linear).rowwise() + t;
  for (auto& level : out.levels) {
    if (level.inst_offset.size() != 0) level.inst_offset = level.inst_offset * linear;
    if (level.region_offset.size() != 0) level.region_offset = level.region_offset * linear;
  }
  return out;
}

}  // namespace partfuse::data
