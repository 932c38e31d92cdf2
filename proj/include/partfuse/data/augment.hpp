#pragma once

#include <cstdint>

#include "partfuse/data/shape.hpp"

namespace partfuse::data {

/// Training-time augmentation bounds: uniform scale, per-axis rotation
/// (degrees) and per-axis translation.
struct AugmentParams {
  double scale_min = 0.75;
  double scale_max = 1.25;
  double rotation_deg = 10.0;
  double translation = 0.125;

  void validate() const;
  static AugmentParams identity() { return {1.0, 1.0, 0.0, 0.0}; }
};

/// Applies p' = s R p + t to the points and s R o to both offset fields.
/// Labels are untouched. Deterministic per seed.
LabeledShape augment(const LabeledShape& shape, const AugmentParams& params, std::uint64_t seed);

}  // namespace partfuse::data
