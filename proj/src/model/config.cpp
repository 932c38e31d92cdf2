#include "partfuse/model/config.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace partfuse::model {

std::string_view fusion_name(FusionMode mode) {
  switch (mode) {
    case FusionMode::kNone: return "none";
    case FusionMode::kSingle: return "single";
    case FusionMode::kMulti: return "multi";
    case FusionMode::kCross: return "cross";
  }
  return "?";
}

FusionMode parse_fusion(std::string_view name) {
  for (auto m : {FusionMode::kNone, FusionMode::kSingle, FusionMode::kMulti, FusionMode::kCross}) {
    if (fusion_name(m) == name) return m;
  }
  throw std::invalid_argument("unknown fusion mode '" + std::string(name) + "' (none|single|multi|cross)");
}

int ModelConfig::offset_input_dim() const {
  switch (fusion) {
    case FusionMode::kNone: return feature_dim;
    case FusionMode::kSingle:
    case FusionMode::kMulti: return 2 * feature_dim + 3;
    case FusionMode::kCross: return levels() * feature_dim + feature_dim + 3;
  }
  return 0;
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("model config: " + what); };
  if (feature_dim < 1) fail("feature_dim must be >= 1");
  if (encoder_width < 1) fail("encoder_width must be >= 1");
  if (head_hidden < 1) fail("head_hidden must be >= 1");
  if (offset_layers < 1) fail("offset_layers must be >= 1");
  if (class_counts.empty()) fail("at least one level is required");
  for (int c : class_counts) {
    if (c < 1) fail("class counts must be >= 1");
  }
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail("learning_rate must be positive");
  if (iterations < 0) fail("iterations must be >= 0");
  if (!(decay > 0.0 && decay <= 1.0)) fail("decay must lie in (0, 1]");
  double prev = 0.0;
  for (double m : milestones) {
    if (!(m > prev && m < 1.0)) fail("milestones must be strictly increasing within (0, 1)");
    prev = m;
  }
  if (batch_size < 1) fail("batch_size must be >= 1");
}

double lr_schedule(int iteration, const ModelConfig& config) {
  double lr = config.learning_rate;
  for (double m : config.milestones) {
    // Milestone iteration is floor(m * total), so 0.5 of 1000 switches at 500.
    const auto at = static_cast<long long>(std::floor(m * config.iterations));
    if (iteration >= at) lr *= config.decay;
  }
  return lr;
}

}  // namespace partfuse::model
