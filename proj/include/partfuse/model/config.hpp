#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace partfuse::model {

/// How the offset heads see the instance features.
///   none   offset heads read F_ins of their own level
///   single one encoder per level, single-level fusion at each level
///   multi  shared encoder, single-level fusion at each level
///   cross  shared encoder, cross-level fusion over all levels
enum class FusionMode { kNone, kSingle, kMulti, kCross };

std::string_view fusion_name(FusionMode mode);
/// Throws std::invalid_argument for unknown names.
FusionMode parse_fusion(std::string_view name);

struct ModelConfig {
  int feature_dim = 64;     // l
  int encoder_width = 64;   // per-point MLP widths and global code width
  int head_hidden = 64;
  int offset_layers = 2;    // hidden layers of each offset head
  std::vector<int> class_counts = {9, 9, 11};
  FusionMode fusion = FusionMode::kCross;
  bool one_hot = false;
  bool stop_grad = true;
  bool two_dir = false;

  double learning_rate = 0.1;
  int iterations = 2000;
  double decay = 0.1;
  std::vector<double> milestones = {0.5, 0.75};  // fractions of `iterations`
  int batch_size = 8;
  std::uint64_t seed = 0;

  int levels() const { return static_cast<int>(class_counts.size()); }
  /// Width of the offset-head input for the configured fusion mode.
  int offset_input_dim() const;
  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// Step schedule: learning_rate * decay^(number of milestones passed).
double lr_schedule(int iteration, const ModelConfig& config);

}  // namespace partfuse::model
