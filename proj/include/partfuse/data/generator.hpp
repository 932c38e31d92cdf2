#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "partfuse/data/shape.hpp"

namespace partfuse::data {

enum class ShapeFamily { kScissor, kTable, kLamp, kWheelset };

std::string_view family_name(ShapeFamily family);
/// Accepts "n-blade-scissor", "legged-table", "multi-lamp", "wheelset".
ShapeFamily parse_family(std::string_view name);

/// Parameters of one synthetic shape. `part_count` drives the hierarchy:
/// blades of a scissor, legs of a table, heads of a lamp, axles of a wheelset.
struct ShapeSpec {
  ShapeFamily family = ShapeFamily::kScissor;
  int part_count = 2;
  double jitter = 0.05;
  int points = 1024;
};

/// Every generated shape has three levels (coarse, middle, fine) over one
/// label space shared by all families, so a single network covers the corpus.
inline constexpr int kLevelCount = 3;
inline constexpr std::array<int, kLevelCount> kClassCounts = {9, 9, 11};

/// Class names per level, index 0 holding label 1.
const std::vector<std::string>& class_names(int level);

/// Deterministic in (spec, seed). Points are normalised to the unit sphere and
/// quantised to 9 significant digits so that the text format round-trips.
/// Throws std::invalid_argument for part_count < 1 or points < 64.
LabeledShape generate_shape(const ShapeSpec& spec, std::uint64_t seed);

/// A jitter-free 2-blade scissor whose blade centers are moved to exactly
/// `center_gap` apart (the closely spaced same-class instance regime).
LabeledShape make_scissor_scene(double center_gap, int points, std::uint64_t seed);

struct CorpusSpec {
  int shapes = 200;
  int points = 1024;
  double jitter = 0.05;
  std::uint64_t seed = 0;
};

/// Spec of the index-th corpus entry: families cycle, part counts are drawn
/// from a per-family range.
ShapeSpec corpus_entry(const CorpusSpec& corpus, int index);
std::uint64_t corpus_shape_seed(const CorpusSpec& corpus, int index);
std::vector<LabeledShape> generate_corpus(const CorpusSpec& corpus);

}  // namespace partfuse::data
