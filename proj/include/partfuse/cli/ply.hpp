#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <ostream>
#include <span>

#include "partfuse/numerics/matrix.hpp"

namespace partfuse::cli {

using Rgb = std::array<std::uint8_t, 3>;

/// Fixed hash of an instance id; the same id always gets the same color.
Rgb instance_color(int inst_id);

/// ASCII PLY with x y z red green blue per vertex.
void write_ply(std::ostream& os, const Matrix& points, std::span<const int> inst_ids);

/// Reads a .pls or .plp file (chosen by its header) and writes the points of
/// `level` (1-based) colored by instance id.
void export_ply_file(const std::filesystem::path& input, const std::filesystem::path& output, int level);

}  // namespace partfuse::cli
