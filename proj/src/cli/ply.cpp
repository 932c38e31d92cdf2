#include "partfuse/cli/ply.hpp"

#include <fstream>
#include <stdexcept>
#include <string>

#include "partfuse/data/pls_io.hpp"

namespace partfuse::cli {

Rgb instance_color(int inst_id) {
  // splitmix64 finalizer
  std::uint64_t z = static_cast<std::uint64_t>(static_cast<std::uint32_t>(inst_id)) + 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  z ^= z >> 31;
  // Keep every channel at least 48 so no instance renders black.
  return {static_cast<std::uint8_t>(48 + (z & 0xff) % 208), static_cast<std::uint8_t>(48 + ((z >> 8) & 0xff) % 208),
          static_cast<std::uint8_t>(48 + ((z >> 16) & 0xff) % 208)};
}

void write_ply(std::ostream& os, const Matrix& points, std::span<const int> inst_ids) {
  if (points.cols() != 3 || static_cast<std::size_t>(points.rows()) != inst_ids.size()) {
    throw std::invalid_argument("write_ply: need N x 3 points and N instance ids");
  }
  os << "ply\nformat ascii 1.0\nelement vertex " << points.rows()
     << "\nproperty float x\nproperty float y\nproperty float z\n"
        "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
  char buf[128];
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const Rgb c = instance_color(inst_ids[static_cast<std::size_t>(i)]);
    std::snprintf(buf, sizeof buf, "%.9g %.9g %.9g %u %u %u\n", points(i, 0), points(i, 1), points(i, 2), c[0],
                  c[1], c[2]);
    os << buf;
  }
}

void export_ply_file(const std::filesystem::path& input, const std::filesystem::path& output, int level) {
  std::ifstream probe(input);
  if (!probe) throw std::runtime_error("cannot open " + input.string());
  std::string magic;
  probe >> magic;
  probe.close();

  Matrix points;
  std::vector<int> ids;
  auto pick = [&](const auto& levels) {
    if (level < 1 || level > static_cast<int>(levels.size())) {
      throw std::runtime_error(input.string() + ": level " + std::to_string(level) + " out of range 1.." +
                               std::to_string(levels.size()));
    }
    ids = levels[static_cast<std::size_t>(level - 1)].inst_ids;
  };
  if (magic == "PLS") {
    const auto shape = data::read_pls_file(input);
    pick(shape.levels);
    points = shape.points;
  } else if (magic == "PLP") {
    const auto shape = data::read_plp_file(input);
    pick(shape.levels);
    points = shape.points;
  } else {
    throw std::runtime_error(input.string() + ": not a .pls or .plp file");
  }
  std::ofstream os(output, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + output.string() + " for writing");
  write_ply(os, points, ids);
  if (!os) throw std::runtime_error("failed writing " + output.string());
}

}  // namespace partfuse::cli
