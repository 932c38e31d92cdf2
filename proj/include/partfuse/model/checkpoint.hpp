#pragma once

#include <filesystem>
#include <istream>
#include <ostream>
#include <string>

#include "partfuse/model/config.hpp"
#include "partfuse/model/params.hpp"

namespace partfuse::model {

struct Checkpoint {
  ModelConfig config;
  ModelParams params;
};

// Layout:
//   PARTFUSE-CHECKPOINT 1
//   <key>=<value>            model config, one per line
//   tensors <count>
//   <name> <rows> <cols>     one per tensor
//   data <scalar count>
// followed by the raw tensor values, row-major, as little-endian IEEE-754
// doubles in tensor order.
void write_checkpoint(std::ostream& os, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& is);
void write_checkpoint_file(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint_file(const std::filesystem::path& path);

/// Shortest round-trip decimal form.
std::string format_double(double v);

}  // namespace partfuse::model
