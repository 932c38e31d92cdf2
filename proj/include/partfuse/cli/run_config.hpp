#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "partfuse/cluster/mean_shift.hpp"
#include "partfuse/data/augment.hpp"
#include "partfuse/data/generator.hpp"
#include "partfuse/model/config.hpp"

namespace partfuse::cli {

/// Malformed or unknown configuration; the CLI maps it to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::uint64_t seed = 0;  // training seed
  std::filesystem::path data_dir = "data";
  std::filesystem::path out_dir = "out";
  std::filesystem::path checkpoint;       // empty: <out_dir>/model.ckpt
  std::filesystem::path predictions_dir;  // empty: <out_dir>/predictions

  int train_shapes = 200;
  int test_shapes = 50;
  int points = 1024;
  double jitter = 0.05;
  std::uint64_t data_seed = 0;

  model::ModelConfig model;
  data::AugmentParams augment;
  cluster::ClusterParams cluster;
  int log_every = 100;

  std::vector<double> ablate_bandwidths = {0.05, 0.10, 0.20};
  std::vector<double> ablate_lambdas = {0.025, 0.050, 0.075};

  int gradcheck_points = 32;
  double gradcheck_fraction = 0.01;
  double gradcheck_step = 1e-6;

  /// Applies one `key=value` assignment. Throws ConfigError for unknown keys
  /// or unparsable values.
  void set(std::string_view key, std::string_view value);
  /// Applies `key=value` text, one per line; blank lines and `#` comments are
  /// ignored. `source` prefixes error messages.
  void load(std::istream& is, const std::string& source);
  void load_file(const std::filesystem::path& path);
  /// Every key with its current value, in a form `load` accepts.
  void dump(std::ostream& os) const;
  /// Cross-field checks; throws ConfigError.
  void validate() const;

  std::filesystem::path checkpoint_path() const;
  std::filesystem::path predictions_path() const;

  static const std::vector<std::string>& keys();
};

}  // namespace partfuse::cli
