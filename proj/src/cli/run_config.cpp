#include "partfuse/cli/run_config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>

#include "partfuse/model/checkpoint.hpp"

namespace partfuse::cli {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T v{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError("invalid value '" + std::string(text) + "' for " + std::string(key));
  }
  return v;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "1" || text == "true" || text == "on" || text == "yes") return true;
  if (text == "0" || text == "false" || text == "off" || text == "no") return false;
  throw ConfigError("invalid boolean '" + std::string(text) + "' for " + std::string(key));
}

std::vector<double> parse_list(std::string_view key, std::string_view text) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto item = trim(text.substr(start, comma == std::string_view::npos ? text.npos : comma - start));
    out.push_back(parse_number<double>(key, item));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string list_text(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + model::format_double(v[i]);
  return s;
}

struct Field {
  std::function<void(RunConfig&, std::string_view, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Field number(T RunConfig::*member) {
  return {[member](RunConfig& c, std::string_view k, std::string_view v) { c.*member = parse_number<T>(k, v); },
          [member](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return model::format_double(c.*member);
            else return std::to_string(c.*member);
          }};
}

template <typename Owner, typename T>
Field nested(Owner RunConfig::*owner, T Owner::*member) {
  return {[owner, member](RunConfig& c, std::string_view k, std::string_view v) {
            if constexpr (std::is_same_v<T, bool>) (c.*owner).*member = parse_bool(k, v);
            else (c.*owner).*member = parse_number<T>(k, v);
          },
          [owner, member](const RunConfig& c) {
            if constexpr (std::is_same_v<T, bool>) return std::string((c.*owner).*member ? "true" : "false");
            else if constexpr (std::is_floating_point_v<T>) return model::format_double((c.*owner).*member);
            else return std::to_string((c.*owner).*member);
          }};
}

Field path(std::filesystem::path RunConfig::*member) {
  return {[member](RunConfig& c, std::string_view, std::string_view v) { c.*member = std::string(v); },
          [member](const RunConfig& c) { return (c.*member).string(); }};
}

Field list(std::vector<double> RunConfig::*member) {
  return {[member](RunConfig& c, std::string_view k, std::string_view v) { c.*member = parse_list(k, v); },
          [member](const RunConfig& c) { return list_text(c.*member); }};
}

const std::vector<std::pair<std::string, Field>>& table() {
  static const std::vector<std::pair<std::string, Field>> fields = {
      {"seed", number(&RunConfig::seed)},
      {"data_dir", path(&RunConfig::data_dir)},
      {"out_dir", path(&RunConfig::out_dir)},
      {"checkpoint", path(&RunConfig::checkpoint)},
      {"predictions_dir", path(&RunConfig::predictions_dir)},
      {"data.train_shapes", number(&RunConfig::train_shapes)},
      {"data.test_shapes", number(&RunConfig::test_shapes)},
      {"data.points", number(&RunConfig::points)},
      {"data.jitter", number(&RunConfig::jitter)},
      {"data.seed", number(&RunConfig::data_seed)},
      {"model.feature_dim", nested(&RunConfig::model, &model::ModelConfig::feature_dim)},
      {"model.encoder_width", nested(&RunConfig::model, &model::ModelConfig::encoder_width)},
      {"model.head_hidden", nested(&RunConfig::model, &model::ModelConfig::head_hidden)},
      {"model.offset_layers", nested(&RunConfig::model, &model::ModelConfig::offset_layers)},
      {"model.fusion",
       {[](RunConfig& c, std::string_view, std::string_view v) {
          try {
            c.model.fusion = model::parse_fusion(v);
          } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
          }
        },
        [](const RunConfig& c) { return std::string(model::fusion_name(c.model.fusion)); }}},
      {"model.one_hot", nested(&RunConfig::model, &model::ModelConfig::one_hot)},
      {"model.stop_grad", nested(&RunConfig::model, &model::ModelConfig::stop_grad)},
      {"model.two_dir", nested(&RunConfig::model, &model::ModelConfig::two_dir)},
      {"model.learning_rate", nested(&RunConfig::model, &model::ModelConfig::learning_rate)},
      {"model.iterations", nested(&RunConfig::model, &model::ModelConfig::iterations)},
      {"model.decay", nested(&RunConfig::model, &model::ModelConfig::decay)},
      {"model.milestones",
       {[](RunConfig& c, std::string_view k, std::string_view v) { c.model.milestones = parse_list(k, v); },
        [](const RunConfig& c) { return list_text(c.model.milestones); }}},
      {"model.batch_size", nested(&RunConfig::model, &model::ModelConfig::batch_size)},
      {"augment.scale_min", nested(&RunConfig::augment, &data::AugmentParams::scale_min)},
      {"augment.scale_max", nested(&RunConfig::augment, &data::AugmentParams::scale_max)},
      {"augment.rotation_deg", nested(&RunConfig::augment, &data::AugmentParams::rotation_deg)},
      {"augment.translation", nested(&RunConfig::augment, &data::AugmentParams::translation)},
      {"cluster.bandwidth", nested(&RunConfig::cluster, &cluster::ClusterParams::bandwidth)},
      {"cluster.lambda", nested(&RunConfig::cluster, &cluster::ClusterParams::lambda)},
      {"cluster.epsilon", nested(&RunConfig::cluster, &cluster::ClusterParams::epsilon)},
      {"cluster.max_iterations", nested(&RunConfig::cluster, &cluster::ClusterParams::max_iterations)},
      {"cluster.tolerance", nested(&RunConfig::cluster, &cluster::ClusterParams::tolerance)},
      {"train.log_every", number(&RunConfig::log_every)},
      {"ablate.bandwidths", list(&RunConfig::ablate_bandwidths)},
      {"ablate.lambdas", list(&RunConfig::ablate_lambdas)},
      {"gradcheck.points", number(&RunConfig::gradcheck_points)},
      {"gradcheck.fraction", number(&RunConfig::gradcheck_fraction)},
      {"gradcheck.step", number(&RunConfig::gradcheck_step)},
  };
  return fields;
}

}  // namespace

void RunConfig::set(std::string_view key, std::string_view value) {
  const std::string v = trim(value);
  for (const auto& [name, field] : table()) {
    if (name == key) {
      field.set(*this, key, v);
      return;
    }
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

void RunConfig::load(std::istream& is, const std::string& source) {
  std::string line;
  int number = 0;
  while (std::getline(is, line)) {
    ++number;
    const auto hash = line.find('#');
    const std::string text = trim(std::string_view(line).substr(0, hash));
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(number) + ": expected key=value");
    }
    try {
      set(trim(std::string_view(text).substr(0, eq)), std::string_view(text).substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(source + ":" + std::to_string(number) + ": " + e.what());
    }
  }
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path.string());
  load(is, path.string());
}

void RunConfig::dump(std::ostream& os) const {
  for (const auto& [name, field] : table()) os << name << '=' << field.get(*this) << '\n';
}

void RunConfig::validate() const {
  auto wrap = [](auto&& fn) {
    try {
      fn();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  };
  wrap([&] { model.validate(); });
  wrap([&] { augment.validate(); });
  wrap([&] { cluster.validate(); });
  if (train_shapes < 1 || test_shapes < 1) throw ConfigError("data: shape counts must be >= 1");
  if (points < 64) throw ConfigError("data.points must be >= 64");
  if (!(jitter >= 0.0 && jitter <= 0.5)) throw ConfigError("data.jitter must lie in [0, 0.5]");
  if (log_every < 1) throw ConfigError("train.log_every must be >= 1");
  if (ablate_bandwidths.empty() || ablate_lambdas.empty()) throw ConfigError("ablate: empty sweep list");
  for (double b : ablate_bandwidths) {
    if (!(b > 0.0)) throw ConfigError("ablate.bandwidths must be positive");
  }
  for (double l : ablate_lambdas) {
    if (!(l >= 0.0)) throw ConfigError("ablate.lambdas must be non-negative");
  }
  if (gradcheck_points < 2) throw ConfigError("gradcheck.points must be >= 2");
  if (!(gradcheck_fraction > 0.0 && gradcheck_fraction <= 1.0)) {
    throw ConfigError("gradcheck.fraction must lie in (0, 1]");
  }
  if (!(gradcheck_step > 0.0)) throw ConfigError("gradcheck.step must be positive");
}

std::filesystem::path RunConfig::checkpoint_path() const {
  return checkpoint.empty() ? out_dir / "model.ckpt" : checkpoint;
}

std::filesystem::path RunConfig::predictions_path() const {
  return predictions_dir.empty() ? out_dir / "predictions" : predictions_dir;
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [name, field] : table()) out.push_back(name);
    return out;
  }();
  return names;
}

}  // namespace partfuse::cli
