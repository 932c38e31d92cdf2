#include "partfuse/model/params.hpp"

#include <cmath>
#include <stdexcept>

#include "partfuse/numerics/random.hpp"

namespace partfuse::model {
namespace {

struct Layer {
  std::string name;
  int fan_in;
  int fan_out;
  bool bias;
};

struct TensorShape {
  std::string name;
  int rows;
  int cols;
};

std::vector<TensorShape> tensor_shapes(const Layer& layer) {
  std::vector<TensorShape> out;
  out.push_back({layer.name + ".w", layer.fan_in, layer.fan_out});
  if (layer.bias) out.push_back({layer.name + ".b", 1, layer.fan_out});
  return out;
}

std::string level_name(std::string_view prefix, int k, std::string_view suffix) {
  return std::string(prefix) + "." + std::to_string(k) + "." + std::string(suffix);
}

std::vector<Layer> layout(const ModelConfig& c) {
  const int w = c.encoder_width;
  const int trunk = 2 * w;
  const int l = c.feature_dim;
  const int h = c.head_hidden;
  std::vector<Layer> out = {{"enc.0", 3, w, true}, {"enc.1", w, w, true}};
  for (int k = 0; k < c.levels(); ++k) {
    out.push_back({"dec_sem." + std::to_string(k), trunk, l, true});
    out.push_back({"dec_ins." + std::to_string(k), trunk, l, true});
  }
  for (int k = 0; k < c.levels(); ++k) {
    out.push_back({level_name("sem", k, "0"), l, h, true});
    out.push_back({level_name("sem", k, "1"), h, c.class_counts[static_cast<std::size_t>(k)], true});
  }
  if (c.fusion == FusionMode::kSingle) {
    for (int k = 1; k < c.levels(); ++k) {
      out.push_back({level_name("trunk", k, "0"), 3, w, true});
      out.push_back({level_name("trunk", k, "1"), w, w, true});
    }
  }
  for (int k = 0; k < c.levels(); ++k) {
    out.push_back({level_name("off", k, "0"), c.offset_input_dim(), h, true});
    for (int j = 1; j < c.offset_layers; ++j) out.push_back({level_name("off", k, std::to_string(j)), h, h, true});
    out.push_back({level_name("off", k, "inst"), h, 3, true});
    out.push_back({level_name("off", k, "region"), h, 3, true});
  }
  if (c.two_dir) {
    for (int k = 0; k < c.levels(); ++k) out.push_back({"two_dir." + std::to_string(k), l, l, false});
  }
  return out;
}

}  // namespace

const Matrix& ModelParams::at(std::string_view name) const { return tensors[index_of(name)].value; }

Matrix& ModelParams::at(std::string_view name) { return tensors[index_of(name)].value; }

std::size_t ModelParams::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (tensors[i].name == name) return i;
  }
  throw std::out_of_range("no parameter named '" + std::string(name) + "'");
}

std::size_t ModelParams::scalar_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += static_cast<std::size_t>(t.value.size());
  return n;
}

bool operator==(const ModelParams& a, const ModelParams& b) {
  if (a.tensors.size() != b.tensors.size()) return false;
  for (std::size_t i = 0; i < a.tensors.size(); ++i) {
    if (a.tensors[i].name != b.tensors[i].name || !same_matrix(a.tensors[i].value, b.tensors[i].value)) return false;
  }
  return true;
}

double glorot_bound(int fan_in, int fan_out) { return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out)); }

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(derive_seed({seed, 0x706172616d73ULL}));
  ModelParams params;
  for (const auto& layer : layout(config)) {
    const double a = glorot_bound(layer.fan_in, layer.fan_out);
    for (const auto& t : tensor_shapes(layer)) {
      if (t.name.ends_with(".b")) {
        params.tensors.push_back({t.name, Matrix::Zero(t.rows, t.cols)});
        continue;
      }
      Matrix w(t.rows, t.cols);
      for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-a, a);
      params.tensors.push_back({t.name, std::move(w)});
    }
  }
  return params;
}

void check_params(const ModelParams& params, const ModelConfig& config) {
  std::vector<TensorShape> expected;
  for (const auto& layer : layout(config)) {
    for (auto& t : tensor_shapes(layer)) expected.push_back(std::move(t));
  }
  if (expected.size() != params.tensors.size()) {
    throw std::invalid_argument("parameters: expected " + std::to_string(expected.size()) + " tensors, found " +
                                std::to_string(params.tensors.size()));
  }
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const auto& t = params.tensors[i];
    const auto& e = expected[i];
    if (t.name != e.name) {
      throw std::invalid_argument("parameters: tensor " + std::to_string(i) + " is '" + t.name + "', expected '" +
                                  e.name + "'");
    }
    if (t.value.rows() != e.rows || t.value.cols() != e.cols) {
      throw std::invalid_argument("parameters: '" + e.name + "' has shape " + shape_string(t.value) + ", expected " +
                                  std::to_string(e.rows) + "x" + std::to_string(e.cols));
    }
    if (!all_finite(t.value)) throw std::invalid_argument("parameters: '" + e.name + "' is not finite");
  }
}

}  // namespace partfuse::model
