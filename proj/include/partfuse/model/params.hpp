#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "partfuse/model/config.hpp"
#include "partfuse/numerics/matrix.hpp"

namespace partfuse::model {

struct Tensor {
  std::string name;
  Matrix value;
};

/// Named parameter tensors in a fixed order. Weights are fan_in x fan_out,
/// biases 1 x fan_out.
///
///   enc.{0,1}.{w,b}                    shared per-point encoder (level 0 trunk)
///   dec_sem.k.{w,b}, dec_ins.k.{w,b}    parallel decoders of level k
///   sem.k.{0,1}.{w,b}                   semantic head
///   trunk.k.{0,1}.{w,b}                 extra encoders (fusion=single, k >= 1)
///   off.k.0.{w,b}, off.k.inst.{w,b}, off.k.region.{w,b}
///   two_dir.k.w                         semantic -> instance map (two_dir only)
struct ModelParams {
  std::vector<Tensor> tensors;

  /// Throws std::out_of_range for unknown names.
  const Matrix& at(std::string_view name) const;
  Matrix& at(std::string_view name);
  std::size_t index_of(std::string_view name) const;
  std::size_t scalar_count() const;

  friend bool operator==(const ModelParams& a, const ModelParams& b);
};

/// Glorot-uniform bound sqrt(6 / (fan_in + fan_out)).
double glorot_bound(int fan_in, int fan_out);

/// Deterministic per (config, seed). Draw order is encoder, decoders,
/// semantic heads, extra trunks, offset heads, two_dir maps, so the semantic
/// side is identical across fusion modes for one seed.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

/// Throws std::invalid_argument if `params` does not have the tensor names and
/// shapes `config` requires, or holds non-finite values.
void check_params(const ModelParams& params, const ModelConfig& config);

}  // namespace partfuse::model
