#include "partfuse/model/train.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "partfuse/model/loss.hpp"
#include "partfuse/model/network.hpp"
#include "partfuse/numerics/random.hpp"

namespace partfuse::model {
namespace {

constexpr std::uint64_t kShuffleStream = 0x73687566;
constexpr std::uint64_t kAugmentStream = 0x61756774;

// Yields dataset indices epoch by epoch, each epoch a fresh Fisher-Yates permutation.
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::uint64_t seed)
      : order_(n), pos_(n), rng_(derive_seed({seed, kShuffleStream})) {}

  std::size_t next() {
    if (pos_ == order_.size()) reshuffle();
    return order_[pos_++];
  }

 private:
  void reshuffle() {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    for (std::size_t i = order_.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(rng_.below(i));
      std::swap(order_[i - 1], order_[j]);
    }
    pos_ = 0;
  }

  std::vector<std::size_t> order_;
  std::size_t pos_;
  Rng rng_;
};

void check_dataset(const std::vector<data::LabeledShape>& dataset, const ModelConfig& config) {
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (dataset[i].class_counts() != config.class_counts) {
      throw std::invalid_argument("train: shape " + std::to_string(i) + " does not match the model's class counts");
    }
  }
}

}  // namespace

TrainingDiverged::TrainingDiverged(int iteration, const std::string& what)
    : std::runtime_error("training diverged at iteration " + std::to_string(iteration) + ": " + what),
      iteration_(iteration) {}

TrainResult train(const std::vector<data::LabeledShape>& dataset, const ModelConfig& config,
                  const TrainOptions& options) {
  return train(dataset, config, init_params(config, config.seed), options);
}

TrainResult train(const std::vector<data::LabeledShape>& dataset, const ModelConfig& config, ModelParams initial,
                  const TrainOptions& options) {
  config.validate();
  options.augment.validate();
  check_params(initial, config);
  if (config.iterations > 0) check_dataset(dataset, config);

  TrainResult result{std::move(initial), {}};
  BatchSampler sampler(dataset.size(), config.seed);
  double window_loss = 0.0;
  int window_count = 0;

  for (int it = 0; it < config.iterations; ++it) {
    Graph g;
    const ParamNodes p = add_param_leaves(g, result.params);
    NodeId batch_loss{};
    for (int b = 0; b < config.batch_size; ++b) {
      const std::size_t index = sampler.next();
      const std::uint64_t aug_seed =
          derive_seed({config.seed, kAugmentStream, static_cast<std::uint64_t>(it), static_cast<std::uint64_t>(b)});
      const data::LabeledShape shape = data::augment(dataset[index], options.augment, aug_seed);
      NodeId loss;
      try {
        const auto levels = build_forward(g, p, config, g.constant(shape.points));
        loss = total_loss(g, levels, shape);
      } catch (const NumericError& e) {
        throw TrainingDiverged(it, e.what());
      }
      batch_loss = b == 0 ? loss : g.add(batch_loss, loss);
    }
    batch_loss = g.scale(batch_loss, 1.0 / config.batch_size);
    const double loss_value = g.value(batch_loss)(0, 0);
    if (!std::isfinite(loss_value)) throw TrainingDiverged(it, "non-finite loss");

    try {
      g.backward(batch_loss);
    } catch (const NumericError& e) {
      throw TrainingDiverged(it, e.what());
    }
    const double lr = lr_schedule(it, config);
    for (std::size_t i = 0; i < result.params.tensors.size(); ++i) {
      auto& value = result.params.tensors[i].value;
      value.noalias() -= lr * g.grad(p.nodes[i]);
      if (!value.allFinite()) {
        throw TrainingDiverged(it, "non-finite parameter '" + result.params.tensors[i].name + "'");
      }
    }

    window_loss += loss_value;
    ++window_count;
    if ((it + 1) % options.log_every == 0 || it + 1 == config.iterations) {
      TrainLogEntry entry{it, lr, window_loss / window_count};
      result.log.push_back(entry);
      if (options.on_log) options.on_log(entry);
      window_loss = 0.0;
      window_count = 0;
    }
  }
  return result;
}

double dataset_loss(const ModelParams& params, const ModelConfig& config,
                    const std::vector<data::LabeledShape>& dataset) {
  if (dataset.empty()) throw std::invalid_argument("dataset_loss: empty dataset");
  double total = 0.0;
  for (const auto& shape : dataset) total += total_loss(forward(params, shape, config), shape);
  return total / static_cast<double>(dataset.size());
}

}  // namespace partfuse::model
