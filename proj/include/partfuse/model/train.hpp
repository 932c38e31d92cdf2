#pragma once

#include <functional>
#include <stdexcept>
#include <vector>

#include "partfuse/data/augment.hpp"
#include "partfuse/data/shape.hpp"
#include "partfuse/model/config.hpp"
#include "partfuse/model/params.hpp"

namespace partfuse::model {

struct TrainLogEntry {
  int iteration = 0;        // last iteration of the window (0-based)
  double learning_rate = 0;
  double mean_loss = 0;     // mean batch loss over the window
};

struct TrainOptions {
  data::AugmentParams augment{};
  int log_every = 100;
  std::function<void(const TrainLogEntry&)> on_log;
};

struct TrainResult {
  ModelParams params;
  std::vector<TrainLogEntry> log;
};

/// Thrown when a batch loss or gradient becomes non-finite.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(int iteration, const std::string& what);
  int iteration() const { return iteration_; }

 private:
  int iteration_;
};

/// Plain SGD over shuffled mini-batches with per-shape augmentation.
/// The batch loss is the mean of per-shape total losses. Shuffling and
/// augmentation streams derive from config.seed only, so equal inputs give
/// bit-identical parameters.
TrainResult train(const std::vector<data::LabeledShape>& dataset, const ModelConfig& config,
                  const TrainOptions& options = {});

/// Continues from `initial` instead of init_params(config, config.seed).
TrainResult train(const std::vector<data::LabeledShape>& dataset, const ModelConfig& config, ModelParams initial,
                  const TrainOptions& options = {});

/// Mean total loss over `dataset` without augmentation.
double dataset_loss(const ModelParams& params, const ModelConfig& config,
                    const std::vector<data::LabeledShape>& dataset);

}  // namespace partfuse::model
