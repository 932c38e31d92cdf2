#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "partfuse/cli/run_config.hpp"
#include "partfuse/cluster/mean_shift.hpp"
#include "partfuse/data/generator.hpp"
#include "partfuse/data/pls_io.hpp"
#include "partfuse/metrics/report.hpp"
#include "partfuse/model/network.hpp"
#include "partfuse/model/params.hpp"
#include "partfuse/model/train.hpp"

namespace partfuse::cli {

enum class Split { kTrain, kTest };
const char* split_name(Split split);

/// Corpus of one split; train and test use independent seeds derived from data.seed.
data::CorpusSpec corpus_spec(const RunConfig& cfg, Split split);
model::ModelConfig model_config(const RunConfig& cfg);

/// Writes <dir>/<split>/NNNN.pls for both splits and <dir>/manifest.tsv.
void generate_dataset(const RunConfig& cfg, const std::filesystem::path& dir);
/// Loads the shapes of a split in manifest order.
std::vector<data::LabeledShape> load_split(const std::filesystem::path& dir, Split split);

/// Network outputs for every shape.
std::vector<model::ForwardOutputs> forward_all(const model::ModelParams& params, const model::ModelConfig& config,
                                               const std::vector<data::LabeledShape>& shapes);

/// Forward + clustering for every shape.
std::vector<data::PredictedShape> predict(const model::ModelParams& params, const model::ModelConfig& config,
                                          const std::vector<data::LabeledShape>& shapes,
                                          const cluster::ClusterParams& cluster);
std::vector<data::PredictedShape> predict(const std::vector<model::ForwardOutputs>& outputs,
                                          const std::vector<data::LabeledShape>& shapes,
                                          const cluster::ClusterParams& cluster);

/// Mean over shapes, levels and points of |O_I - gt instance offset|.
double offset_error(const std::vector<model::ForwardOutputs>& outputs, const std::vector<data::LabeledShape>& shapes);

void write_predictions(const std::filesystem::path& dir, const std::vector<data::PredictedShape>& preds);
std::vector<data::PredictedShape> load_predictions(const std::filesystem::path& dir, std::size_t count);

struct GradcheckResult {
  model::FusionMode mode{};
  std::size_t checked = 0;
  std::size_t failed = 0;
  double worst_mismatch = 0;  // max ratio from numerics::gradient_mismatch
  std::size_t kink_retries = 0;  // differences redone with a smaller step
  bool probs_isolated = true; // stop_grad: offset losses leave P and the semantic side untouched
  bool passed() const { return failed == 0 && probs_isolated; }
};

/// Compares backward against central differences for a random `fraction` of
/// parameter scalars of a freshly initialised model (biases drawn from
/// U(-0.05, 0.05) instead of zero) on `shape`, with
/// stop_grad forced off so both sides differentiate the same function. An
/// entry whose one-sided differences disagree straddles a kink and is
/// redone with a step up to 100 times smaller. With
/// fusion enabled it then turns stop_grad on and checks that the offset
/// losses give exactly zero gradient at every P node and every
/// semantic-branch parameter.
GradcheckResult gradient_check(const model::ModelConfig& config, const data::LabeledShape& shape, double fraction,
                               double step, std::uint64_t seed);

/// Shape used by gradcheck: a generated shape thinned to `points` points.
data::LabeledShape gradcheck_shape(int points, std::uint64_t seed);

struct AblationRow {
  model::FusionMode mode{};
  bool stop_grad = true;
  bool one_hot = false;
  double bandwidth = 0;
  double lambda = 0;
  double offset_error = 0;
  metrics::MetricsReport report;
};

/// Trains one model per (fusion mode, stop_grad, one_hot) and evaluates it for
/// every (bandwidth, lambda); configurations that train identical networks
/// share one training run. `progress` receives human-readable status lines.
std::vector<AblationRow> run_ablation(const RunConfig& cfg, const std::vector<data::LabeledShape>& train,
                                      const std::vector<data::LabeledShape>& test,
                                      const std::function<void(const std::string&)>& progress);

}  // namespace partfuse::cli
