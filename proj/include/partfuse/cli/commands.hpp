#pragma once

#include <filesystem>
#include <ostream>

#include "partfuse/cli/pipeline.hpp"
#include "partfuse/cli/run_config.hpp"

namespace partfuse::cli {

// Every command reads its inputs from and writes its outputs under the
// directories named in the RunConfig. `log` receives progress lines only;
// nothing written there is part of a command's output.

/// <data_dir>/{train,test}/NNNN.pls and <data_dir>/manifest.tsv.
void cmd_gen_data(const RunConfig& cfg, std::ostream& log);

/// Checkpoint, <out_dir>/train_log.tsv and <out_dir>/run_config.txt.
void cmd_train(const RunConfig& cfg, std::ostream& log);

/// One .plp per test shape under predictions_path() and the mean test offset
/// error in <out_dir>/offset_error.txt. The network comes from the
/// checkpoint; clustering parameters from the config.
void cmd_infer(const RunConfig& cfg, std::ostream& log);

/// <out_dir>/metrics.tsv and <out_dir>/metrics.txt for the stored predictions.
metrics::MetricsReport cmd_eval(const RunConfig& cfg, std::ostream& log);

/// <out_dir>/ablation.tsv, one row per grid cell.
std::vector<AblationRow> cmd_ablate(const RunConfig& cfg, std::ostream& log);
void write_ablation_tsv(std::ostream& os, const std::vector<AblationRow>& rows);

/// Gradient check for every fusion mode; writes <out_dir>/gradcheck.txt and
/// returns whether all modes passed.
bool cmd_gradcheck(const RunConfig& cfg, std::ostream& log);

/// Colored PLY of one level of a .pls or .plp file.
void cmd_export_ply(const std::filesystem::path& input, const std::filesystem::path& output, int level);

}  // namespace partfuse::cli
