#include "partfuse/cli/commands.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "partfuse/cli/ply.hpp"
#include "partfuse/model/checkpoint.hpp"
#include "partfuse/numerics/random.hpp"

namespace partfuse::cli {
namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

void cmd_gen_data(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  generate_dataset(cfg, cfg.data_dir);
  log << "wrote " << cfg.train_shapes << " train and " << cfg.test_shapes << " test shapes to "
      << cfg.data_dir.string() << '\n';
}

void cmd_train(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const auto train = load_split(cfg.data_dir, Split::kTrain);
  const auto mc = model_config(cfg);
  log << "training fusion=" << model::fusion_name(mc.fusion) << " on " << train.size() << " shapes for "
      << mc.iterations << " iterations\n";
  Stopwatch clock;
  model::TrainOptions opts;
  opts.augment = cfg.augment;
  opts.log_every = cfg.log_every;
  opts.on_log = [&](const model::TrainLogEntry& e) {
    log << "  it " << e.iteration + 1 << " lr " << e.learning_rate << " loss " << fixed(e.mean_loss, 4) << " ("
        << fixed(clock.seconds(), 1) << " s)\n";
  };
  const auto result = model::train(train, mc, opts);

  std::filesystem::create_directories(cfg.out_dir);
  model::write_checkpoint_file(cfg.checkpoint_path(), {mc, result.params});
  std::ostringstream tsv;
  tsv << "iteration\tlearning_rate\tmean_loss\n";
  for (const auto& e : result.log) {
    tsv << e.iteration + 1 << '\t' << model::format_double(e.learning_rate) << '\t'
        << model::format_double(e.mean_loss) << '\n';
  }
  write_text(cfg.out_dir / "train_log.tsv", tsv.str());
  std::ostringstream dump;
  cfg.dump(dump);
  write_text(cfg.out_dir / "run_config.txt", dump.str());
  log << "wrote " << cfg.checkpoint_path().string() << " (" << fixed(clock.seconds(), 1) << " s)\n";
}

void cmd_infer(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const auto ckpt = model::read_checkpoint_file(cfg.checkpoint_path());
  const auto test = load_split(cfg.data_dir, Split::kTest);
  const auto outputs = forward_all(ckpt.params, ckpt.config, test);
  const auto preds = predict(outputs, test, cfg.cluster);
  write_predictions(cfg.predictions_path(), preds);
  const double error = offset_error(outputs, test);
  std::filesystem::create_directories(cfg.out_dir);
  std::ofstream os(cfg.out_dir / "offset_error.txt", std::ios::binary);
  os << "offset_error=" << model::format_double(error) << '\n';
  if (!os) throw std::runtime_error("failed writing " + (cfg.out_dir / "offset_error.txt").string());
  log << "wrote " << preds.size() << " predictions to " << cfg.predictions_path().string() << '\n';
  log << "mean offset error " << fixed(error, 5) << '\n';
}

metrics::MetricsReport cmd_eval(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const auto test = load_split(cfg.data_dir, Split::kTest);
  const auto preds = load_predictions(cfg.predictions_path(), test.size());
  const auto report = metrics::evaluate(test, preds);
  metrics::write_report_files(cfg.out_dir, report);
  for (const auto& level : report.levels) {
    log << "level " << level.level << ": mAP50 " << fixed(100 * level.mean_ap50, 2) << "  mIoU "
        << fixed(100 * level.miou, 2) << '\n';
  }
  log << "mean mAP50 " << fixed(100 * report.mean_ap50, 2) << '\n';
  return report;
}

void write_ablation_tsv(std::ostream& os, const std::vector<AblationRow>& rows) {
  os << "fusion\tstop_grad\tone_hot\tbandwidth\tlambda\toffset_error\tmAP25\tmAP50\tmAP75\ts_AP50\tmIoU";
  const std::size_t levels = rows.empty() ? 0 : rows.front().report.levels.size();
  for (std::size_t k = 1; k <= levels; ++k) os << "\tlevel" << k << ".mAP50";
  os << '\n';
  for (const auto& r : rows) {
    double ap25 = 0, ap75 = 0;
    for (const auto& l : r.report.levels) {
      ap25 += l.mean_ap25;
      ap75 += l.mean_ap75;
    }
    const double n = std::max<double>(1.0, static_cast<double>(r.report.levels.size()));
    os << model::fusion_name(r.mode) << '\t' << r.stop_grad << '\t' << r.one_hot << '\t'
       << model::format_double(r.bandwidth) << '\t' << model::format_double(r.lambda) << '\t'
       << fixed(r.offset_error, 6) << '\t' << fixed(100 * ap25 / n, 2) << '\t' << fixed(100 * r.report.mean_ap50, 2)
       << '\t' << fixed(100 * ap75 / n, 2) << '\t' << fixed(100 * r.report.mean_s_ap50(), 2) << '\t'
       << fixed(100 * r.report.mean_miou(), 2);
    for (const auto& l : r.report.levels) os << '\t' << fixed(100 * l.mean_ap50, 2);
    os << '\n';
  }
}

std::vector<AblationRow> cmd_ablate(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const auto train = load_split(cfg.data_dir, Split::kTrain);
  const auto test = load_split(cfg.data_dir, Split::kTest);
  Stopwatch clock;
  const auto rows = run_ablation(cfg, train, test, [&](const std::string& line) {
    log << '[' << fixed(clock.seconds(), 0) << " s] " << line << '\n';
  });
  std::ostringstream tsv;
  write_ablation_tsv(tsv, rows);
  write_text(cfg.out_dir / "ablation.tsv", tsv.str());
  log << "wrote " << rows.size() << " rows to " << (cfg.out_dir / "ablation.tsv").string() << '\n';
  return rows;
}

bool cmd_gradcheck(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const auto shape = gradcheck_shape(cfg.gradcheck_points, derive_seed({cfg.seed, 0x73686170}));
  std::ostringstream report;
  bool all = true;
  for (auto mode : {model::FusionMode::kNone, model::FusionMode::kSingle, model::FusionMode::kMulti,
                    model::FusionMode::kCross}) {
    auto mc = model_config(cfg);
    mc.fusion = mode;
    const auto r = gradient_check(mc, shape, cfg.gradcheck_fraction, cfg.gradcheck_step, cfg.seed);
    all = all && r.passed();
    report << "fusion=" << model::fusion_name(mode) << " checked=" << r.checked << " failed=" << r.failed
           << " worst_mismatch=" << model::format_double(r.worst_mismatch) << " kink_retries=" << r.kink_retries
           << " probs_isolated=" << (r.probs_isolated ? "yes" : "no") << ' ' << (r.passed() ? "PASS" : "FAIL")
           << '\n';
  }
  write_text(cfg.out_dir / "gradcheck.txt", report.str());
  log << report.str();
  return all;
}

void cmd_export_ply(const std::filesystem::path& input, const std::filesystem::path& output, int level) {
  export_ply_file(input, output, level);
}

}  // namespace partfuse::cli
