#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "partfuse/cli/commands.hpp"
#include "partfuse/data/pls_io.hpp"
#include "partfuse/numerics/allocator.hpp"

namespace cli = partfuse::cli;

namespace {

constexpr int kConfigExit = 2;
constexpr int kRuntimeExit = 3;

}  // namespace

int main(int argc, char** argv) {
  partfuse::retain_freed_memory();

  CLI::App app{"Hierarchical part instance segmentation on synthetic point clouds"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_file;
  std::vector<std::string> overrides;
  std::string fusion;
  bool one_hot = false;
  bool no_stop_grad = false;
  app.add_option("--config", config_file, "key=value configuration file");
  app.add_option("--set", overrides, "override one key, e.g. --set model.iterations=500");
  app.add_option("--fusion", fusion, "fusion mode")->check(CLI::IsMember({"none", "single", "multi", "cross"}));
  app.add_flag("--one-hot", one_hot, "feed one-hot semantic predictions to fusion");
  app.add_flag("--no-stop-grad", no_stop_grad, "let offset losses reach the semantic branch");

  auto* gen = app.add_subcommand("gen-data", "generate the synthetic train/test corpus");
  auto* train = app.add_subcommand("train", "train a model and write a checkpoint");
  auto* infer = app.add_subcommand("infer", "predict instances for the test split");
  auto* eval = app.add_subcommand("eval", "score predictions against the test split");
  auto* ablate = app.add_subcommand("ablate", "fusion and clustering ablation grid");
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check for every fusion mode");
  auto* ply = app.add_subcommand("export-ply", "colored PLY of a .pls or .plp file");
  std::string ply_in, ply_out;
  int ply_level = 1;
  ply->add_option("--input", ply_in, "shape or prediction file")->required();
  ply->add_option("--output", ply_out, "PLY file to write")->required();
  ply->add_option("--level", ply_level, "hierarchy level, 1-based");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigExit;
  }

  cli::RunConfig cfg;
  try {
    if (!config_file.empty()) cfg.load_file(config_file);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw cli::ConfigError("--set expects key=value, got '" + kv + "'");
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!fusion.empty()) cfg.set("model.fusion", fusion);
    if (one_hot) cfg.set("model.one_hot", "true");
    if (no_stop_grad) cfg.set("model.stop_grad", "false");
    cfg.validate();
  } catch (const cli::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigExit;
  }

  try {
    if (*gen) cli::cmd_gen_data(cfg, std::cerr);
    else if (*train) cli::cmd_train(cfg, std::cerr);
    else if (*infer) cli::cmd_infer(cfg, std::cerr);
    else if (*eval) cli::cmd_eval(cfg, std::cerr);
    else if (*ablate) cli::cmd_ablate(cfg, std::cerr);
    else if (*gradcheck) {
      if (!cli::cmd_gradcheck(cfg, std::cerr)) {
        std::cerr << "gradient check failed\n";
        return kRuntimeExit;
      }
    } else if (*ply) cli::cmd_export_ply(ply_in, ply_out, ply_level);
  } catch (const cli::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigExit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeExit;
  }
  return 0;
}
