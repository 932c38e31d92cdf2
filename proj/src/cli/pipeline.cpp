#include "partfuse/cli/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "partfuse/cluster/cluster.hpp"
#include "partfuse/model/loss.hpp"
#include "partfuse/model/network.hpp"
#include "partfuse/numerics/finite_difference.hpp"
#include "partfuse/numerics/random.hpp"

namespace partfuse::cli {
namespace {

std::string shape_file(std::size_t index, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04zu.%s", index, ext);
  return buf;
}

}  // namespace

const char* split_name(Split split) { return split == Split::kTrain ? "train" : "test"; }

data::CorpusSpec corpus_spec(const RunConfig& cfg, Split split) {
  data::CorpusSpec spec;
  spec.shapes = split == Split::kTrain ? cfg.train_shapes : cfg.test_shapes;
  spec.points = cfg.points;
  spec.jitter = cfg.jitter;
  spec.seed = derive_seed({cfg.data_seed, split == Split::kTrain ? 1u : 2u});
  return spec;
}

model::ModelConfig model_config(const RunConfig& cfg) {
  model::ModelConfig m = cfg.model;
  m.class_counts.assign(data::kClassCounts.begin(), data::kClassCounts.end());
  m.seed = cfg.seed;
  return m;
}

void generate_dataset(const RunConfig& cfg, const std::filesystem::path& dir) {
  std::ostringstream manifest;
  manifest << "split\tfile\tfamily\tpart_count\tpoints\tseed\n";
  for (Split split : {Split::kTrain, Split::kTest}) {
    const auto spec = corpus_spec(cfg, split);
    const auto sub = dir / split_name(split);
    std::filesystem::create_directories(sub);
    for (int i = 0; i < spec.shapes; ++i) {
      const auto entry = data::corpus_entry(spec, i);
      const auto seed = data::corpus_shape_seed(spec, i);
      const std::string file = shape_file(static_cast<std::size_t>(i), "pls");
      data::write_pls_file(sub / file, data::generate_shape(entry, seed));
      manifest << split_name(split) << '\t' << split_name(split) << '/' << file << '\t'
               << data::family_name(entry.family) << '\t' << entry.part_count << '\t' << entry.points << '\t' << seed
               << '\n';
    }
  }
  std::ofstream os(dir / "manifest.tsv", std::ios::binary);
  os << manifest.str();
  if (!os) throw std::runtime_error("failed writing " + (dir / "manifest.tsv").string());
}

std::vector<data::LabeledShape> load_split(const std::filesystem::path& dir, Split split) {
  std::ifstream is(dir / "manifest.tsv");
  if (!is) throw std::runtime_error("cannot open " + (dir / "manifest.tsv").string() + " (run gen-data first)");
  std::string line;
  std::getline(is, line);
  std::vector<data::LabeledShape> shapes;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (line.substr(0, tab) != split_name(split)) continue;
    const auto tab2 = line.find('\t', tab + 1);
    shapes.push_back(data::read_pls_file(dir / line.substr(tab + 1, tab2 - tab - 1)));
  }
  if (shapes.empty()) throw std::runtime_error("manifest lists no " + std::string(split_name(split)) + " shapes");
  return shapes;
}

std::vector<data::PredictedShape> predict(const std::vector<model::ForwardOutputs>& outputs,
                                          const std::vector<data::LabeledShape>& shapes,
                                          const cluster::ClusterParams& cluster) {
  std::vector<data::PredictedShape> out;
  out.reserve(shapes.size());
  for (std::size_t s = 0; s < shapes.size(); ++s) {
    out.push_back(cluster::cluster_instances(shapes[s].points, outputs[s], cluster));
  }
  return out;
}

std::vector<model::ForwardOutputs> forward_all(const model::ModelParams& params, const model::ModelConfig& config,
                                               const std::vector<data::LabeledShape>& shapes) {
  std::vector<model::ForwardOutputs> outputs;
  outputs.reserve(shapes.size());
  for (const auto& s : shapes) outputs.push_back(model::forward(params, s, config));
  return outputs;
}

std::vector<data::PredictedShape> predict(const model::ModelParams& params, const model::ModelConfig& config,
                                          const std::vector<data::LabeledShape>& shapes,
                                          const cluster::ClusterParams& cluster) {
  return predict(forward_all(params, config, shapes), shapes, cluster);
}

double offset_error(const std::vector<model::ForwardOutputs>& outputs, const std::vector<data::LabeledShape>& shapes) {
  double total = 0.0;
  std::size_t terms = 0;
  for (std::size_t s = 0; s < shapes.size(); ++s) {
    for (std::size_t k = 0; k < shapes[s].levels.size(); ++k) {
      total += model::loss_offset(outputs[s].levels[k].inst_offset, shapes[s].levels[k].inst_offset);
      ++terms;
    }
  }
  return terms == 0 ? 0.0 : total / static_cast<double>(terms);
}

void write_predictions(const std::filesystem::path& dir, const std::vector<data::PredictedShape>& preds) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < preds.size(); ++i) data::write_plp_file(dir / shape_file(i, "plp"), preds[i]);
}

std::vector<data::PredictedShape> load_predictions(const std::filesystem::path& dir, std::size_t count) {
  std::vector<data::PredictedShape> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(data::read_plp_file(dir / shape_file(i, "plp")));
  return out;
}

data::LabeledShape gradcheck_shape(int points, std::uint64_t seed) {
  data::ShapeSpec spec{data::ShapeFamily::kTable, 4, 0.05, std::max(64, 2 * points)};
  const auto full = data::generate_shape(spec, seed);
  data::LabeledShape out;
  out.points.resize(points, 3);
  for (const auto& level : full.levels) {
    data::LevelAnnotation l;
    l.class_count = level.class_count;
    out.levels.push_back(std::move(l));
  }
  for (int i = 0; i < points; ++i) {
    const auto src = static_cast<std::size_t>(i) * full.size() / static_cast<std::size_t>(points);
    out.points.row(i) = full.points.row(static_cast<Eigen::Index>(src));
    for (std::size_t k = 0; k < full.levels.size(); ++k) {
      out.levels[k].sem_labels.push_back(full.levels[k].sem_labels[src]);
      out.levels[k].inst_ids.push_back(full.levels[k].inst_ids[src]);
    }
  }
  data::compute_gt_centers(out);
  return out;
}

GradcheckResult gradient_check(const model::ModelConfig& config, const data::LabeledShape& shape, double fraction,
                               double step, std::uint64_t seed) {
  constexpr int kKinkRetries = 2;
  using numerics::Graph;
  GradcheckResult result;
  result.mode = config.fusion;
  model::ModelParams params = model::init_params(config, seed);
  // Zero biases put every all-inactive row exactly on a ReLU kink.
  Rng bias_rng(derive_seed({seed, 0x62696173}));
  for (auto& t : params.tensors) {
    if (!t.name.ends_with(".b")) continue;
    for (Eigen::Index i = 0; i < t.value.size(); ++i) t.value.data()[i] = bias_rng.uniform(-0.05, 0.05);
  }

  // Stop-gradient makes backward a deliberate surrogate, so the comparison
  // against central differences uses the true gradient.
  model::ModelConfig exact = config;
  exact.stop_grad = false;
  Graph g;
  const auto nodes = model::add_param_leaves(g, params);
  const auto levels = model::build_forward(g, nodes, exact, g.constant(shape.points));
  g.backward(model::total_loss(g, levels, shape));

  // Flat index -> (tensor, entry), sampled without replacement.
  std::vector<std::pair<std::size_t, Eigen::Index>> flat;
  for (std::size_t t = 0; t < params.tensors.size(); ++t) {
    for (Eigen::Index i = 0; i < params.tensors[t].value.size(); ++i) flat.emplace_back(t, i);
  }
  const auto want = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(fraction * flat.size())));
  Rng rng(derive_seed({seed, 0x67726164}));
  for (std::size_t i = 0; i < want; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(flat.size() - i));
    std::swap(flat[i], flat[j]);
  }
  flat.resize(want);
  std::sort(flat.begin(), flat.end());

  auto loss_at = [&](std::size_t t, Eigen::Index i, double value) {
    double& slot = params.tensors[t].value.data()[i];
    const double saved = slot;
    slot = value;
    const double loss = model::total_loss(model::forward(params, shape, exact), shape);
    slot = saved;
    return loss;
  };
  const double base_loss = model::total_loss(model::forward(params, shape, exact), shape);
  for (const auto& [t, i] : flat) {
    const double analytic = g.grad(nodes.nodes[t]).data()[i];
    const double x = params.tensors[t].value.data()[i];
    double h = step;
    double numeric = 0.0;
    for (int attempt = 0; attempt <= kKinkRetries; ++attempt, h /= 10.0) {
      const double up = loss_at(t, i, x + h);
      const double down = loss_at(t, i, x - h);
      numeric = (up - down) / (2.0 * h);
      if (numerics::gradient_entry_matches(analytic, numeric)) break;
      // Retry only when the one-sided slopes disagree, i.e. a ReLU or max
      // kink lies within the step; a smooth mismatch is a real failure.
      const double right = (up - base_loss) / h;
      const double left = (base_loss - down) / h;
      if (numerics::gradient_entry_matches(right, left) || attempt == kKinkRetries) break;
      ++result.kink_retries;
    }
    const double ratio =
        numerics::gradient_mismatch(Matrix::Constant(1, 1, analytic), Matrix::Constant(1, 1, numeric));
    result.worst_mismatch = std::max(result.worst_mismatch, ratio);
    ++result.checked;
    if (!numerics::gradient_entry_matches(analytic, numeric)) ++result.failed;
  }

  if (config.fusion != model::FusionMode::kNone) {
    model::ModelConfig stopped = config;
    stopped.stop_grad = true;
    Graph h;
    const auto hn = model::add_param_leaves(h, params);
    const auto hl = model::build_forward(h, hn, stopped, h.constant(shape.points));
    numerics::NodeId offset_loss{};
    for (std::size_t k = 0; k < hl.size(); ++k) {
      const auto term = h.add(model::loss_offset(h, hl[k].inst_offset, shape.levels[k].inst_offset),
                              model::loss_offset(h, hl[k].region_offset, shape.levels[k].region_offset));
      offset_loss = k == 0 ? term : h.add(offset_loss, term);
    }
    h.backward(offset_loss);
    for (const auto& lv : hl) {
      if (!h.grad(lv.probs).isZero(0.0)) result.probs_isolated = false;
    }
    for (std::size_t t = 0; t < params.tensors.size(); ++t) {
      const auto& name = params.tensors[t].name;
      const bool semantic_side = name.starts_with("sem.") || (!config.two_dir && name.starts_with("dec_sem."));
      if (semantic_side && !h.grad(hn.nodes[t]).isZero(0.0)) result.probs_isolated = false;
    }
  }
  return result;
}

std::vector<AblationRow> run_ablation(const RunConfig& cfg, const std::vector<data::LabeledShape>& train,
                                      const std::vector<data::LabeledShape>& test,
                                      const std::function<void(const std::string&)>& progress) {
  struct Trained {
    std::vector<model::ForwardOutputs> outputs;
    double offset_error;
  };
  std::map<std::tuple<int, bool, bool>, Trained> cache;
  std::vector<AblationRow> rows;
  for (auto mode : {model::FusionMode::kNone, model::FusionMode::kSingle, model::FusionMode::kMulti,
                    model::FusionMode::kCross}) {
    for (bool stop_grad : {true, false}) {
      for (bool one_hot : {false, true}) {
        // Without fusion the two toggles do not touch the network.
        const bool fused = mode != model::FusionMode::kNone;
        const auto key = std::make_tuple(static_cast<int>(mode), fused ? stop_grad : true, fused && one_hot);
        auto it = cache.find(key);
        if (it == cache.end()) {
          model::ModelConfig mc = model_config(cfg);
          mc.fusion = mode;
          mc.stop_grad = std::get<1>(key);
          mc.one_hot = std::get<2>(key);
          progress("training fusion=" + std::string(model::fusion_name(mode)) +
                   " stop_grad=" + std::to_string(mc.stop_grad) + " one_hot=" + std::to_string(mc.one_hot));
          model::TrainOptions opts;
          opts.augment = cfg.augment;
          opts.log_every = cfg.log_every;
          const auto trained = model::train(train, mc, opts);
          Trained t;
          t.outputs = forward_all(trained.params, mc, test);
          t.offset_error = offset_error(t.outputs, test);
          it = cache.emplace(key, std::move(t)).first;
        }
        for (double bw : cfg.ablate_bandwidths) {
          for (double lambda : cfg.ablate_lambdas) {
            cluster::ClusterParams cp = cfg.cluster;
            cp.bandwidth = bw;
            cp.lambda = lambda;
            AblationRow row{mode, stop_grad, one_hot, bw, lambda, it->second.offset_error,
                            metrics::evaluate(test, predict(it->second.outputs, test, cp))};
            rows.push_back(std::move(row));
          }
        }
      }
    }
  }
  return rows;
}

}  // namespace partfuse::cli
