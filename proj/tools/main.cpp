#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cagnn/bundle_io.hpp"
#include "cagnn/checkpoint.hpp"
#include "cagnn/graph_gen.hpp"
#include "cagnn/metrics.hpp"
#include "cagnn/model.hpp"
#include "cagnn/report_io.hpp"
#include "cagnn/spectral.hpp"
#include "cagnn/trainer.hpp"

namespace {

using cagnn::ModelConfig;
using cagnn::TrainConfig;
namespace fs = std::filesystem;

// String-typed model flags, converted (and validated) at dispatch time.
struct ModelFlags {
  std::string kernel = "gcn";
  std::string mode = "cagnn";
  int layers = 2;
  int hidden = 64;
  std::string mixer = "linear";
  std::string norm = "l2";

  ModelConfig to_config() const {
    ModelConfig mc;
    mc.kernel = cagnn::kernel_from_string(kernel);
    mc.mode = cagnn::mode_from_string(mode);
    mc.layers = layers;
    mc.hidden = hidden;
    mc.mixer = cagnn::mixer_from_string(mixer);
    mc.norm = cagnn::norm_from_string(norm);
    mc.validate();
    return mc;
  }
};

void add_model_flags(CLI::App* cmd, ModelFlags& mf) {
  cmd->add_option("--kernel", mf.kernel, "convolution kernel: gcn|gin|gat|mlp");
  cmd->add_option("--mode", mf.mode, "architecture: cagnn|vanilla");
  cmd->add_option("--layers", mf.layers, "number of convolution layers");
  cmd->add_option("--hidden", mf.hidden, "hidden width");
  cmd->add_option("--mixer", mf.mixer,
                  "gate variant: linear|add|concat|global|unshared|mlp2|mlp3");
  cmd->add_option("--norm", mf.norm, "stream normalization: l2|none|layernorm");
}

void add_grid_flags(CLI::App* cmd, TrainConfig& tc) {
  cmd->add_option("--lrs", tc.lrs, "learning-rate grid")->delimiter(',');
  cmd->add_option("--weight-decays", tc.weight_decays, "weight-decay grid")->delimiter(',');
  cmd->add_option("--dropouts", tc.dropouts, "dropout grid")->delimiter(',');
  cmd->add_option("--max-epochs", tc.max_epochs, "epoch cap per run");
  cmd->add_option("--patience", tc.patience, "early-stop patience (epochs)");
  cmd->add_option("--seed", tc.seed, "base seed; per-split seeds are seed XOR split");
}

nlohmann::json metrics_json(const cagnn::DatasetBundle& b) {
  const cagnn::GraphMetrics m = cagnn::compute_metrics(b);
  nlohmann::json per_class = nlohmann::json::array();
  for (const auto& c : m.per_class)
    per_class.push_back({{"label", c.label}, {"count", c.count}, {"entropy", c.entropy}});
  return {{"dataset", b.name},
          {"num_nodes", m.num_nodes},
          {"num_edges", m.undirected_edges},
          {"num_directed_edges", 2 * m.undirected_edges},
          {"num_classes", m.num_classes},
          {"h_node", m.h_node},
          {"h_edge", m.h_edge},
          {"h_neighbor", m.h_neighbor},
          {"per_class", std::move(per_class)}};
}

void emit_json(const nlohmann::json& j, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    cagnn::save_json(out_path, j);
    std::cout << "wrote " << out_path << "\n";
  }
}

void emit_table(const cagnn::Table& t, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << t.to_csv();
  } else {
    t.save_csv(out_path);
    std::cout << "wrote " << out_path << "\n";
  }
}

int cmd_synth(const std::string& kind, int nodes_per_class, int classes, int degree,
              double noise, int num_splits, uint64_t seed, const std::string& out) {
  cagnn::SynthConfig cfg;
  cfg.kind = cagnn::synth_kind_from_string(kind);
  cfg.nodes_per_class = nodes_per_class;
  cfg.num_classes = classes;
  cfg.degree = degree;
  cfg.noise = noise;
  cfg.num_splits = num_splits;
  cfg.seed = seed;
  cfg.validate();
  const cagnn::DatasetBundle b = cagnn::make_synthetic(cfg);

  const fs::path dest(out);
  if (fs::exists(dest)) throw std::invalid_argument("output directory already exists: " + out);
  fs::path tmp = dest;
  tmp += ".tmp";
  std::error_code ec;
  fs::remove_all(tmp, ec);
  cagnn::save_bundle(tmp, b);
  fs::rename(tmp, dest, ec);
  if (ec)
    throw cagnn::WriteError(out + ": rename failed: " + ec.message());
  std::cout << "bundle " << b.name << ": " << b.graph.num_nodes << " nodes, "
            << b.graph.undirected_edges << " edges, " << b.num_classes << " classes, "
            << b.splits.size() << " splits -> " << out << "\n";
  return 0;
}

int cmd_metrics(const std::string& bundle_dir, const std::string& out,
                const std::string& csv_out) {
  const cagnn::DatasetBundle b = cagnn::load_bundle(bundle_dir);
  const nlohmann::json j = metrics_json(b);
  if (!csv_out.empty()) {
    cagnn::Table t;
    t.columns = {"dataset", "num_nodes", "num_edges", "h_node", "h_edge", "h_neighbor"};
    t.rows.push_back({b.name, std::to_string(j["num_nodes"].get<int>()),
                      std::to_string(j["num_edges"].get<long long>()),
                      cagnn::format_double(j["h_node"].get<double>()),
                      cagnn::format_double(j["h_edge"].get<double>()),
                      cagnn::format_double(j["h_neighbor"].get<double>())});
    t.save_csv(csv_out);
    std::cout << "wrote " << csv_out << "\n";
  }
  emit_json(j, out);
  return 0;
}

int cmd_train(const std::string& bundle_dir, const ModelFlags& mf, double lr,
              double weight_decay, double dropout, int max_epochs, int patience, int split,
              uint64_t seed, const std::string& out, const std::string& save_model) {
  const cagnn::DatasetBundle b = cagnn::load_bundle(bundle_dir);
  const ModelConfig mc = mf.to_config();
  if (max_epochs < 1) throw std::invalid_argument("--max-epochs must be >= 1");
  if (patience < 0 || patience > max_epochs)
    throw std::invalid_argument("--patience must be in [0, max_epochs]");
  const cagnn::Propagation prop = cagnn::build_propagation(b.graph, mc.kernel);
  const cagnn::HyperPoint hp{lr, weight_decay, dropout};
  const uint64_t run_seed = seed ^ static_cast<uint64_t>(split);
  cagnn::RunResult r = cagnn::train_one(b, prop, split, mc, hp, max_epochs, patience, run_seed,
                                        !save_model.empty());
  if (r.diverged)
    throw std::runtime_error("run diverged (lr=" + cagnn::format_double(lr) +
                             ", weight_decay=" + cagnn::format_double(weight_decay) +
                             ", dropout=" + cagnn::format_double(dropout) + ")");
  std::cout << "split " << split << ": test_acc " << r.test_acc << ", val_acc "
            << r.best_val_acc << ", epochs " << r.epochs_run << " (best " << r.best_epoch
            << "), ms/epoch " << r.ms_per_epoch << "\n";
  if (!save_model.empty()) {
    cagnn::save_checkpoint(save_model, *r.model);
    std::cout << "wrote " << save_model << "\n";
  }
  if (!out.empty()) {
    nlohmann::json j{{"dataset", b.name},
                     {"model", cagnn::model_config_json(mc)},
                     {"split", split},
                     {"lr", lr},
                     {"weight_decay", weight_decay},
                     {"dropout", dropout},
                     {"seed", seed},
                     {"test_acc", r.test_acc},
                     {"val_acc", r.best_val_acc},
                     {"epochs_run", r.epochs_run},
                     {"best_epoch", r.best_epoch},
                     {"ms_per_epoch", r.ms_per_epoch},
                     {"val_curve", r.val_curve},
                     {"alpha_layer_means", r.alpha_layer_means}};
    cagnn::save_json(out, j);
    std::cout << "wrote " << out << "\n";
  }
  return 0;
}

int cmd_grid(const std::string& bundle_dir, const ModelFlags& mf, const TrainConfig& tc,
             int jobs, const std::string& out) {
  const cagnn::DatasetBundle b = cagnn::load_bundle(bundle_dir);
  const ModelConfig mc = mf.to_config();
  if (jobs < 1) throw std::invalid_argument("--jobs must be >= 1");
  const cagnn::TrainReport rep = cagnn::grid_search(b, mc, tc, jobs);
  std::cout << b.name << " " << cagnn::to_string(mc.mode) << "-" << cagnn::to_string(mc.kernel)
            << ": mean test acc " << rep.mean_test_acc << " +- " << rep.std_test_acc << " over "
            << rep.splits.size() << " splits, ms/epoch " << rep.mean_ms_per_epoch << "\n";
  emit_json(cagnn::train_report_json(rep, mc, tc, b.name), out);
  return 0;
}

int cmd_sweep_layers(const std::string& bundle_dir, const ModelFlags& mf, const TrainConfig& tc,
                     const std::vector<int>& depths, int jobs, const std::string& out) {
  const cagnn::DatasetBundle b = cagnn::load_bundle(bundle_dir);
  const ModelConfig mc = mf.to_config();
  if (jobs < 1) throw std::invalid_argument("--jobs must be >= 1");
  const auto rows = cagnn::sweep_layers(b, mc, tc, depths, jobs);
  emit_table(cagnn::sweep_table(rows, "depth"), out);
  return 0;
}

int cmd_noisy_edges(const std::string& bundle_dir, const ModelFlags& mf, const TrainConfig& tc,
                    const std::vector<double>& ratios, uint64_t noise_seed, int jobs,
                    const std::string& out) {
  const cagnn::DatasetBundle b = cagnn::load_bundle(bundle_dir);
  const ModelConfig mc = mf.to_config();
  if (jobs < 1) throw std::invalid_argument("--jobs must be >= 1");
  const auto rows = cagnn::sweep_noise(b, mc, tc, ratios, noise_seed, jobs);
  emit_table(cagnn::sweep_table(rows, "ratio"), out);
  return 0;
}

int cmd_alpha_hist(const std::string& bundle_dir, const std::string& model_path,
                   const std::string& out, const std::string& hist_out) {
  const cagnn::DatasetBundle b = cagnn::load_bundle(bundle_dir);
  cagnn::Model model = cagnn::load_checkpoint(model_path);
  if (model.in_dim() != b.features.cols || model.num_classes() != b.num_classes)
    throw std::invalid_argument(
        "checkpoint does not fit the bundle: model expects in_dim " +
        std::to_string(model.in_dim()) + "/classes " + std::to_string(model.num_classes()) +
        ", bundle has " + std::to_string(b.features.cols) + "/" +
        std::to_string(b.num_classes));
  const cagnn::Propagation prop = cagnn::build_propagation(b.graph, model.config().kernel);
  cagnn::Rng rng(0);
  const cagnn::ModelOutput o =
      model.forward(prop, cagnn::ad::Tensor::constant(b.features), false, rng);
  if (o.alphas.empty())
    throw std::invalid_argument("model '" + model_path + "' has no per-layer gates (mixer " +
                                cagnn::to_string(model.config().mixer) + ", mode " +
                                cagnn::to_string(model.config().mode) + ")");

  cagnn::Table values;
  values.columns = {"layer", "node", "alpha"};
  constexpr int kBins = 20;
  std::vector<std::vector<long>> hist(o.alphas.size(), std::vector<long>(kBins, 0));
  for (size_t l = 0; l < o.alphas.size(); ++l) {
    const cagnn::Matrix& a = o.alphas[l].value();
    double mean = 0.0;
    for (int i = 0; i < a.rows; ++i) {
      const double v = a(i, 0);
      values.rows.push_back({std::to_string(l + 1), std::to_string(i),
                             cagnn::format_double(v)});
      int bin = static_cast<int>(v * kBins);
      bin = std::min(std::max(bin, 0), kBins - 1);
      ++hist[l][bin];
      mean += v;
    }
    std::cout << "layer " << (l + 1) << ": mean alpha " << (mean / a.rows) << "\n";
  }
  emit_table(values, out);

  if (!hist_out.empty()) {
    cagnn::Table ht;
    ht.columns = {"layer", "bin_lo", "bin_hi", "count"};
    for (size_t l = 0; l < hist.size(); ++l)
      for (int k = 0; k < kBins; ++k)
        ht.rows.push_back({std::to_string(l + 1),
                           cagnn::format_double(static_cast<double>(k) / kBins),
                           cagnn::format_double(static_cast<double>(k + 1) / kBins),
                           std::to_string(hist[l][k])});
    ht.save_csv(hist_out);
    std::cout << "wrote " << hist_out << "\n";
  }
  return 0;
}

int cmd_spectral_check(int nodes, int order, int trials, int dim, uint64_t seed) {
  if (nodes < 2) throw std::invalid_argument("--nodes must be >= 2");
  if (order < 1) throw std::invalid_argument("--order must be >= 1");
  if (trials < 1) throw std::invalid_argument("--trials must be >= 1");
  if (dim < 1) throw std::invalid_argument("--dim must be >= 1");

  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    cagnn::Rng rng(cagnn::mix_seed(seed, static_cast<uint64_t>(t)));
    std::vector<std::pair<int, int>> edges;
    for (int i = 1; i < nodes; ++i) edges.emplace_back(rng.below_int(i), i);  // connected
    for (int e = 0; e < nodes; ++e)
      edges.emplace_back(rng.below_int(nodes), rng.below_int(nodes));
    const cagnn::Graph g = cagnn::Graph::from_edges(nodes, edges);
    const cagnn::SparseMatrix p = cagnn::normalized_adjacency(g);

    cagnn::Matrix x(nodes, dim);
    for (double& v : x.data) v = rng.normal();
    std::vector<std::vector<double>> alphas(order, std::vector<double>(nodes));
    for (auto& layer : alphas)
      for (double& a : layer) a = rng.uniform(0.05, 0.95);
    std::vector<double> gammas(order + 1);
    for (double& gma : gammas) gma = rng.uniform(-1.5, 1.5);

    worst = std::max(worst, cagnn::spectral_check(p, x, alphas, gammas));
  }
  std::cout << "max deviation " << worst << " over " << trials << " trials (nodes=" << nodes
            << ", order=" << order << ")\n";
  if (!(worst <= 1e-8)) {
    std::cerr << "error: deviation exceeds 1e-8\n";
    return 2;
  }
  return 0;
}

int cmd_kendall(const std::string& results_path, const std::string& metrics_path, int min_nodes,
                const std::string& out) {
  const cagnn::Table results = cagnn::Table::load_csv(results_path);
  const cagnn::Table metrics = cagnn::Table::load_csv(metrics_path);
  emit_json(cagnn::kendall_report(results, metrics, min_nodes), out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"graph learning laboratory: metrics, gated two-stream models, experiments"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset bundle");
  std::string sy_kind = "patterned", sy_out;
  int sy_npc = 500, sy_classes = 3, sy_degree = 10, sy_splits = 10;
  double sy_noise = 0.1;
  uint64_t sy_seed = 1;
  synth->add_option("--kind", sy_kind,
                    "pure-homophily|bipartite|random-neighbor|patterned");
  synth->add_option("--nodes-per-class", sy_npc, "nodes per class");
  synth->add_option("--classes", sy_classes, "number of classes");
  synth->add_option("--degree", sy_degree, "target mean degree");
  synth->add_option("--noise", sy_noise, "feature noise standard deviation");
  synth->add_option("--num-splits", sy_splits, "number of train/val/test splits");
  synth->add_option("--seed", sy_seed, "generator seed");
  synth->add_option("--out", sy_out, "output bundle directory")->required();

  // metrics
  auto* metrics = app.add_subcommand("metrics", "homophily and neighbor-entropy metrics");
  std::string me_bundle, me_out, me_csv;
  metrics->add_option("--bundle", me_bundle, "bundle directory")->required();
  metrics->add_option("--out", me_out, "write JSON here instead of stdout");
  metrics->add_option("--csv", me_csv, "also write a one-row CSV (for rank reports)");

  // train
  auto* train = app.add_subcommand("train", "train one model on one split");
  std::string tr_bundle, tr_out, tr_save;
  ModelFlags tr_mf;
  double tr_lr = 0.01, tr_wd = 5e-4, tr_dropout = 0.5;
  int tr_epochs = 500, tr_patience = 100, tr_split = 0;
  uint64_t tr_seed = 1;
  train->add_option("--bundle", tr_bundle, "bundle directory")->required();
  add_model_flags(train, tr_mf);
  train->add_option("--lr", tr_lr, "learning rate");
  train->add_option("--weight-decay", tr_wd, "L2 weight decay");
  train->add_option("--dropout", tr_dropout, "dropout probability");
  train->add_option("--max-epochs", tr_epochs, "epoch cap");
  train->add_option("--patience", tr_patience, "early-stop patience");
  train->add_option("--split", tr_split, "split index");
  train->add_option("--seed", tr_seed, "base seed; the run uses seed XOR split");
  train->add_option("--out", tr_out, "write a JSON run report here");
  train->add_option("--save-model", tr_save, "write a model checkpoint here");

  // grid
  auto* grid = app.add_subcommand("grid", "hyper-parameter grid search over all splits");
  std::string gr_bundle, gr_out;
  ModelFlags gr_mf;
  TrainConfig gr_tc;
  int gr_jobs = 1;
  grid->add_option("--bundle", gr_bundle, "bundle directory")->required();
  add_model_flags(grid, gr_mf);
  add_grid_flags(grid, gr_tc);
  grid->add_option("--jobs", gr_jobs, "parallel training runs");
  grid->add_option("--out", gr_out, "write the JSON report here instead of stdout");

  // sweep-layers
  auto* sweepl = app.add_subcommand("sweep-layers", "grid search per depth");
  std::string sl_bundle, sl_out;
  ModelFlags sl_mf;
  TrainConfig sl_tc;
  std::vector<int> sl_depths{2, 4, 8, 16, 32};
  int sl_jobs = 1;
  sweepl->add_option("--bundle", sl_bundle, "bundle directory")->required();
  add_model_flags(sweepl, sl_mf);
  add_grid_flags(sweepl, sl_tc);
  sweepl->add_option("--depths", sl_depths, "depth list")->delimiter(',');
  sweepl->add_option("--jobs", sl_jobs, "parallel training runs");
  sweepl->add_option("--out", sl_out, "write the CSV here instead of stdout");

  // noisy-edges
  auto* noisy = app.add_subcommand("noisy-edges", "grid search under random edge injection");
  std::string ne_bundle, ne_out;
  ModelFlags ne_mf;
  TrainConfig ne_tc;
  std::vector<double> ne_ratios{0.25, 0.5, 1.0, 2.0, 5.0};
  uint64_t ne_seed = 7;
  int ne_jobs = 1;
  noisy->add_option("--bundle", ne_bundle, "bundle directory")->required();
  add_model_flags(noisy, ne_mf);
  add_grid_flags(noisy, ne_tc);
  noisy->add_option("--ratios", ne_ratios, "noise ratios (new edges / existing edges)")
      ->delimiter(',');
  noisy->add_option("--noise-seed", ne_seed, "seed for the injected edges");
  noisy->add_option("--jobs", ne_jobs, "parallel training runs");
  noisy->add_option("--out", ne_out, "write the CSV here instead of stdout");

  // alpha-hist
  auto* ahist = app.add_subcommand("alpha-hist", "per-node gate values of a checkpoint");
  std::string ah_bundle, ah_model, ah_out, ah_hist;
  ahist->add_option("--bundle", ah_bundle, "bundle directory")->required();
  ahist->add_option("--model", ah_model, "model checkpoint path")->required();
  ahist->add_option("--out", ah_out, "write per-node alpha CSV here instead of stdout");
  ahist->add_option("--hist", ah_hist, "also write a 20-bin histogram CSV here");

  // spectral-check
  auto* spectral = app.add_subcommand(
      "spectral-check", "compare recursive and closed-form gated propagation");
  int sp_nodes = 8, sp_order = 4, sp_trials = 20, sp_dim = 3;
  uint64_t sp_seed = 7;
  spectral->add_option("--nodes", sp_nodes, "graph size");
  spectral->add_option("--order", sp_order, "propagation depth K");
  spectral->add_option("--trials", sp_trials, "number of random instances");
  spectral->add_option("--dim", sp_dim, "feature width");
  spectral->add_option("--seed", sp_seed, "seed");

  // kendall
  auto* kendall = app.add_subcommand("kendall", "rank correlation of metrics vs accuracy");
  std::string ke_results, ke_metrics, ke_out;
  int ke_min_nodes = 0;
  kendall->add_option("--results", ke_results, "CSV with dataset,accuracy")->required();
  kendall->add_option("--metrics", ke_metrics, "CSV with dataset and metric columns")
      ->required();
  kendall->add_option("--min-nodes", ke_min_nodes,
                      "keep only datasets with num_nodes > this");
  kendall->add_option("--out", ke_out, "write the JSON report here instead of stdout");

  try {
    app.parse(argc, argv);
    if (synth->parsed())
      return cmd_synth(sy_kind, sy_npc, sy_classes, sy_degree, sy_noise, sy_splits, sy_seed,
                       sy_out);
    if (metrics->parsed()) return cmd_metrics(me_bundle, me_out, me_csv);
    if (train->parsed())
      return cmd_train(tr_bundle, tr_mf, tr_lr, tr_wd, tr_dropout, tr_epochs, tr_patience,
                       tr_split, tr_seed, tr_out, tr_save);
    if (grid->parsed()) return cmd_grid(gr_bundle, gr_mf, gr_tc, gr_jobs, gr_out);
    if (sweepl->parsed())
      return cmd_sweep_layers(sl_bundle, sl_mf, sl_tc, sl_depths, sl_jobs, sl_out);
    if (noisy->parsed())
      return cmd_noisy_edges(ne_bundle, ne_mf, ne_tc, ne_ratios, ne_seed, ne_jobs, ne_out);
    if (ahist->parsed()) return cmd_alpha_hist(ah_bundle, ah_model, ah_out, ah_hist);
    if (spectral->parsed())
      return cmd_spectral_check(sp_nodes, sp_order, sp_trials, sp_dim, sp_seed);
    if (kendall->parsed()) return cmd_kendall(ke_results, ke_metrics, ke_min_nodes, ke_out);
    std::cerr << "error: no subcommand\n" << app.help() << "\n";
    return 1;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const cagnn::BundleError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const cagnn::CheckpointError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const cagnn::ReportError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\nrun with --help for usage\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
