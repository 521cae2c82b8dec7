#pragma once

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "cagnn/adam.hpp"
#include "cagnn/graph.hpp"
#include "cagnn/graph_gen.hpp"
#include "cagnn/model.hpp"

namespace cagnn {

// One point of the hyper-parameter grid.
struct HyperPoint {
  double lr = 0.01;
  double weight_decay = 5e-4;
  double dropout = 0.5;

  bool operator==(const HyperPoint& o) const {
    return lr == o.lr && weight_decay == o.weight_decay && dropout == o.dropout;
  }
};

struct TrainConfig {
  std::vector<double> lrs{0.001, 0.01, 0.05};
  std::vector<double> weight_decays{5e-5, 5e-4};
  std::vector<double> dropouts{0.0, 0.5};
  int max_epochs = 500;
  int patience = 100;
  uint64_t seed = 1;

  void validate() const {
    auto check_list = [](const std::vector<double>& xs, const char* what, double lo, double hi) {
      if (xs.empty()) throw std::invalid_argument(std::string("train config: empty ") + what);
      for (double x : xs)
        if (!(x >= lo && x < hi))
          throw std::invalid_argument(std::string("train config: ") + what + " out of range");
    };
    check_list(lrs, "lr grid", 0.0, 1e300);
    check_list(weight_decays, "weight decay grid", 0.0, 1e300);
    check_list(dropouts, "dropout grid", 0.0, 1.0);
    if (max_epochs < 1) throw std::invalid_argument("train config: max_epochs < 1");
    if (patience < 0) throw std::invalid_argument("train config: patience < 0");
    if (max_epochs < patience)
      throw std::invalid_argument("train config: max_epochs < patience");
  }

  // lr-major enumeration; selection ties resolve to the earliest point.
  std::vector<HyperPoint> grid() const {
    std::vector<HyperPoint> g;
    for (double lr : lrs)
      for (double wd : weight_decays)
        for (double dr : dropouts) g.push_back({lr, wd, dr});
    return g;
  }
};

// Outcome of a single training run (one split, one grid point).
struct RunResult {
  HyperPoint hyper;
  double best_val_acc = -1.0;
  double test_acc = std::numeric_limits<double>::quiet_NaN();
  int epochs_run = 0;
  int best_epoch = 0;  // 1-based; 0 if the run never completed an epoch
  double ms_per_epoch = 0.0;
  std::vector<double> val_curve;          // val accuracy after each epoch
  std::vector<double> alpha_layer_means;  // per layer, at the kept parameters
  bool diverged = false;
  std::shared_ptr<Model> model;  // only if requested
};

namespace trainer_detail {

inline double accuracy_of(const Matrix& z, const std::vector<int>& labels,
                          const std::vector<int>& idx) {
  if (idx.empty()) throw std::invalid_argument("accuracy: empty index set");
  int hit = 0;
  for (int i : idx) {
    int arg = 0;
    for (int j = 1; j < z.cols; ++j)
      if (z(i, j) > z(i, arg)) arg = j;
    if (arg == labels[i]) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(idx.size());
}

inline std::vector<double> alpha_means(const ModelOutput& out) {
  std::vector<double> means;
  for (const auto& a : out.alphas) {
    const Matrix& m = a.value();
    double s = 0.0;
    for (double v : m.data) s += v;
    means.push_back(s / static_cast<double>(m.data.size()));
  }
  return means;
}

}  // namespace trainer_detail

// Full-batch Adam on the train mask, validation-based early stopping, test
// accuracy at the kept (best-val) parameters. Test labels are only read in
// the final evaluation. `run_seed` fixes both initialization and dropout.
inline RunResult train_one(const DatasetBundle& bundle, const Propagation& prop, int split_index,
                           const ModelConfig& mc_in, const HyperPoint& hp, int max_epochs,
                           int patience, uint64_t run_seed, bool keep_model = false) {
  if (split_index < 0 || split_index >= static_cast<int>(bundle.splits.size()))
    throw std::invalid_argument("train_one: split index out of range");
  if (max_epochs < 1) throw std::invalid_argument("train_one: max_epochs < 1");
  const Split& split = bundle.splits[split_index];

  ModelConfig mc = mc_in;
  mc.dropout = hp.dropout;
  auto model = std::make_shared<Model>(mc, bundle.features.cols, bundle.num_classes, run_seed);
  Rng drop_rng(mix_seed(run_seed, 0xd70b));

  AdamConfig ac;
  ac.lr = hp.lr;
  ac.weight_decay = hp.weight_decay;
  Adam opt(model->params(), ac);

  const ad::Tensor x = ad::Tensor::constant(bundle.features);

  RunResult r;
  r.hyper = hp;
  std::vector<Matrix> best_params;
  int stale = 0;
  double timed_ms = 0.0;
  using clock = std::chrono::steady_clock;

  for (int epoch = 1; epoch <= max_epochs; ++epoch) {
    try {
      const auto t0 = clock::now();
      opt.zero_grad();
      ModelOutput out = model->forward(prop, x, true, drop_rng);
      ad::Tensor loss = ad::masked_cross_entropy(out.raw, bundle.labels, split.train);
      const double loss_value = loss.value()(0, 0);
      if (!std::isfinite(loss_value)) {
        r.diverged = true;
        break;
      }
      loss.backward();
      opt.step();
      timed_ms += std::chrono::duration<double, std::milli>(clock::now() - t0).count();

      ModelOutput eval = model->forward(prop, x, false, drop_rng);
      const double val_acc =
          trainer_detail::accuracy_of(eval.z.value(), bundle.labels, split.val);
      r.val_curve.push_back(val_acc);
      r.epochs_run = epoch;
      if (val_acc > r.best_val_acc) {
        r.best_val_acc = val_acc;
        r.best_epoch = epoch;
        best_params = model->snapshot();
        stale = 0;
      } else if (++stale >= patience) {
        break;
      }
    } catch (const GateSaturation&) {
      r.diverged = true;
      break;
    }
  }

  if (r.epochs_run > 0) r.ms_per_epoch = timed_ms / r.epochs_run;
  if (r.diverged || best_params.empty()) {
    r.diverged = true;
    return r;
  }

  model->restore(best_params);
  ModelOutput final_eval = model->forward(prop, x, false, drop_rng);
  r.test_acc = trainer_detail::accuracy_of(final_eval.z.value(), bundle.labels, split.test);
  r.alpha_layer_means = trainer_detail::alpha_means(final_eval);
  if (keep_model) r.model = model;
  return r;
}

// Winning run per split plus the aggregate over splits.
struct SplitOutcome {
  int split = 0;
  RunResult best;
  bool any_diverged = false;
};

struct TrainReport {
  std::vector<SplitOutcome> splits;
  double mean_test_acc = 0.0;
  double std_test_acc = 0.0;  // population std over splits
  double mean_ms_per_epoch = 0.0;
  std::vector<double> alpha_layer_means;  // averaged over the winning runs
};

namespace trainer_detail {

// Runs `tasks` jobs with a bounded worker pool. Each task owns its model and
// tape; results land in fixed slots, so the schedule cannot change them.
template <class Fn>
inline void run_pool(int tasks, int jobs, Fn&& fn) {
  if (jobs <= 1 || tasks <= 1) {
    for (int t = 0; t < tasks; ++t) fn(t);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const int t = next.fetch_add(1);
      if (t >= tasks) return;
      try {
        fn(t);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> threads;
  const int n = std::min(jobs, tasks);
  threads.reserve(n);
  for (int i = 0; i < n; ++i) threads.emplace_back(worker);
  for (auto& th : threads) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace trainer_detail

// For every split, trains each grid point (all with the same split-derived
// seed so initialization is shared) and keeps the point with the best val
// accuracy; aggregates test accuracy over splits as mean and population std.
inline TrainReport grid_search(const DatasetBundle& bundle, const ModelConfig& mc,
                               const TrainConfig& tc, int jobs = 1) {
  tc.validate();
  mc.validate();
  bundle.validate();
  const std::vector<HyperPoint> grid = tc.grid();
  const int num_splits = static_cast<int>(bundle.splits.size());
  const int g = static_cast<int>(grid.size());
  const Propagation prop = build_propagation(bundle.graph, mc.kernel);

  std::vector<RunResult> runs(static_cast<size_t>(num_splits) * g);
  trainer_detail::run_pool(num_splits * g, jobs, [&](int t) {
    const int s = t / g, gi = t % g;
    const uint64_t run_seed = tc.seed ^ static_cast<uint64_t>(s);
    runs[t] = train_one(bundle, prop, s, mc, grid[gi], tc.max_epochs, tc.patience, run_seed);
  });

  TrainReport report;
  report.splits.reserve(num_splits);
  for (int s = 0; s < num_splits; ++s) {
    SplitOutcome out;
    out.split = s;
    int win = -1;
    for (int gi = 0; gi < g; ++gi) {
      const RunResult& r = runs[static_cast<size_t>(s) * g + gi];
      if (r.diverged) {
        out.any_diverged = true;
        continue;
      }
      if (win < 0 || r.best_val_acc > runs[static_cast<size_t>(s) * g + win].best_val_acc)
        win = gi;
    }
    if (win < 0)
      throw std::runtime_error("grid search: every grid point diverged on split " +
                               std::to_string(s));
    out.best = runs[static_cast<size_t>(s) * g + win];
    out.best.val_curve.clear();  // bulky; per-run curves belong to train_one callers
    report.splits.push_back(std::move(out));
  }

  double sum = 0.0, ms = 0.0;
  for (const auto& o : report.splits) {
    sum += o.best.test_acc;
    ms += o.best.ms_per_epoch;
  }
  report.mean_test_acc = sum / num_splits;
  report.mean_ms_per_epoch = ms / num_splits;
  double var = 0.0;
  for (const auto& o : report.splits) {
    const double d = o.best.test_acc - report.mean_test_acc;
    var += d * d;
  }
  report.std_test_acc = std::sqrt(var / num_splits);

  const size_t layers = report.splits.front().best.alpha_layer_means.size();
  bool uniform = true;
  for (const auto& o : report.splits)
    uniform = uniform && o.best.alpha_layer_means.size() == layers;
  if (uniform && layers > 0) {
    report.alpha_layer_means.assign(layers, 0.0);
    for (const auto& o : report.splits)
      for (size_t l = 0; l < layers; ++l)
        report.alpha_layer_means[l] += o.best.alpha_layer_means[l] / num_splits;
  }
  return report;
}

struct SweepRow {
  double x = 0.0;  // depth or noise ratio
  double mean = 0.0;
  double stddev = 0.0;
};

inline std::vector<SweepRow> sweep_layers(const DatasetBundle& bundle, const ModelConfig& mc,
                                          const TrainConfig& tc, const std::vector<int>& depths,
                                          int jobs = 1) {
  if (depths.empty()) throw std::invalid_argument("sweep_layers: empty depth list");
  std::vector<SweepRow> rows;
  for (int depth : depths) {
    if (depth < 1) throw std::invalid_argument("sweep_layers: depth < 1");
    ModelConfig m = mc;
    m.layers = depth;
    TrainReport rep = grid_search(bundle, m, tc, jobs);
    rows.push_back({static_cast<double>(depth), rep.mean_test_acc, rep.std_test_acc});
  }
  return rows;
}

// Ratio 0 trains on the bundle as-is; the perturbation seed is derived from
// the ratio value itself, so a row's result does not depend on list order.
inline std::vector<SweepRow> sweep_noise(const DatasetBundle& bundle, const ModelConfig& mc,
                                         const TrainConfig& tc, const std::vector<double>& ratios,
                                         uint64_t noise_seed, int jobs = 1) {
  if (ratios.empty()) throw std::invalid_argument("sweep_noise: empty ratio list");
  std::vector<SweepRow> rows;
  for (double ratio : ratios) {
    if (!(ratio >= 0.0)) throw std::invalid_argument("sweep_noise: ratio < 0");
    TrainReport rep;
    if (ratio == 0.0) {
      rep = grid_search(bundle, mc, tc, jobs);
    } else {
      DatasetBundle noisy = bundle;
      noisy.graph = add_random_edges(bundle.graph, ratio,
                                     mix_seed(noise_seed, std::bit_cast<uint64_t>(ratio)));
      rep = grid_search(noisy, mc, tc, jobs);
    }
    rows.push_back({ratio, rep.mean_test_acc, rep.std_test_acc});
  }
  return rows;
}

}  // namespace cagnn
