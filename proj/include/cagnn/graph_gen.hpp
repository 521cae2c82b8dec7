#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "cagnn/graph.hpp"
#include "cagnn/rng.hpp"

namespace cagnn {

enum class SynthKind { pure_homophily, bipartite, random_neighbor, patterned };

inline SynthKind synth_kind_from_string(const std::string& s) {
  if (s == "pure-homophily") return SynthKind::pure_homophily;
  if (s == "bipartite") return SynthKind::bipartite;
  if (s == "random-neighbor") return SynthKind::random_neighbor;
  if (s == "patterned") return SynthKind::patterned;
  throw std::invalid_argument("unknown synthetic kind '" + s + "'");
}

struct SynthConfig {
  SynthKind kind = SynthKind::pure_homophily;
  int nodes_per_class = 500;
  int num_classes = 2;
  int degree = 10;          // target mean degree
  double noise = 0.1;       // stddev of Gaussian feature noise
  int num_splits = 1;
  uint64_t seed = 0;

  void validate() const {
    if (nodes_per_class < 5) throw std::invalid_argument("synth: nodes_per_class must be >= 5");
    if (num_classes < 2) throw std::invalid_argument("synth: num_classes must be >= 2");
    if (degree < 1) throw std::invalid_argument("synth: degree must be >= 1");
    if (noise < 0.0) throw std::invalid_argument("synth: noise must be >= 0");
    if (num_splits < 1) throw std::invalid_argument("synth: num_splits must be >= 1");
    if (kind == SynthKind::bipartite && num_classes != 2)
      throw std::invalid_argument("synth: bipartite requires exactly 2 classes");
  }
};

// Class mixing pattern: symmetric row-stochastic matrix whose row k is the
// intended neighbor-label distribution of class k. Rows are pairwise distinct
// so neighbor histograms identify the class.
inline std::vector<std::vector<double>> synth_pattern(int C) {
  if (C == 2) return {{0.8, 0.2}, {0.2, 0.8}};
  if (C == 3) return {{0.7, 0.2, 0.1}, {0.2, 0.6, 0.2}, {0.1, 0.2, 0.7}};
  // C >= 4: circulant decay over cyclic class distance, symmetric by construction.
  const double lambda = 0.35;
  std::vector<std::vector<double>> p(C, std::vector<double>(C, 0.0));
  for (int k = 0; k < C; ++k) {
    double row_sum = 0.0;
    for (int j = 0; j < C; ++j) {
      int d = std::abs(k - j);
      d = std::min(d, C - d);
      p[k][j] = std::pow(lambda, d);
      row_sum += p[k][j];
    }
    for (int j = 0; j < C; ++j) p[k][j] /= row_sum;
  }
  return p;
}

namespace gen_detail {

// Samples `count` distinct unordered pairs (u, v), u != v, with u drawn from
// [lo_a, hi_a) and v from [lo_b, hi_b). Ranges are either identical (intra
// block) or disjoint (cross block). Falls back to full enumeration when the
// request is a large fraction of the pair universe.
inline void sample_pairs(std::vector<std::pair<int, int>>& out, long long count, int lo_a,
                         int hi_a, int lo_b, int hi_b, Rng& rng) {
  const bool same = (lo_a == lo_b && hi_a == hi_b);
  const long long na = hi_a - lo_a, nb = hi_b - lo_b;
  const long long universe = same ? na * (na - 1) / 2 : na * nb;
  if (count > universe)
    throw std::invalid_argument("synth: requested " + std::to_string(count) +
                                " edges in a block with only " + std::to_string(universe) +
                                " available pairs; lower the degree or enlarge the classes");
  if (count * 2 >= universe) {
    std::vector<std::pair<int, int>> all;
    all.reserve(static_cast<size_t>(universe));
    for (int u = lo_a; u < hi_a; ++u)
      for (int v = (same ? u + 1 : lo_b); v < hi_b; ++v) all.emplace_back(u, v);
    for (long long i = 0; i < count; ++i) {
      const long long j = i + static_cast<long long>(rng.below(static_cast<uint64_t>(all.size() - i)));
      std::swap(all[i], all[j]);
      out.push_back(all[i]);
    }
    return;
  }
  std::set<std::pair<int, int>> used;
  while (static_cast<long long>(used.size()) < count) {
    int u = lo_a + rng.below_int(static_cast<int>(na));
    int v = lo_b + rng.below_int(static_cast<int>(nb));
    if (u == v) continue;
    auto e = std::minmax(u, v);
    if (used.insert({e.first, e.second}).second) out.push_back({e.first, e.second});
  }
}

}  // namespace gen_detail

// Stratified per-class split: 48% train, 32% val, remainder test.
inline Split make_stratified_split(const std::vector<int>& labels, int num_classes, Rng& rng) {
  Split s;
  std::vector<std::vector<int>> by_class(num_classes);
  for (size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(static_cast<int>(i));
  for (auto& ids : by_class) {
    for (size_t i = ids.size(); i > 1; --i)
      std::swap(ids[i - 1], ids[rng.below(i)]);
    const int nk = static_cast<int>(ids.size());
    const int nt = nk * 48 / 100, nv = nk * 32 / 100;
    for (int i = 0; i < nk; ++i) {
      if (i < nt) s.train.push_back(ids[i]);
      else if (i < nt + nv) s.val.push_back(ids[i]);
      else s.test.push_back(ids[i]);
    }
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.val.begin(), s.val.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

// Builds a labeled synthetic graph by sampling a fixed edge budget per class
// block, so the realized mean degree matches `degree` and the realized
// neighbor-label distribution of class k matches the intended pattern row.
// Features are one-hot labels plus Gaussian noise.
inline DatasetBundle make_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  const int C = cfg.num_classes, n = cfg.nodes_per_class;
  const int N = n * C;
  Rng rng(mix_seed(cfg.seed, 0xc0ffee));

  std::vector<int> labels(N);
  for (int i = 0; i < N; ++i) labels[i] = i / n;  // class blocks are contiguous
  auto lo = [&](int k) { return k * n; };
  auto hi = [&](int k) { return (k + 1) * n; };

  std::vector<std::pair<int, int>> edges;
  switch (cfg.kind) {
    case SynthKind::pure_homophily: {
      const long long per_class = static_cast<long long>(n) * cfg.degree / 2;
      for (int k = 0; k < C; ++k)
        gen_detail::sample_pairs(edges, per_class, lo(k), hi(k), lo(k), hi(k), rng);
      break;
    }
    case SynthKind::bipartite: {
      const long long cross = static_cast<long long>(n) * cfg.degree;
      gen_detail::sample_pairs(edges, cross, lo(0), hi(0), lo(1), hi(1), rng);
      break;
    }
    case SynthKind::random_neighbor: {
      const long long total = static_cast<long long>(N) * cfg.degree / 2;
      gen_detail::sample_pairs(edges, total, 0, N, 0, N, rng);
      break;
    }
    case SynthKind::patterned: {
      const auto p = synth_pattern(C);
      for (int k = 0; k < C; ++k) {
        const long long intra =
            std::llround(static_cast<double>(n) * cfg.degree * p[k][k] / 2.0);
        gen_detail::sample_pairs(edges, intra, lo(k), hi(k), lo(k), hi(k), rng);
        for (int j = k + 1; j < C; ++j) {
          const long long cross = std::llround(static_cast<double>(n) * cfg.degree * p[k][j]);
          gen_detail::sample_pairs(edges, cross, lo(k), hi(k), lo(j), hi(j), rng);
        }
      }
      break;
    }
  }

  DatasetBundle b;
  switch (cfg.kind) {
    case SynthKind::pure_homophily: b.name = "synth-pure-homophily"; break;
    case SynthKind::bipartite: b.name = "synth-bipartite"; break;
    case SynthKind::random_neighbor: b.name = "synth-random-neighbor"; break;
    case SynthKind::patterned: b.name = "synth-patterned"; break;
  }
  b.graph = Graph::from_edges(N, std::move(edges));
  b.labels = labels;
  b.num_classes = C;
  b.features = Matrix(N, C);
  for (int i = 0; i < N; ++i)
    for (int c = 0; c < C; ++c)
      b.features(i, c) = (labels[i] == c ? 1.0 : 0.0) + rng.normal(0.0, cfg.noise);
  for (int s = 0; s < cfg.num_splits; ++s) {
    Rng srng(mix_seed(cfg.seed, 0x57a7 + static_cast<uint64_t>(s)));
    b.splits.push_back(make_stratified_split(b.labels, C, srng));
  }
  b.validate();
  return b;
}

// Returns a copy of `g` with floor(ratio * |E|) extra edges drawn uniformly
// from the currently absent node pairs.
inline Graph add_random_edges(const Graph& g, double ratio, uint64_t seed) {
  if (ratio < 0.0) throw std::invalid_argument("add_random_edges: ratio must be >= 0");
  const long long want = static_cast<long long>(ratio * static_cast<double>(g.undirected_edges));
  auto edges = g.edge_list();
  if (want == 0) return Graph::from_edges(g.num_nodes, std::move(edges));

  const long long universe =
      static_cast<long long>(g.num_nodes) * (g.num_nodes - 1) / 2 - g.undirected_edges;
  if (want > universe)
    throw std::invalid_argument("add_random_edges: requested " + std::to_string(want) +
                                " new edges but only " + std::to_string(universe) +
                                " non-adjacent pairs exist");
  Rng rng(mix_seed(seed, 0xedce5));
  if (want * 2 >= universe) {
    std::vector<std::pair<int, int>> absent;
    absent.reserve(static_cast<size_t>(universe));
    for (int u = 0; u < g.num_nodes; ++u)
      for (int v = u + 1; v < g.num_nodes; ++v)
        if (!g.has_edge(u, v)) absent.emplace_back(u, v);
    for (long long i = 0; i < want; ++i) {
      const long long j = i + static_cast<long long>(rng.below(static_cast<uint64_t>(absent.size() - i)));
      std::swap(absent[i], absent[j]);
      edges.push_back(absent[i]);
    }
  } else {
    std::set<std::pair<int, int>> added;
    while (static_cast<long long>(added.size()) < want) {
      int u = rng.below_int(g.num_nodes);
      int v = rng.below_int(g.num_nodes);
      if (u == v) continue;
      auto e = std::minmax(u, v);
      if (g.has_edge(e.first, e.second)) continue;
      if (added.insert({e.first, e.second}).second) edges.push_back({e.first, e.second});
    }
  }
  return Graph::from_edges(g.num_nodes, std::move(edges));
}

}  // namespace cagnn
