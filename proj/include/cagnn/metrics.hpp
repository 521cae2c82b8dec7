#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "cagnn/graph.hpp"
#include "cagnn/jacobi.hpp"
#include "cagnn/matrix.hpp"

namespace cagnn {

// Fraction of each node's neighbors sharing its label, averaged over all
// nodes. Isolated nodes contribute 0.
inline double homophily_node(const Graph& g, const std::vector<int>& labels) {
  if (g.num_nodes == 0) return 0.0;
  double acc = 0.0;
  for (int v = 0; v < g.num_nodes; ++v) {
    const int d = g.degree(v);
    if (d == 0) continue;
    int same = 0;
    for (int w : g.neighbors(v)) same += (labels[w] == labels[v]);
    acc += static_cast<double>(same) / d;
  }
  return acc / g.num_nodes;
}

// Fraction of undirected edges whose endpoints share a label.
inline double homophily_edge(const Graph& g, const std::vector<int>& labels) {
  if (g.undirected_edges == 0) return 0.0;
  long long same = 0;
  for (int u = 0; u < g.num_nodes; ++u)
    for (int v : g.neighbors(u))
      if (u < v && labels[u] == labels[v]) ++same;
  return static_cast<double>(same) / static_cast<double>(g.undirected_edges);
}

// Row v of the result is node v's neighbor-label distribution (counts divided
// by degree); rows of isolated nodes stay zero. One row per class-k node.
inline Matrix neighbor_label_rows(const Graph& g, const std::vector<int>& labels,
                                  int num_classes, int k) {
  int nk = 0;
  for (int v = 0; v < g.num_nodes; ++v) nk += (labels[v] == k);
  Matrix a(nk, num_classes);
  int r = 0;
  for (int v = 0; v < g.num_nodes; ++v) {
    if (labels[v] != k) continue;
    const int d = g.degree(v);
    if (d > 0)
      for (int w : g.neighbors(v)) a(r, labels[w]) += 1.0 / d;
    ++r;
  }
  return a;
}

// Singular values of `a` through the Gram route: eigenvalues of a^T a by
// cyclic Jacobi, clamped so that noise below 1e-12 of the top eigenvalue
// (and any negative round-off) collapses to exactly zero. A rank-1 matrix
// therefore yields exactly one nonzero singular value.
inline std::vector<double> gram_singular_values(const Matrix& a) {
  Matrix gram(a.cols, a.cols);
  matmul_tn_acc(a, a, gram);
  std::vector<double> ev = symmetric_eigenvalues(gram);
  const double top = ev.empty() ? 0.0 : std::max(ev.front(), 0.0);
  for (double& l : ev) {
    if (l < 1e-12 * top) l = 0.0;
    l = std::sqrt(l);
  }
  return ev;
}

// Von Neumann style identifiability entropy of one class's neighbor-label
// matrix: singular values normalized to a distribution, Shannon entropy in
// nats, scaled by ln(num_classes) into [0, 1].
inline double class_entropy_from_singulars(const std::vector<double>& sv, int num_classes) {
  if (num_classes < 2) return 0.0;
  double sum = 0.0;
  for (double s : sv) sum += s;
  if (sum <= 0.0) return 0.0;
  double h = 0.0;
  for (double s : sv) {
    const double p = s / sum;
    if (p > 0.0) h -= p * std::log(p);
  }
  h /= std::log(static_cast<double>(num_classes));
  if (h < 0.0) h = 0.0;
  if (h > 1.0) h = 1.0;
  return h;
}

struct ClassEntropy {
  int label = 0;
  int count = 0;        // nodes of this class
  double entropy = 0.0; // in [0, 1]
};

// Node-count weighted mean of per-class entropies. Low values mean neighbor
// label histograms identify the class (near rank-1 rows); high values mean
// neighbors carry little class signal.
inline double neighbor_entropy(const Graph& g, const std::vector<int>& labels, int num_classes,
                               std::vector<ClassEntropy>* per_class = nullptr) {
  if (static_cast<int>(labels.size()) != g.num_nodes)
    throw std::invalid_argument("neighbor_entropy: label count != num_nodes");
  if (per_class) per_class->clear();
  double acc = 0.0;
  for (int k = 0; k < num_classes; ++k) {
    const Matrix a = neighbor_label_rows(g, labels, num_classes, k);
    const double hk = a.rows == 0
                          ? 0.0
                          : class_entropy_from_singulars(gram_singular_values(a), num_classes);
    if (per_class) per_class->push_back({k, a.rows, hk});
    acc += static_cast<double>(a.rows) / g.num_nodes * hk;
  }
  return acc;
}

struct GraphMetrics {
  int num_nodes = 0;
  long long undirected_edges = 0;
  int num_classes = 0;
  double h_node = 0.0;
  double h_edge = 0.0;
  double h_neighbor = 0.0;
  std::vector<ClassEntropy> per_class;
};

inline GraphMetrics compute_metrics(const Graph& g, const std::vector<int>& labels,
                                    int num_classes) {
  GraphMetrics m;
  m.num_nodes = g.num_nodes;
  m.undirected_edges = g.undirected_edges;
  m.num_classes = num_classes;
  m.h_node = homophily_node(g, labels);
  m.h_edge = homophily_edge(g, labels);
  m.h_neighbor = neighbor_entropy(g, labels, num_classes, &m.per_class);
  return m;
}

inline GraphMetrics compute_metrics(const DatasetBundle& b) {
  return compute_metrics(b.graph, b.labels, b.num_classes);
}

}  // namespace cagnn
