#pragma once

#include <algorithm>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cagnn/matrix.hpp"

namespace cagnn {

// Undirected simple graph in CSR form. Adjacency stores both directions of
// every edge; neighbor lists are sorted and free of duplicates and self loops.
struct Graph {
  int num_nodes = 0;
  std::vector<int> offsets;  // num_nodes + 1
  std::vector<int> targets;
  long long undirected_edges = 0;

  // Builds from an arbitrary edge list: drops self loops, symmetrizes,
  // removes duplicates. Endpoints must already be validated against
  // num_nodes by the caller.
  static Graph from_edges(int num_nodes, std::vector<std::pair<int, int>> edges) {
    for (auto& e : edges) {
      if (e.first > e.second) std::swap(e.first, e.second);
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    std::erase_if(edges, [](const auto& e) { return e.first == e.second; });

    Graph g;
    g.num_nodes = num_nodes;
    g.undirected_edges = static_cast<long long>(edges.size());
    std::vector<int> deg(num_nodes, 0);
    for (const auto& [u, v] : edges) {
      ++deg[u];
      ++deg[v];
    }
    g.offsets.assign(num_nodes + 1, 0);
    for (int i = 0; i < num_nodes; ++i) g.offsets[i + 1] = g.offsets[i] + deg[i];
    g.targets.resize(g.offsets.back());
    std::vector<int> cursor(g.offsets.begin(), g.offsets.end() - 1);
    for (const auto& [u, v] : edges) {
      g.targets[cursor[u]++] = v;
      g.targets[cursor[v]++] = u;
    }
    for (int i = 0; i < num_nodes; ++i)
      std::sort(g.targets.begin() + g.offsets[i], g.targets.begin() + g.offsets[i + 1]);
    return g;
  }

  std::span<const int> neighbors(int v) const {
    return {targets.data() + offsets[v], targets.data() + offsets[v + 1]};
  }
  int degree(int v) const { return offsets[v + 1] - offsets[v]; }

  bool has_edge(int u, int v) const {
    auto nb = neighbors(u);
    return std::binary_search(nb.begin(), nb.end(), v);
  }

  std::vector<std::pair<int, int>> edge_list() const {
    std::vector<std::pair<int, int>> out;
    out.reserve(static_cast<size_t>(undirected_edges));
    for (int u = 0; u < num_nodes; ++u)
      for (int v : neighbors(u))
        if (u < v) out.emplace_back(u, v);
    return out;
  }

  // Structural invariants: symmetric, sorted, duplicate- and self-loop-free.
  void check_invariants() const {
    if (static_cast<int>(offsets.size()) != num_nodes + 1)
      throw std::logic_error("graph: bad offsets length");
    long long half = 0;
    for (int u = 0; u < num_nodes; ++u) {
      auto nb = neighbors(u);
      for (size_t i = 0; i < nb.size(); ++i) {
        int v = nb[i];
        if (v < 0 || v >= num_nodes) throw std::logic_error("graph: neighbor out of range");
        if (v == u) throw std::logic_error("graph: self loop present");
        if (i > 0 && nb[i - 1] >= v) throw std::logic_error("graph: neighbors unsorted or duplicated");
        if (!has_edge(v, u)) throw std::logic_error("graph: adjacency not symmetric");
        if (u < v) ++half;
      }
    }
    if (half != undirected_edges) throw std::logic_error("graph: edge count mismatch");
  }
};

struct Split {
  std::vector<int> train, val, test;
};

// Graph plus node features, labels and evaluation splits.
struct DatasetBundle {
  std::string name;
  Graph graph;
  Matrix features;          // num_nodes x feature_dim
  std::vector<int> labels;  // values in [0, num_classes)
  int num_classes = 0;
  std::vector<Split> splits;

  void validate() const {
    const int n = graph.num_nodes;
    if (features.rows != n)
      throw std::invalid_argument("bundle '" + name + "': feature rows (" +
                                  std::to_string(features.rows) + ") != num_nodes (" +
                                  std::to_string(n) + ")");
    if (static_cast<int>(labels.size()) != n)
      throw std::invalid_argument("bundle '" + name + "': label count (" +
                                  std::to_string(labels.size()) + ") != num_nodes (" +
                                  std::to_string(n) + ")");
    if (num_classes < 1) throw std::invalid_argument("bundle '" + name + "': num_classes < 1");
    for (int i = 0; i < n; ++i)
      if (labels[i] < 0 || labels[i] >= num_classes)
        throw std::invalid_argument("bundle '" + name + "': label out of range at node " +
                                    std::to_string(i));
    for (size_t s = 0; s < splits.size(); ++s) {
      std::vector<char> seen(n, 0);
      auto check_part = [&](const std::vector<int>& idx, const char* part) {
        for (int v : idx) {
          if (v < 0 || v >= n)
            throw std::invalid_argument("bundle '" + name + "': split " + std::to_string(s) +
                                        " " + part + " index out of range");
          if (seen[v]++)
            throw std::invalid_argument("bundle '" + name + "': split " + std::to_string(s) +
                                        " reuses node " + std::to_string(v));
        }
      };
      check_part(splits[s].train, "train");
      check_part(splits[s].val, "val");
      check_part(splits[s].test, "test");
      if (splits[s].train.empty() || splits[s].val.empty() || splits[s].test.empty())
        throw std::invalid_argument("bundle '" + name + "': split " + std::to_string(s) +
                                    " has an empty part");
    }
    graph.check_invariants();
  }
};

}  // namespace cagnn
