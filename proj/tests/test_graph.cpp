#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <set>

#include "cagnn/bundle_io.hpp"
#include "cagnn/graph.hpp"
#include "cagnn/graph_gen.hpp"
#include "support/tmpdir.hpp"

using namespace cagnn;

TEST_CASE("from_edges symmetrizes, dedups and drops self loops") {
  // Duplicates in both orientations, a self loop, unsorted input.
  Graph g = Graph::from_edges(5, {{3, 1}, {1, 3}, {0, 1}, {2, 2}, {4, 0}, {0, 4}, {0, 4}, {1, 0}});
  g.check_invariants();
  CHECK(g.undirected_edges == 3);
  CHECK(g.degree(0) == 2);
  CHECK(g.degree(2) == 0);
  CHECK(g.has_edge(1, 3));
  CHECK(g.has_edge(3, 1));
  CHECK(!g.has_edge(2, 2));
  auto nb = g.neighbors(0);
  REQUIRE(nb.size() == 2);
  CHECK(nb[0] == 1);
  CHECK(nb[1] == 4);
}

TEST_CASE("edge_list returns each undirected edge once") {
  Graph g = Graph::from_edges(4, {{0, 1}, {1, 2}, {2, 3}, {3, 0}});
  auto el = g.edge_list();
  REQUIRE(el.size() == 4);
  for (auto [u, v] : el) CHECK(u < v);
}

static DatasetBundle tiny_bundle() {
  DatasetBundle b;
  b.name = "tiny";
  b.graph = Graph::from_edges(6, {{0, 1}, {1, 2}, {3, 4}, {4, 5}, {0, 5}});
  b.num_classes = 2;
  b.labels = {0, 0, 0, 1, 1, 1};
  b.features = Matrix(6, 3);
  for (int i = 0; i < 6; ++i)
    for (int c = 0; c < 3; ++c) b.features(i, c) = 0.25 * i - 1.5 * c + 0.125;
  b.splits.push_back({{0, 3}, {1, 4}, {2, 5}});
  b.splits.push_back({{1, 4}, {2, 5}, {0, 3}});
  return b;
}

TEST_CASE("bundle save/load round trip") {
  testsupport::TmpDir tmp("bundle-rt");
  DatasetBundle b = tiny_bundle();
  save_bundle(tmp.path / "tiny", b);
  DatasetBundle r = load_bundle(tmp.path / "tiny");
  CHECK(r.name == "tiny");
  CHECK(r.graph.num_nodes == 6);
  CHECK(r.graph.undirected_edges == b.graph.undirected_edges);
  CHECK(r.graph.targets == b.graph.targets);
  CHECK(r.num_classes == 2);
  CHECK(r.labels == b.labels);
  REQUIRE(r.features.same_shape(b.features));
  CHECK(max_abs_diff(r.features, b.features) == 0.0);
  REQUIRE(r.splits.size() == 2);
  CHECK(r.splits[1].test == b.splits[1].test);
}

TEST_CASE("loader reports malformed files with location") {
  testsupport::TmpDir tmp("bundle-bad");
  DatasetBundle b = tiny_bundle();

  SECTION("edge endpoint out of range") {
    save_bundle(tmp.path / "d", b);
    std::ofstream(tmp.path / "d" / "edges.tsv", std::ios::app) << "2\t17\n";
    REQUIRE_THROWS_WITH(load_bundle(tmp.path / "d"),
                        Catch::Matchers::ContainsSubstring("edges.tsv:6") &&
                            Catch::Matchers::ContainsSubstring("out of range"));
  }
  SECTION("feature row with wrong arity") {
    save_bundle(tmp.path / "d", b);
    std::ofstream(tmp.path / "d" / "features.csv", std::ios::trunc)
        << "1,2,3\n4,5\n1,2,3\n1,2,3\n1,2,3\n1,2,3\n";
    REQUIRE_THROWS_WITH(load_bundle(tmp.path / "d"),
                        Catch::Matchers::ContainsSubstring("features.csv:2"));
  }
  SECTION("label out of class range") {
    b.labels[3] = 9;
    save_bundle(tmp.path / "d", b);
    REQUIRE_THROWS_WITH(load_bundle(tmp.path / "d"),
                        Catch::Matchers::ContainsSubstring("label out of range"));
  }
  SECTION("split reuses a node") {
    b.splits[0].val.push_back(0);
    save_bundle(tmp.path / "d", b);
    REQUIRE_THROWS_WITH(load_bundle(tmp.path / "d"),
                        Catch::Matchers::ContainsSubstring("reuses node"));
  }
  SECTION("missing file") {
    save_bundle(tmp.path / "d", b);
    std::filesystem::remove(tmp.path / "d" / "labels.txt");
    REQUIRE_THROWS_WITH(load_bundle(tmp.path / "d"),
                        Catch::Matchers::ContainsSubstring("labels.txt"));
  }
}

TEST_CASE("loader symmetrizes and dedups raw edge lists") {
  testsupport::TmpDir tmp("bundle-sym");
  DatasetBundle b = tiny_bundle();
  save_bundle(tmp.path / "d", b);
  // Rewrite edges with duplicates, reversed copies and a self loop.
  std::ofstream(tmp.path / "d" / "edges.tsv", std::ios::trunc)
      << "0\t1\n1\t0\n1\t2\n3\t4\n4\t5\n0\t5\n5\t0\n2\t2\n";
  DatasetBundle r = load_bundle(tmp.path / "d");
  r.graph.check_invariants();
  CHECK(r.graph.undirected_edges == 5);
}

TEST_CASE("pure homophily generator hits the exact edge budget") {
  SynthConfig cfg;
  cfg.kind = SynthKind::pure_homophily;
  cfg.nodes_per_class = 200;
  cfg.num_classes = 3;
  cfg.degree = 10;
  cfg.seed = 7;
  DatasetBundle b = make_synthetic(cfg);
  b.graph.check_invariants();
  CHECK(b.graph.undirected_edges == 3LL * 200 * 10 / 2);
  for (auto [u, v] : b.graph.edge_list()) CHECK(b.labels[u] == b.labels[v]);
  CHECK(b.features.rows == 600);
  CHECK(b.features.cols == 3);
}

TEST_CASE("bipartite generator produces only cross-class edges") {
  SynthConfig cfg;
  cfg.kind = SynthKind::bipartite;
  cfg.nodes_per_class = 150;
  cfg.num_classes = 2;
  cfg.degree = 8;
  cfg.seed = 11;
  DatasetBundle b = make_synthetic(cfg);
  CHECK(b.graph.undirected_edges == 150LL * 8);
  for (auto [u, v] : b.graph.edge_list()) CHECK(b.labels[u] != b.labels[v]);

  cfg.num_classes = 3;
  REQUIRE_THROWS_WITH(make_synthetic(cfg), Catch::Matchers::ContainsSubstring("2 classes"));
}

TEST_CASE("random neighbor generator spreads edges uniformly") {
  SynthConfig cfg;
  cfg.kind = SynthKind::random_neighbor;
  cfg.nodes_per_class = 300;
  cfg.num_classes = 4;
  cfg.degree = 12;
  cfg.seed = 3;
  DatasetBundle b = make_synthetic(cfg);
  CHECK(b.graph.undirected_edges == 1200LL * 12 / 2);
  // Cross-class edge share should be near 1 - 1/C == 0.75.
  long long cross = 0;
  for (auto [u, v] : b.graph.edge_list())
    if (b.labels[u] != b.labels[v]) ++cross;
  const double share = static_cast<double>(cross) / static_cast<double>(b.graph.undirected_edges);
  CHECK(share > 0.70);
  CHECK(share < 0.80);
}

TEST_CASE("patterned generator realizes the pattern rows") {
  SynthConfig cfg;
  cfg.kind = SynthKind::patterned;
  cfg.nodes_per_class = 500;
  cfg.num_classes = 3;
  cfg.degree = 20;
  cfg.seed = 19;
  DatasetBundle b = make_synthetic(cfg);
  b.graph.check_invariants();
  const auto p = synth_pattern(3);

  // Mean degree close to target.
  const double mean_deg =
      2.0 * static_cast<double>(b.graph.undirected_edges) / b.graph.num_nodes;
  CHECK(mean_deg == Catch::Approx(20.0).margin(0.5));

  // Average realized neighbor-label distribution per class tracks the row.
  for (int k = 0; k < 3; ++k) {
    std::vector<double> mean_row(3, 0.0);
    int counted = 0;
    for (int v = 0; v < b.graph.num_nodes; ++v) {
      if (b.labels[v] != k || b.graph.degree(v) == 0) continue;
      std::vector<double> row(3, 0.0);
      for (int w : b.graph.neighbors(v)) row[b.labels[w]] += 1.0;
      for (int j = 0; j < 3; ++j) mean_row[j] += row[j] / b.graph.degree(v);
      ++counted;
    }
    for (int j = 0; j < 3; ++j) {
      CHECK(mean_row[j] / counted == Catch::Approx(p[k][j]).margin(0.05));
    }
  }
}

TEST_CASE("pattern matrices are symmetric row-stochastic with distinct rows") {
  for (int C : {2, 3, 4, 5, 7}) {
    auto p = synth_pattern(C);
    for (int k = 0; k < C; ++k) {
      double s = 0.0;
      for (int j = 0; j < C; ++j) {
        s += p[k][j];
        CHECK(p[k][j] == Catch::Approx(p[j][k]));
      }
      CHECK(s == Catch::Approx(1.0));
    }
    for (int a = 0; a < C; ++a)
      for (int bb = a + 1; bb < C; ++bb) CHECK(p[a] != p[bb]);
  }
}

TEST_CASE("stratified split respects per-class 48/32/20 proportions") {
  SynthConfig cfg;
  cfg.kind = SynthKind::patterned;
  cfg.nodes_per_class = 100;
  cfg.num_classes = 3;
  cfg.degree = 6;
  cfg.seed = 5;
  cfg.num_splits = 3;
  DatasetBundle b = make_synthetic(cfg);
  REQUIRE(b.splits.size() == 3);
  for (const auto& s : b.splits) {
    CHECK(s.train.size() == 48u * 3);
    CHECK(s.val.size() == 32u * 3);
    CHECK(s.test.size() == 20u * 3);
    for (int c = 0; c < 3; ++c) {
      auto count = [&](const std::vector<int>& part) {
        int k = 0;
        for (int v : part) k += (b.labels[v] == c);
        return k;
      };
      CHECK(count(s.train) == 48);
      CHECK(count(s.val) == 32);
      CHECK(count(s.test) == 20);
    }
    std::set<int> all(s.train.begin(), s.train.end());
    all.insert(s.val.begin(), s.val.end());
    all.insert(s.test.begin(), s.test.end());
    CHECK(all.size() == 300u);
  }
  CHECK(b.splits[0].train != b.splits[1].train);
}

TEST_CASE("generators are deterministic in the seed") {
  SynthConfig cfg;
  cfg.kind = SynthKind::patterned;
  cfg.nodes_per_class = 80;
  cfg.num_classes = 4;
  cfg.degree = 8;
  cfg.seed = 42;
  DatasetBundle a = make_synthetic(cfg);
  DatasetBundle b = make_synthetic(cfg);
  CHECK(a.graph.targets == b.graph.targets);
  CHECK(max_abs_diff(a.features, b.features) == 0.0);
  CHECK(a.splits[0].train == b.splits[0].train);
  cfg.seed = 43;
  DatasetBundle c = make_synthetic(cfg);
  CHECK(a.graph.targets != c.graph.targets);
}

TEST_CASE("add_random_edges adds the exact budget and keeps the original edges") {
  SynthConfig cfg;
  cfg.kind = SynthKind::pure_homophily;
  cfg.nodes_per_class = 100;
  cfg.num_classes = 2;
  cfg.degree = 6;
  cfg.seed = 1;
  DatasetBundle b = make_synthetic(cfg);
  const long long e0 = b.graph.undirected_edges;

  Graph g1 = add_random_edges(b.graph, 0.5, 99);
  g1.check_invariants();
  CHECK(g1.undirected_edges == e0 + e0 / 2);
  for (auto [u, v] : b.graph.edge_list()) CHECK(g1.has_edge(u, v));

  Graph g2 = add_random_edges(b.graph, 0.5, 99);
  CHECK(g1.targets == g2.targets);
  Graph g3 = add_random_edges(b.graph, 0.5, 100);
  CHECK(g1.targets != g3.targets);

  Graph g0 = add_random_edges(b.graph, 0.0, 99);
  CHECK(g0.undirected_edges == e0);
}

TEST_CASE("add_random_edges enumerates when the non-edge pool is small") {
  // K_10 minus one edge: only one absent pair remains.
  std::vector<std::pair<int, int>> edges;
  for (int u = 0; u < 10; ++u)
    for (int v = u + 1; v < 10; ++v)
      if (!(u == 0 && v == 1)) edges.emplace_back(u, v);
  Graph g = Graph::from_edges(10, std::move(edges));
  Graph full = add_random_edges(g, 0.023, 7);  // floor(44 * 0.023) == 1
  CHECK(full.undirected_edges == 45);
  CHECK(full.has_edge(0, 1));
  REQUIRE_THROWS_WITH(add_random_edges(g, 0.1, 7),
                      Catch::Matchers::ContainsSubstring("non-adjacent pairs"));
}
