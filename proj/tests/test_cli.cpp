#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "cagnn/bundle_io.hpp"
#include "cagnn/checkpoint.hpp"
#include "cagnn/graph_gen.hpp"
#include "cagnn/metrics.hpp"
#include "cagnn/report_io.hpp"
#include "support/tmpdir.hpp"

using namespace cagnn;
using testsupport::TmpDir;

namespace {

struct CliResult {
  int code = -1;
  std::string out, err;
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

CliResult run_cli(const std::string& args, const std::filesystem::path& workdir) {
  const char* bin = std::getenv("CAGNN_BIN");
  if (!bin) throw std::runtime_error("CAGNN_BIN not set; run under ctest");
  const std::string cmd = "cd " + workdir.string() + " && " + bin + " " + args +
                          " > cli_out.txt 2> cli_err.txt";
  const int rc = std::system(cmd.c_str());
  CliResult r;
  r.code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  r.out = slurp(workdir / "cli_out.txt");
  r.err = slurp(workdir / "cli_err.txt");
  return r;
}

}  // namespace

TEST_CASE("csv tables round trip through their own reader") {
  Table t;
  t.columns = {"dataset", "x", "y"};
  t.rows = {{"alpha", format_double(0.1), format_double(1.0 / 3.0)},
            {"beta", format_double(-2.5e-17), format_double(12345678901234.0)}};
  Table back = Table::from_csv_text(t.to_csv());
  REQUIRE(back.columns == t.columns);
  REQUIRE(back.rows == t.rows);
  CHECK(back.number_at(0, 1) == 0.1);
  CHECK(back.number_at(0, 2) == 1.0 / 3.0);
  CHECK(back.number_at(1, 1) == -2.5e-17);
}

TEST_CASE("csv reader reports malformed rows with line numbers") {
  CHECK_THROWS_WITH(Table::from_csv_text("a,b\n1,2\n3\n", "bad.csv"),
                    Catch::Matchers::ContainsSubstring("bad.csv:3"));
  CHECK_THROWS_AS(Table::from_csv_text("", "empty.csv"), ReportError);
  Table t;
  t.columns = {"a"};
  t.rows = {{"has,comma"}};
  CHECK_THROWS_AS(t.to_csv(), ReportError);
}

TEST_CASE("atomic text writes replace files without leaving temporaries") {
  TmpDir tmp("atomic");
  const auto path = tmp.path / "report.json";
  atomic_write_text(path, "first");
  atomic_write_text(path, "second");
  CHECK(slurp(path) == "second");
  size_t entries = 0;
  for (auto& _ : std::filesystem::directory_iterator(tmp.path)) ++entries, (void)_;
  CHECK(entries == 1);
}

TEST_CASE("shortest-form doubles parse back exactly") {
  for (double v : {0.0, 0.1, -1.0 / 3.0, 5e-324, 1.7976931348623157e308, 85.13}) {
    const std::string s = format_double(v);
    CHECK(std::strtod(s.c_str(), nullptr) == v);
  }
}

TEST_CASE("rank report on identical columns gives perfect correlation") {
  Table results = Table::from_csv_text("dataset,accuracy\na,0.1\nb,0.5\nc,0.9\n");
  Table metrics = Table::from_csv_text("dataset,score\na,0.1\nb,0.5\nc,0.9\n");
  nlohmann::json j = kendall_report(results, metrics, 0);
  CHECK(j["columns"]["score"]["tau"].get<double>() == 1.0);
  CHECK(j["columns"]["score"]["neg_tau"].get<double>() == -1.0);
  CHECK(j["num_datasets"].get<int>() == 3);
}

TEST_CASE("rank report validates joins and sizes") {
  Table results = Table::from_csv_text("dataset,accuracy\na,0.1\nzz,0.5\n");
  Table metrics = Table::from_csv_text("dataset,score\na,0.1\nb,0.5\n");
  CHECK_THROWS_WITH(kendall_report(results, metrics, 0),
                    Catch::Matchers::ContainsSubstring("zz"));

  Table one = Table::from_csv_text("dataset,accuracy\na,0.1\n");
  Table mone = Table::from_csv_text("dataset,score\na,0.1\n");
  CHECK_THROWS_WITH(kendall_report(one, mone, 0),
                    Catch::Matchers::ContainsSubstring("at least 2"));

  Table dup = Table::from_csv_text("dataset,score\na,0.1\na,0.5\n");
  CHECK_THROWS_WITH(kendall_report(results, dup, 0),
                    Catch::Matchers::ContainsSubstring("duplicate"));

  // Node filter keeps only large datasets and needs the num_nodes column.
  Table r3 = Table::from_csv_text("dataset,accuracy\na,0.3\nb,0.5\nc,0.9\n");
  Table m3 = Table::from_csv_text(
      "dataset,num_nodes,score\na,100,0.9\nb,600,0.5\nc,700,0.1\n");
  nlohmann::json filtered = kendall_report(r3, m3, 500);
  CHECK(filtered["num_datasets"].get<int>() == 2);
  CHECK_FALSE(filtered["columns"].contains("num_nodes"));
  Table no_nodes = Table::from_csv_text("dataset,score\na,0.9\nb,0.5\nc,0.1\n");
  CHECK_THROWS_AS(kendall_report(r3, no_nodes, 500), ReportError);
}

TEST_CASE("cli: bundle generation is deterministic and feeds metrics") {
  TmpDir tmp("cli-synth");
  auto gen = run_cli("synth --kind patterned --nodes-per-class 20 --classes 3 --degree 6 "
                     "--num-splits 2 --seed 9 --out pb",
                     tmp.path);
  CAPTURE(gen.err);
  REQUIRE(gen.code == 0);
  auto gen2 = run_cli("synth --kind patterned --nodes-per-class 20 --classes 3 --degree 6 "
                      "--num-splits 2 --seed 9 --out pb2",
                      tmp.path);
  REQUIRE(gen2.code == 0);
  CHECK(slurp(tmp.path / "pb" / "edges.tsv") == slurp(tmp.path / "pb2" / "edges.tsv"));
  CHECK(slurp(tmp.path / "pb" / "features.csv") == slurp(tmp.path / "pb2" / "features.csv"));

  auto met = run_cli("metrics --bundle pb --out m.json --csv m.csv", tmp.path);
  CAPTURE(met.err);
  REQUIRE(met.code == 0);
  nlohmann::json j = nlohmann::json::parse(slurp(tmp.path / "m.json"));
  const DatasetBundle b = load_bundle(tmp.path / "pb");
  const GraphMetrics m = compute_metrics(b);
  CHECK(j["h_node"].get<double>() == m.h_node);
  CHECK(j["h_edge"].get<double>() == m.h_edge);
  CHECK(j["h_neighbor"].get<double>() == m.h_neighbor);
  CHECK(j["num_nodes"].get<int>() == 60);
  CHECK(j["per_class"].size() == 3);

  Table csv = Table::load_csv(tmp.path / "m.csv");
  REQUIRE(csv.rows.size() == 1);
  CHECK(csv.number_at(0, csv.require_column("h_neighbor")) == m.h_neighbor);
}

TEST_CASE("cli: training writes a checkpoint the gate report can read") {
  TmpDir tmp("cli-train");
  REQUIRE(run_cli("synth --kind patterned --nodes-per-class 20 --classes 3 --degree 6 "
                  "--num-splits 1 --seed 4 --out pb",
                  tmp.path)
              .code == 0);
  auto tr = run_cli("train --bundle pb --kernel gcn --mode cagnn --layers 2 --hidden 8 "
                    "--lr 0.05 --dropout 0 --max-epochs 15 --patience 15 --seed 2 "
                    "--save-model ck.json --out run.json",
                    tmp.path);
  CAPTURE(tr.err);
  REQUIRE(tr.code == 0);
  CHECK(tr.out.find("ms/epoch") != std::string::npos);
  nlohmann::json run = nlohmann::json::parse(slurp(tmp.path / "run.json"));
  CHECK(run["epochs_run"].get<int>() == 15);
  CHECK(run["val_curve"].size() == 15);
  CHECK(run["alpha_layer_means"].size() == 2);

  Model loaded = load_checkpoint(tmp.path / "ck.json");
  CHECK(loaded.config().layers == 2);

  auto ah = run_cli("alpha-hist --bundle pb --model ck.json --out a.csv --hist h.csv", tmp.path);
  CAPTURE(ah.err);
  REQUIRE(ah.code == 0);
  Table alphas = Table::load_csv(tmp.path / "a.csv");
  CHECK(alphas.rows.size() == 60 * 2);
  Table hist = Table::load_csv(tmp.path / "h.csv");
  CHECK(hist.rows.size() == 20 * 2);
  long total = 0;
  const int count_col = hist.require_column("count");
  for (size_t i = 0; i < hist.rows.size(); ++i)
    total += static_cast<long>(hist.number_at(i, count_col));
  CHECK(total == 60 * 2);
}

TEST_CASE("cli: zeroed gate parameters put every node at one half") {
  TmpDir tmp("cli-half");
  SynthConfig cfg;
  cfg.kind = SynthKind::patterned;
  cfg.nodes_per_class = 10;
  cfg.num_classes = 3;
  cfg.degree = 4;
  cfg.num_splits = 1;
  cfg.seed = 8;
  DatasetBundle b = make_synthetic(cfg);
  save_bundle(tmp.path / "pb", b);

  ModelConfig mc;
  mc.layers = 2;
  mc.hidden = 6;
  Model m(mc, b.features.cols, b.num_classes, 3);
  for (const auto& [name, t] : m.named_params())
    if (name.rfind("mix", 0) == 0) {
      ad::Tensor h = t;
      h.value().fill(0.0);
    }
  save_checkpoint(tmp.path / "ck.json", m);

  auto ah = run_cli("alpha-hist --bundle pb --model ck.json --out a.csv --hist h.csv", tmp.path);
  CAPTURE(ah.err);
  REQUIRE(ah.code == 0);
  Table alphas = Table::load_csv(tmp.path / "a.csv");
  const int acol = alphas.require_column("alpha");
  REQUIRE(alphas.rows.size() == 30 * 2);
  for (size_t i = 0; i < alphas.rows.size(); ++i) CHECK(alphas.rows[i][acol] == "0.5");
  Table hist = Table::load_csv(tmp.path / "h.csv");
  const int ccol = hist.require_column("count");
  const int locol = hist.require_column("bin_lo");
  for (size_t i = 0; i < hist.rows.size(); ++i) {
    const bool half_bin = hist.rows[i][locol] == "0.5";
    CHECK(hist.number_at(i, ccol) == (half_bin ? 30.0 : 0.0));
  }
}

TEST_CASE("cli: grid report JSON is self-consistent") {
  TmpDir tmp("cli-grid");
  REQUIRE(run_cli("synth --kind patterned --nodes-per-class 20 --classes 3 --degree 6 "
                  "--num-splits 2 --seed 6 --out pb",
                  tmp.path)
              .code == 0);
  auto gr = run_cli("grid --bundle pb --kernel gcn --mode cagnn --hidden 8 "
                    "--lrs 0.01,0.05 --weight-decays 5e-4 --dropouts 0 "
                    "--max-epochs 12 --patience 12 --seed 2 --jobs 2 --out rep.json",
                    tmp.path);
  CAPTURE(gr.err);
  REQUIRE(gr.code == 0);
  nlohmann::json j = nlohmann::json::parse(slurp(tmp.path / "rep.json"));
  REQUIRE(j["splits"].size() == 2);
  double mean = 0;
  for (const auto& s : j["splits"]) mean += s["test_acc"].get<double>();
  mean /= 2;
  CHECK(j["mean_test_acc"].get<double>() == Catch::Approx(mean).margin(1e-12));
  CHECK(j["model"]["kernel"] == "gcn");
  CHECK(j["train"]["lrs"].size() == 2);
}

TEST_CASE("cli: noise sweep at ratio zero reproduces the clean grid") {
  TmpDir tmp("cli-noise");
  REQUIRE(run_cli("synth --kind patterned --nodes-per-class 15 --classes 3 --degree 6 "
                  "--num-splits 2 --seed 3 --out pb",
                  tmp.path)
              .code == 0);
  const std::string flags = "--bundle pb --kernel gcn --mode vanilla --hidden 8 "
                            "--lrs 0.05 --weight-decays 5e-4 --dropouts 0 "
                            "--max-epochs 10 --patience 10 --seed 5";
  auto gr = run_cli("grid " + flags + " --out rep.json", tmp.path);
  REQUIRE(gr.code == 0);
  auto ne = run_cli("noisy-edges " + flags + " --ratios 0,0.5 --noise-seed 11 --out n.csv",
                    tmp.path);
  CAPTURE(ne.err);
  REQUIRE(ne.code == 0);
  nlohmann::json j = nlohmann::json::parse(slurp(tmp.path / "rep.json"));
  Table rows = Table::load_csv(tmp.path / "n.csv");
  REQUIRE(rows.rows.size() == 2);
  CHECK(rows.number_at(0, rows.require_column("mean")) == j["mean_test_acc"].get<double>());
}

TEST_CASE("cli: depth sweep emits a parseable table") {
  TmpDir tmp("cli-depth");
  REQUIRE(run_cli("synth --kind patterned --nodes-per-class 15 --classes 3 --degree 6 "
                  "--num-splits 1 --seed 3 --out pb",
                  tmp.path)
              .code == 0);
  auto sw = run_cli("sweep-layers --bundle pb --hidden 8 --lrs 0.05 --weight-decays 5e-4 "
                    "--dropouts 0 --max-epochs 8 --patience 8 --depths 1,2 --out d.csv",
                    tmp.path);
  CAPTURE(sw.err);
  REQUIRE(sw.code == 0);
  Table rows = Table::load_csv(tmp.path / "d.csv");
  REQUIRE(rows.rows.size() == 2);
  CHECK(rows.number_at(0, rows.require_column("depth")) == 1.0);
  CHECK(rows.number_at(1, 0) == 2.0);
}

TEST_CASE("cli: spectral check reports a tiny deviation and exits cleanly") {
  TmpDir tmp("cli-spectral");
  auto sp = run_cli("spectral-check --nodes 8 --order 4 --seed 7", tmp.path);
  REQUIRE(sp.code == 0);
  CHECK(sp.out.find("max deviation") != std::string::npos);
}

TEST_CASE("cli: rank correlation command round trips through JSON") {
  TmpDir tmp("cli-kendall");
  atomic_write_text(tmp.path / "r.csv", "dataset,accuracy\na,0.2\nb,0.5\nc,0.8\n");
  atomic_write_text(tmp.path / "m.csv", "dataset,h_neighbor\na,0.9\nb,0.6\nc,0.3\n");
  auto ke = run_cli("kendall --results r.csv --metrics m.csv --out k.json", tmp.path);
  CAPTURE(ke.err);
  REQUIRE(ke.code == 0);
  nlohmann::json j = nlohmann::json::parse(slurp(tmp.path / "k.json"));
  CHECK(j["columns"]["h_neighbor"]["tau"].get<double>() == -1.0);
  CHECK(j["columns"]["h_neighbor"]["neg_tau"].get<double>() == 1.0);
}

TEST_CASE("cli: validation failures exit 1 with messages on stderr") {
  TmpDir tmp("cli-errors");
  auto missing = run_cli("metrics --bundle does-not-exist", tmp.path);
  CHECK(missing.code == 1);
  CHECK(missing.err.find("does-not-exist") != std::string::npos);

  REQUIRE(run_cli("synth --kind patterned --nodes-per-class 10 --classes 3 --degree 4 "
                  "--num-splits 1 --seed 2 --out pb",
                  tmp.path)
              .code == 0);
  auto badkernel = run_cli("train --bundle pb --kernel quux", tmp.path);
  CHECK(badkernel.code == 1);
  CHECK(badkernel.err.find("unknown kernel") != std::string::npos);

  auto badflag = run_cli("metrics --bundle pb --frobnicate", tmp.path);
  CHECK(badflag.code == 1);
  CHECK_FALSE(badflag.err.empty());

  auto nosub = run_cli("", tmp.path);
  CHECK(nosub.code == 1);

  auto help = run_cli("--help", tmp.path);
  CHECK(help.code == 0);
  CHECK(help.out.find("synth") != std::string::npos);

  // Corrupt one bundle file; the loader must name file and line.
  atomic_write_text(tmp.path / "pb" / "edges.tsv", "0\t1\nbroken-line\n");
  auto corrupt = run_cli("metrics --bundle pb", tmp.path);
  CHECK(corrupt.code == 1);
  CHECK(corrupt.err.find("edges.tsv:2") != std::string::npos);
}

TEST_CASE("cli: training divergence exits 2 and names the configuration") {
  TmpDir tmp("cli-diverge");
  REQUIRE(run_cli("synth --kind patterned --nodes-per-class 10 --classes 3 --degree 4 "
                  "--num-splits 1 --seed 2 --out pb",
                  tmp.path)
              .code == 0);
  auto dv = run_cli("train --bundle pb --mode vanilla --lr 1e200 --dropout 0 "
                    "--max-epochs 5 --patience 5",
                    tmp.path);
  CHECK(dv.code == 2);
  CHECK(dv.err.find("diverged") != std::string::npos);
  CHECK(dv.err.find("1e+200") != std::string::npos);
}
