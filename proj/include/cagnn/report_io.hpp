#pragma once

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cagnn/kendall.hpp"
#include "cagnn/model.hpp"
#include "cagnn/trainer.hpp"

namespace cagnn {

// Malformed or inconsistent report inputs (bad CSV, missing columns, key
// mismatches). Failures while writing outputs raise WriteError instead.
struct ReportError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct WriteError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw WriteError("format_double: conversion failed");
  return std::string(buf, end);
}

inline void atomic_write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.empty()) throw WriteError("atomic write: empty path");
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw WriteError(tmp.string() + ": cannot open for writing");
    out << text;
    out.flush();
    if (!out) throw WriteError(tmp.string() + ": write failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw WriteError(path.string() + ": rename failed: " + ec.message());
}

// Minimal CSV: comma separated, newline terminated rows, no quoting. Cells
// containing separators are rejected at write time so every emitted file
// parses back bit-identically.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    for (size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return static_cast<int>(i);
    return -1;
  }

  int require_column(const std::string& name) const {
    const int c = column(name);
    if (c < 0) throw ReportError("table: missing required column '" + name + "'");
    return c;
  }

  double number_at(size_t row, int col) const {
    const std::string& cell = rows[row][col];
    const char* s = cell.c_str();
    char* end = nullptr;
    const double v = std::strtod(s, &end);
    if (end == s || *end != '\0')
      throw ReportError("table: cell '" + cell + "' in column '" + columns[col] +
                        "' is not a number");
    return v;
  }

  std::string to_csv() const {
    auto emit = [](std::string& out, const std::string& cell) {
      if (cell.find_first_of(",\n\r") != std::string::npos)
        throw ReportError("csv: cell contains a separator: '" + cell + "'");
      out += cell;
    };
    std::string out;
    for (size_t i = 0; i < columns.size(); ++i) {
      if (i) out += ',';
      emit(out, columns[i]);
    }
    out += '\n';
    for (const auto& row : rows) {
      if (row.size() != columns.size()) throw ReportError("csv: row arity mismatch");
      for (size_t i = 0; i < row.size(); ++i) {
        if (i) out += ',';
        emit(out, row[i]);
      }
      out += '\n';
    }
    return out;
  }

  static Table from_csv_text(const std::string& text, const std::string& origin = "csv") {
    Table t;
    size_t pos = 0, line_no = 0;
    while (pos < text.size()) {
      size_t nl = text.find('\n', pos);
      if (nl == std::string::npos) nl = text.size();
      std::string line = text.substr(pos, nl - pos);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      pos = nl + 1;
      ++line_no;
      if (line.empty()) continue;
      std::vector<std::string> cells;
      size_t cell_start = 0;
      for (;;) {
        const size_t comma = line.find(',', cell_start);
        if (comma == std::string::npos) {
          cells.push_back(line.substr(cell_start));
          break;
        }
        cells.push_back(line.substr(cell_start, comma - cell_start));
        cell_start = comma + 1;
      }
      if (t.columns.empty()) {
        t.columns = std::move(cells);
      } else {
        if (cells.size() != t.columns.size())
          throw ReportError(origin + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(t.columns.size()) + " cells, got " +
                            std::to_string(cells.size()));
        t.rows.push_back(std::move(cells));
      }
    }
    if (t.columns.empty()) throw ReportError(origin + ": empty table");
    return t;
  }

  static Table load_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ReportError(path.string() + ": cannot open");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_csv_text(text, path.string());
  }

  void save_csv(const std::filesystem::path& path) const { atomic_write_text(path, to_csv()); }
};

inline Table sweep_table(const std::vector<SweepRow>& rows, const std::string& x_name) {
  Table t;
  t.columns = {x_name, "mean", "std"};
  for (const auto& r : rows)
    t.rows.push_back({format_double(r.x), format_double(r.mean), format_double(r.stddev)});
  return t;
}

inline nlohmann::json model_config_json(const ModelConfig& mc) {
  return {{"kernel", to_string(mc.kernel)}, {"mode", to_string(mc.mode)},
          {"layers", mc.layers},            {"hidden", mc.hidden},
          {"mixer", to_string(mc.mixer)},   {"norm", to_string(mc.norm)},
          {"dropout", mc.dropout},          {"leaky_slope", mc.leaky_slope}};
}

inline nlohmann::json train_config_json(const TrainConfig& tc) {
  return {{"lrs", tc.lrs},
          {"weight_decays", tc.weight_decays},
          {"dropouts", tc.dropouts},
          {"max_epochs", tc.max_epochs},
          {"patience", tc.patience},
          {"seed", tc.seed}};
}

inline nlohmann::json train_report_json(const TrainReport& rep, const ModelConfig& mc,
                                        const TrainConfig& tc, const std::string& dataset) {
  nlohmann::json splits = nlohmann::json::array();
  for (const auto& o : rep.splits) {
    splits.push_back({{"split", o.split},
                      {"lr", o.best.hyper.lr},
                      {"weight_decay", o.best.hyper.weight_decay},
                      {"dropout", o.best.hyper.dropout},
                      {"val_acc", o.best.best_val_acc},
                      {"test_acc", o.best.test_acc},
                      {"epochs_run", o.best.epochs_run},
                      {"best_epoch", o.best.best_epoch},
                      {"ms_per_epoch", o.best.ms_per_epoch},
                      {"alpha_layer_means", o.best.alpha_layer_means},
                      {"any_diverged", o.any_diverged}});
  }
  return {{"dataset", dataset},
          {"model", model_config_json(mc)},
          {"train", train_config_json(tc)},
          {"splits", std::move(splits)},
          {"mean_test_acc", rep.mean_test_acc},
          {"std_test_acc", rep.std_test_acc},
          {"mean_ms_per_epoch", rep.mean_ms_per_epoch},
          {"alpha_layer_means", rep.alpha_layer_means}};
}

// Joins a results table (dataset, accuracy) against a metrics table on the
// dataset column and reports rank correlation of every metric column, both
// as-is and negated, against accuracy. min_nodes > 0 keeps only datasets
// whose metrics row has num_nodes > min_nodes.
inline nlohmann::json kendall_report(const Table& results, const Table& metrics, int min_nodes) {
  const int r_key = results.require_column("dataset");
  const int r_acc = results.require_column("accuracy");
  const int m_key = metrics.require_column("dataset");
  const int m_nodes =
      min_nodes > 0 ? metrics.require_column("num_nodes") : metrics.column("num_nodes");

  std::map<std::string, size_t> metric_row;
  for (size_t i = 0; i < metrics.rows.size(); ++i) {
    const std::string& key = metrics.rows[i][m_key];
    if (!metric_row.emplace(key, i).second)
      throw ReportError("kendall: duplicate dataset '" + key + "' in metrics table");
  }

  std::vector<double> acc;
  std::vector<size_t> joined;
  for (size_t i = 0; i < results.rows.size(); ++i) {
    const std::string& key = results.rows[i][r_key];
    auto it = metric_row.find(key);
    if (it == metric_row.end())
      throw ReportError("kendall: dataset '" + key + "' has no metrics row");
    if (min_nodes > 0 && metrics.number_at(it->second, m_nodes) <= min_nodes) continue;
    acc.push_back(results.number_at(i, r_acc));
    joined.push_back(it->second);
  }
  if (acc.size() < 2)
    throw ReportError("kendall: need at least 2 datasets after filtering, have " +
                      std::to_string(acc.size()));

  nlohmann::json cols = nlohmann::json::object();
  for (size_t c = 0; c < metrics.columns.size(); ++c) {
    if (static_cast<int>(c) == m_key || static_cast<int>(c) == m_nodes) continue;
    std::vector<double> xs, neg;
    xs.reserve(joined.size());
    for (size_t row : joined) xs.push_back(metrics.number_at(row, static_cast<int>(c)));
    for (double v : xs) neg.push_back(-v);
    const KendallResult pos = kendall_tau(xs, acc);
    const KendallResult flip = kendall_tau(neg, acc);
    cols[metrics.columns[c]] = {
        {"tau", pos.tau}, {"p", pos.p_value}, {"neg_tau", flip.tau}, {"neg_p", flip.p_value}};
  }
  return {{"accuracy_column", "accuracy"},
          {"num_datasets", acc.size()},
          {"min_nodes", min_nodes},
          {"columns", std::move(cols)}};
}

inline void save_json(const std::filesystem::path& path, const nlohmann::json& j) {
  atomic_write_text(path, j.dump(2) + "\n");
}

}  // namespace cagnn
