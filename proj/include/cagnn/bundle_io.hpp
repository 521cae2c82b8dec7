#pragma once

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cagnn/graph.hpp"

namespace cagnn {

// Raised for any malformed bundle file; message carries file name and,
// where it makes sense, the offending line number.
struct BundleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace io_detail {

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw BundleError(p.string() + ": cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline BundleError line_error(const std::filesystem::path& p, size_t line, const std::string& what) {
  return BundleError(p.string() + ":" + std::to_string(line) + ": " + what);
}

inline long parse_long(const char* s, char** end) {
  errno = 0;
  long v = std::strtol(s, end, 10);
  if (*end == s || errno == ERANGE) *end = const_cast<char*>(s);
  return v;
}

}  // namespace io_detail

// Loads a dataset bundle directory:
//   meta.json    {"name","num_nodes","num_classes","feature_dim"}
//   edges.tsv    one "u<TAB>v" pair per line, 0-based node ids
//   features.csv one comma-separated row of doubles per node
//   labels.txt   one integer per line
//   splits.json  [{"train":[..],"val":[..],"test":[..]}, ...]
// The edge list is symmetrized and deduplicated; self loops are dropped.
inline DatasetBundle load_bundle(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  using nlohmann::json;
  if (!fs::is_directory(dir)) throw BundleError(dir.string() + ": not a directory");

  DatasetBundle b;
  int meta_nodes = 0, feature_dim = 0;
  {
    const fs::path p = dir / "meta.json";
    json j;
    try {
      j = json::parse(io_detail::read_text(p));
    } catch (const json::exception& e) {
      throw BundleError(p.string() + ": " + e.what());
    }
    try {
      b.name = j.at("name").get<std::string>();
      meta_nodes = j.at("num_nodes").get<int>();
      b.num_classes = j.at("num_classes").get<int>();
      feature_dim = j.at("feature_dim").get<int>();
    } catch (const json::exception& e) {
      throw BundleError(p.string() + ": " + e.what());
    }
    if (meta_nodes <= 0) throw BundleError(p.string() + ": num_nodes must be positive");
    if (feature_dim <= 0) throw BundleError(p.string() + ": feature_dim must be positive");
  }

  {
    const fs::path p = dir / "edges.tsv";
    const std::string text = io_detail::read_text(p);
    std::vector<std::pair<int, int>> edges;
    size_t line_no = 0, pos = 0;
    while (pos < text.size()) {
      size_t eol = text.find('\n', pos);
      if (eol == std::string::npos) eol = text.size();
      ++line_no;
      std::string line = text.substr(pos, eol - pos);
      pos = eol + 1;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      char* end = nullptr;
      long u = io_detail::parse_long(line.c_str(), &end);
      if (end == line.c_str() || *end != '\t')
        throw io_detail::line_error(p, line_no, "expected 'u<TAB>v'");
      const char* second = end + 1;
      long v = io_detail::parse_long(second, &end);
      if (end == second || (*end != '\0'))
        throw io_detail::line_error(p, line_no, "expected 'u<TAB>v'");
      if (u < 0 || u >= meta_nodes || v < 0 || v >= meta_nodes)
        throw io_detail::line_error(p, line_no, "edge endpoint out of range [0," +
                                                    std::to_string(meta_nodes) + ")");
      edges.emplace_back(static_cast<int>(u), static_cast<int>(v));
    }
    b.graph = Graph::from_edges(meta_nodes, std::move(edges));
  }

  {
    const fs::path p = dir / "features.csv";
    const std::string text = io_detail::read_text(p);
    b.features = Matrix(meta_nodes, feature_dim);
    size_t line_no = 0, pos = 0;
    int row = 0;
    while (pos < text.size()) {
      size_t eol = text.find('\n', pos);
      if (eol == std::string::npos) eol = text.size();
      ++line_no;
      std::string line = text.substr(pos, eol - pos);
      pos = eol + 1;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      if (row >= meta_nodes) throw io_detail::line_error(p, line_no, "more rows than num_nodes");
      const char* cur = line.c_str();
      for (int c = 0; c < feature_dim; ++c) {
        char* end = nullptr;
        errno = 0;
        double v = std::strtod(cur, &end);
        if (end == cur || errno == ERANGE)
          throw io_detail::line_error(p, line_no, "bad number in column " + std::to_string(c));
        b.features(row, c) = v;
        cur = end;
        if (c + 1 < feature_dim) {
          if (*cur != ',')
            throw io_detail::line_error(p, line_no, "expected " + std::to_string(feature_dim) +
                                                        " comma-separated values");
          ++cur;
        }
      }
      if (*cur != '\0') throw io_detail::line_error(p, line_no, "trailing data after last column");
      ++row;
    }
    if (row != meta_nodes)
      throw BundleError(p.string() + ": " + std::to_string(row) + " rows, expected " +
                        std::to_string(meta_nodes));
  }

  {
    const fs::path p = dir / "labels.txt";
    const std::string text = io_detail::read_text(p);
    size_t line_no = 0, pos = 0;
    while (pos < text.size()) {
      size_t eol = text.find('\n', pos);
      if (eol == std::string::npos) eol = text.size();
      ++line_no;
      std::string line = text.substr(pos, eol - pos);
      pos = eol + 1;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      char* end = nullptr;
      long v = io_detail::parse_long(line.c_str(), &end);
      if (end == line.c_str() || *end != '\0')
        throw io_detail::line_error(p, line_no, "expected one integer label");
      b.labels.push_back(static_cast<int>(v));
    }
  }

  {
    const fs::path p = dir / "splits.json";
    using nlohmann::json;
    json j;
    try {
      j = json::parse(io_detail::read_text(p));
    } catch (const json::exception& e) {
      throw BundleError(p.string() + ": " + e.what());
    }
    if (!j.is_array() || j.empty()) throw BundleError(p.string() + ": expected a non-empty array");
    try {
      for (const auto& js : j) {
        Split s;
        s.train = js.at("train").get<std::vector<int>>();
        s.val = js.at("val").get<std::vector<int>>();
        s.test = js.at("test").get<std::vector<int>>();
        b.splits.push_back(std::move(s));
      }
    } catch (const json::exception& e) {
      throw BundleError(p.string() + ": " + e.what());
    }
  }

  try {
    b.validate();
  } catch (const std::exception& e) {
    throw BundleError(dir.string() + ": " + e.what());
  }
  return b;
}

// Writes a bundle in the exact format load_bundle reads.
inline void save_bundle(const std::filesystem::path& dir, const DatasetBundle& b) {
  namespace fs = std::filesystem;
  using nlohmann::json;
  fs::create_directories(dir);

  {
    json j{{"name", b.name},
           {"num_nodes", b.graph.num_nodes},
           {"num_classes", b.num_classes},
           {"feature_dim", b.features.cols}};
    std::ofstream out(dir / "meta.json");
    out << j.dump(2) << "\n";
  }
  {
    std::ofstream out(dir / "edges.tsv");
    for (const auto& [u, v] : b.graph.edge_list()) out << u << '\t' << v << '\n';
  }
  {
    std::ofstream out(dir / "features.csv");
    char buf[32];
    for (int i = 0; i < b.features.rows; ++i) {
      for (int c = 0; c < b.features.cols; ++c) {
        std::snprintf(buf, sizeof buf, "%.17g", b.features(i, c));
        out << (c ? "," : "") << buf;
      }
      out << '\n';
    }
  }
  {
    std::ofstream out(dir / "labels.txt");
    for (int v : b.labels) out << v << '\n';
  }
  {
    json j = json::array();
    for (const auto& s : b.splits)
      j.push_back(json{{"train", s.train}, {"val", s.val}, {"test", s.test}});
    std::ofstream out(dir / "splits.json");
    out << j.dump() << "\n";
  }
}

}  // namespace cagnn
