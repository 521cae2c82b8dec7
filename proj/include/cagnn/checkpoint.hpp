#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "cagnn/model.hpp"

namespace cagnn {

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void save_checkpoint(const std::filesystem::path& path, const Model& model) {
  using nlohmann::json;
  const ModelConfig& c = model.config();
  json j;
  j["format_version"] = 1;
  j["config"] = {{"kernel", to_string(c.kernel)},   {"mode", to_string(c.mode)},
                 {"layers", c.layers},              {"hidden", c.hidden},
                 {"mixer", to_string(c.mixer)},     {"norm", to_string(c.norm)},
                 {"dropout", c.dropout},            {"leaky_slope", c.leaky_slope}};
  j["in_dim"] = model.in_dim();
  j["num_classes"] = model.num_classes();
  json params = json::array();
  for (const auto& [name, t] : model.named_params())
    params.push_back(json{{"name", name},
                          {"rows", t.value().rows},
                          {"cols", t.value().cols},
                          {"data", t.value().data}});
  j["params"] = std::move(params);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError(path.string() + ": cannot open for writing");
  out << j.dump() << "\n";
}

inline Model load_checkpoint(const std::filesystem::path& path) {
  using nlohmann::json;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(path.string() + ": cannot open");
  json j;
  try {
    std::ostringstream ss;
    ss << in.rdbuf();
    j = json::parse(ss.str());
  } catch (const json::exception& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
  try {
    if (j.at("format_version").get<int>() != 1)
      throw CheckpointError(path.string() + ": unsupported format_version");
    const auto& jc = j.at("config");
    ModelConfig c;
    c.kernel = kernel_from_string(jc.at("kernel").get<std::string>());
    c.mode = mode_from_string(jc.at("mode").get<std::string>());
    c.layers = jc.at("layers").get<int>();
    c.hidden = jc.at("hidden").get<int>();
    c.mixer = mixer_from_string(jc.at("mixer").get<std::string>());
    c.norm = norm_from_string(jc.at("norm").get<std::string>());
    c.dropout = jc.at("dropout").get<double>();
    c.leaky_slope = jc.at("leaky_slope").get<double>();

    Model model(c, j.at("in_dim").get<int>(), j.at("num_classes").get<int>(), /*seed=*/0);
    const auto& jp = j.at("params");
    const auto& named = model.named_params();
    if (jp.size() != named.size())
      throw CheckpointError(path.string() + ": parameter count mismatch (file " +
                            std::to_string(jp.size()) + ", model " +
                            std::to_string(named.size()) + ")");
    for (size_t i = 0; i < named.size(); ++i) {
      const auto& entry = jp[i];
      if (entry.at("name").get<std::string>() != named[i].first)
        throw CheckpointError(path.string() + ": parameter order mismatch at '" +
                              named[i].first + "'");
      Matrix m(entry.at("rows").get<int>(), entry.at("cols").get<int>());
      const auto& data = entry.at("data");
      if (data.size() != m.data.size())
        throw CheckpointError(path.string() + ": bad tensor payload for '" + named[i].first +
                              "'");
      for (size_t k = 0; k < m.data.size(); ++k) m.data[k] = data[k].get<double>();
      if (!m.same_shape(named[i].second.value()))
        throw CheckpointError(path.string() + ": shape mismatch for '" + named[i].first + "'");
      ad::Tensor handle = named[i].second;  // aliases the stored node
      handle.value() = std::move(m);
    }
    return model;
  } catch (const json::exception& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
}

}  // namespace cagnn
