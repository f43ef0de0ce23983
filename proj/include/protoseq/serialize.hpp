#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "protoseq/model.hpp"

namespace protoseq {

inline nlohmann::json model_config_to_json(const ModelConfig& cfg) {
  return nlohmann::json{{"variant", to_string(cfg.variant)}, {"embed_dim", cfg.embed_dim},
                        {"cnn_filters", cfg.cnn_filters},   {"cnn_widths", cfg.cnn_widths},
                        {"lstm_hidden", cfg.lstm_hidden},   {"mlp_hidden", cfg.mlp_hidden},
                        {"proto_dim", cfg.proto_dim},       {"dropout", cfg.dropout}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig cfg;
  cfg.variant = variant_from_string(j.at("variant").get<std::string>());
  cfg.embed_dim = j.value("embed_dim", cfg.embed_dim);
  cfg.cnn_filters = j.value("cnn_filters", cfg.cnn_filters);
  cfg.cnn_widths = j.value("cnn_widths", cfg.cnn_widths);
  cfg.lstm_hidden = j.value("lstm_hidden", cfg.lstm_hidden);
  cfg.mlp_hidden = j.value("mlp_hidden", cfg.mlp_hidden);
  cfg.proto_dim = j.value("proto_dim", cfg.proto_dim);
  cfg.dropout = j.value("dropout", cfg.dropout);
  return cfg;
}

namespace detail {

inline void write_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
inline void write_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }
inline std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  return v;
}
inline std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 8);
  return v;
}

}  // namespace detail

inline constexpr char kModelMagic[4] = {'P', 'S', 'Q', 'M'};
inline constexpr std::uint32_t kModelVersion = 1;

// Versioned binary container: a json config snapshot followed by named
// parameter tensors. Host byte order; these files move between runs, not
// between architectures.
inline void save_model(const std::string& path, Model& model, const std::vector<std::string>& label_set,
                       const nlohmann::json& extra = nlohmann::json::object()) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write model file: " + path);
  nlohmann::json config{{"model", model_config_to_json(model.config())},
                        {"num_labels", model.num_labels()},
                        {"label_set", label_set},
                        {"extra", extra}};
  const std::string config_str = config.dump();

  out.write(kModelMagic, 4);
  detail::write_u32(out, kModelVersion);
  detail::write_u64(out, config_str.size());
  out.write(config_str.data(), static_cast<std::streamsize>(config_str.size()));

  std::vector<Parameter*> params = model.parameters();
  detail::write_u32(out, static_cast<std::uint32_t>(params.size()));
  for (Parameter* p : params) {
    detail::write_u32(out, static_cast<std::uint32_t>(p->name.size()));
    out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    detail::write_u32(out, static_cast<std::uint32_t>(p->value.shape.size()));
    for (std::size_t d : p->value.shape) detail::write_u64(out, d);
    out.write(reinterpret_cast<const char*>(p->value.data.data()),
              static_cast<std::streamsize>(p->value.data.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("failed while writing model file: " + path);
}

struct ModelFile {
  nlohmann::json config;
  ModelConfig model_config;
  int num_labels = 0;
  std::vector<std::string> label_set;
  std::map<std::string, Tensor> tensors;
};

inline ModelFile read_model_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model file: " + path);
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != std::string(kModelMagic, 4))
    throw std::runtime_error(path + ": not a model file (bad magic)");
  const std::uint32_t version = detail::read_u32(in);
  if (version != kModelVersion)
    throw std::runtime_error(path + ": unsupported model file version " + std::to_string(version));
  const std::uint64_t config_len = detail::read_u64(in);
  std::string config_str(config_len, '\0');
  in.read(config_str.data(), static_cast<std::streamsize>(config_len));
  ModelFile file;
  try {
    file.config = nlohmann::json::parse(config_str);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path + ": corrupt config block: " + e.what());
  }
  file.model_config = model_config_from_json(file.config.at("model"));
  file.num_labels = file.config.at("num_labels").get<int>();
  file.label_set = file.config.at("label_set").get<std::vector<std::string>>();

  const std::uint32_t n_params = detail::read_u32(in);
  for (std::uint32_t i = 0; i < n_params; ++i) {
    const std::uint32_t name_len = detail::read_u32(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const std::uint32_t ndim = detail::read_u32(in);
    Shape shape(ndim);
    for (std::uint32_t d = 0; d < ndim; ++d) shape[d] = detail::read_u64(in);
    std::vector<double> data(shape_numel(shape));
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (!in) throw std::runtime_error(path + ": truncated model file");
    file.tensors.emplace(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  return file;
}

// Builds the model the file describes and loads its weights, refusing on any
// name or shape mismatch.
inline Model model_from_file(const ModelFile& file) {
  Model model(file.model_config, file.num_labels, /*seed=*/0);
  std::vector<Parameter*> params = model.parameters();
  if (params.size() != file.tensors.size())
    throw std::runtime_error("model file holds " + std::to_string(file.tensors.size()) + " tensors but the \"" +
                             to_string(file.model_config.variant) + "\" variant has " + std::to_string(params.size()));
  for (Parameter* p : params) {
    auto it = file.tensors.find(p->name);
    if (it == file.tensors.end()) throw std::runtime_error("model file is missing tensor \"" + p->name + "\"");
    if (it->second.shape != p->value.shape)
      throw std::runtime_error("model file tensor \"" + p->name + "\" has shape " + shape_str(it->second.shape) +
                               ", expected " + shape_str(p->value.shape));
    p->value = it->second;
  }
  return model;
}

// ---- run manifest ---------------------------------------------------------------

inline std::uint64_t fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot checksum missing file: " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[4096];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

// Config snapshot + seed + input checksums: enough to reproduce the run.
inline void write_manifest(const std::string& path, const nlohmann::json& config_snapshot, std::uint64_t seed,
                           const std::vector<std::pair<std::string, std::string>>& input_files) {
  nlohmann::json j;
  j["config"] = config_snapshot;
  j["seed"] = seed;
  nlohmann::json inputs = nlohmann::json::object();
  for (const auto& [name, file_path] : input_files)
    inputs[name] = {{"path", file_path}, {"fnv1a64", fnv1a64_file(file_path)}};
  j["inputs"] = inputs;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace protoseq
