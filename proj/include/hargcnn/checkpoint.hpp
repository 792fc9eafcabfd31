#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hargcnn/models.hpp"

namespace hargcnn {

/// Serializable model state: the spec, the init seed, and every parameter as
/// {name, shape, values}. Values go through nlohmann::json's shortest
/// round-trip double formatting, so save/load is bit-exact.
struct Checkpoint {
  ModelSpec spec;
  std::uint64_t seed = 0;
  std::vector<Parameter> params;
  /// Free-form context (standardization stats, data pipeline, manifest path).
  nlohmann::json metadata = nlohmann::json::object();

  static Checkpoint capture(const Model& model, std::uint64_t seed, nlohmann::json metadata = nlohmann::json::object());
  Model restore() const;

  nlohmann::json to_json() const;
  static Checkpoint from_json(const nlohmann::json& doc);

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);

  /// Bitwise comparison of spec, seed, and parameter values.
  bool same_weights(const Checkpoint& other) const;
};

nlohmann::json spec_to_json(const ModelSpec& spec);
ModelSpec spec_from_json(const nlohmann::json& doc);

/// Write `doc` with a trailing newline; raises ErrorKind::io on failure.
void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc);
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace hargcnn
