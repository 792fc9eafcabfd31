#include "hargcnn/checkpoint.hpp"

#include <fstream>

#include <fmt/format.h>

#include "hargcnn/error.hpp"

namespace hargcnn {

using nlohmann::json;

namespace {
constexpr const char* kFormat = "hargcnn-checkpoint/1";
}

json spec_to_json(const ModelSpec& s) {
  return {{"kind", to_string(s.kind)},       {"features", s.features},
          {"classes", s.classes},            {"multilabel", s.multilabel},
          {"hidden", s.hidden},              {"kernel", s.kernel},
          {"adjacency", to_string(s.adjacency)}, {"lstm_hidden", s.lstm_hidden}};
}

ModelSpec spec_from_json(const json& doc) {
  try {
    ModelSpec s;
    s.kind = model_kind_from_string(doc.at("kind").get<std::string>());
    s.features = doc.at("features").get<int>();
    s.classes = doc.at("classes").get<int>();
    s.multilabel = doc.at("multilabel").get<bool>();
    s.hidden = doc.at("hidden").get<int>();
    s.kernel = doc.at("kernel").get<int>();
    s.adjacency = adjacency_from_string(doc.at("adjacency").get<std::string>());
    s.lstm_hidden = doc.at("lstm_hidden").get<int>();
    s.validate();
    return s;
  } catch (const json::exception& e) {
    fail(ErrorKind::format, fmt::format("malformed model spec: {}", e.what()));
  }
}

Checkpoint Checkpoint::capture(const Model& model, std::uint64_t seed, json metadata) {
  Checkpoint ck;
  ck.spec = model.spec();
  ck.seed = seed;
  for (const auto& p : model.parameters()) ck.params.emplace_back(p.name, p.value);
  ck.metadata = std::move(metadata);
  return ck;
}

Model Checkpoint::restore() const { return Model::from_parameters(spec, params); }

json Checkpoint::to_json() const {
  json tensors = json::array();
  for (const auto& p : params) {
    tensors.push_back({{"name", p.name},
                       {"shape", p.value.shape()},
                       {"values", std::vector<double>(p.value.data().begin(), p.value.data().end())}});
  }
  return {{"format", kFormat}, {"spec", spec_to_json(spec)}, {"seed", seed}, {"params", tensors}, {"metadata", metadata}};
}

Checkpoint Checkpoint::from_json(const json& doc) {
  try {
    if (doc.at("format").get<std::string>() != kFormat) {
      fail(ErrorKind::format, fmt::format("unsupported checkpoint format '{}'", doc.at("format").get<std::string>()));
    }
    Checkpoint ck;
    ck.spec = spec_from_json(doc.at("spec"));
    ck.seed = doc.at("seed").get<std::uint64_t>();
    for (const auto& t : doc.at("params")) {
      ck.params.emplace_back(t.at("name").get<std::string>(),
                             Tensor(t.at("shape").get<Shape>(), t.at("values").get<std::vector<double>>()));
    }
    if (doc.contains("metadata")) ck.metadata = doc.at("metadata");
    (void)ck.restore();  // validates names and shapes against the spec
    return ck;
  } catch (const json::exception& e) {
    fail(ErrorKind::format, fmt::format("malformed checkpoint: {}", e.what()));
  }
}

void Checkpoint::save(const std::filesystem::path& path) const { write_json_file(path, to_json()); }

Checkpoint Checkpoint::load(const std::filesystem::path& path) { return from_json(read_json_file(path)); }

bool Checkpoint::same_weights(const Checkpoint& other) const {
  if (!(spec == other.spec) || seed != other.seed || params.size() != other.params.size()) return false;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].name != other.params[i].name || !(params[i].value == other.params[i].value)) return false;
  }
  return true;
}

void write_json_file(const std::filesystem::path& path, const json& doc) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) fail(ErrorKind::io, fmt::format("cannot create directory {}: {}", path.parent_path().string(), ec.message()));
  }
  std::ofstream out(path);
  if (!out) fail(ErrorKind::io, fmt::format("cannot open {} for writing", path.string()));
  out << doc.dump(2) << '\n';
  if (!out) fail(ErrorKind::io, fmt::format("write to {} failed", path.string()));
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, fmt::format("cannot open {}", path.string()));
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::format, fmt::format("{}: {}", path.string(), e.what()));
  }
}

}  // namespace hargcnn
