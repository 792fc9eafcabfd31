#include "hargcnn/corruption.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "hargcnn/error.hpp"

namespace hargcnn {

std::string to_string(CorruptionMode mode) { return mode == CorruptionMode::independent ? "independent" : "coupled"; }

CorruptionMode corruption_mode_from_string(const std::string& name) {
  if (name == "independent") return CorruptionMode::independent;
  if (name == "coupled") return CorruptionMode::coupled;
  fail(ErrorKind::config, fmt::format("unknown corruption mode '{}' (expected independent or coupled)", name));
}

void CorruptionConfig::validate() const {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob(hide_prob) || !prob(noise_prob)) {
    fail(ErrorKind::config, fmt::format("corruption probabilities must lie in [0,1] (hide {}, noise {})", hide_prob, noise_prob));
  }
  if (!(max_hidden_frac > 0.0 && max_hidden_frac < 1.0)) {
    fail(ErrorKind::config, fmt::format("max_hidden_frac must lie in (0,1), got {}", max_hidden_frac));
  }
  if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) {
    fail(ErrorKind::config, fmt::format("noise_std must be >= 0, got {}", noise_std));
  }
}

std::size_t max_hidden_nodes(std::size_t n, double max_hidden_frac) {
  if (n == 0) return 0;
  const double floor_frac = std::max(0.0, 1.0 - max_hidden_frac - 0.01);
  const auto labeled = static_cast<std::size_t>(std::ceil(static_cast<double>(n) * floor_frac - 1e-9));
  return n - std::clamp<std::size_t>(labeled, 1, n);
}

std::size_t CorruptedGraph::hidden_count() const {
  return static_cast<std::size_t>(std::count(hidden.begin(), hidden.end(), 1));
}

Tensor CorruptedGraph::model_input() const { return hargcnn::model_input(base, features, hidden); }

Tensor model_input(const ActivityGraph& graph, const Tensor& features, std::span<const std::uint8_t> hidden,
                   bool zero_all_labels) {
  const std::size_t n = graph.size(), f = graph.feature_dim(), c = graph.class_dim();
  if (features.rows() != n || features.cols() != f) {
    fail(ErrorKind::dimension, fmt::format("features {} do not match graph n={} F={}", shape_string(features.shape()), n, f));
  }
  if (!hidden.empty() && hidden.size() != n) {
    fail(ErrorKind::dimension, fmt::format("hidden mask has {} entries for {} nodes", hidden.size(), n));
  }
  Tensor out({n, f + c});
  for (std::size_t i = 0; i < n; ++i) {
    auto r = out.row(i);
    const auto fr = features.row(i);
    std::copy(fr.begin(), fr.end(), r.begin());
    const auto& node = graph.node(i);
    const bool masked = zero_all_labels || !node.label_known || (!hidden.empty() && hidden[i]);
    if (!masked) std::copy(node.labels.begin(), node.labels.end(), r.begin() + static_cast<long>(f));
  }
  return out;
}

Mask hide_labels(const ActivityGraph& graph, const CorruptionConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::size_t n = graph.size();
  Mask hidden(n, 0);
  std::vector<std::size_t> chosen;
  for (std::size_t i = 0; i < n; ++i) {
    if (uniform01(rng) < cfg.hide_prob) {
      hidden[i] = 1;
      chosen.push_back(i);
    }
  }
  const std::size_t cap = max_hidden_nodes(n, cfg.max_hidden_frac);
  if (chosen.size() > cap) {
    std::shuffle(chosen.begin(), chosen.end(), rng);
    for (std::size_t k = cap; k < chosen.size(); ++k) hidden[chosen[k]] = 0;
  }
  return hidden;
}

Tensor add_noise(const Tensor& features, const CorruptionConfig& cfg, Rng& rng, Mask* noised,
                 std::span<const std::uint8_t> skip) {
  cfg.validate();
  Tensor out = features;
  std::normal_distribution<double> normal(0.0, cfg.noise_std > 0.0 ? cfg.noise_std : 1.0);
  if (noised) noised->assign(features.rows(), 0);
  for (std::size_t i = 0; i < out.rows(); ++i) {
    if (!skip.empty() && skip[i]) continue;
    if (!(uniform01(rng) < cfg.noise_prob)) continue;
    if (cfg.noise_std > 0.0) {
      for (auto& v : out.row(i)) v += normal(rng);
    }
    if (noised) (*noised)[i] = 1;
  }
  return out;
}

CorruptedGraph corrupt(const ActivityGraph& graph, const CorruptionConfig& cfg, Rng& rng) {
  CorruptedGraph out;
  out.base = graph;
  out.hidden = hide_labels(graph, cfg, rng);
  const Tensor clean = graph.feature_matrix();
  std::span<const std::uint8_t> skip;
  if (cfg.mode == CorruptionMode::coupled) skip = out.hidden;
  out.features = add_noise(clean, cfg, rng, &out.noised, skip);
  return out;
}

CorruptedGraph corrupt_keyed(const ActivityGraph& graph, const CorruptionConfig& cfg, std::uint64_t dataset_seed,
                             std::size_t graph_index) {
  Rng rng(derive_seed(dataset_seed, {graph_index}));
  return corrupt(graph, cfg, rng);
}

}  // namespace hargcnn
