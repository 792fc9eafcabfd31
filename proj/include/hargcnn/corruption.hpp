#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hargcnn/graph.hpp"
#include "hargcnn/random.hpp"
#include "hargcnn/tensor.hpp"

namespace hargcnn {

using Mask = std::vector<std::uint8_t>;

enum class CorruptionMode {
  independent,  // hide and noise coins are drawn separately per node
  coupled,      // a node is either hidden or (possibly) noised, never both
};

std::string to_string(CorruptionMode mode);
CorruptionMode corruption_mode_from_string(const std::string& name);

struct CorruptionConfig {
  double hide_prob = 0.5;
  double noise_prob = 0.5;
  double noise_std = 1.0;
  double max_hidden_frac = 0.66;
  std::uint64_t seed = 0;
  CorruptionMode mode = CorruptionMode::independent;

  void validate() const;
  static CorruptionConfig none() { return {0.0, 0.0, 1.0, 0.66, 0, CorruptionMode::independent}; }
};

/// Largest number of nodes that may be hidden in an n-node graph.
///
/// The fraction is read as a whole-percent figure: 0.66 stands for two thirds
/// and guarantees "at least 33% labeled", so the labeled floor is
/// ceil(n * (1 - f - 0.01)) and never below one. For f = 0.66 this equals
/// n - ceil(n / 3) for every n < 100 (3 nodes -> 2 hidden).
std::size_t max_hidden_nodes(std::size_t n, double max_hidden_frac);

/// A graph with its training/evaluation disturbance applied. Ground truth stays
/// in `base`; only model inputs are affected.
struct CorruptedGraph {
  ActivityGraph base;
  Mask hidden;        // 1 = label hidden from the model
  Mask noised;        // 1 = features disturbed
  Tensor features;    // n x F features actually fed to the model

  std::size_t hidden_count() const;
  /// n x (F + C) input: [features | labels], labels zeroed where hidden or unknown.
  Tensor model_input() const;

  friend bool operator==(const CorruptedGraph&, const CorruptedGraph&) = default;
};

/// n x (F + C) input built from explicit features and a hidden mask.
Tensor model_input(const ActivityGraph& graph, const Tensor& features, std::span<const std::uint8_t> hidden,
                   bool zero_all_labels = false);

Mask hide_labels(const ActivityGraph& graph, const CorruptionConfig& cfg, Rng& rng);
/// Per node, with probability noise_prob add i.i.d. N(0, noise_std^2) to every
/// feature. Nodes set in `skip` are left untouched. `noised` receives the mask.
Tensor add_noise(const Tensor& features, const CorruptionConfig& cfg, Rng& rng, Mask* noised = nullptr,
                 std::span<const std::uint8_t> skip = {});
CorruptedGraph corrupt(const ActivityGraph& graph, const CorruptionConfig& cfg, Rng& rng);
/// Corruption as a pure function of (dataset seed, graph index).
CorruptedGraph corrupt_keyed(const ActivityGraph& graph, const CorruptionConfig& cfg, std::uint64_t dataset_seed,
                             std::size_t graph_index);

}  // namespace hargcnn
