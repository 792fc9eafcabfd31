#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hargcnn/tensor.hpp"

namespace hargcnn {

enum class Averaging { macro, micro };

std::string to_string(Averaging a);
Averaging averaging_from_string(const std::string& name);

/// n x C 0/1 predictions. Multi-label: score >= threshold. Single-label: one-hot
/// of the row argmax (first maximum wins), threshold unused.
Tensor binarize(const Tensor& scores, bool multilabel, double threshold = 0.5);

struct ClassCounts {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
  friend bool operator==(const ClassCounts&, const ClassCounts&) = default;
};

/// Per-class confusion counts over target nodes, plus the exact-match tally.
/// Merging is associative and commutative.
struct ConfusionCounts {
  std::vector<ClassCounts> per_class;
  std::uint64_t targets = 0;      // scored nodes
  std::uint64_t exact_match = 0;  // nodes whose whole label vector is right

  explicit ConfusionCounts(std::size_t classes = 0) : per_class(classes) {}
  void add(const Tensor& predictions, const Tensor& truths, std::span<const std::uint8_t> target_mask);
  ConfusionCounts& merge(const ConfusionCounts& other);
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

struct ClassMetrics {
  ClassCounts counts;
  double f1 = 0.0;
  double acc = 0.0;
};

/// Accuracies are fractions in [0, 1]; text output shows them as percentages.
struct MetricsReport {
  std::vector<ClassMetrics> per_class;
  double macro_f1 = 0.0;  // or micro F1 when averaging == micro
  double mean_acc = 0.0;  // mean per-class accuracy (multi-label) or exact-match rate (single-label)
  std::size_t hidden_node_count = 0;
  bool multilabel = true;
  Averaging averaging = Averaging::macro;

  nlohmann::json to_json() const;
  /// "0.781 / 99.52"
  std::string cell() const;
  std::string table() const;
};

/// f1 = 2tp / (2tp + fp + fn), 0 when the denominator is 0.
double f1_score(const ClassCounts& c);

MetricsReport finalize_report(const ConfusionCounts& counts, bool multilabel, Averaging averaging = Averaging::macro);

/// Report over nodes with target_mask = 1 (every node when the mask is empty). Raises ErrorKind::no_targets when
/// there are none.
MetricsReport compute_report(const Tensor& predictions, const Tensor& truths, std::span<const std::uint8_t> target_mask,
                             bool multilabel, Averaging averaging = Averaging::macro);

}  // namespace hargcnn
