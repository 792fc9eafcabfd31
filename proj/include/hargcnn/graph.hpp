#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "hargcnn/tensor.hpp"

namespace hargcnn {

/// One time window: sensor features plus its label vector.
///
/// `labels` always has C entries: a multi-hot vector for multi-label data, a
/// one-hot vector for single-label data. When `label_known` is false the model
/// input sees zeros in place of `labels`.
struct ActivityNode {
  std::vector<double> features;
  std::vector<double> labels;
  bool label_known = true;
  double timestamp = 0.0;
};

/// Where a graph's rows came from, used by the chronological split.
struct GraphSource {
  std::size_t subject = 0;
  std::size_t first_row = 0;  // inclusive
  std::size_t last_row = 0;   // inclusive
};

/// Chronologically ordered nodes on a complete graph with unit edge weights.
/// The adjacency is implicit; edge weights are fixed at 1 and cannot change.
class ActivityGraph {
 public:
  ActivityGraph() = default;

  const std::vector<ActivityNode>& nodes() const noexcept { return nodes_; }
  const ActivityNode& node(std::size_t i) const { return nodes_[i]; }
  std::size_t size() const noexcept { return nodes_.size(); }
  std::size_t feature_dim() const noexcept { return nodes_.empty() ? 0 : nodes_.front().features.size(); }
  std::size_t class_dim() const noexcept { return nodes_.empty() ? 0 : nodes_.front().labels.size(); }
  std::size_t edge_count() const noexcept { return size() * (size() - 1) / 2; }
  static constexpr double edge_weight() noexcept { return 1.0; }

  const GraphSource& source() const noexcept { return source_; }

  /// n x F feature matrix and n x C ground-truth label matrix.
  Tensor feature_matrix() const;
  Tensor label_matrix() const;

  friend bool operator==(const ActivityGraph& a, const ActivityGraph& b);

 private:
  friend ActivityGraph build_graph(std::vector<ActivityNode> nodes, GraphSource source);
  std::vector<ActivityNode> nodes_;
  GraphSource source_;
};

bool operator==(const ActivityNode& a, const ActivityNode& b);

/// Validates ordering (strictly increasing timestamps) and uniform dimensions.
ActivityGraph build_graph(std::vector<ActivityNode> nodes, GraphSource source = {});

enum class AdjacencyVariant {
  as_written,  // I - D^-1/2 (A+I) D^-1/2
  kipf,        // D^-1/2 (A+I) D^-1/2
};

std::string to_string(AdjacencyVariant variant);
AdjacencyVariant adjacency_from_string(const std::string& name);

struct NormalizedAdjacency {
  Tensor matrix;
  AdjacencyVariant variant = AdjacencyVariant::as_written;
};

/// Normalized adjacency of the complete unit-weight graph on n nodes.
///
/// Computed from the definition (A = J - I, D = degree matrix of A + I), not
/// from the closed form. Results are memoised per (n, variant). Asking for the
/// as_written variant with n = 1 logs a warning: the matrix is [[0]], so the
/// graph layer only passes its bias.
const NormalizedAdjacency& normalize_adjacency(int n, AdjacencyVariant variant);

/// Suppress the single-node warning (tests and batch tools).
void set_adjacency_warnings(bool enabled);

}  // namespace hargcnn
