#include "hargcnn/graph.hpp"

#include <atomic>
#include <cmath>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>

#include <fmt/format.h>

#include "hargcnn/error.hpp"

namespace hargcnn {

bool operator==(const ActivityNode& a, const ActivityNode& b) {
  return a.features == b.features && a.labels == b.labels && a.label_known == b.label_known &&
         a.timestamp == b.timestamp;
}

bool operator==(const ActivityGraph& a, const ActivityGraph& b) {
  return a.nodes_ == b.nodes_ && a.source_.subject == b.source_.subject &&
         a.source_.first_row == b.source_.first_row && a.source_.last_row == b.source_.last_row;
}

ActivityGraph build_graph(std::vector<ActivityNode> nodes, GraphSource source) {
  if (nodes.empty()) fail(ErrorKind::validation, "an activity graph needs at least one node");
  const std::size_t f = nodes.front().features.size();
  const std::size_t c = nodes.front().labels.size();
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].features.size() != f || nodes[i].labels.size() != c) {
      fail(ErrorKind::validation,
           fmt::format("node {} has dims F={} C={}, expected F={} C={}", i, nodes[i].features.size(),
                       nodes[i].labels.size(), f, c));
    }
    if (i > 0 && !(nodes[i].timestamp > nodes[i - 1].timestamp)) {
      fail(ErrorKind::ordering, fmt::format("node {} timestamp {} does not follow {}", i, nodes[i].timestamp,
                                            nodes[i - 1].timestamp));
    }
  }
  ActivityGraph g;
  g.nodes_ = std::move(nodes);
  g.source_ = source;
  return g;
}

Tensor ActivityGraph::feature_matrix() const {
  Tensor out({size(), feature_dim()});
  for (std::size_t i = 0; i < size(); ++i) {
    auto r = out.row(i);
    std::copy(nodes_[i].features.begin(), nodes_[i].features.end(), r.begin());
  }
  return out;
}

Tensor ActivityGraph::label_matrix() const {
  Tensor out({size(), class_dim()});
  for (std::size_t i = 0; i < size(); ++i) {
    auto r = out.row(i);
    std::copy(nodes_[i].labels.begin(), nodes_[i].labels.end(), r.begin());
  }
  return out;
}

std::string to_string(AdjacencyVariant variant) {
  return variant == AdjacencyVariant::as_written ? "as-written" : "kipf";
}

AdjacencyVariant adjacency_from_string(const std::string& name) {
  if (name == "as-written" || name == "as_written") return AdjacencyVariant::as_written;
  if (name == "kipf") return AdjacencyVariant::kipf;
  fail(ErrorKind::config, fmt::format("unknown adjacency variant '{}' (expected as-written or kipf)", name));
}

namespace {

std::atomic<bool> g_warnings{true};
std::atomic<bool> g_warned_single_node{false};

NormalizedAdjacency compute_adjacency(std::size_t n, AdjacencyVariant variant) {
  // A + I for the complete graph with unit weights, then D^-1/2 (A+I) D^-1/2.
  Tensor a_hat({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double adjacency = i == j ? 0.0 : ActivityGraph::edge_weight();
      a_hat(i, j) = adjacency + (i == j ? 1.0 : 0.0);
    }
  }
  std::vector<double> inv_sqrt_deg(n);
  for (std::size_t i = 0; i < n; ++i) {
    double d = 0.0;
    for (std::size_t j = 0; j < n; ++j) d += a_hat(i, j);
    inv_sqrt_deg[i] = 1.0 / std::sqrt(d);
  }
  Tensor m({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double sym = inv_sqrt_deg[i] * a_hat(i, j) * inv_sqrt_deg[j];
      m(i, j) = variant == AdjacencyVariant::kipf ? sym : (i == j ? 1.0 : 0.0) - sym;
    }
  }
  return {std::move(m), variant};
}

}  // namespace

void set_adjacency_warnings(bool enabled) { g_warnings = enabled; }

const NormalizedAdjacency& normalize_adjacency(int n, AdjacencyVariant variant) {
  if (n <= 0) fail(ErrorKind::config, fmt::format("adjacency needs n >= 1, got {}", n));
  if (n == 1 && variant == AdjacencyVariant::as_written && g_warnings && !g_warned_single_node.exchange(true)) {
    std::cerr << "warning: single-node graph with as-written normalization; graph layer output reduces to its bias\n";
  }
  static std::mutex mu;
  static std::map<std::pair<int, AdjacencyVariant>, std::unique_ptr<NormalizedAdjacency>> cache;
  std::lock_guard lock(mu);
  auto& slot = cache[{n, variant}];
  if (!slot) slot = std::make_unique<NormalizedAdjacency>(compute_adjacency(static_cast<std::size_t>(n), variant));
  return *slot;
}

}  // namespace hargcnn
