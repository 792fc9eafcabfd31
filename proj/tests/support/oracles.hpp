#pragma once

// Independent reference computations used by the tests. Nothing here calls the
// library's kernels; everything is written out from the definitions.

#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include "hargcnn/data.hpp"
#include "hargcnn/graph.hpp"
#include "hargcnn/tensor.hpp"

namespace oracle {

using Matrix = std::vector<std::vector<double>>;

inline Matrix to_matrix(const hargcnn::Tensor& t) {
  Matrix m(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) m[i][j] = t(i, j);
  return m;
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix out(a.size(), std::vector<double>(b.front().size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < b.size(); ++k)
      for (std::size_t j = 0; j < b.front().size(); ++j) out[i][j] += a[i][k] * b[k][j];
  return out;
}

/// 1-D convolution over rows written as the textbook sum with explicit bounds.
inline Matrix node_conv(const Matrix& x, const Matrix& w, const std::vector<double>& b, int kernel) {
  const int n = static_cast<int>(x.size());
  const int d_in = static_cast<int>(x.front().size());
  const int d_out = static_cast<int>(b.size());
  const int pad = (kernel - 1) / 2;
  Matrix out(n, std::vector<double>(d_out));
  for (int i = 0; i < n; ++i) {
    for (int o = 0; o < d_out; ++o) {
      double acc = b[o];
      for (int t = 0; t < kernel; ++t) {
        const int src = i + t - pad;
        if (src < 0 || src >= n) continue;
        for (int c = 0; c < d_in; ++c) acc += x[src][c] * w[t * d_in + c][o];
      }
      out[i][o] = acc;
    }
  }
  return out;
}

/// A_norm from the definition with an explicit degree loop.
inline Matrix normalized_adjacency(int n, bool as_written) {
  Matrix a_hat(n, std::vector<double>(n, 1.0));  // complete graph plus self loops
  std::vector<double> deg(n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) deg[i] += a_hat[i][j];
  Matrix out(n, std::vector<double>(n));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double s = a_hat[i][j] / std::sqrt(deg[i] * deg[j]);
      out[i][j] = as_written ? (i == j ? 1.0 : 0.0) - s : s;
    }
  }
  return out;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Monte-Carlo accuracy of the Bayes-optimal feature-only classifier for the
/// synthetic generator: equal isotropic covariances and (stationary) uniform
/// class priors reduce it to nearest class mean.
inline double bayes_feature_accuracy(const hargcnn::SynthConfig& cfg, int samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> pick(0, cfg.classes - 1);
  const auto f = static_cast<std::size_t>(cfg.features());
  int correct = 0;
  std::vector<double> x(f);
  for (int s = 0; s < samples; ++s) {
    const int z = pick(rng);
    for (std::size_t j = 0; j < f; ++j) x[j] = cfg.class_means[z][j] + cfg.feature_std * normal(rng);
    int best = 0;
    double best_d = INFINITY;
    for (int k = 0; k < cfg.classes; ++k) {
      double d = 0.0;
      for (std::size_t j = 0; j < f; ++j) d += (x[j] - cfg.class_means[k][j]) * (x[j] - cfg.class_means[k][j]);
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    correct += best == z;
  }
  return static_cast<double>(correct) / samples;
}

/// feature_std at which the Bayes feature-only accuracy crosses `target`
/// (accuracy falls monotonically in feature_std).
inline double feature_std_for_bayes(hargcnn::SynthOptions opts, double target, int samples, std::uint64_t seed) {
  double lo = 0.01, hi = 50.0;
  for (int it = 0; it < 30; ++it) {
    opts.feature_std = 0.5 * (lo + hi);
    const double acc = bayes_feature_accuracy(hargcnn::make_synth_config(opts), samples, seed);
    (acc > target ? lo : hi) = opts.feature_std;
  }
  return 0.5 * (lo + hi);
}

inline hargcnn::Tensor random_tensor(hargcnn::Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  hargcnn::Tensor t(std::move(shape));
  std::normal_distribution<double> normal(0.0, scale);
  for (auto& v : t.data()) v = normal(rng);
  return t;
}

/// Graph with features ~ N(0,1) and one-hot labels cycling through classes.
inline hargcnn::ActivityGraph random_graph(std::size_t n, std::size_t f, std::size_t c, std::mt19937_64& rng,
                                           bool multilabel = false) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution coin(0.4);
  std::vector<hargcnn::ActivityNode> nodes;
  for (std::size_t i = 0; i < n; ++i) {
    hargcnn::ActivityNode node;
    node.timestamp = static_cast<double>(i);
    node.features.resize(f);
    for (auto& v : node.features) v = normal(rng);
    node.labels.assign(c, 0.0);
    if (multilabel) {
      for (auto& l : node.labels) l = coin(rng) ? 1.0 : 0.0;
    } else {
      node.labels[i % c] = 1.0;
    }
    nodes.push_back(std::move(node));
  }
  return hargcnn::build_graph(std::move(nodes));
}

}  // namespace oracle
