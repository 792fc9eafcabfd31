#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "hargcnn/corruption.hpp"
#include "hargcnn/error.hpp"
#include "support/oracles.hpp"

using namespace hargcnn;

TEST(Corruption, HiddenCapMatchesLabeledThird) {
  for (std::size_t n = 1; n < 100; ++n) {
    const std::size_t expected = n - (n + 2) / 3;
    EXPECT_EQ(max_hidden_nodes(n, 0.66), expected) << n;
  }
  EXPECT_EQ(max_hidden_nodes(3, 0.66), 2u);
  EXPECT_EQ(max_hidden_nodes(5, 0.0), 0u);
  EXPECT_EQ(max_hidden_nodes(5, 0.99), 4u);
}

TEST(Corruption, HideRespectsCap) {
  std::mt19937_64 g(1);
  const auto graph = oracle::random_graph(5, 4, 3, g, true);
  CorruptionConfig cfg;
  cfg.hide_prob = 1.0;
  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    const auto m = hide_labels(graph, cfg, rng);
    std::size_t h = 0;
    for (auto b : m) h += b;
    EXPECT_EQ(h, max_hidden_nodes(5, 0.66));
  }
  cfg.hide_prob = 0.0;
  for (auto b : hide_labels(graph, cfg, rng)) EXPECT_EQ(b, 0);
}

TEST(Corruption, HideRateMatchesProbability) {
  std::mt19937_64 g(2);
  const auto graph = oracle::random_graph(3, 2, 2, g, true);
  CorruptionConfig cfg;
  cfg.hide_prob = 0.3;
  cfg.max_hidden_frac = 0.99;
  Rng rng(4);
  double hidden = 0;
  const int trials = 20000;
  for (int t = 0; t < trials; ++t)
    for (auto b : hide_labels(graph, cfg, rng)) hidden += b;
  // Only the all-three case is capped: 0.3 - 0.3^3 / 3 per node.
  EXPECT_NEAR(hidden / (3.0 * trials), 0.3 - 0.027 / 3.0, 0.01);
}

TEST(Corruption, NoiseStatistics) {
  const Tensor clean({2000, 8});
  CorruptionConfig cfg;
  cfg.noise_prob = 0.5;
  cfg.noise_std = 2.0;
  Rng rng(5);
  Mask noised;
  const auto out = add_noise(clean, cfg, rng, &noised);
  double frac = 0, sum = 0, sq = 0, count = 0;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    frac += noised[i];
    for (double v : out.row(i)) {
      if (!noised[i]) {
        EXPECT_EQ(v, 0.0);
        continue;
      }
      sum += v;
      sq += v * v;
      ++count;
    }
  }
  EXPECT_NEAR(frac / 2000.0, 0.5, 0.04);
  EXPECT_NEAR(sum / count, 0.0, 0.05);
  EXPECT_NEAR(std::sqrt(sq / count), 2.0, 0.05);
}

TEST(Corruption, ZeroStdLeavesFeatures) {
  std::mt19937_64 g(6);
  const auto clean = oracle::random_tensor({10, 3}, g);
  CorruptionConfig cfg;
  cfg.noise_prob = 1.0;
  cfg.noise_std = 0.0;
  Rng rng(7);
  Mask noised;
  EXPECT_EQ(add_noise(clean, cfg, rng, &noised), clean);
}

TEST(Corruption, CoupledModeNeverNoisesHiddenNodes) {
  std::mt19937_64 g(8);
  const auto graph = oracle::random_graph(6, 3, 2, g, true);
  CorruptionConfig cfg;
  cfg.hide_prob = 0.5;
  cfg.noise_prob = 1.0;
  cfg.mode = CorruptionMode::coupled;
  Rng rng(9);
  for (int t = 0; t < 100; ++t) {
    const auto c = corrupt(graph, cfg, rng);
    for (std::size_t i = 0; i < 6; ++i) EXPECT_NE(c.hidden[i], c.noised[i]);
  }
  EXPECT_EQ(corruption_mode_from_string("coupled"), CorruptionMode::coupled);
  EXPECT_THROW(corruption_mode_from_string("both"), Error);
}

TEST(Corruption, ModelInputZeroesHiddenLabels) {
  std::mt19937_64 g(10);
  auto graph = oracle::random_graph(3, 2, 2, g, true);
  const Mask hidden{0, 1, 0};
  const auto x = model_input(graph, graph.feature_matrix(), hidden);
  ASSERT_EQ(x.shape(), (Shape{3, 4}));
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 2; ++j) EXPECT_EQ(x(i, j), graph.node(i).features[j]);
    for (std::size_t j = 0; j < 2; ++j) EXPECT_EQ(x(i, 2 + j), hidden[i] ? 0.0 : graph.node(i).labels[j]);
  }
  const auto z = model_input(graph, graph.feature_matrix(), hidden, true);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(z(i, 2) + z(i, 3), 0.0);
}

TEST(Corruption, KeyedIsReproducible) {
  std::mt19937_64 g(11);
  const auto graph = oracle::random_graph(4, 3, 2, g, true);
  CorruptionConfig cfg;
  const auto a = corrupt_keyed(graph, cfg, 42, 7);
  const auto b = corrupt_keyed(graph, cfg, 42, 7);
  EXPECT_EQ(a, b);
  bool differs = false;
  for (std::size_t i = 0; i < 20 && !differs; ++i) differs = !(corrupt_keyed(graph, cfg, 42, i) == a);
  EXPECT_TRUE(differs);
}

TEST(Corruption, RejectsBadConfig) {
  CorruptionConfig cfg;
  cfg.hide_prob = 1.5;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.noise_std = -1;
  EXPECT_THROW(cfg.validate(), Error);
}
