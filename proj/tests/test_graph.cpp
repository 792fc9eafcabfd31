#include <gtest/gtest.h>

#include "hargcnn/error.hpp"
#include "hargcnn/graph.hpp"
#include "support/oracles.hpp"

using namespace hargcnn;

namespace {

ActivityNode node(double t, std::size_t f = 2, std::size_t c = 3) {
  return {std::vector<double>(f, t), std::vector<double>(c, 0.0), true, t};
}

}  // namespace

TEST(Graph, BuildAndShape) {
  const auto g = build_graph({node(0), node(1), node(2)}, {4, 10, 12});
  EXPECT_EQ(g.size(), 3u);
  EXPECT_EQ(g.feature_dim(), 2u);
  EXPECT_EQ(g.class_dim(), 3u);
  EXPECT_EQ(g.edge_count(), 3u);
  EXPECT_EQ(ActivityGraph::edge_weight(), 1.0);
  EXPECT_EQ(g.source().subject, 4u);
  EXPECT_EQ(g.feature_matrix().shape(), (Shape{3, 2}));
  EXPECT_EQ(g.label_matrix().shape(), (Shape{3, 3}));
  EXPECT_EQ(build_graph({node(0), node(1), node(2), node(3), node(4)}).edge_count(), 10u);
}

TEST(Graph, RejectsBadInput) {
  try {
    build_graph({node(0), node(2), node(1)});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ordering);
  }
  EXPECT_THROW(build_graph({node(0), node(0)}), Error);
  try {
    build_graph({});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::validation);
  }
  EXPECT_THROW(build_graph({node(0, 2), node(1, 3)}), Error);
  EXPECT_THROW(build_graph({node(0, 2, 3), node(1, 2, 4)}), Error);
}

class AdjacencyDefinition : public ::testing::TestWithParam<int> {};

TEST_P(AdjacencyDefinition, MatchesOracleAndClosedForm) {
  const int n = GetParam();
  set_adjacency_warnings(false);
  const auto& aw = normalize_adjacency(n, AdjacencyVariant::as_written).matrix;
  const auto& kp = normalize_adjacency(n, AdjacencyVariant::kipf).matrix;
  const auto o_aw = oracle::normalized_adjacency(n, true);
  const auto o_kp = oracle::normalized_adjacency(n, false);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      EXPECT_NEAR(aw(i, j), o_aw[i][j], 1e-14);
      EXPECT_NEAR(kp(i, j), o_kp[i][j], 1e-14);
      EXPECT_NEAR(aw(i, j), (i == j ? 1.0 : 0.0) - 1.0 / n, 1e-12);
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Sizes, AdjacencyDefinition, ::testing::Values(1, 2, 3, 5, 10, 25));

TEST(Adjacency, SmallCases) {
  set_adjacency_warnings(false);
  const auto& a3 = normalize_adjacency(3, AdjacencyVariant::as_written).matrix;
  EXPECT_NEAR(a3(0, 0), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(a3(0, 1), -1.0 / 3.0, 1e-15);
  const auto& k2 = normalize_adjacency(2, AdjacencyVariant::kipf).matrix;
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(k2(i, j), 0.5, 1e-15);
  EXPECT_EQ(normalize_adjacency(1, AdjacencyVariant::as_written).matrix, Tensor::matrix({{0.0}}));
  EXPECT_THROW(normalize_adjacency(0, AdjacencyVariant::as_written), Error);
}

TEST(Adjacency, Memoised) {
  const auto* a = &normalize_adjacency(7, AdjacencyVariant::kipf);
  const auto* b = &normalize_adjacency(7, AdjacencyVariant::kipf);
  EXPECT_EQ(a, b);
}

TEST(Adjacency, VariantNames) {
  EXPECT_EQ(adjacency_from_string("as-written"), AdjacencyVariant::as_written);
  EXPECT_EQ(adjacency_from_string("kipf"), AdjacencyVariant::kipf);
  EXPECT_EQ(to_string(AdjacencyVariant::as_written), "as-written");
  EXPECT_THROW(adjacency_from_string("laplacian"), Error);
}
