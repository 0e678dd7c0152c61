#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <Eigen/LU>
#include <gtest/gtest.h>

#include "l2g/evaluation.hpp"
#include "support.hpp"

namespace l2g {
namespace {

double brute_force_auc(const std::vector<double>& pos, const std::vector<double>& neg) {
  double wins = 0;
  for (double a : pos)
    for (double b : neg) wins += a > b ? 1.0 : (a == b ? 0.5 : 0.0);
  return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

TEST(AucTest, MatchesPairEnumerationWithTies) {
  Rng rng(1);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> pos(1 + rng.index(10)), neg(1 + rng.index(10));
    // small integer scores force many ties
    for (auto& s : pos) s = static_cast<double>(rng.index(4));
    for (auto& s : neg) s = static_cast<double>(rng.index(4));
    EXPECT_EQ(auc_from_scores(pos, neg), brute_force_auc(pos, neg));
  }
}

TEST(AucTest, ReconstructionMatchesEnumerationOnSmallGraphs) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    const auto n = static_cast<NodeId>(3 + rng.index(6));
    const Graph g = testing::random_graph(n, 0.35, seed);
    const auto edges = g.edges();
    const std::uint64_t pairs = static_cast<std::uint64_t>(n) * (n - 1) / 2;
    if (edges.empty() || edges.size() > pairs - edges.size()) continue;
    Matrix x = rng.normal_matrix(n, 2);
    if (seed % 3 == 0) x = x.array().round();  // ties
    const auto report = auc_reconstruction(x, g, seed);

    std::vector<double> pos, neg;
    for (auto [u, v] : edges) pos.push_back(x.row(u).dot(x.row(v)));
    for (auto [u, v] : sample_non_edges(g, edges.size(), seed)) neg.push_back(x.row(u).dot(x.row(v)));
    EXPECT_EQ(report.auc, brute_force_auc(pos, neg)) << "seed " << seed;
    EXPECT_EQ(report.positives, edges.size());
    EXPECT_EQ(report.negatives, edges.size());

    // when negatives exhaust the non-edges, the sample is every non-edge
    if (edges.size() * 2 == pairs) {
      std::vector<double> all_neg;
      for (NodeId u = 0; u < n; ++u)
        for (NodeId v = u + 1; v < n; ++v)
          if (!g.has_edge(u, v)) all_neg.push_back(x.row(u).dot(x.row(v)));
      EXPECT_EQ(report.auc, brute_force_auc(pos, all_neg));
    }
  }
}

TEST(AucTest, Extremes) {
  const std::vector<double> hi = {3, 4, 5}, lo = {0, 1, 2}, zero = {0, 0, 0};
  EXPECT_EQ(auc_from_scores(hi, lo), 1.0);
  EXPECT_EQ(auc_from_scores(lo, hi), 0.0);
  EXPECT_EQ(auc_from_scores(zero, zero), 0.5);
  EXPECT_THROW(auc_from_scores({}, lo), Error);
  const std::vector<double> nan = {std::nan("")};
  EXPECT_THROW(auc_from_scores(nan, lo), Error);
}

TEST(AucTest, InvariantUnderIncreasingMaps) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> pos(20), neg(30);
    for (auto& s : pos) s = rng.normal();
    for (auto& s : neg) s = rng.normal();
    auto mapped = [](std::vector<double> v) {
      for (auto& s : v) s = std::exp(2 * s) + 7;
      return v;
    };
    EXPECT_EQ(auc_from_scores(pos, neg), auc_from_scores(mapped(pos), mapped(neg)));
  }
}

TEST(AucTest, ZeroEmbeddingGivesHalf) {
  const Graph g = testing::random_connected_graph(30, 20, 3);
  EXPECT_EQ(auc_reconstruction(Matrix::Zero(30, 4), g, 0).auc, 0.5);
  EXPECT_THROW(auc_reconstruction(Matrix::Zero(29, 4), g, 0), Error);
}

TEST(SampleNonEdgesTest, DistinctNonAdjacentAndSeeded) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Graph g = testing::random_graph(40, 0.2, seed);
    const auto sample = sample_non_edges(g, 300, seed);
    std::set<Edge> seen;
    for (auto [u, v] : sample) {
      EXPECT_LT(u, v);
      EXPECT_FALSE(g.has_edge(u, v));
      EXPECT_TRUE(seen.insert({u, v}).second);
    }
    EXPECT_EQ(sample.size(), 300u);
    EXPECT_EQ(sample, sample_non_edges(g, 300, seed));
  }
}

TEST(SampleNonEdgesTest, TooManyRequested) {
  const Graph g = testing::complete_graph(5);
  EXPECT_THROW(sample_non_edges(g, 1, 0), Error);
  const Graph p = testing::path_graph(4);  // 6 pairs, 3 edges
  EXPECT_EQ(sample_non_edges(p, 3, 9).size(), 3u);
  EXPECT_THROW(sample_non_edges(p, 4, 9), Error);
}

TEST(RandomOrthogonalTest, OrthogonalWithBothOrientations) {
  Rng rng(4);
  int negative = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const Matrix q = random_orthogonal(4, rng);
    EXPECT_LE(orthogonality_error(q), 1e-12);
    negative += q.determinant() < 0;
  }
  EXPECT_GT(negative, 60);
  EXPECT_LT(negative, 140);
}

TEST(SyntheticTest, Invariants) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto inst = generate_synthetic(300, 4, 7, 0.0, 5, seed);
    const auto& pg = inst.patch_graph;
    EXPECT_NO_THROW(pg.validate());
    EXPECT_TRUE(pg.is_connected());
    for (const auto& e : pg.edges) EXPECT_GE(e.overlap.size(), 5u);
    for (int k = 0; k < 7; ++k) {
      const auto& emb = inst.patches[k];
      EXPECT_EQ(emb.node_ids, pg.patches[k]);
      EXPECT_LE(orthogonality_error(inst.rotations[k]), 1e-12);
      for (std::size_t r = 0; r < emb.node_ids.size(); ++r) {
        const Eigen::RowVectorXd expected =
            inst.ground_truth.row(emb.node_ids[r]) * inst.rotations[k].transpose() + inst.translations.row(k);
        EXPECT_LE((emb.coords.row(static_cast<Eigen::Index>(r)) - expected).cwiseAbs().maxCoeff(), 1e-12);
      }
    }
  }
}

TEST(SyntheticTest, SigmaOnlyChangesNoiseAmplitude) {
  const auto a = generate_synthetic(200, 3, 5, 0.0, 4, 7);
  const auto b = generate_synthetic(200, 3, 5, 0.01, 4, 7);
  const auto c = generate_synthetic(200, 3, 5, 0.02, 4, 7);
  EXPECT_EQ(a.ground_truth, b.ground_truth);
  for (int k = 0; k < 5; ++k) {
    EXPECT_EQ(a.rotations[k], b.rotations[k]);
    const Matrix nb = b.patches[k].coords - a.patches[k].coords;
    const Matrix nc = c.patches[k].coords - a.patches[k].coords;
    EXPECT_LE((2 * nb - nc).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(SyntheticTest, RejectsBadParameters) {
  EXPECT_THROW(generate_synthetic(10, 4, 3, 0.0, 5, 0), Error);     // n < p(d+1)
  EXPECT_THROW(generate_synthetic(100, 4, 3, 0.0, 4, 0), Error);    // overlap < d+1
  EXPECT_THROW(generate_synthetic(100, 4, 3, -1.0, 5, 0), Error);   // sigma < 0
  EXPECT_THROW(generate_synthetic(50, 4, 10, 0.0, 30, 0), Error);   // blocks too small
}

TEST(DotProductGraphTest, MatchesBruteForce) {
  Rng rng(5);
  const Matrix x = rng.normal_matrix(25, 3);
  const Graph g = dot_product_graph(x, 4);
  std::set<Edge> expected;
  for (NodeId u = 0; u < 25; ++u) {
    std::vector<std::pair<double, NodeId>> scored;
    for (NodeId v = 0; v < 25; ++v)
      if (v != u) scored.push_back({-x.row(u).dot(x.row(v)), v});
    std::sort(scored.begin(), scored.end());
    for (int k = 0; k < 4; ++k) expected.insert({std::min(u, scored[k].second), std::max(u, scored[k].second)});
  }
  const auto got = g.edges();
  EXPECT_EQ(std::set<Edge>(got.begin(), got.end()), expected);
  EXPECT_THROW(dot_product_graph(x, 25), Error);
}

TEST(ScenarioTest, SinglePatchScenariosCoincide) {
  const Graph g = testing::random_connected_graph(40, 60, 6);
  PatchGraph pg;
  pg.num_nodes = 40;
  pg.patches.push_back({});
  for (NodeId v = 0; v < 40; ++v) pg.patches[0].push_back(v);
  const Matrix full = spectral_embed(g, 4);
  const std::vector<PatchEmbedding> patches = {{0, pg.patches[0], full}};
  const auto cmp = evaluate_scenarios(g, full, patches, pg, 3);
  ASSERT_EQ(cmp.rows.size(), 3u);
  EXPECT_EQ(cmp.rows[0].report.auc, cmp.rows[1].report.auc);
  EXPECT_EQ(cmp.rows[0].report.auc, cmp.rows[2].report.auc);
}

TEST(ScenarioTest, AlignmentBeatsBaselineOnSynthetic) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto inst = generate_synthetic(400, 4, 8, 0.0, 5, seed);
    const Graph g = dot_product_graph(inst.ground_truth, 8);
    const auto cmp = evaluate_scenarios(g, inst.ground_truth, inst.patches, inst.patch_graph, seed);
    EXPECT_GT(cmp.rows[1].report.auc, cmp.rows[2].report.auc);
    EXPECT_EQ(cmp.rows[0].report.seed, cmp.rows[1].report.seed);
  }
}

TEST(ScenarioTest, TableFormats) {
  std::vector<ScenarioResult> rows = {{"full", 8, {0.75, 10, 10, 3}}, {"l2g", 8, {0.5, 10, 10, 3}},
                                      {"full", 16, {0.25, 10, 10, 3}}};
  std::ostringstream table, series;
  write_scenario_table(rows, table);
  EXPECT_EQ(table.str(),
            "scenario\td\tauc\tpositives\tnegatives\tseed\nfull\t8\t0.75\t10\t10\t3\nl2g\t8\t0.5\t10\t10\t3\n"
            "full\t16\t0.25\t10\t10\t3\n");
  write_auc_series(rows, series);
  EXPECT_EQ(series.str(), "d\tfull\tl2g\tno-trans\n8\t0.75\t0.5\tnan\n16\t0.25\tnan\tnan\n");
}

}  // namespace
}  // namespace l2g
