#include <algorithm>
#include <limits>
#include <numeric>
#include <set>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <gtest/gtest.h>

#include "l2g/alignment.hpp"
#include "l2g/evaluation.hpp"

namespace l2g {
namespace {

// Largest sine of the principal angles between the column spans of a and b.
double subspace_distance(const Matrix& a, const Matrix& b) {
  const Matrix qa = Eigen::HouseholderQR<Matrix>(a).householderQ() * Matrix::Identity(a.rows(), a.cols());
  const Matrix qb = Eigen::HouseholderQR<Matrix>(b).householderQ() * Matrix::Identity(b.rows(), b.cols());
  const Matrix residual = qb - qa * (qa.transpose() * qb);
  return Eigen::JacobiSVD<Matrix>(residual).singularValues()(0);
}


TEST(RelativeTransformsTest, MatchPlantedRotations) {
  const auto inst = generate_synthetic(200, 3, 5, 0.0, 4, 11);
  const auto rel = estimate_relative_transforms(inst.patches, inst.patch_graph);
  ASSERT_EQ(rel.blocks.size(), inst.patch_graph.edges.size());
  for (std::size_t e = 0; e < rel.blocks.size(); ++e) {
    const auto& edge = inst.patch_graph.edges[e];
    // x_i = X S_iᵀ and x_j = X S_jᵀ, so x_i = x_j (S_j S_iᵀ) and R_ij = S_i S_jᵀ
    const Matrix expected = inst.rotations[edge.i] * inst.rotations[edge.j].transpose();
    EXPECT_LE((rel.blocks[e] - expected).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LE((rel.block(e, true) - expected.transpose()).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(SyncMatrixTest, BlockStructure) {
  const auto inst = generate_synthetic(200, 3, 5, 0.0, 4, 12);
  const auto& pg = inst.patch_graph;
  const auto rel = estimate_relative_transforms(inst.patches, pg);
  const auto sync = build_sync_matrix(rel, pg);
  ASSERT_EQ(sync.matrix.rows(), 15);
  EXPECT_LE(static_cast<std::size_t>(sync.matrix.nonZeros()), 2 * pg.edges.size() * 9);
  const Matrix dense = Matrix(sync.matrix);
  for (std::size_t e = 0; e < pg.edges.size(); ++e) {
    const auto& edge = pg.edges[e];
    const double w = static_cast<double>(edge.overlap.size());
    EXPECT_LE((dense.block(edge.i * 3, edge.j * 3, 3, 3) - w / sync.degree(edge.i) * rel.blocks[e]).cwiseAbs().maxCoeff(),
              1e-14);
    EXPECT_LE((dense.block(edge.j * 3, edge.i * 3, 3, 3) - w / sync.degree(edge.j) * rel.blocks[e].transpose())
                  .cwiseAbs()
                  .maxCoeff(),
              1e-14);
  }
  for (int k = 0; k < 5; ++k) EXPECT_EQ(dense.block(k * 3, k * 3, 3, 3).norm(), 0.0);
}

TEST(SyncMatrixTest, IsolatedPatchRejected) {
  PatchGraph pg;
  pg.num_nodes = 4;
  pg.patches = {{0, 1}, {2, 3}};
  RelativeTransforms rel;
  EXPECT_THROW(build_sync_matrix(rel, pg), Error);
}

class LeadingEigenvectorsTest : public ::testing::TestWithParam<std::tuple<int, int, double>> {};

TEST_P(LeadingEigenvectorsTest, MatchDenseOracle) {
  const auto [p, d, sigma] = GetParam();
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto inst = generate_synthetic(p * 40, d, p, sigma, static_cast<std::size_t>(2 * d + 2), seed);
    const auto sync = build_sync_matrix(estimate_relative_transforms(inst.patches, inst.patch_graph), inst.patch_graph);
    ASSERT_LE(sync.matrix.rows(), 200);
    const auto got = leading_eigenvectors(sync, d);

    // oracle: general (nonsymmetric) dense eigendecomposition of M itself
    Eigen::EigenSolver<Matrix> es(Matrix(sync.matrix));
    std::vector<Eigen::Index> order(static_cast<std::size_t>(sync.matrix.rows()));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](Eigen::Index a, Eigen::Index b) { return es.eigenvalues()(a).real() > es.eigenvalues()(b).real(); });
    Matrix expected(sync.matrix.rows(), d);
    for (int c = 0; c < d; ++c) {
      EXPECT_NEAR(es.eigenvalues()(order[c]).imag(), 0.0, 1e-12);
      EXPECT_NEAR(got.eigenvalues(c), es.eigenvalues()(order[c]).real(), 1e-9);
      expected.col(c) = es.eigenvectors().col(order[c]).real();
    }
    EXPECT_LT(subspace_distance(got.vectors, expected), 1e-8) << "p=" << p << " d=" << d << " seed=" << seed;
    EXPECT_LE(got.residuals.maxCoeff(), 1e-10);
  }
}

INSTANTIATE_TEST_SUITE_P(Sizes, LeadingEigenvectorsTest,
                         ::testing::Values(std::make_tuple(4, 2, 0.05), std::make_tuple(10, 4, 0.05),
                                           std::make_tuple(20, 8, 0.05), std::make_tuple(10, 4, 0.3),
                                           std::make_tuple(25, 8, 0.01)));

// Sync matrix on a random connected patch graph with noisy but consistent
// relative transforms R_ij ≈ S_i S_jᵀ and random overlap weights.
SyncMatrix random_sync(int p, Eigen::Index d, double edge_prob, double noise, std::uint64_t seed) {
  Rng rng(seed);
  PatchGraph pg;
  pg.num_nodes = p;
  for (int k = 0; k < p; ++k) pg.patches.push_back({k});
  std::set<std::pair<int, int>> edges;
  for (int k = 1; k < p; ++k) edges.insert({static_cast<int>(rng.index(static_cast<std::uint64_t>(k))), k});
  for (int i = 0; i < p; ++i)
    for (int j = i + 1; j < p; ++j)
      if (rng.uniform() < edge_prob) edges.insert({i, j});
  std::vector<Matrix> s;
  for (int k = 0; k < p; ++k) s.push_back(random_orthogonal(d, rng));
  RelativeTransforms rel;
  for (auto [i, j] : edges) {
    pg.edges.push_back(PatchEdge{i, j, NodeList(static_cast<std::size_t>(d + 1 + rng.index(20)), 0)});
    rel.blocks.push_back(nearest_orthogonal(s[i] * s[j].transpose() + noise * rng.normal_matrix(d, d)));
    rel.degenerate.push_back(0);
  }
  return build_sync_matrix(rel, pg);
}

TEST(LeadingEigenvectorsTest, EverySolverPathMatchesDenseOracle) {
  std::set<std::string> methods;
  const std::vector<std::tuple<int, Eigen::Index, double>> shapes = {
      {8, 4, 0.6}, {40, 4, 0.0}, {60, 3, 0.15}, {12, 8, 0.1}, {50, 4, 0.02}, {150, 1, 0.02}, {100, 2, 0.03}};
  for (const auto& [p, d, prob] : shapes)
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const auto sync = random_sync(p, d, prob, 0.1, seed);
      ASSERT_LE(sync.matrix.rows(), 200);
      const auto got = leading_eigenvectors(sync, d);
      methods.insert(got.method);
      Eigen::EigenSolver<Matrix> es(Matrix(sync.matrix));
      std::vector<Eigen::Index> order(static_cast<std::size_t>(sync.matrix.rows()));
      std::iota(order.begin(), order.end(), 0);
      std::sort(order.begin(), order.end(),
                [&](Eigen::Index a, Eigen::Index b) { return es.eigenvalues()(a).real() > es.eigenvalues()(b).real(); });
      Matrix expected(sync.matrix.rows(), d);
      for (Eigen::Index c = 0; c < d; ++c) {
        expected.col(c) = es.eigenvectors().col(order[c]).real();
        EXPECT_NEAR(got.eigenvalues(c), es.eigenvalues()(order[c]).real(), 1e-9);
      }
      EXPECT_LT(subspace_distance(got.vectors, expected), 1e-8) << got.method << " p=" << p << " seed=" << seed;
      ASSERT_EQ(got.eigenvalues.size(), d + 1);
      // Ritz value d+1 is a lower bound on λ_{d+1}
      EXPECT_LE(got.eigenvalues(d), es.eigenvalues()(order[d]).real() + 1e-9);
    }
  EXPECT_EQ(methods, (std::set<std::string>{"lanczos", "shift-invert/dense", "shift-invert/sparse"}));
}

TEST(SynchroniseRotationsTest, OutputsAreOrthogonal) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto inst = generate_synthetic(400, 6, 8, 0.1, 7, seed);
    const auto rot = synchronise_rotations(inst.patches, inst.patch_graph);
    for (const auto& s : rot.transforms) EXPECT_LE(orthogonality_error(s), 1e-9);
  }
}

TEST(SynchroniseRotationsTest, TwoPatchesRecoverRelativeMap) {
  Rng rng(21);
  const Matrix x = rng.normal_matrix(20, 3);
  const Matrix q = random_orthogonal(3, rng);
  PatchGraph pg;
  pg.num_nodes = 20;
  NodeList all(20);
  std::iota(all.begin(), all.end(), NodeId{0});
  pg.patches = {all, all};
  pg.edges = {PatchEdge{0, 1, all}};
  std::vector<PatchEmbedding> patches(2);
  patches[0] = {0, all, x};
  patches[1] = {1, all, x * q};
  const auto rot = synchronise_rotations(patches, pg);
  // x_0 Ŝ_0 = x_1 Ŝ_1 = x Q Ŝ_1, so Ŝ_0 = Q Ŝ_1
  EXPECT_LE((rot.transforms[0] * rot.transforms[1].transpose() - q).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LE((rot.rotated[0].coords - rot.rotated[1].coords).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(SynchroniseRotationsTest, DisconnectedPatchGraphRejected) {
  auto inst = generate_synthetic(200, 2, 4, 0.0, 3, 1);
  inst.patch_graph.edges.erase(inst.patch_graph.edges.begin());
  inst.patch_graph.edges.pop_back();
  ASSERT_FALSE(inst.patch_graph.is_connected());
  EXPECT_THROW(synchronise_rotations(inst.patches, inst.patch_graph), Error);
}

TEST(SynchroniseRotationsTest, SmallOverlapNamesTheEdge) {
  auto inst = generate_synthetic(200, 3, 4, 0.0, 4, 1);
  auto& pg = inst.patch_graph;
  // shrink one overlap below d+1 by dropping shared nodes from patch 1
  const NodeList drop(pg.edges.front().overlap.begin(), pg.edges.front().overlap.begin() + 2);
  for (auto& e : inst.patches)
    if (e.patch_index == 1) {
      PatchEmbedding trimmed{1, {}, Matrix(0, 3)};
      std::vector<Eigen::Index> keep;
      for (std::size_t r = 0; r < e.node_ids.size(); ++r)
        if (std::find(drop.begin(), drop.end(), e.node_ids[r]) == drop.end()) {
          trimmed.node_ids.push_back(e.node_ids[r]);
          keep.push_back(static_cast<Eigen::Index>(r));
        }
      trimmed.coords = e.coords(keep, Eigen::all);
      e = trimmed;
    }
  pg.patches[1] = inst.patches[1].node_ids;
  pg.refresh_overlaps();
  try {
    synchronise_rotations(inst.patches, pg);
    FAIL() << "expected an error";
  } catch (const Error& err) {
    EXPECT_NE(std::string(err.what()).find("patch edge 0-1"), std::string::npos) << err.what();
  }
}

TEST(SolveTranslationsTest, MatchesDenseLeastSquares) {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const int p = 2 + static_cast<int>(rng.index(12));
    PatchGraph pg;
    pg.num_nodes = p;
    for (int k = 0; k < p; ++k) pg.patches.push_back({k});
    // random connected edge set: a random tree plus extras
    std::set<std::pair<int, int>> edges;
    for (int k = 1; k < p; ++k) {
      const int parent = static_cast<int>(rng.index(static_cast<std::uint64_t>(k)));
      edges.insert({parent, k});
    }
    for (int extra = 0; extra < p; ++extra) {
      int a = static_cast<int>(rng.index(p)), b = static_cast<int>(rng.index(p));
      if (a != b) edges.insert({std::min(a, b), std::max(a, b)});
    }
    for (auto [i, j] : edges) pg.edges.push_back(PatchEdge{i, j, {}});

    const auto m = static_cast<Eigen::Index>(pg.edges.size());
    const Matrix c = rng.normal_matrix(m, 3);
    Matrix b = Matrix::Zero(m, p);
    for (Eigen::Index e = 0; e < m; ++e) {
      b(e, pg.edges[e].j) = 1;
      b(e, pg.edges[e].i) = -1;
    }
    // minimum-norm solution is orthogonal to the all-ones null vector
    const Matrix expected = b.completeOrthogonalDecomposition().solve(c);
    const auto got = solve_translations(c, pg, 1e-12);
    EXPECT_LE((got.translations - expected).cwiseAbs().maxCoeff(), 1e-9) << "trial " << trial;
    EXPECT_LE(got.translations.colwise().sum().cwiseAbs().maxCoeff(), 1e-12 * p * 10);
    for (const auto& hist : got.history)
      for (std::size_t k = 1; k < hist.size(); ++k) EXPECT_LE(hist[k], hist[k - 1] * (1 + 1e-12));
  }
}

TEST(SolveTranslationsTest, IterationLimitReported) {
  const auto inst = generate_synthetic(400, 2, 10, 0.0, 3, 2);
  const Matrix c = Matrix::Random(static_cast<Eigen::Index>(inst.patch_graph.edges.size()), 2);
  EXPECT_THROW(solve_translations(c, inst.patch_graph, 1e-14, 1), Error);
}

TEST(SolveTranslationsTest, RecoversPlantedOffsets) {
  const auto inst = generate_synthetic(300, 3, 6, 0.0, 4, 5);
  // with identity rotations planted, targets are exact translation differences
  auto patches = inst.patches;
  for (int k = 0; k < 6; ++k)
    patches[k].coords = (patches[k].coords.rowwise() - inst.translations.row(k)) * inst.rotations[k];
  Matrix t = Matrix::Random(6, 3) * 4;
  for (int k = 0; k < 6; ++k) patches[k].coords.rowwise() -= t.row(k);
  const auto got = solve_translations(patches, inst.patch_graph);
  const Matrix centered_t = t.rowwise() - t.colwise().mean();
  EXPECT_LE((got.translations - centered_t).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(AlignTest, NoiseFreeRecovery) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto inst = generate_synthetic(500, 5, 8, 0.0, 6, seed);
    const auto result = align(inst.patches, inst.patch_graph);
    EXPECT_LT(procrustes_distance(result.global, inst.ground_truth), 1e-8);
    // every patch is brought to the same frame: S_kᵀ Ŝ_k is one common Q
    const Matrix q = inst.rotations[0].transpose() * result.transforms[0];
    for (int k = 1; k < 8; ++k)
      EXPECT_LE((inst.rotations[k].transpose() * result.transforms[k] - q).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(AlignTest, CommonRigidMotionOfInputsIsAbsorbed) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto inst = generate_synthetic(300, 4, 6, 0.02, 5, seed);
    Rng rng(seed + 100);
    const Matrix q = random_orthogonal(4, rng);
    const Matrix t = rng.normal_matrix(1, 4) * 10;
    auto moved = inst.patches;
    for (auto& e : moved) e.coords = (e.coords * q).rowwise() + t.row(0);
    const auto a = align(inst.patches, inst.patch_graph);
    const auto b = align(moved, inst.patch_graph);
    EXPECT_LE(procrustes_distance(a.global, b.global), 1e-8);
    // q Ŝ'_k = Ŝ_k G for one common G, so Ŝ_0 Ŝ_kᵀ = q Ŝ'_0 Ŝ'_kᵀ qᵀ
    for (int k = 1; k < 6; ++k) {
      const Matrix ra = a.transforms[0] * a.transforms[k].transpose();
      const Matrix rb = q * b.transforms[0] * b.transforms[k].transpose() * q.transpose();
      EXPECT_LE((ra - rb).cwiseAbs().maxCoeff(), 1e-8);
    }
  }
}

TEST(AlignTest, SinglePatchIsIdentity) {
  const auto inst = generate_synthetic(50, 3, 1, 0.0, 4, 3);
  const auto result = align(inst.patches, inst.patch_graph);
  EXPECT_EQ(result.transforms[0], Matrix::Identity(3, 3));
  EXPECT_EQ(result.global, inst.patches[0].coords);
}

TEST(AlignTest, ParallelMatchesSequential) {
  const auto inst = generate_synthetic(600, 4, 12, 0.05, 5, 8);
  AlignOptions seq, par;
  par.jobs = 4;
  const auto a = align(inst.patches, inst.patch_graph, seq);
  const auto b = align(inst.patches, inst.patch_graph, par);
  EXPECT_EQ(a.global, b.global);
}

TEST(AlignTest, EmbeddingMismatchRejected) {
  auto inst = generate_synthetic(100, 2, 3, 0.0, 3, 1);
  auto bad = inst.patches;
  bad[1].coords.conservativeResize(Eigen::NoChange, 3);
  EXPECT_THROW(align(bad, inst.patch_graph), Error);
  bad = inst.patches;
  bad[2].coords(0, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(align(bad, inst.patch_graph), Error);
  bad = inst.patches;
  bad.pop_back();
  EXPECT_THROW(align(bad, inst.patch_graph), Error);
}

TEST(NoTransBaselineTest, AveragesRawCoordinates) {
  PatchGraph pg;
  pg.num_nodes = 3;
  pg.patches = {{0, 1}, {1, 2}};
  pg.edges = {PatchEdge{0, 1, {1}}};
  std::vector<PatchEmbedding> patches(2);
  patches[0] = {0, {0, 1}, (Matrix(2, 1) << 1, 2).finished()};
  patches[1] = {1, {1, 2}, (Matrix(2, 1) << 4, 6).finished()};
  const Matrix out = no_trans_baseline(patches, pg);
  EXPECT_EQ(out, (Matrix(3, 1) << 1, 3, 6).finished());
}

}  // namespace
}  // namespace l2g
