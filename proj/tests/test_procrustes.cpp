#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "l2g/evaluation.hpp"
#include "l2g/procrustes.hpp"
#include "l2g/random.hpp"

namespace l2g {
namespace {

Matrix rotation2(double theta, bool reflect) {
  Matrix r(2, 2);
  r << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  if (reflect) r.col(1) = -r.col(1);
  return r;
}

TEST(RelativeTransformTest, RecoversPlantedOrthogonalMap) {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng.index(8));
    const Matrix q = random_orthogonal(d, rng);
    const Matrix xi = rng.normal_matrix(30, d);
    // x_j = x_i Q, so x_i = x_j Qᵀ and the estimate is Q
    const Matrix xj = (xi * q).rowwise() + rng.normal_matrix(1, d).row(0);
    const auto rel = estimate_relative_transform(xi, xj);
    EXPECT_LE((rel.rotation - q).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_FALSE(rel.degenerate);
  }
}

TEST(RelativeTransformTest, OptimalOverO2Grid) {
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix xi = rng.normal_matrix(12, 2);
    const Matrix xj = xi * rotation2(rng.uniform() * 6.28, trial % 2 == 0) + 0.3 * rng.normal_matrix(12, 2);
    const Matrix ci = centered(xi), cj = centered(xj);
    const auto rel = estimate_relative_transform(xi, xj);
    const double achieved = (cj * rel.rotation.transpose() - ci).norm();
    double grid_best = INFINITY;
    for (int k = 0; k < 20000; ++k)
      for (bool reflect : {false, true}) {
        const Matrix r = rotation2(2 * std::numbers::pi * k / 20000, reflect);
        grid_best = std::min(grid_best, (cj * r.transpose() - ci).norm());
      }
    EXPECT_LE(achieved, grid_best + 1e-12);
    EXPECT_GE(achieved, grid_best - 1e-3);  // grid resolution
  }
}

TEST(RelativeTransformTest, TooSmallOverlapRejected) {
  const Matrix x = Matrix::Random(3, 3);
  EXPECT_THROW(estimate_relative_transform(x, x), Error);
  EXPECT_THROW(estimate_relative_transform(Matrix::Random(5, 2), Matrix::Random(4, 2)), Error);
}

TEST(RelativeTransformTest, CollinearOverlapIsFlagged) {
  Matrix x(5, 2);
  x << 0, 0, 1, 1, 2, 2, 3, 3, 4, 4;
  EXPECT_TRUE(estimate_relative_transform(x, x).degenerate);
}

TEST(NearestOrthogonalTest, ProjectsAndPreservesOrthogonal) {
  Rng rng(3);
  const Matrix q = random_orthogonal(5, rng);
  EXPECT_LE((nearest_orthogonal(q) - q).cwiseAbs().maxCoeff(), 1e-12);
  const Matrix m = q * 3.0 + 0.1 * rng.normal_matrix(5, 5);
  EXPECT_LE(orthogonality_error(nearest_orthogonal(m)), 1e-12);
  EXPECT_THROW(nearest_orthogonal(Matrix::Zero(3, 3)), Error);
  EXPECT_THROW(nearest_orthogonal(Matrix::Ones(2, 3)), Error);
}

TEST(NearestOrthogonalTest, ClosestOnO2Grid) {
  Rng rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix m = rng.normal_matrix(2, 2);
    const double achieved = (nearest_orthogonal(m) - m).norm();
    double grid_best = INFINITY;
    for (int k = 0; k < 20000; ++k)
      for (bool reflect : {false, true})
        grid_best = std::min(grid_best, (rotation2(2 * std::numbers::pi * k / 20000, reflect) - m).norm());
    EXPECT_LE(achieved, grid_best + 1e-12);
  }
}

TEST(ProcrustesDistanceTest, ZeroOnRigidMotionOrbit) {
  Rng rng(5);
  const Matrix x = rng.normal_matrix(50, 4);
  EXPECT_LT(procrustes_distance(x, x), 1e-12);
  const Matrix q = random_orthogonal(4, rng);
  const Matrix y = (x * q.transpose()).rowwise() + rng.normal_matrix(1, 4).row(0);
  const auto fit = procrustes(x, y);
  EXPECT_LT(fit.distance, 1e-10);
  EXPECT_LE((fit.rotation - q).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(ProcrustesDistanceTest, Symmetric) {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix x = rng.normal_matrix(30, 3), y = rng.normal_matrix(30, 3);
    EXPECT_NEAR(procrustes_distance(x, y), procrustes_distance(y, x), 1e-10);
  }
}

TEST(ProcrustesDistanceTest, NoiseBound) {
  // Monte-Carlo over 20 seeds at n = 1000: the distance stays below σ√d and
  // the worst ratio observed is about 0.997, so σ√d·1.1 has ample margin.
  for (double sigma : {0.01, 0.1}) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng(seed);
      const Matrix x = rng.normal_matrix(1000, 8);
      const Matrix y = x + sigma * rng.normal_matrix(1000, 8);
      EXPECT_LE(procrustes_distance(x, y), sigma * std::sqrt(8.0) * 1.1);
    }
  }
}

TEST(ProcrustesDistanceTest, DegenerateInputIsFlagged) {
  Matrix x = Matrix::Zero(10, 2);
  x.col(0).setLinSpaced(10, 0, 1);
  EXPECT_TRUE(procrustes(x, x).degenerate);
  EXPECT_THROW(procrustes(Matrix::Zero(2, 2), Matrix::Zero(2, 2)), Error);
}

TEST(ProcrustesDistanceTest, WorksInSinglePrecision) {
  const Eigen::MatrixXf x = Eigen::MatrixXf::Random(20, 3);
  EXPECT_LT(procrustes_distance(x, x), 1e-5f);
}

}  // namespace
}  // namespace l2g
