#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/SparseCore>

#include "l2g/local_embed.hpp"
#include "l2g/patch_graph.hpp"
#include "l2g/procrustes.hpp"

namespace l2g {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// One R_ij per patch edge (i < j), aligned with PatchGraph::edges.
/// R_ji is R_ijᵀ by definition and never stored.
struct RelativeTransforms {
  std::vector<Matrix> blocks;
  std::vector<char> degenerate;  // overlap nearly rank deficient

  /// R_ij for edge (i, j), or R_ji = R_ijᵀ when `reversed`.
  Matrix block(std::size_t edge, bool reversed = false) const {
    return reversed ? Matrix(blocks[edge].transpose()) : blocks[edge];
  }
};

/// Estimates R_ij for every patch edge from the coordinates of the overlap.
RelativeTransforms estimate_relative_transforms(const std::vector<PatchEmbedding>& embeddings, const PatchGraph& pg,
                                                int jobs = 1);

/// Block matrix M with M_ij = w_ij R_ij / Σ_j w_ij, w_ij = |P_i ∩ P_j|.
struct SyncMatrix {
  SparseMatrix matrix;  // pd × pd
  Vector degree;        // Σ_j w_ij per patch
  Eigen::Index dim = 0;

  int num_patches() const { return static_cast<int>(degree.size()); }
};

SyncMatrix build_sync_matrix(const RelativeTransforms& rel, const PatchGraph& pg);

struct SyncEigenvectors {
  Matrix vectors;      // pd × d, eigenvectors of M (block i = rows i*d..)
  Vector eigenvalues;  // λ_1 ≥ ... ≥ λ_d, then a Ritz estimate of λ_{d+1} when available
  Vector residuals;    // ‖Mu − λu‖ / ‖u‖ per returned vector
  int iterations = 0;
  std::string method;  // "shift-invert/dense", "shift-invert/sparse" or "lanczos"
  Warnings warnings;
};

/// d leading eigenvectors of M, computed on the similar symmetric matrix
/// D^-1/2 W D^-1/2 and mapped back by D^-1/2. When the patch graph admits a
/// cheap Cholesky factor the iteration runs on (σI − A)^-1 with σ just above
/// 1; otherwise, or if that fails to reach `tol`, on A directly.
SyncEigenvectors leading_eigenvectors(const SyncMatrix& sync, Eigen::Index d, double tol = 1e-10, int max_iter = 0,
                                      std::uint64_t seed = 0x5EED);

/// Nearest orthogonal matrix to a d × d block.
Matrix project_orthogonal(const Matrix& block);

struct AlignOptions {
  double tol_eigen = 1e-10;
  double tol_lsq = 1e-10;
  int max_iter_eigen = 0;  // 0 = 50 d + 1000
  int max_iter_lsq = 0;    // 0 = 100 p
  std::uint64_t seed = 0x5EED;
  int jobs = 1;
};

struct RotationSync {
  std::vector<Matrix> transforms;         // Ŝ_k
  std::vector<PatchEmbedding> rotated;    // X^(k) Ŝ_k
  SyncEigenvectors eigen;
  std::size_t sync_nonzeros = 0;
  Warnings warnings;
};

RotationSync synchronise_rotations(const std::vector<PatchEmbedding>& embeddings, const PatchGraph& pg,
                                   const AlignOptions& options = {});

struct TranslationSolve {
  Matrix translations;                       // p × d, column means zero
  std::vector<std::vector<double>> history;  // ‖BT − C‖ per iteration, per column
  int iterations = 0;                        // worst column
  double relative_residual = 0.0;            // worst column, ‖Bᵀ(C − BT)‖ / ‖BᵀC‖
};

/// Per-edge mean coordinate differences over the overlap (rows of C).
Matrix translation_targets(const std::vector<PatchEmbedding>& rotated, const PatchGraph& pg);

/// Least-squares patch translations min ‖BT − C‖ by conjugate gradients on
/// the normal equations, gauge-fixed to zero column means.
TranslationSolve solve_translations(const std::vector<PatchEmbedding>& rotated, const PatchGraph& pg,
                                    double tol = 1e-10, int max_iter = 0);
TranslationSolve solve_translations(const Matrix& targets, const PatchGraph& pg, double tol = 1e-10,
                                    int max_iter = 0);

/// Centroid over patches of (aligned coordinate + patch translation).
Matrix stitch(const std::vector<PatchEmbedding>& rotated, const Matrix& translations, const PatchGraph& pg);

struct AlignmentResult {
  std::vector<Matrix> transforms;  // Ŝ_k
  Matrix translations;             // p × d
  Matrix global;                   // n × d
  std::vector<int> coverage;       // patches per node
  Vector eigenvalues;
  std::size_t sync_nonzeros = 0;
  int eigen_iterations = 0;
  std::string eigen_method;
  int lsq_iterations = 0;
  double mean_overlap = 0.0;
  Warnings warnings;
};

AlignmentResult align(const std::vector<PatchEmbedding>& embeddings, const PatchGraph& pg,
                      const AlignOptions& options = {});

/// Centroid of the raw patch coordinates, without any alignment.
Matrix no_trans_baseline(const std::vector<PatchEmbedding>& embeddings, const PatchGraph& pg);

/// Per patch: d rows of Ŝ_k followed by the translation row.
void write_transforms(const AlignmentResult& result, const std::filesystem::path& path);

}  // namespace l2g
