#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "l2g/graph.hpp"
#include "l2g/patch_graph.hpp"

namespace l2g {

/// Coordinates of one patch: row r holds node node_ids[r].
struct PatchEmbedding {
  int patch_index = 0;
  NodeList node_ids;  // sorted, equal to the patch node set
  Matrix coords;      // |node_ids| × d

  Eigen::Index dim() const { return coords.cols(); }
};

struct SpectralOptions {
  // components up to this size are decomposed densely
  Eigen::Index dense_limit = 4000;
  double tol = 1e-10;
};

/// d-dimensional embedding from the eigenpairs of D^-1/2 A D^-1/2 largest in
/// |λ|: coords = V diag(|λ|^1/2). Each eigenvector is signed so that its entry
/// of largest magnitude is positive (lowest index on ties). Isolated nodes
/// get zero rows.
Matrix spectral_embed(const Graph& g, Eigen::Index d, const SpectralOptions& options = {});

/// Eigenvalues matching the columns of spectral_embed (signed, |λ| descending).
Vector spectral_eigenvalues(const Graph& g, Eigen::Index d, const SpectralOptions& options = {});

/// Embeds every patch's induced subgraph independently.
std::vector<PatchEmbedding> embed_all_patches(const Graph& g, const PatchGraph& pg, Eigen::Index d, int jobs = 1,
                                              const SpectralOptions& options = {});

// Binary embedding files: "L2GE", u32 version, u64 n, u64 d, n u64 node ids,
// n·d little-endian f64 in row-major order.
inline constexpr std::uint32_t kEmbeddingFormatVersion = 1;

struct EmbeddingFile {
  NodeList node_ids;
  Matrix coords;
};

void write_embedding(const std::filesystem::path& path, const NodeList& node_ids, const Matrix& coords);
EmbeddingFile read_embedding(const std::filesystem::path& path);

std::filesystem::path patch_embedding_path(const std::filesystem::path& dir, int patch_index);

void export_embeddings(const std::vector<PatchEmbedding>& embeddings, const std::filesystem::path& dir);

/// Loads paths[k] as the embedding of patch k, checking dimension agreement,
/// node-set equality and finiteness.
std::vector<PatchEmbedding> import_embeddings(const std::vector<std::filesystem::path>& paths, const PatchGraph& pg);

}  // namespace l2g
