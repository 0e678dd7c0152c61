#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "l2g/alignment.hpp"
#include "l2g/graph.hpp"
#include "l2g/local_embed.hpp"
#include "l2g/patch_graph.hpp"
#include "l2g/random.hpp"

namespace l2g {

struct AucReport {
  double auc = 0.0;
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::uint64_t seed = 0;
};

/// Probability that a positive outscores a negative, ties counted ½,
/// computed from the rank sum of the positives.
double auc_from_scores(std::span<const double> positives, std::span<const double> negatives);

/// `count` distinct unordered non-adjacent pairs (u < v), drawn uniformly by
/// rejection. Throws if fewer non-edges exist.
std::vector<Edge> sample_non_edges(const Graph& g, std::size_t count, std::uint64_t seed);

/// Edge reconstruction AUC with inner-product scores: every edge against as
/// many sampled non-edges.
AucReport auc_reconstruction(const Matrix& embedding, const Graph& g, std::uint64_t seed);

struct SyntheticInstance {
  Matrix ground_truth;                  // n × d
  PatchGraph patch_graph;               // ring of overlapping blocks
  std::vector<Matrix> rotations;        // planted S_k
  Matrix translations;                  // planted t_k, p × d
  std::vector<PatchEmbedding> patches;  // X|P_k S_kᵀ + 1 t_kᵀ + σ noise
  double sigma = 0.0;
  std::size_t min_overlap = 0;
  std::uint64_t seed = 0;
};

/// Ground truth X ~ N(0, 1) split into p contiguous blocks on a ring; patch k
/// is block k plus ceil(l/2) nodes from each ring neighbour. Patch edges join
/// every pair sharing at least l nodes. The noise matrix depends only on the
/// seed, so instances differing in σ alone share X, S_k, t_k and noise shape.
SyntheticInstance generate_synthetic(Eigen::Index n, Eigen::Index d, int p, double sigma, std::size_t overlap,
                                     std::uint64_t seed);

/// Uniformly distributed orthogonal matrix (reflections included).
Matrix random_orthogonal(Eigen::Index d, Rng& rng);

/// Graph joining each row of x to the `neighbours` other rows with the largest
/// inner product, symmetrised.
Graph dot_product_graph(const Matrix& x, int neighbours);

struct ScenarioResult {
  std::string scenario;  // "full", "l2g" or "no-trans"
  Eigen::Index dim = 0;
  AucReport report;
};

struct ScenarioComparison {
  std::vector<ScenarioResult> rows;
  AlignmentResult alignment;
};

/// Scores "full" (the given whole-graph embedding), "l2g" (aligned patch
/// embeddings) and "no-trans" (unaligned centroids) against the same negative
/// sample.
ScenarioComparison evaluate_scenarios(const Graph& g, const Matrix& full, const std::vector<PatchEmbedding>& patches,
                                      const PatchGraph& pg, std::uint64_t seed, const AlignOptions& options = {});

/// evaluate_scenarios with spectral embeddings of the whole graph and of every
/// patch.
ScenarioComparison compare_scenarios(const Graph& g, const PatchGraph& pg, Eigen::Index d, std::uint64_t seed,
                                     const AlignOptions& options = {}, const SpectralOptions& spectral = {});

/// Tab-separated "scenario d auc positives negatives seed" with a header line.
void write_scenario_table(const std::vector<ScenarioResult>& rows, std::ostream& out);

/// One line per dimension: "d full l2g no-trans" (AUC values).
void write_auc_series(const std::vector<ScenarioResult>& rows, std::ostream& out);

}  // namespace l2g
