#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "l2g/graph.hpp"
#include "l2g/partition.hpp"

namespace l2g {

struct PatchEdge {
  int i = 0;  // i < j
  int j = 0;
  NodeList overlap;  // sorted P_i ∩ P_j

  std::size_t overlap_weight() const { return overlap.size(); }
};

/// Graph whose vertices are (possibly overlapping) node sets of an
/// underlying graph with `num_nodes` nodes.
struct PatchGraph {
  NodeId num_nodes = 0;
  std::vector<NodeList> patches;  // each sorted
  std::vector<PatchEdge> edges;   // sorted by (i, j), unique

  int num_patches() const { return static_cast<int>(patches.size()); }
  /// Neighbouring patch indices and edge positions, per patch.
  std::vector<std::vector<std::pair<int, std::size_t>>> adjacency() const;
  bool is_connected() const;
  /// Recomputes every edge's overlap from the current patch sets.
  void refresh_overlaps();
  /// Patches per node; zero marks an uncovered node.
  std::vector<int> coverage() const;
  /// Throws on unsorted patches, bad edges or an incomplete cover.
  void validate() const;
};

/// Patch graph with patches = clusters and an edge wherever a graph edge
/// crosses between two clusters.
PatchGraph build_patch_graph(const Graph& g, const Partition& part);

struct SparsifierWeights {
  std::vector<double> conductance;  // c_ij per edge of the patch graph
  std::vector<double> resistance;   // r_ij
  std::vector<double> sampling;     // r_ij * c_ij
};

/// c_ij = cut(P_i, P_j) / min(vol(P_i), vol(P_j)), where vol counts ordered
/// pairs (u, v) with u in the patch, i.e. the sum of member degrees.
std::vector<double> conductance_weights(const Graph& g, const PatchGraph& pg);

/// Exact effective resistance across every patch edge in the patch graph
/// weighted by `conductance`.
std::vector<double> effective_resistance(const PatchGraph& pg, const std::vector<double>& conductance);

SparsifierWeights sparsifier_weights(const Graph& g, const PatchGraph& pg);

/// Maximum spanning tree under the sampling weights plus
/// min((k-1)p + 1, |E_p| - (p-1)) further edges drawn without replacement.
PatchGraph sparsify_patch_graph(const PatchGraph& pg, const SparsifierWeights& weights, int target_degree,
                                std::uint64_t seed);

struct ExpandOptions {
  std::size_t min_overlap = 0;  // l
  std::size_t max_overlap = 0;  // u
  std::uint64_t seed = 0;
  int jobs = 1;
};

/// Grows each patch into its patch-graph neighbours' clusters by
/// breadth-first frontiers until every edge carries at least
/// 2*ceil(l/2) shared nodes, never taking more than floor(u/2) nodes of a
/// single neighbouring cluster.
PatchGraph expand_patches(const Graph& g, const PatchGraph& pg, const ExpandOptions& options);

/// Patch files (one node id per line) named patch_<k>.nodes and a patch
/// graph file with lines "i j w_ij".
void write_patch_graph(const PatchGraph& pg, const std::filesystem::path& dir);
PatchGraph read_patch_graph(const std::filesystem::path& dir);

}  // namespace l2g
