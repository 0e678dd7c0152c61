#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <optional>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "l2g/common.hpp"

namespace l2g {

using Edge = std::pair<NodeId, NodeId>;

/// Immutable undirected graph in compressed adjacency form. Neighbour lists
/// are strictly sorted, symmetric and free of self-loops.
class Graph {
 public:
  Graph() : offsets_{0} {}

  /// Builds from an arbitrary edge list over ids 0..n-1. Duplicates (in either
  /// orientation) are merged and self-loops dropped. When weights are given,
  /// the first occurrence of an edge wins.
  static Graph from_edges(NodeId n, std::span<const Edge> edges,
                          std::span<const double> weights = {});

  NodeId num_nodes() const { return static_cast<NodeId>(offsets_.size()) - 1; }
  std::size_t num_edges() const { return targets_.size() / 2; }

  std::span<const NodeId> neighbors(NodeId v) const {
    return {targets_.data() + offsets_[v], targets_.data() + offsets_[v + 1]};
  }
  std::size_t degree(NodeId v) const { return offsets_[v + 1] - offsets_[v]; }

  bool has_edge(NodeId u, NodeId v) const;

  bool weighted() const { return !weights_.empty(); }
  /// Weights aligned with targets(); empty for unweighted graphs.
  std::span<const double> edge_weights(NodeId v) const;

  /// Each undirected edge once, as (u, v) with u < v, in lexicographic order.
  std::vector<Edge> edges() const;

  std::span<const std::size_t> offsets() const { return offsets_; }
  std::span<const NodeId> targets() const { return targets_; }

  /// Full scan of the structural invariants; throws Error on violation.
  void validate() const;

 private:
  std::vector<std::size_t> offsets_;
  std::vector<NodeId> targets_;
  std::vector<double> weights_;
};

/// Relabelling between an original id space and a compacted one.
struct NodeMapping {
  std::unordered_map<NodeId, NodeId> forward;  // old -> new, partial
  NodeList backward;                           // new -> old, total

  NodeId size() const { return static_cast<NodeId>(backward.size()); }
  std::optional<NodeId> to_new(NodeId old_id) const;
  NodeId to_old(NodeId new_id) const { return backward.at(static_cast<std::size_t>(new_id)); }

  static NodeMapping identity(NodeId n);
  /// Applies `first` then `second`.
  static NodeMapping compose(const NodeMapping& first, const NodeMapping& second);
};

struct LoadedGraph {
  Graph graph;
  NodeMapping mapping;  // file id -> compact id
};

/// Reads "u v" lines ('#' comments and blank lines skipped). Ids are compacted
/// in order of first appearance.
LoadedGraph load_edge_list(const std::filesystem::path& path);
LoadedGraph parse_edge_list(std::istream& in, const std::string& source_name = "<stream>");

void write_edge_list(const Graph& g, const std::filesystem::path& path);

void write_mapping(const NodeMapping& mapping, const std::filesystem::path& path);
NodeMapping read_mapping(const std::filesystem::path& path);

struct Subgraph {
  Graph graph;
  NodeMapping mapping;  // parent id -> local id
};

/// Induced subgraph on `nodes` (sorted, unique); local ids follow list order.
Subgraph induced_subgraph(const Graph& g, std::span<const NodeId> nodes);

/// Component label per node (labels 0.. in order of smallest member id).
std::vector<NodeId> connected_components(const Graph& g, NodeId* num_components = nullptr);

/// Largest component; ties go to the component holding the smallest id.
Subgraph largest_connected_component(const Graph& g);

}  // namespace l2g
