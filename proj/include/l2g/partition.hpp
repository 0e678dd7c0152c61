#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "l2g/graph.hpp"

namespace l2g {

/// Disjoint cover of the node set by `num_clusters()` clusters.
struct Partition {
  std::vector<int> assignment;         // node -> cluster
  std::vector<NodeList> clusters;      // cluster -> sorted members

  int num_clusters() const { return static_cast<int>(clusters.size()); }

  static Partition from_assignment(std::vector<int> assignment, int num_clusters);
  /// Throws unless clusters cover 0..n-1 disjointly and have at least min_size members.
  void validate(NodeId n, std::size_t min_size = 0) const;
};

struct FennelOptions {
  int num_clusters = 1;
  std::size_t min_size = 1;
  double gamma = 1.5;
  double load_factor = 1.1;
  std::uint64_t seed = 0;
  bool shuffle = false;  // stream in seeded random order instead of id order
};

/// Streaming FENNEL assignment followed by a repair pass that tops up
/// clusters below `min_size` from the largest clusters.
Partition fennel_partition(const Graph& g, const FennelOptions& options);

struct PartitionQuality {
  std::size_t cut_edges = 0;
  std::vector<std::size_t> sizes;
};

PartitionQuality partition_quality(const Graph& g, const Partition& part);

void write_partition(const Partition& part, const std::filesystem::path& path);
Partition read_partition(const std::filesystem::path& path);

}  // namespace l2g
