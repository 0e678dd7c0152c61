#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "l2g/graph.hpp"
#include "l2g/random.hpp"

namespace l2g::testing {

inline Graph path_graph(NodeId n) {
  std::vector<Edge> e;
  for (NodeId v = 0; v + 1 < n; ++v) e.emplace_back(v, v + 1);
  return Graph::from_edges(n, e);
}

inline Graph complete_graph(NodeId n) {
  std::vector<Edge> e;
  for (NodeId u = 0; u < n; ++u)
    for (NodeId v = u + 1; v < n; ++v) e.emplace_back(u, v);
  return Graph::from_edges(n, e);
}

/// `count` cliques of size `size` on consecutive ids, optionally chained by
/// one edge between the last node of clique c and the first of clique c+1.
inline Graph clique_chain(int count, NodeId size, bool chained) {
  std::vector<Edge> e;
  for (int c = 0; c < count; ++c) {
    const NodeId base = c * size;
    for (NodeId u = 0; u < size; ++u)
      for (NodeId v = u + 1; v < size; ++v) e.emplace_back(base + u, base + v);
    if (chained && c + 1 < count) e.emplace_back(base + size - 1, base + size);
  }
  return Graph::from_edges(count * size, e);
}

/// Erdős–Rényi graph with edge probability `prob`.
inline Graph random_graph(NodeId n, double prob, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Edge> e;
  for (NodeId u = 0; u < n; ++u)
    for (NodeId v = u + 1; v < n; ++v)
      if (rng.uniform() < prob) e.emplace_back(u, v);
  return Graph::from_edges(n, e);
}

/// Random connected graph: a random spanning tree plus extra random edges.
inline Graph random_connected_graph(NodeId n, std::size_t extra, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Edge> e;
  for (NodeId v = 1; v < n; ++v) e.emplace_back(static_cast<NodeId>(rng.index(static_cast<std::uint64_t>(v))), v);
  for (std::size_t k = 0; k < extra; ++k) {
    const auto u = static_cast<NodeId>(rng.index(static_cast<std::uint64_t>(n)));
    const auto v = static_cast<NodeId>(rng.index(static_cast<std::uint64_t>(n)));
    if (u != v) e.emplace_back(u, v);
  }
  return Graph::from_edges(n, e);
}

/// Planted-partition graph: `blocks` groups of `size` nodes, dense inside,
/// sparse across, with a chain of cross edges keeping it connected.
inline Graph planted_partition(int blocks, NodeId size, double p_in, double p_out, std::uint64_t seed) {
  Rng rng(seed);
  const NodeId n = blocks * size;
  std::vector<Edge> e;
  for (NodeId u = 0; u < n; ++u)
    for (NodeId v = u + 1; v < n; ++v)
      if (rng.uniform() < (u / size == v / size ? p_in : p_out)) e.emplace_back(u, v);
  for (NodeId v = 1; v < n; ++v) e.emplace_back(v - 1, v);
  return Graph::from_edges(n, e);
}

/// Fresh empty directory under the system temp dir, private to this process
/// so that tests run in parallel do not collide.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("l2g_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace l2g::testing
