#include "l2g/partition.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "l2g/random.hpp"

namespace l2g {

Partition Partition::from_assignment(std::vector<int> assignment, int num_clusters) {
  Partition part;
  part.clusters.assign(static_cast<std::size_t>(num_clusters), {});
  for (std::size_t v = 0; v < assignment.size(); ++v) {
    const int c = assignment[v];
    if (c < 0 || c >= num_clusters)
      throw Error("partition: node " + std::to_string(v) + " has invalid cluster " + std::to_string(c));
    part.clusters[static_cast<std::size_t>(c)].push_back(static_cast<NodeId>(v));
  }
  part.assignment = std::move(assignment);
  return part;
}

void Partition::validate(NodeId n, std::size_t min_size) const {
  if (static_cast<NodeId>(assignment.size()) != n) throw Error("partition: assignment does not cover all nodes");
  std::size_t total = 0;
  for (int k = 0; k < num_clusters(); ++k) {
    const auto& c = clusters[static_cast<std::size_t>(k)];
    if (c.size() < min_size)
      throw Error("partition: cluster " + std::to_string(k) + " has " + std::to_string(c.size()) +
                  " nodes, below minimum " + std::to_string(min_size));
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (i > 0 && c[i - 1] >= c[i]) throw Error("partition: cluster lists must be sorted and unique");
      if (c[i] < 0 || c[i] >= n || assignment[static_cast<std::size_t>(c[i])] != k)
        throw Error("partition: cluster " + std::to_string(k) + " disagrees with assignment");
    }
    total += c.size();
  }
  if (total != static_cast<std::size_t>(n)) throw Error("partition: clusters are not a disjoint cover");
}

namespace {

// Moves nodes from the largest clusters into clusters below min_size,
// boundary nodes with the highest external/internal degree ratio first.
void repair_min_size(const Graph& g, std::vector<int>& assignment, std::vector<std::size_t>& sizes,
                     std::size_t min_size) {
  const int p = static_cast<int>(sizes.size());
  for (;;) {
    int receiver = -1;
    for (int k = 0; k < p; ++k)
      if (sizes[k] < min_size) {
        receiver = k;
        break;
      }
    if (receiver < 0) return;

    int donor = -1;
    for (int k = 0; k < p; ++k)
      if (sizes[k] > min_size && (donor < 0 || sizes[k] > sizes[donor])) donor = k;
    if (donor < 0) throw Error("fennel_partition: repair pass found no donor cluster");

    NodeId best = -1;
    double best_ratio = -1.0;
    for (NodeId v = 0; v < g.num_nodes(); ++v) {
      if (assignment[v] != donor) continue;
      std::size_t internal = 0, external = 0;
      for (NodeId w : g.neighbors(v)) (assignment[w] == donor ? internal : external)++;
      double ratio = 0.0;
      if (external > 0)
        ratio = internal == 0 ? std::numeric_limits<double>::infinity()
                              : static_cast<double>(external) / static_cast<double>(internal);
      if (best < 0 || ratio > best_ratio) {
        best = v;
        best_ratio = ratio;
      }
    }
    assignment[best] = receiver;
    --sizes[donor];
    ++sizes[receiver];
  }
}

}  // namespace

Partition fennel_partition(const Graph& g, const FennelOptions& options) {
  const NodeId n = g.num_nodes();
  const int p = options.num_clusters;
  if (p < 1) throw Error("fennel_partition: need at least one cluster");
  if (options.gamma < 1.0) throw Error("fennel_partition: gamma must be >= 1");
  if (static_cast<double>(p) * static_cast<double>(options.min_size) > static_cast<double>(n))
    throw Error("fennel_partition: infeasible, " + std::to_string(p) + " clusters of at least " +
                std::to_string(options.min_size) + " nodes need more than " + std::to_string(n) + " nodes");

  const double gamma = options.gamma;
  const double m = static_cast<double>(g.num_edges());
  const double alpha = m * std::pow(static_cast<double>(p), gamma - 1.0) / std::pow(static_cast<double>(n), gamma);
  const auto capacity =
      static_cast<std::size_t>(std::ceil(options.load_factor * static_cast<double>(n) / static_cast<double>(p)));

  NodeList order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), NodeId{0});
  if (options.shuffle) {
    Rng rng(options.seed);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
  }

  std::vector<int> assignment(static_cast<std::size_t>(n), -1);
  std::vector<std::size_t> sizes(static_cast<std::size_t>(p), 0);
  std::vector<std::size_t> shared(static_cast<std::size_t>(p), 0);
  for (NodeId v : order) {
    std::fill(shared.begin(), shared.end(), 0);
    for (NodeId w : g.neighbors(v))
      if (assignment[w] >= 0) ++shared[assignment[w]];
    int best = -1;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < p; ++k) {
      if (sizes[k] >= capacity) continue;
      const double score = static_cast<double>(shared[k]) -
                           alpha * gamma * std::pow(static_cast<double>(sizes[k]), gamma - 1.0);
      if (score > best_score) {
        best_score = score;
        best = k;
      }
    }
    assignment[v] = best;
    ++sizes[best];
  }

  repair_min_size(g, assignment, sizes, options.min_size);
  return Partition::from_assignment(std::move(assignment), p);
}

PartitionQuality partition_quality(const Graph& g, const Partition& part) {
  PartitionQuality q;
  for (const auto& c : part.clusters) q.sizes.push_back(c.size());
  for (auto [u, v] : g.edges())
    if (part.assignment[u] != part.assignment[v]) ++q.cut_edges;
  return q;
}

void write_partition(const Partition& part, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (std::size_t v = 0; v < part.assignment.size(); ++v) out << v << ' ' << part.assignment[v] << '\n';
}

Partition read_partition(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open partition file " + path.string());
  std::vector<std::pair<NodeId, int>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    NodeId v;
    int c;
    if (!(ls >> v)) continue;
    if (!(ls >> c) || v < 0) throw Error(path.string() + ":" + std::to_string(line_no) + ": malformed partition line");
    rows.emplace_back(v, c);
  }
  std::vector<int> assignment(rows.size(), -1);
  int p = 0;
  for (auto [v, c] : rows) {
    if (v >= static_cast<NodeId>(rows.size()) || assignment[v] != -1)
      throw Error(path.string() + ": node ids must be 0..n-1, each once");
    assignment[v] = c;
    p = std::max(p, c + 1);
  }
  return Partition::from_assignment(std::move(assignment), p);
}

}  // namespace l2g
