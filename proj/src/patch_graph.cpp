#include "l2g/patch_graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <Eigen/Cholesky>

#include "l2g/parallel.hpp"
#include "l2g/random.hpp"

namespace l2g {

namespace {

NodeList sorted_intersection(const NodeList& a, const NodeList& b) {
  NodeList out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

struct DisjointSets {
  std::vector<int> parent;
  explicit DisjointSets(int n) : parent(static_cast<std::size_t>(n)) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[std::max(a, b)] = std::min(a, b);
    return true;
  }
};

}  // namespace

std::vector<std::vector<std::pair<int, std::size_t>>> PatchGraph::adjacency() const {
  std::vector<std::vector<std::pair<int, std::size_t>>> adj(patches.size());
  for (std::size_t e = 0; e < edges.size(); ++e) {
    adj[edges[e].i].emplace_back(edges[e].j, e);
    adj[edges[e].j].emplace_back(edges[e].i, e);
  }
  for (auto& a : adj) std::sort(a.begin(), a.end());
  return adj;
}

bool PatchGraph::is_connected() const {
  if (patches.empty()) return false;
  DisjointSets sets(num_patches());
  int components = num_patches();
  for (const auto& e : edges)
    if (sets.unite(e.i, e.j)) --components;
  return components == 1;
}

void PatchGraph::refresh_overlaps() {
  for (auto& e : edges) e.overlap = sorted_intersection(patches[e.i], patches[e.j]);
}

std::vector<int> PatchGraph::coverage() const {
  std::vector<int> count(static_cast<std::size_t>(num_nodes), 0);
  for (const auto& patch : patches)
    for (NodeId v : patch) ++count[v];
  return count;
}

void PatchGraph::validate() const {
  for (int k = 0; k < num_patches(); ++k) {
    const auto& patch = patches[k];
    if (patch.empty()) throw Error("patch " + std::to_string(k) + " is empty");
    for (std::size_t r = 0; r < patch.size(); ++r) {
      if (patch[r] < 0 || patch[r] >= num_nodes)
        throw Error("patch " + std::to_string(k) + " holds out-of-range node " + std::to_string(patch[r]));
      if (r > 0 && patch[r - 1] >= patch[r]) throw Error("patch " + std::to_string(k) + " is not sorted and unique");
    }
  }
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto& edge = edges[e];
    if (edge.i < 0 || edge.j >= num_patches() || edge.i >= edge.j)
      throw Error("patch edge " + std::to_string(e) + " is malformed");
    if (e > 0 && std::pair(edges[e - 1].i, edges[e - 1].j) >= std::pair(edge.i, edge.j))
      throw Error("patch edges must be sorted and unique");
  }
  const auto cov = coverage();
  for (NodeId v = 0; v < num_nodes; ++v)
    if (cov[v] == 0) throw Error("node " + std::to_string(v) + " is not covered by any patch");
}

PatchGraph build_patch_graph(const Graph& g, const Partition& part) {
  PatchGraph pg;
  pg.num_nodes = g.num_nodes();
  pg.patches = part.clusters;
  std::vector<std::pair<int, int>> pairs;
  for (auto [u, v] : g.edges()) {
    int a = part.assignment[u], b = part.assignment[v];
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    pairs.emplace_back(a, b);
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  for (auto [a, b] : pairs) pg.edges.push_back({a, b, {}});
  return pg;
}

std::vector<double> conductance_weights(const Graph& g, const PatchGraph& pg) {
  std::vector<int> owner(static_cast<std::size_t>(g.num_nodes()), -1);
  std::vector<double> volume(pg.patches.size(), 0.0);
  for (int k = 0; k < pg.num_patches(); ++k) {
    for (NodeId v : pg.patches[k]) {
      owner[v] = k;
      volume[k] += static_cast<double>(g.degree(v));
    }
  }
  std::map<std::pair<int, int>, double> cut;
  for (auto [u, v] : g.edges()) {
    int a = owner[u], b = owner[v];
    if (a == b || a < 0 || b < 0) continue;
    if (a > b) std::swap(a, b);
    cut[{a, b}] += 1.0;
  }
  std::vector<double> c;
  c.reserve(pg.edges.size());
  for (const auto& e : pg.edges) {
    const double denom = std::min(volume[e.i], volume[e.j]);
    if (denom <= 0.0)
      throw Error("conductance_weights: patch " + std::to_string(volume[e.i] <= 0.0 ? e.i : e.j) +
                  " has no incident edges");
    auto it = cut.find({e.i, e.j});
    c.push_back(it == cut.end() ? 0.0 : it->second / denom);
  }
  return c;
}

std::vector<double> effective_resistance(const PatchGraph& pg, const std::vector<double>& conductance) {
  if (conductance.size() != pg.edges.size()) throw Error("effective_resistance: one conductance per edge required");
  if (!pg.is_connected()) throw Error("effective_resistance: patch graph is disconnected");
  const int p = pg.num_patches();
  Matrix lap = Matrix::Zero(p, p);
  for (std::size_t e = 0; e < pg.edges.size(); ++e) {
    const double c = conductance[e];
    if (!(c > 0.0)) throw Error("effective_resistance: conductance of edge " + std::to_string(e) + " is not positive");
    const int i = pg.edges[e].i, j = pg.edges[e].j;
    lap(i, i) += c;
    lap(j, j) += c;
    lap(i, j) -= c;
    lap(j, i) -= c;
  }
  // L + J/p is nonsingular on a connected graph and (L + J/p)^-1 - J/p = L^+.
  const double shift = 1.0 / p;
  Eigen::LLT<Matrix> llt(lap.array() + shift);
  if (llt.info() != Eigen::Success) throw Error("effective_resistance: Laplacian factorisation failed");
  Matrix pinv = llt.solve(Matrix::Identity(p, p));
  pinv.array() -= shift;

  std::vector<double> r;
  r.reserve(pg.edges.size());
  for (const auto& e : pg.edges) r.push_back(pinv(e.i, e.i) + pinv(e.j, e.j) - 2.0 * pinv(e.i, e.j));
  return r;
}

SparsifierWeights sparsifier_weights(const Graph& g, const PatchGraph& pg) {
  SparsifierWeights w;
  w.conductance = conductance_weights(g, pg);
  w.resistance = effective_resistance(pg, w.conductance);
  w.sampling.resize(pg.edges.size());
  for (std::size_t e = 0; e < pg.edges.size(); ++e) w.sampling[e] = w.resistance[e] * w.conductance[e];
  return w;
}

PatchGraph sparsify_patch_graph(const PatchGraph& pg, const SparsifierWeights& weights, int target_degree,
                                std::uint64_t seed) {
  if (target_degree < 1) throw Error("sparsify_patch_graph: target degree must be >= 1");
  if (weights.sampling.size() != pg.edges.size()) throw Error("sparsify_patch_graph: one weight per edge required");
  if (!pg.is_connected()) throw Error("sparsify_patch_graph: patch graph is disconnected");
  const int p = pg.num_patches();
  const auto& w = weights.sampling;

  std::vector<std::size_t> order(pg.edges.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return w[a] > w[b]; });

  std::vector<bool> keep(pg.edges.size(), false);
  DisjointSets sets(p);
  for (std::size_t e : order)
    if (sets.unite(pg.edges[e].i, pg.edges[e].j)) keep[e] = true;

  std::vector<std::size_t> rest;
  for (std::size_t e = 0; e < pg.edges.size(); ++e)
    if (!keep[e]) rest.push_back(e);
  const auto budget = static_cast<std::size_t>(target_degree - 1) * static_cast<std::size_t>(p) + 1;
  const std::size_t draws = std::min(budget, rest.size());

  Rng rng(seed);
  for (std::size_t s = 0; s < draws; ++s) {
    double total = 0.0;
    for (std::size_t e : rest) total += w[e];
    std::size_t pick = rest.size() - 1;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      for (std::size_t r = 0; r < rest.size(); ++r) {
        acc += w[rest[r]];
        if (target < acc) {
          pick = r;
          break;
        }
      }
    } else {
      pick = rng.index(rest.size());
    }
    keep[rest[pick]] = true;
    rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(pick));
  }

  PatchGraph out;
  out.num_nodes = pg.num_nodes;
  out.patches = pg.patches;
  for (std::size_t e = 0; e < pg.edges.size(); ++e)
    if (keep[e]) out.edges.push_back(pg.edges[e]);
  return out;
}

namespace {

// Nodes of `cluster_j` that patch i absorbs when growing towards patch j.
NodeList grow_towards(const Graph& g, const std::vector<int>& owner, int i, int j, std::size_t target,
                      std::size_t cap, Rng rng) {
  std::vector<char> taken(static_cast<std::size_t>(g.num_nodes()), 0);
  NodeList frontier;
  // F = N(C_i) ∩ C_j
  for (NodeId v = 0; v < g.num_nodes(); ++v) {
    if (owner[v] != i) continue;
    for (NodeId w : g.neighbors(v))
      if (owner[w] == j && !taken[w]) {
        taken[w] = 1;
        frontier.push_back(w);
      }
  }
  std::fill(taken.begin(), taken.end(), 0);
  std::sort(frontier.begin(), frontier.end());

  NodeList added;
  while (added.size() < target) {
    if (frontier.empty())
      throw Error("expand_patches: frontier from patch " + std::to_string(i) + " into cluster " + std::to_string(j) +
                  " exhausted after " + std::to_string(added.size()) + " of " + std::to_string(target) + " nodes");
    if (frontier.size() + added.size() > cap) {
      const std::size_t want = cap - added.size();
      for (std::size_t k = 0; k < want; ++k)
        std::swap(frontier[k], frontier[k + rng.index(frontier.size() - k)]);
      frontier.resize(want);
      std::sort(frontier.begin(), frontier.end());
    }
    for (NodeId v : frontier) {
      taken[v] = 1;
      added.push_back(v);
    }
    // F = (N(F) ∩ C_j) \ P_i
    NodeList next;
    for (NodeId v : frontier)
      for (NodeId w : g.neighbors(v))
        if (owner[w] == j && !taken[w]) {
          taken[w] = 2;
          next.push_back(w);
        }
    for (NodeId v : next) taken[v] = 0;
    std::sort(next.begin(), next.end());
    next.erase(std::unique(next.begin(), next.end()), next.end());
    frontier = std::move(next);
  }
  std::sort(added.begin(), added.end());
  return added;
}

}  // namespace

PatchGraph expand_patches(const Graph& g, const PatchGraph& pg, const ExpandOptions& options) {
  const std::size_t target = (options.min_overlap + 1) / 2;
  const std::size_t cap = options.max_overlap / 2;
  if (options.max_overlap < options.min_overlap) throw Error("expand_patches: max overlap below min overlap");
  if (cap < target)
    throw Error("expand_patches: floor(u/2) = " + std::to_string(cap) + " is below ceil(l/2) = " +
                std::to_string(target));

  std::vector<int> owner(static_cast<std::size_t>(g.num_nodes()), -1);
  for (int k = 0; k < pg.num_patches(); ++k)
    for (NodeId v : pg.patches[k]) {
      if (owner[v] != -1) throw Error("expand_patches: input patches must be disjoint clusters");
      owner[v] = k;
    }

  // one task per direction of every patch edge; tasks share nothing
  struct Task {
    int from, into;
  };
  std::vector<Task> tasks;
  for (const auto& e : pg.edges) {
    tasks.push_back({e.i, e.j});
    tasks.push_back({e.j, e.i});
  }
  std::vector<NodeList> grown(tasks.size());
  parallel_for(tasks.size(), options.jobs, [&](std::size_t t) {
    const auto [from, into] = tasks[t];
    auto rng = Rng::derive(options.seed, {static_cast<std::uint64_t>(from), static_cast<std::uint64_t>(into)});
    grown[t] = grow_towards(g, owner, from, into, target, cap, std::move(rng));
  });

  PatchGraph out = pg;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    auto& patch = out.patches[tasks[t].from];
    NodeList merged;
    std::set_union(patch.begin(), patch.end(), grown[t].begin(), grown[t].end(), std::back_inserter(merged));
    patch = std::move(merged);
  }
  out.refresh_overlaps();
  return out;
}

void write_patch_graph(const PatchGraph& pg, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (int k = 0; k < pg.num_patches(); ++k) {
    const auto path = dir / ("patch_" + std::to_string(k) + ".nodes");
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    for (NodeId v : pg.patches[k]) out << v << '\n';
  }
  const auto path = dir / "patch_graph.txt";
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& e : pg.edges) out << e.i << ' ' << e.j << ' ' << e.overlap_weight() << '\n';
}

PatchGraph read_patch_graph(const std::filesystem::path& dir) {
  PatchGraph pg;
  for (int k = 0;; ++k) {
    const auto path = dir / ("patch_" + std::to_string(k) + ".nodes");
    if (!std::filesystem::exists(path)) break;
    std::ifstream in(path);
    NodeList patch;
    NodeId v;
    while (in >> v) patch.push_back(v);
    if (!in.eof()) throw Error(path.string() + ": malformed node id");
    std::sort(patch.begin(), patch.end());
    for (NodeId u : patch) pg.num_nodes = std::max(pg.num_nodes, u + 1);
    pg.patches.push_back(std::move(patch));
  }
  if (pg.patches.empty()) throw Error("no patch files (patch_0.nodes, ...) in " + dir.string());

  const auto path = dir / "patch_graph.txt";
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::size_t> weights;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    std::istringstream ls(line);
    int i, j;
    std::size_t w;
    if (!(ls >> i >> j >> w) || i < 0 || j < 0 || i >= pg.num_patches() || j >= pg.num_patches() || i == j)
      throw Error(path.string() + ":" + std::to_string(line_no) + ": malformed patch edge");
    if (i > j) std::swap(i, j);
    pg.edges.push_back({i, j, {}});
    weights.push_back(w);
  }
  pg.refresh_overlaps();
  for (std::size_t e = 0; e < pg.edges.size(); ++e)
    if (pg.edges[e].overlap_weight() != weights[e])
      throw Error(path.string() + ": edge " + std::to_string(pg.edges[e].i) + "-" + std::to_string(pg.edges[e].j) +
                  " records overlap " + std::to_string(weights[e]) + " but the patch files share " +
                  std::to_string(pg.edges[e].overlap_weight()) + " nodes");
  std::sort(pg.edges.begin(), pg.edges.end(),
            [](const PatchEdge& a, const PatchEdge& b) { return std::pair(a.i, a.j) < std::pair(b.i, b.j); });
  pg.validate();
  return pg;
}

}  // namespace l2g
