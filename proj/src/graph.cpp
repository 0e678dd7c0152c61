#include "l2g/graph.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <queue>
#include <sstream>

namespace l2g {

Graph Graph::from_edges(NodeId n, std::span<const Edge> edges, std::span<const double> weights) {
  if (n < 0) throw Error("Graph: negative node count");
  if (!weights.empty() && weights.size() != edges.size())
    throw Error("Graph: weight count does not match edge count");

  struct Arc {
    NodeId src, dst;
    std::size_t order;
  };
  std::vector<Arc> arcs;
  arcs.reserve(edges.size() * 2);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    auto [u, v] = edges[e];
    if (u < 0 || v < 0 || u >= n || v >= n)
      throw Error("Graph: edge (" + std::to_string(u) + ", " + std::to_string(v) +
                  ") out of range for n=" + std::to_string(n));
    if (u == v) continue;
    arcs.push_back({u, v, e});
    arcs.push_back({v, u, e});
  }
  std::sort(arcs.begin(), arcs.end(), [](const Arc& a, const Arc& b) {
    if (a.src != b.src) return a.src < b.src;
    if (a.dst != b.dst) return a.dst < b.dst;
    return a.order < b.order;
  });
  auto last = std::unique(arcs.begin(), arcs.end(),
                          [](const Arc& a, const Arc& b) { return a.src == b.src && a.dst == b.dst; });
  arcs.erase(last, arcs.end());

  Graph g;
  g.offsets_.assign(static_cast<std::size_t>(n) + 1, 0);
  g.targets_.reserve(arcs.size());
  if (!weights.empty()) g.weights_.reserve(arcs.size());
  for (const auto& a : arcs) {
    ++g.offsets_[static_cast<std::size_t>(a.src) + 1];
    g.targets_.push_back(a.dst);
    if (!weights.empty()) {
      const double w = weights[a.order];
      if (!(w >= 0.0)) throw Error("Graph: edge weights must be nonnegative");
      g.weights_.push_back(w);
    }
  }
  std::partial_sum(g.offsets_.begin(), g.offsets_.end(), g.offsets_.begin());
  return g;
}

bool Graph::has_edge(NodeId u, NodeId v) const {
  auto nb = neighbors(u);
  return std::binary_search(nb.begin(), nb.end(), v);
}

std::span<const double> Graph::edge_weights(NodeId v) const {
  if (weights_.empty()) return {};
  return {weights_.data() + offsets_[v], weights_.data() + offsets_[v + 1]};
}

std::vector<Edge> Graph::edges() const {
  std::vector<Edge> out;
  out.reserve(num_edges());
  for (NodeId u = 0; u < num_nodes(); ++u)
    for (NodeId v : neighbors(u))
      if (u < v) out.emplace_back(u, v);
  return out;
}

void Graph::validate() const {
  if (offsets_.empty() || offsets_.front() != 0 || offsets_.back() != targets_.size())
    throw Error("Graph: inconsistent offsets");
  if (targets_.size() % 2 != 0) throw Error("Graph: odd adjacency length");
  const NodeId n = num_nodes();
  for (NodeId u = 0; u < n; ++u) {
    auto nb = neighbors(u);
    for (std::size_t k = 0; k < nb.size(); ++k) {
      const NodeId v = nb[k];
      if (v < 0 || v >= n) throw Error("Graph: neighbour out of range at node " + std::to_string(u));
      if (v == u) throw Error("Graph: self-loop at node " + std::to_string(u));
      if (k > 0 && nb[k - 1] >= v) throw Error("Graph: unsorted or duplicate neighbours at node " + std::to_string(u));
      if (!has_edge(v, u))
        throw Error("Graph: asymmetric edge (" + std::to_string(u) + ", " + std::to_string(v) + ")");
    }
  }
}

std::optional<NodeId> NodeMapping::to_new(NodeId old_id) const {
  auto it = forward.find(old_id);
  if (it == forward.end()) return std::nullopt;
  return it->second;
}

NodeMapping NodeMapping::identity(NodeId n) {
  NodeMapping m;
  m.backward.resize(static_cast<std::size_t>(n));
  std::iota(m.backward.begin(), m.backward.end(), NodeId{0});
  m.forward.reserve(m.backward.size());
  for (NodeId i = 0; i < n; ++i) m.forward.emplace(i, i);
  return m;
}

NodeMapping NodeMapping::compose(const NodeMapping& first, const NodeMapping& second) {
  NodeMapping m;
  m.backward.reserve(second.backward.size());
  for (NodeId mid : second.backward) m.backward.push_back(first.to_old(mid));
  m.forward.reserve(m.backward.size());
  for (std::size_t i = 0; i < m.backward.size(); ++i) m.forward.emplace(m.backward[i], static_cast<NodeId>(i));
  return m;
}

namespace {

bool parse_id(std::string_view token, NodeId& out) {
  if (token.empty()) return false;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), out);
  return ec == std::errc() && ptr == token.data() + token.size() && out >= 0;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) tokens.push_back(line.substr(i, j - i));
    i = j;
  }
  return tokens;
}

}  // namespace

LoadedGraph parse_edge_list(std::istream& in, const std::string& source_name) {
  NodeMapping mapping;
  std::vector<Edge> edges;
  auto compact = [&](NodeId old_id) {
    auto [it, inserted] = mapping.forward.emplace(old_id, mapping.size());
    if (inserted) mapping.backward.push_back(old_id);
    return it->second;
  };

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto tokens = split_ws(line);
    if (tokens.empty() || tokens.front().front() == '#') continue;
    NodeId u, v;
    if (tokens.size() != 2 || !parse_id(tokens[0], u) || !parse_id(tokens[1], v))
      throw Error(source_name + ":" + std::to_string(line_no) + ": expected two nonnegative integer ids, got '" +
                  line + "'");
    const NodeId a = compact(u);
    const NodeId b = compact(v);
    edges.emplace_back(a, b);
  }
  if (edges.empty()) throw Error(source_name + ": edge list is empty");
  return {Graph::from_edges(mapping.size(), edges), std::move(mapping)};
}

LoadedGraph load_edge_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open edge list " + path.string());
  return parse_edge_list(in, path.string());
}

void write_edge_list(const Graph& g, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (auto [u, v] : g.edges()) out << u << ' ' << v << '\n';
}

void write_mapping(const NodeMapping& mapping, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (std::size_t i = 0; i < mapping.backward.size(); ++i) out << mapping.backward[i] << ' ' << i << '\n';
}

NodeMapping read_mapping(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open mapping file " + path.string());
  std::vector<Edge> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto tokens = split_ws(line);
    if (tokens.empty()) continue;
    NodeId a, b;
    if (tokens.size() != 2 || !parse_id(tokens[0], a) || !parse_id(tokens[1], b))
      throw Error(path.string() + ":" + std::to_string(line_no) + ": malformed mapping line");
    pairs.emplace_back(a, b);
  }
  NodeMapping m;
  m.backward.assign(pairs.size(), -1);
  for (auto [old_id, new_id] : pairs) {
    if (new_id >= static_cast<NodeId>(pairs.size()) || m.backward[static_cast<std::size_t>(new_id)] != -1)
      throw Error(path.string() + ": new ids must be a permutation of 0..n-1");
    m.backward[static_cast<std::size_t>(new_id)] = old_id;
    m.forward.emplace(old_id, new_id);
  }
  return m;
}

Subgraph induced_subgraph(const Graph& g, std::span<const NodeId> nodes) {
  if (nodes.empty()) throw Error("induced_subgraph: empty node list");
  NodeMapping mapping;
  mapping.backward.assign(nodes.begin(), nodes.end());
  mapping.forward.reserve(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const NodeId v = nodes[i];
    if (v < 0 || v >= g.num_nodes()) throw Error("induced_subgraph: node id " + std::to_string(v) + " out of range");
    if (i > 0 && nodes[i - 1] >= v) throw Error("induced_subgraph: node list must be sorted and unique");
    mapping.forward.emplace(v, static_cast<NodeId>(i));
  }
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    for (NodeId w : g.neighbors(nodes[i])) {
      auto it = mapping.forward.find(w);
      if (it != mapping.forward.end() && static_cast<NodeId>(i) < it->second)
        edges.emplace_back(static_cast<NodeId>(i), it->second);
    }
  }
  return {Graph::from_edges(static_cast<NodeId>(nodes.size()), edges), std::move(mapping)};
}

std::vector<NodeId> connected_components(const Graph& g, NodeId* num_components) {
  const NodeId n = g.num_nodes();
  std::vector<NodeId> label(static_cast<std::size_t>(n), -1);
  NodeId next = 0;
  std::vector<NodeId> queue;
  for (NodeId s = 0; s < n; ++s) {
    if (label[s] != -1) continue;
    label[s] = next;
    queue.assign(1, s);
    for (std::size_t head = 0; head < queue.size(); ++head) {
      for (NodeId w : g.neighbors(queue[head])) {
        if (label[w] == -1) {
          label[w] = next;
          queue.push_back(w);
        }
      }
    }
    ++next;
  }
  if (num_components) *num_components = next;
  return label;
}

Subgraph largest_connected_component(const Graph& g) {
  if (g.num_nodes() == 0) throw Error("largest_connected_component: empty graph");
  NodeId count = 0;
  auto label = connected_components(g, &count);
  std::vector<std::size_t> sizes(static_cast<std::size_t>(count), 0);
  for (NodeId l : label) ++sizes[l];
  // labels are assigned in order of smallest member, so the first maximum wins ties
  const auto best = static_cast<NodeId>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
  NodeList nodes;
  nodes.reserve(sizes[best]);
  for (NodeId v = 0; v < g.num_nodes(); ++v)
    if (label[v] == best) nodes.push_back(v);
  return induced_subgraph(g, nodes);
}

}  // namespace l2g
