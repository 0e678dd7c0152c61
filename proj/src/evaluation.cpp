#include "l2g/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>
#include <unordered_set>

#include <Eigen/QR>

#include "l2g/parallel.hpp"

namespace l2g {

double auc_from_scores(std::span<const double> positives, std::span<const double> negatives) {
  if (positives.empty() || negatives.empty()) throw Error("auc: need at least one positive and one negative");
  struct Item {
    double score;
    bool positive;
  };
  std::vector<Item> items;
  items.reserve(positives.size() + negatives.size());
  for (double s : positives) items.push_back({s, true});
  for (double s : negatives) items.push_back({s, false});
  for (const auto& it : items)
    if (std::isnan(it.score)) throw Error("auc: NaN score");
  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.score < b.score; });

  // average 1-based rank over each run of tied scores
  double rank_sum = 0.0;
  for (std::size_t lo = 0; lo < items.size();) {
    std::size_t hi = lo;
    std::size_t pos = 0;
    while (hi < items.size() && items[hi].score == items[lo].score) pos += items[hi++].positive;
    rank_sum += static_cast<double>(pos) * 0.5 * static_cast<double>(lo + 1 + hi);
    lo = hi;
  }
  const auto np = static_cast<double>(positives.size());
  const auto nn = static_cast<double>(negatives.size());
  return (rank_sum - np * (np + 1) / 2) / (np * nn);
}

std::vector<Edge> sample_non_edges(const Graph& g, std::size_t count, std::uint64_t seed) {
  const auto n = static_cast<std::uint64_t>(g.num_nodes());
  const std::uint64_t pairs = n < 2 ? 0 : n * (n - 1) / 2;
  const std::uint64_t available = pairs - g.num_edges();
  if (count > available)
    throw Error("cannot sample " + std::to_string(count) + " non-edges: only " + std::to_string(available) +
                " exist");
  Rng rng(seed);
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(count * 2);
  std::vector<Edge> out;
  out.reserve(count);
  while (out.size() < count) {
    auto u = static_cast<NodeId>(rng.index(n));
    auto v = static_cast<NodeId>(rng.index(n));
    if (u == v) continue;
    if (u > v) std::swap(u, v);
    if (g.has_edge(u, v)) continue;
    if (!seen.insert(static_cast<std::uint64_t>(u) * n + static_cast<std::uint64_t>(v)).second) continue;
    out.emplace_back(u, v);
  }
  return out;
}

AucReport auc_reconstruction(const Matrix& embedding, const Graph& g, std::uint64_t seed) {
  if (embedding.rows() != g.num_nodes())
    throw Error("auc: embedding has " + std::to_string(embedding.rows()) + " rows for " +
                std::to_string(g.num_nodes()) + " nodes");
  const auto edges = g.edges();
  if (edges.empty()) throw Error("auc: graph has no edges");
  const auto negatives = sample_non_edges(g, edges.size(), seed);
  auto score = [&](const Edge& e) { return embedding.row(e.first).dot(embedding.row(e.second)); };
  std::vector<double> pos(edges.size()), neg(negatives.size());
  std::transform(edges.begin(), edges.end(), pos.begin(), score);
  std::transform(negatives.begin(), negatives.end(), neg.begin(), score);
  AucReport report;
  report.auc = auc_from_scores(pos, neg);
  report.positives = pos.size();
  report.negatives = neg.size();
  report.seed = seed;
  return report;
}

Matrix random_orthogonal(Eigen::Index d, Rng& rng) {
  const Matrix a = rng.normal_matrix(d, d);
  Eigen::HouseholderQR<Matrix> qr(a);
  Matrix q = qr.householderQ() * Matrix::Identity(d, d);
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  // sign fix makes the distribution Haar
  for (Eigen::Index k = 0; k < d; ++k)
    if (r(k, k) < 0) q.col(k) = -q.col(k);
  return q;
}

SyntheticInstance generate_synthetic(Eigen::Index n, Eigen::Index d, int p, double sigma, std::size_t overlap,
                                     std::uint64_t seed) {
  if (d < 1 || p < 1) throw Error("generate_synthetic: need d >= 1 and p >= 1");
  if (n < p * (d + 1))
    throw Error("generate_synthetic: n = " + std::to_string(n) + " is below p(d+1) = " + std::to_string(p * (d + 1)));
  if (overlap < static_cast<std::size_t>(d + 1))
    throw Error("generate_synthetic: overlap " + std::to_string(overlap) + " is below d+1");
  if (!(sigma >= 0.0)) throw Error("generate_synthetic: sigma must be nonnegative");

  SyntheticInstance inst;
  inst.sigma = sigma;
  inst.min_overlap = overlap;
  inst.seed = seed;
  auto x_rng = Rng::derive(seed, {0});
  inst.ground_truth = x_rng.normal_matrix(n, d);

  std::vector<NodeId> start(static_cast<std::size_t>(p) + 1, 0);
  for (int k = 0; k < p; ++k) start[k + 1] = start[k] + n / p + (k < n % p ? 1 : 0);
  const auto half = static_cast<NodeId>((overlap + 1) / 2);

  auto& pg = inst.patch_graph;
  pg.num_nodes = n;
  pg.patches.resize(static_cast<std::size_t>(p));
  for (int k = 0; k < p; ++k) {
    NodeList patch;
    for (NodeId v = start[k]; v < start[k + 1]; ++v) patch.push_back(v);
    if (p > 1) {
      const int next = (k + 1) % p, prev = (k + p - 1) % p;
      for (NodeId v = start[next]; v < std::min(start[next] + half, start[next + 1]); ++v) patch.push_back(v);
      for (NodeId v = std::max(start[prev + 1] - half, start[prev]); v < start[prev + 1]; ++v) patch.push_back(v);
    }
    std::sort(patch.begin(), patch.end());
    patch.erase(std::unique(patch.begin(), patch.end()), patch.end());
    pg.patches[k] = std::move(patch);
  }
  for (int i = 0; i < p; ++i)
    for (int j = i + 1; j < p; ++j) {
      PatchEdge e{i, j, {}};
      std::set_intersection(pg.patches[i].begin(), pg.patches[i].end(), pg.patches[j].begin(), pg.patches[j].end(),
                            std::back_inserter(e.overlap));
      if (e.overlap.size() >= overlap) {
        pg.edges.push_back(std::move(e));
      } else if (j == i + 1 || (i == 0 && j == p - 1)) {
        throw Error("generate_synthetic: ring neighbours " + std::to_string(i) + " and " + std::to_string(j) +
                    " share only " + std::to_string(e.overlap.size()) + " nodes; blocks are too small for overlap " +
                    std::to_string(overlap));
      }
    }
  pg.validate();

  inst.rotations.resize(static_cast<std::size_t>(p));
  inst.translations.resize(p, d);
  inst.patches.resize(static_cast<std::size_t>(p));
  for (int k = 0; k < p; ++k) {
    auto t_rng = Rng::derive(seed, {1, static_cast<std::uint64_t>(k)});
    inst.rotations[k] = random_orthogonal(d, t_rng);
    for (Eigen::Index c = 0; c < d; ++c) inst.translations(k, c) = 5.0 * t_rng.normal();

    const auto& nodes = pg.patches[k];
    Matrix local(static_cast<Eigen::Index>(nodes.size()), d);
    for (std::size_t r = 0; r < nodes.size(); ++r) local.row(static_cast<Eigen::Index>(r)) = inst.ground_truth.row(nodes[r]);
    auto noise_rng = Rng::derive(seed, {2, static_cast<std::uint64_t>(k)});
    const Matrix noise = noise_rng.normal_matrix(local.rows(), d);
    auto& emb = inst.patches[k];
    emb.patch_index = k;
    emb.node_ids = nodes;
    emb.coords = (local * inst.rotations[k].transpose()).rowwise() + inst.translations.row(k);
    if (sigma > 0) emb.coords += sigma * noise;
  }
  return inst;
}

Graph dot_product_graph(const Matrix& x, int neighbours) {
  const Eigen::Index n = x.rows();
  if (neighbours < 1 || neighbours >= n) throw Error("dot_product_graph: neighbours must lie in [1, n)");
  const Matrix gram = x * x.transpose();
  std::vector<Edge> edges;
  edges.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(neighbours));
  std::vector<NodeId> order;
  for (Eigen::Index u = 0; u < n; ++u) {
    order.resize(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), NodeId{0});
    order.erase(order.begin() + u);
    std::partial_sort(order.begin(), order.begin() + neighbours, order.end(), [&](NodeId a, NodeId b) {
      return gram(u, a) != gram(u, b) ? gram(u, a) > gram(u, b) : a < b;
    });
    for (int k = 0; k < neighbours; ++k) edges.emplace_back(std::min<NodeId>(u, order[k]), std::max<NodeId>(u, order[k]));
  }
  return Graph::from_edges(n, edges);
}

ScenarioComparison evaluate_scenarios(const Graph& g, const Matrix& full, const std::vector<PatchEmbedding>& patches,
                                      const PatchGraph& pg, std::uint64_t seed, const AlignOptions& options) {
  if (patches.empty()) throw Error("evaluate_scenarios: no patch embeddings");
  const Eigen::Index d = patches.front().dim();
  if (full.cols() != d)
    throw Error("evaluate_scenarios: full embedding has dimension " + std::to_string(full.cols()) + ", patches " +
                std::to_string(d));

  ScenarioComparison out;
  AlignOptions align_options = options;
  align_options.seed = mix64(seed ^ 0x6C3267ULL);
  out.alignment = align(patches, pg, align_options);
  const Matrix baseline = no_trans_baseline(patches, pg);

  const std::vector<std::pair<std::string, const Matrix*>> scenarios = {
      {"full", &full}, {"l2g", &out.alignment.global}, {"no-trans", &baseline}};
  out.rows.resize(scenarios.size());
  parallel_for(scenarios.size(), options.jobs, [&](std::size_t s) {
    out.rows[s].scenario = scenarios[s].first;
    out.rows[s].dim = d;
    out.rows[s].report = auc_reconstruction(*scenarios[s].second, g, seed);
  });
  return out;
}

ScenarioComparison compare_scenarios(const Graph& g, const PatchGraph& pg, Eigen::Index d, std::uint64_t seed,
                                     const AlignOptions& options, const SpectralOptions& spectral) {
  const Matrix full = spectral_embed(g, d, spectral);
  const auto patches = embed_all_patches(g, pg, d, options.jobs, spectral);
  return evaluate_scenarios(g, full, patches, pg, seed, options);
}

void write_scenario_table(const std::vector<ScenarioResult>& rows, std::ostream& out) {
  out << "scenario\td\tauc\tpositives\tnegatives\tseed\n";
  for (const auto& r : rows)
    out << r.scenario << '\t' << r.dim << '\t' << r.report.auc << '\t' << r.report.positives << '\t'
        << r.report.negatives << '\t' << r.report.seed << '\n';
}

void write_auc_series(const std::vector<ScenarioResult>& rows, std::ostream& out) {
  std::map<Eigen::Index, std::map<std::string, double>> by_dim;
  for (const auto& r : rows) by_dim[r.dim][r.scenario] = r.report.auc;
  out << "d\tfull\tl2g\tno-trans\n";
  for (const auto& [d, values] : by_dim) {
    out << d;
    for (const char* name : {"full", "l2g", "no-trans"}) {
      auto it = values.find(name);
      out << '\t';
      if (it != values.end()) out << it->second;
      else out << "nan";
    }
    out << '\n';
  }
}

}  // namespace l2g
