#include "l2g/local_embed.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCore>

#include "l2g/eigensolver.hpp"
#include "l2g/parallel.hpp"

namespace l2g {

namespace {

struct Eigenpairs {
  Vector values;
  Matrix vectors;  // over the whole graph, zero outside the component
};

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

SparseMatrix normalised_adjacency(const Graph& g, std::span<const NodeId> nodes) {
  const auto n = static_cast<Eigen::Index>(nodes.size());
  std::vector<Eigen::Triplet<double>> triplets;
  std::vector<double> inv_sqrt(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto deg = static_cast<double>(g.degree(nodes[i]));
    inv_sqrt[i] = deg > 0 ? 1.0 / std::sqrt(deg) : 0.0;
  }
  // `nodes` is sorted, so local positions come from binary search
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    for (NodeId w : g.neighbors(nodes[i])) {
      auto it = std::lower_bound(nodes.begin(), nodes.end(), w);
      const auto j = static_cast<std::size_t>(it - nodes.begin());
      triplets.emplace_back(static_cast<int>(i), static_cast<int>(j), inv_sqrt[i] * inv_sqrt[j]);
    }
  }
  SparseMatrix a(n, n);
  a.setFromTriplets(triplets.begin(), triplets.end());
  return a;
}

// Leading |λ| eigenpairs of one connected component.
Eigenpairs component_eigenpairs(const Graph& g, std::span<const NodeId> nodes, Eigen::Index want,
                                const SpectralOptions& options) {
  const auto size = static_cast<Eigen::Index>(nodes.size());
  Eigenpairs out;
  if (size == 1) {
    out.values = Vector::Zero(1);
    out.vectors = Matrix::Ones(1, 1);
    return out;
  }
  const SparseMatrix a = normalised_adjacency(g, nodes);
  if (size <= options.dense_limit || 3 * want >= size) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver{Matrix(a)};
    const auto order = detail::spectrum_order(solver.eigenvalues(), Spectrum::LargestMagnitude);
    out.values.resize(want);
    out.vectors.resize(size, want);
    for (Eigen::Index k = 0; k < want; ++k) {
      out.values(k) = solver.eigenvalues()(order[static_cast<std::size_t>(k)]);
      out.vectors.col(k) = solver.eigenvectors().col(order[static_cast<std::size_t>(k)]);
    }
    return out;
  }
  EigenOptions eo;
  eo.nev = want;
  eo.which = Spectrum::LargestMagnitude;
  eo.tol = options.tol;
  eo.block = std::min<Eigen::Index>(want, 32);
  auto apply = [&](const Matrix& x, Matrix& y) { y = a * x; };
  auto res = symmetric_eigs(apply, size, eo);
  if (!res.converged)
    throw Error("spectral_embed: eigensolver did not converge (max residual " +
                describe(res.residuals.maxCoeff()) + ")");
  out.values = res.values;
  out.vectors = res.vectors;
  return out;
}

struct SpectralBasis {
  Vector values;
  Matrix vectors;
};

SpectralBasis leading_spectrum(const Graph& g, Eigen::Index d, const SpectralOptions& options) {
  const NodeId n = g.num_nodes();
  if (d < 1) throw Error("spectral_embed: dimension must be positive");
  if (d > n) throw Error("spectral_embed: dimension " + std::to_string(d) + " exceeds node count " + std::to_string(n));

  NodeId num_comp = 0;
  const auto label = connected_components(g, &num_comp);
  std::vector<NodeList> members(static_cast<std::size_t>(num_comp));
  for (NodeId v = 0; v < n; ++v) members[label[v]].push_back(v);

  struct Candidate {
    double value;
    NodeId component;
    Eigen::Index column;
  };
  std::vector<Candidate> candidates;
  std::vector<Eigenpairs> pairs(members.size());
  for (std::size_t c = 0; c < members.size(); ++c) {
    const auto want = std::min<Eigen::Index>(d, static_cast<Eigen::Index>(members[c].size()));
    pairs[c] = component_eigenpairs(g, members[c], want, options);
    for (Eigen::Index k = 0; k < pairs[c].values.size(); ++k)
      candidates.push_back({pairs[c].values(k), static_cast<NodeId>(c), k});
  }
  std::stable_sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    const double ma = std::abs(a.value), mb = std::abs(b.value);
    if (ma != mb) return ma > mb;
    return a.value > b.value;
  });

  SpectralBasis basis;
  basis.values.resize(d);
  basis.vectors = Matrix::Zero(n, d);
  for (Eigen::Index k = 0; k < d; ++k) {
    const auto& cand = candidates[static_cast<std::size_t>(k)];
    const auto& comp = members[static_cast<std::size_t>(cand.component)];
    Vector col = pairs[static_cast<std::size_t>(cand.component)].vectors.col(cand.column);
    // sign convention: entry of largest magnitude positive, lowest index on ties
    const double peak = col.cwiseAbs().maxCoeff();
    for (Eigen::Index r = 0; r < col.size(); ++r) {
      if (std::abs(col(r)) >= peak * (1.0 - 1e-12)) {
        if (col(r) < 0) col = -col;
        break;
      }
    }
    for (std::size_t r = 0; r < comp.size(); ++r) basis.vectors(comp[r], k) = col(static_cast<Eigen::Index>(r));
    basis.values(k) = cand.value;
  }
  return basis;
}

}  // namespace

Matrix spectral_embed(const Graph& g, Eigen::Index d, const SpectralOptions& options) {
  auto basis = leading_spectrum(g, d, options);
  return basis.vectors * basis.values.cwiseAbs().cwiseSqrt().asDiagonal();
}

Vector spectral_eigenvalues(const Graph& g, Eigen::Index d, const SpectralOptions& options) {
  return leading_spectrum(g, d, options).values;
}

std::vector<PatchEmbedding> embed_all_patches(const Graph& g, const PatchGraph& pg, Eigen::Index d, int jobs,
                                              const SpectralOptions& options) {
  std::vector<PatchEmbedding> out(pg.patches.size());
  parallel_for(pg.patches.size(), jobs, [&](std::size_t k) {
    try {
      auto sub = induced_subgraph(g, pg.patches[k]);
      out[k].patch_index = static_cast<int>(k);
      out[k].node_ids = pg.patches[k];
      out[k].coords = spectral_embed(sub.graph, d, options);
    } catch (const Error& e) {
      throw Error("patch " + std::to_string(k) + ": " + e.what());
    }
  });
  return out;
}

namespace {

template <typename T>
void put(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<char, sizeof(T)>>(value);
    std::reverse(bytes.begin(), bytes.end());
    out.write(bytes.data(), sizeof(T));
  } else {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
  }
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path) {
  std::array<char, sizeof(T)> bytes{};
  if (!in.read(bytes.data(), sizeof(T))) throw Error(path.string() + ": truncated embedding file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  return std::bit_cast<T>(bytes);
}

}  // namespace

void write_embedding(const std::filesystem::path& path, const NodeList& node_ids, const Matrix& coords) {
  if (static_cast<Eigen::Index>(node_ids.size()) != coords.rows())
    throw Error("write_embedding: row count does not match node ids");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write("L2GE", 4);
  put<std::uint32_t>(out, kEmbeddingFormatVersion);
  put<std::uint64_t>(out, node_ids.size());
  put<std::uint64_t>(out, static_cast<std::uint64_t>(coords.cols()));
  for (NodeId v : node_ids) put<std::uint64_t>(out, static_cast<std::uint64_t>(v));
  for (Eigen::Index r = 0; r < coords.rows(); ++r)
    for (Eigen::Index c = 0; c < coords.cols(); ++c) put<double>(out, coords(r, c));
  if (!out) throw Error("failed writing " + path.string());
}

EmbeddingFile read_embedding(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open embedding file " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "L2GE", 4) != 0) throw Error(path.string() + ": not an L2GE file");
  const auto version = get<std::uint32_t>(in, path);
  if (version != kEmbeddingFormatVersion)
    throw Error(path.string() + ": unsupported L2GE version " + std::to_string(version));
  const auto n = get<std::uint64_t>(in, path);
  const auto d = get<std::uint64_t>(in, path);
  if (n > (std::uint64_t{1} << 40) || d > (std::uint64_t{1} << 20)) throw Error(path.string() + ": implausible header");
  EmbeddingFile file;
  file.node_ids.resize(n);
  for (auto& v : file.node_ids) {
    const auto id = get<std::uint64_t>(in, path);
    if (id > static_cast<std::uint64_t>(std::numeric_limits<NodeId>::max()))
      throw Error(path.string() + ": node id out of range");
    v = static_cast<NodeId>(id);
  }
  file.coords.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index r = 0; r < file.coords.rows(); ++r)
    for (Eigen::Index c = 0; c < file.coords.cols(); ++c) file.coords(r, c) = get<double>(in, path);
  if (in.peek() != std::char_traits<char>::eof()) throw Error(path.string() + ": trailing bytes after payload");
  return file;
}

std::filesystem::path patch_embedding_path(const std::filesystem::path& dir, int patch_index) {
  return dir / ("patch_" + std::to_string(patch_index) + ".l2ge");
}

void export_embeddings(const std::vector<PatchEmbedding>& embeddings, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& e : embeddings) write_embedding(patch_embedding_path(dir, e.patch_index), e.node_ids, e.coords);
}

std::vector<PatchEmbedding> import_embeddings(const std::vector<std::filesystem::path>& paths, const PatchGraph& pg) {
  if (static_cast<int>(paths.size()) != pg.num_patches())
    throw Error("import_embeddings: expected " + std::to_string(pg.num_patches()) + " files, got " +
                std::to_string(paths.size()));
  std::vector<PatchEmbedding> out;
  out.reserve(paths.size());
  Eigen::Index dim = -1;
  for (std::size_t k = 0; k < paths.size(); ++k) {
    auto file = read_embedding(paths[k]);
    const auto name = paths[k].string();
    if (dim < 0) dim = file.coords.cols();
    if (file.coords.cols() != dim)
      throw Error(name + ": dimension " + std::to_string(file.coords.cols()) + " differs from " + std::to_string(dim));
    if (!file.coords.allFinite()) throw Error(name + ": non-finite coordinates");

    std::vector<std::size_t> order(file.node_ids.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return file.node_ids[a] < file.node_ids[b]; });
    PatchEmbedding e;
    e.patch_index = static_cast<int>(k);
    e.node_ids.reserve(order.size());
    e.coords.resize(file.coords.rows(), dim);
    for (std::size_t r = 0; r < order.size(); ++r) {
      e.node_ids.push_back(file.node_ids[order[r]]);
      e.coords.row(static_cast<Eigen::Index>(r)) = file.coords.row(static_cast<Eigen::Index>(order[r]));
    }
    const auto& expected = pg.patches[k];
    NodeList missing, extra;
    std::set_difference(expected.begin(), expected.end(), e.node_ids.begin(), e.node_ids.end(),
                        std::back_inserter(missing));
    std::set_difference(e.node_ids.begin(), e.node_ids.end(), expected.begin(), expected.end(),
                        std::back_inserter(extra));
    if (!missing.empty()) throw Error(name + ": missing node " + std::to_string(missing.front()) + " of patch " + std::to_string(k));
    if (!extra.empty()) throw Error(name + ": node " + std::to_string(extra.front()) + " is not in patch " + std::to_string(k));
    if (std::adjacent_find(e.node_ids.begin(), e.node_ids.end()) != e.node_ids.end())
      throw Error(name + ": duplicate node ids");
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace l2g
