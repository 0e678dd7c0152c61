#include "l2g/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <set>

#include <Eigen/Cholesky>
#include <Eigen/SparseCholesky>

#include "l2g/eigensolver.hpp"
#include "l2g/parallel.hpp"

namespace l2g {

namespace {

void check_embeddings(const std::vector<PatchEmbedding>& embeddings, const PatchGraph& pg) {
  if (static_cast<int>(embeddings.size()) != pg.num_patches())
    throw Error("alignment: " + std::to_string(embeddings.size()) + " embeddings for " +
                std::to_string(pg.num_patches()) + " patches");
  for (std::size_t k = 0; k < embeddings.size(); ++k) {
    const auto& e = embeddings[k];
    if (e.node_ids != pg.patches[k]) throw Error("alignment: embedding " + std::to_string(k) + " does not match patch nodes");
    if (e.coords.rows() != static_cast<Eigen::Index>(e.node_ids.size()))
      throw Error("alignment: embedding " + std::to_string(k) + " has the wrong row count");
    if (e.coords.cols() != embeddings.front().coords.cols())
      throw Error("alignment: embedding " + std::to_string(k) + " has dimension " + std::to_string(e.coords.cols()) +
                  ", expected " + std::to_string(embeddings.front().coords.cols()));
    if (!e.coords.allFinite()) throw Error("alignment: embedding " + std::to_string(k) + " has non-finite values");
  }
}

// Rows of `embedding` for the given (sorted) nodes.
Matrix rows_for(const PatchEmbedding& embedding, const NodeList& nodes) {
  Matrix out(static_cast<Eigen::Index>(nodes.size()), embedding.coords.cols());
  auto it = embedding.node_ids.begin();
  for (std::size_t r = 0; r < nodes.size(); ++r) {
    it = std::lower_bound(it, embedding.node_ids.end(), nodes[r]);
    if (it == embedding.node_ids.end() || *it != nodes[r])
      throw Error("alignment: node " + std::to_string(nodes[r]) + " missing from patch " +
                  std::to_string(embedding.patch_index));
    out.row(static_cast<Eigen::Index>(r)) = embedding.coords.row(it - embedding.node_ids.begin());
  }
  return out;
}

}  // namespace

RelativeTransforms estimate_relative_transforms(const std::vector<PatchEmbedding>& embeddings, const PatchGraph& pg,
                                                int jobs) {
  RelativeTransforms rel;
  rel.blocks.resize(pg.edges.size());
  rel.degenerate.assign(pg.edges.size(), 0);
  parallel_for(pg.edges.size(), jobs, [&](std::size_t e) {
    const auto& edge = pg.edges[e];
    try {
      auto fit = estimate_relative_transform(rows_for(embeddings[edge.i], edge.overlap),
                                             rows_for(embeddings[edge.j], edge.overlap));
      rel.blocks[e] = std::move(fit.rotation);
      rel.degenerate[e] = fit.degenerate;
    } catch (const Error& err) {
      throw Error("patch edge " + std::to_string(edge.i) + "-" + std::to_string(edge.j) + ": " + err.what());
    }
  });
  return rel;
}

SyncMatrix build_sync_matrix(const RelativeTransforms& rel, const PatchGraph& pg) {
  if (rel.blocks.size() != pg.edges.size()) throw Error("build_sync_matrix: one block per patch edge required");
  const int p = pg.num_patches();
  const Eigen::Index d = rel.blocks.empty() ? 0 : rel.blocks.front().rows();
  SyncMatrix sync;
  sync.dim = d;
  sync.degree = Vector::Zero(p);
  for (const auto& e : pg.edges) {
    const auto w = static_cast<double>(e.overlap_weight());
    sync.degree(e.i) += w;
    sync.degree(e.j) += w;
  }
  for (int k = 0; k < p; ++k)
    if (!(sync.degree(k) > 0)) throw Error("build_sync_matrix: patch " + std::to_string(k) + " has no weighted patch edge");

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(pg.edges.size() * 2 * static_cast<std::size_t>(d * d));
  for (std::size_t idx = 0; idx < pg.edges.size(); ++idx) {
    const auto& e = pg.edges[idx];
    const auto w = static_cast<double>(e.overlap_weight());
    const Matrix& r = rel.blocks[idx];
    for (Eigen::Index a = 0; a < d; ++a)
      for (Eigen::Index b = 0; b < d; ++b) {
        triplets.emplace_back(e.i * d + a, e.j * d + b, w * r(a, b) / sync.degree(e.i));
        triplets.emplace_back(e.j * d + a, e.i * d + b, w * r(b, a) / sync.degree(e.j));
      }
  }
  sync.matrix.resize(p * d, p * d);
  sync.matrix.setFromTriplets(triplets.begin(), triplets.end());
  return sync;
}

namespace {

struct EliminationOrder {
  std::vector<int> order;
  std::size_t blocks = 0;  // off-diagonal blocks of the Cholesky factor
};

// Minimum-degree elimination order of the patch-level pattern of `sym` (ties
// to the lowest index), or nothing if the Cholesky factor would hold more
// than `limit` off-diagonal blocks.
std::optional<EliminationOrder> cheap_elimination_order(const SparseMatrix& sym, Eigen::Index d, std::size_t limit) {
  const auto p = static_cast<int>(sym.rows() / d);
  std::vector<std::set<int>> adj(static_cast<std::size_t>(p));
  for (Eigen::Index r = 0; r < sym.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(sym, r); it; ++it) {
      const auto a = static_cast<int>(r / d), b = static_cast<int>(it.col() / d);
      if (a != b) adj[a].insert(b);
    }
  std::vector<int> order;
  std::vector<char> done(static_cast<std::size_t>(p), 0);
  std::size_t blocks = 0;
  for (int step = 0; step < p; ++step) {
    int best = -1;
    for (int v = 0; v < p; ++v)
      if (!done[v] && (best < 0 || adj[v].size() < adj[best].size())) best = v;
    blocks += adj[best].size();
    if (blocks > limit) return std::nullopt;
    const std::vector<int> nbrs(adj[best].begin(), adj[best].end());
    for (int a : nbrs) {
      adj[a].erase(best);
      for (int b : nbrs)
        if (a != b) adj[a].insert(b);
    }
    adj[best].clear();
    done[best] = 1;
    order.push_back(best);
  }
  return EliminationOrder{std::move(order), blocks};
}

}  // namespace

SyncEigenvectors leading_eigenvectors(const SyncMatrix& sync, Eigen::Index d, double tol, int max_iter,
                                      std::uint64_t seed) {
  const Eigen::Index n = sync.matrix.rows();
  if (d < 1 || d > n) throw Error("leading_eigenvectors: invalid dimension");
  const int p = sync.num_patches();

  // D^1/2 M D^-1/2 is symmetric; scale each block row/column accordingly
  Vector scale(n);
  for (int k = 0; k < p; ++k) scale.segment(k * sync.dim, sync.dim).setConstant(std::sqrt(sync.degree(k)));
  SparseMatrix sym = scale.asDiagonal() * sync.matrix * scale.cwiseInverse().asDiagonal();
  sym = (0.5 * (SparseMatrix(sym.transpose()) + sym)).pruned();

  const double dmin = sync.degree.minCoeff(), dmax = sync.degree.maxCoeff();
  EigenOptions eo;
  eo.nev = d;
  eo.which = Spectrum::LargestAlgebraic;
  eo.tol = tol * std::sqrt(dmin / dmax);
  eo.max_iter = max_iter > 0 ? max_iter : static_cast<int>(50 * d + 1000);
  // eigenvalues below the top d come in clusters (2d-fold on a ring), so a
  // wider block converges far faster than one of size d
  eo.block = std::min(2 * d, n);
  eo.seed = seed;

  EigenResult res;
  int iterations = 0;
  bool found = false;
  std::string method = "lanczos";

  // Poorly connected patch graphs (rings, long paths) have a spectral gap of
  // order 1/p², which plain Krylov iteration resolves only slowly. When the
  // factor is cheap, iterate on (σI − A)^-1 instead: the spectrum of A lies in
  // [-1, 1], so σI − A is positive definite for σ > 1, and the eigenvalues near
  // 1 become well separated.
  const std::size_t nnz_blocks = static_cast<std::size_t>(sym.nonZeros()) / static_cast<std::size_t>(d * d);
  if (const auto elim = p > 2 ? cheap_elimination_order(sym, sync.dim, 2 * nnz_blocks + static_cast<std::size_t>(p))
                              : std::nullopt) {
    constexpr double kShift = 1.0 + 1e-4;
    EigenOptions si = eo;
    si.tol = 0.25 * eo.tol;
    si.relative_tol = true;
    si.block = d;  // the transformed spectrum has no cluster next to the wanted one

    EigenResult inv;
    bool factored = false;
    const auto full_blocks = static_cast<std::size_t>(p) * static_cast<std::size_t>(p - 1) / 2;
    if (4 * elim->blocks >= full_blocks) {
      // nearly dense factor: dense Cholesky and BLAS3 solves are much faster
      Matrix shifted = -Matrix(sym);
      shifted.diagonal().array() += kShift;
      Eigen::LLT<Matrix> llt(shifted);
      if (llt.info() == Eigen::Success) {
        factored = true;
        method = "shift-invert/dense";
        inv = symmetric_eigs([&](const Matrix& x, Matrix& y) { y = llt.solve(x); }, n, si);
      }
    } else {
      const Eigen::Index b = sync.dim;
      Eigen::VectorXi position(n);
      for (std::size_t t = 0; t < elim->order.size(); ++t)
        for (Eigen::Index a = 0; a < b; ++a) position(elim->order[t] * b + a) = static_cast<int>(t * b + a);
      std::vector<Eigen::Triplet<double>> triplets;
      triplets.reserve(static_cast<std::size_t>(sym.nonZeros() + n));
      for (Eigen::Index r = 0; r < n; ++r) {
        triplets.emplace_back(position(r), position(r), kShift);
        for (SparseMatrix::InnerIterator it(sym, r); it; ++it)
          triplets.emplace_back(position(r), position(it.col()), -it.value());
      }
      Eigen::SparseMatrix<double> shifted(n, n);
      shifted.setFromTriplets(triplets.begin(), triplets.end());
      Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::NaturalOrdering<int>> ldlt(shifted);
      if (ldlt.info() == Eigen::Success) {
        factored = true;
        method = "shift-invert/sparse";
        inv = symmetric_eigs(
            [&](const Matrix& x, Matrix& y) {
              Matrix px(n, x.cols());
              for (Eigen::Index r = 0; r < n; ++r) px.row(position(r)) = x.row(r);
              const Matrix py = ldlt.solve(px);
              y.resize(n, x.cols());
              for (Eigen::Index r = 0; r < n; ++r) y.row(r) = py.row(position(r));
            },
            n, si);
      }
    }

    if (factored) {
      iterations += inv.iterations;
      // Rayleigh-Ritz on A itself over the subspace found
      const Matrix& v = inv.vectors;
      const Matrix av = sym * v;
      Eigen::SelfAdjointEigenSolver<Matrix> small(v.transpose() * av);
      res.values = small.eigenvalues().reverse();
      const Matrix coeffs = small.eigenvectors().rowwise().reverse();
      res.vectors = v * coeffs;
      res.residuals = (av * coeffs - res.vectors * res.values.asDiagonal()).colwise().norm().transpose();
      if (!std::isnan(inv.next_value)) res.next_value = kShift - 1.0 / inv.next_value;
      res.converged = (res.residuals.array() <= eo.tol).all();
      found = res.converged;
      if (!found) eo.start = res.vectors;
    }
  }
  if (!found) {
    method = "lanczos";
    auto apply = [&](const Matrix& x, Matrix& y) { y = sym * x; };
    res = symmetric_eigs(apply, n, eo);
    iterations += res.iterations;
  }

  SyncEigenvectors out;
  out.iterations = iterations;
  out.method = method;
  out.eigenvalues = res.values;
  out.vectors = scale.cwiseInverse().asDiagonal() * res.vectors.leftCols(d);
  out.residuals.resize(d);
  for (Eigen::Index k = 0; k < d; ++k) {
    const auto u = out.vectors.col(k);
    out.residuals(k) = (sync.matrix * u - res.values(k) * u).norm() / u.norm();
  }
  if (!res.converged || (out.residuals.array() > tol).any()) {
    throw Error("leading_eigenvectors: no convergence after " + std::to_string(iterations) +
                " iterations (max residual " + describe(out.residuals.maxCoeff()) + ", tol " + describe(tol) +
                ")");
  }
  if (!std::isnan(res.next_value)) {
    // the (d+1)-th Ritz value bounds λ_{d+1} from below, so this overestimates the gap
    out.eigenvalues.conservativeResize(d + 1);
    out.eigenvalues(d) = res.next_value;
    const double gap = (res.values(d - 1) - res.next_value) / std::abs(res.values(0));
    if (gap < 1e-6)
      out.warnings.push_back("degenerate spectrum: relative gap between eigenvalues " + std::to_string(d) + " and " +
                             std::to_string(d + 1) + " is " + std::to_string(gap));
  }
  return out;
}

Matrix project_orthogonal(const Matrix& block) { return nearest_orthogonal(block); }

RotationSync synchronise_rotations(const std::vector<PatchEmbedding>& embeddings, const PatchGraph& pg,
                                   const AlignOptions& options) {
  check_embeddings(embeddings, pg);
  const int p = pg.num_patches();
  const Eigen::Index d = embeddings.front().dim();
  RotationSync out;
  if (p == 1) {
    out.transforms.assign(1, Matrix::Identity(d, d));
    out.rotated = embeddings;
    return out;
  }
  if (!pg.is_connected()) throw Error("synchronise_rotations: patch graph is disconnected");

  const auto rel = estimate_relative_transforms(embeddings, pg, options.jobs);
  for (std::size_t e = 0; e < rel.degenerate.size(); ++e)
    if (rel.degenerate[e])
      out.warnings.push_back("degenerate overlap on patch edge " + std::to_string(pg.edges[e].i) + "-" +
                             std::to_string(pg.edges[e].j));
  const auto sync = build_sync_matrix(rel, pg);
  out.sync_nonzeros = static_cast<std::size_t>(sync.matrix.nonZeros());
  out.eigen = leading_eigenvectors(sync, d, options.tol_eigen, options.max_iter_eigen, options.seed);
  out.warnings.insert(out.warnings.end(), out.eigen.warnings.begin(), out.eigen.warnings.end());

  out.transforms.resize(static_cast<std::size_t>(p));
  out.rotated.resize(static_cast<std::size_t>(p));
  for (int k = 0; k < p; ++k) {
    try {
      out.transforms[k] = project_orthogonal(out.eigen.vectors.middleRows(k * d, d));
    } catch (const Error& err) {
      throw Error("patch " + std::to_string(k) + ": " + err.what());
    }
    out.rotated[k] = embeddings[k];
    out.rotated[k].coords = embeddings[k].coords * out.transforms[k];
  }
  return out;
}

Matrix translation_targets(const std::vector<PatchEmbedding>& rotated, const PatchGraph& pg) {
  const Eigen::Index d = rotated.front().dim();
  Matrix c(static_cast<Eigen::Index>(pg.edges.size()), d);
  for (std::size_t e = 0; e < pg.edges.size(); ++e) {
    const auto& edge = pg.edges[e];
    if (edge.overlap.empty())
      throw Error("solve_translations: patch edge " + std::to_string(edge.i) + "-" + std::to_string(edge.j) +
                  " has an empty overlap");
    const Matrix diff = rows_for(rotated[edge.i], edge.overlap) - rows_for(rotated[edge.j], edge.overlap);
    c.row(static_cast<Eigen::Index>(e)) = diff.colwise().mean();
  }
  return c;
}

TranslationSolve solve_translations(const Matrix& targets, const PatchGraph& pg, double tol, int max_iter) {
  const int p = pg.num_patches();
  const Eigen::Index d = targets.cols();
  const auto m = static_cast<Eigen::Index>(pg.edges.size());
  if (targets.rows() != m) throw Error("solve_translations: one target row per patch edge required");
  if (p > 1 && !pg.is_connected()) throw Error("solve_translations: patch graph is disconnected");
  const int limit = max_iter > 0 ? max_iter : 100 * p;

  // B has row (k, l) = e_l − e_k
  auto apply_b = [&](const Vector& t) {
    Vector out(m);
    for (Eigen::Index e = 0; e < m; ++e) out(e) = t(pg.edges[e].j) - t(pg.edges[e].i);
    return out;
  };
  auto apply_bt = [&](const Vector& r) {
    Vector out = Vector::Zero(p);
    for (Eigen::Index e = 0; e < m; ++e) {
      out(pg.edges[e].j) += r(e);
      out(pg.edges[e].i) -= r(e);
    }
    return out;
  };

  TranslationSolve out;
  out.translations = Matrix::Zero(p, d);
  out.history.resize(static_cast<std::size_t>(d));
  for (Eigen::Index col = 0; col < d; ++col) {
    auto& hist = out.history[static_cast<std::size_t>(col)];
    // CGLS: conjugate gradients on BᵀB t = Bᵀc without forming BᵀB
    Vector t = Vector::Zero(p);
    Vector r = targets.col(col);
    Vector s = apply_bt(r);
    Vector dir = s;
    double gamma = s.squaredNorm();
    const double gamma0 = gamma;
    hist.push_back(r.norm());
    int it = 0;
    while (gamma > tol * tol * gamma0 && gamma0 > 0) {
      if (it >= limit)
        throw Error("solve_translations: no convergence in " + std::to_string(limit) + " iterations (relative residual " +
                    describe(std::sqrt(gamma / gamma0)) + ")");
      const Vector q = apply_b(dir);
      const double alpha = gamma / q.squaredNorm();
      t += alpha * dir;
      r -= alpha * q;
      s = apply_bt(r);
      const double next = s.squaredNorm();
      dir = s + (next / gamma) * dir;
      gamma = next;
      hist.push_back(r.norm());
      ++it;
    }
    out.iterations = std::max(out.iterations, it);
    if (gamma0 > 0) out.relative_residual = std::max(out.relative_residual, std::sqrt(gamma / gamma0));
    out.translations.col(col) = t.array() - t.mean();
  }
  return out;
}

TranslationSolve solve_translations(const std::vector<PatchEmbedding>& rotated, const PatchGraph& pg, double tol,
                                    int max_iter) {
  check_embeddings(rotated, pg);
  if (pg.num_patches() == 1) {
    TranslationSolve out;
    out.translations = Matrix::Zero(1, rotated.front().dim());
    return out;
  }
  return solve_translations(translation_targets(rotated, pg), pg, tol, max_iter);
}

Matrix stitch(const std::vector<PatchEmbedding>& rotated, const Matrix& translations, const PatchGraph& pg) {
  check_embeddings(rotated, pg);
  const Eigen::Index d = rotated.front().dim();
  Matrix sum = Matrix::Zero(pg.num_nodes, d);
  std::vector<int> count(static_cast<std::size_t>(pg.num_nodes), 0);
  for (std::size_t k = 0; k < rotated.size(); ++k) {
    const auto& e = rotated[k];
    for (std::size_t r = 0; r < e.node_ids.size(); ++r) {
      sum.row(e.node_ids[r]) += e.coords.row(static_cast<Eigen::Index>(r)) + translations.row(static_cast<Eigen::Index>(k));
      ++count[e.node_ids[r]];
    }
  }
  for (NodeId v = 0; v < pg.num_nodes; ++v) {
    if (count[v] == 0) throw Error("stitch: node " + std::to_string(v) + " is not covered by any patch");
    sum.row(v) /= static_cast<double>(count[v]);
  }
  return sum;
}

AlignmentResult align(const std::vector<PatchEmbedding>& embeddings, const PatchGraph& pg,
                      const AlignOptions& options) {
  check_embeddings(embeddings, pg);
  auto rot = synchronise_rotations(embeddings, pg, options);
  auto trans = solve_translations(rot.rotated, pg, options.tol_lsq, options.max_iter_lsq);

  AlignmentResult out;
  out.global = stitch(rot.rotated, trans.translations, pg);
  out.transforms = std::move(rot.transforms);
  out.translations = std::move(trans.translations);
  out.coverage = pg.coverage();
  out.eigenvalues = rot.eigen.eigenvalues;
  out.sync_nonzeros = rot.sync_nonzeros;
  out.eigen_iterations = rot.eigen.iterations;
  out.eigen_method = rot.eigen.method;
  out.lsq_iterations = trans.iterations;
  out.warnings = std::move(rot.warnings);
  if (!pg.edges.empty()) {
    double total = 0;
    for (const auto& e : pg.edges) total += static_cast<double>(e.overlap_weight());
    out.mean_overlap = total / static_cast<double>(pg.edges.size());
  }
  return out;
}

Matrix no_trans_baseline(const std::vector<PatchEmbedding>& embeddings, const PatchGraph& pg) {
  check_embeddings(embeddings, pg);
  return stitch(embeddings, Matrix::Zero(pg.num_patches(), embeddings.front().dim()), pg);
}

void write_transforms(const AlignmentResult& result, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t k = 0; k < result.transforms.size(); ++k) {
    const auto& s = result.transforms[k];
    out << "# patch " << k << '\n';
    for (Eigen::Index r = 0; r < s.rows(); ++r) {
      for (Eigen::Index c = 0; c < s.cols(); ++c) out << (c ? " " : "") << s(r, c);
      out << '\n';
    }
    for (Eigen::Index c = 0; c < result.translations.cols(); ++c)
      out << (c ? " " : "") << result.translations(static_cast<Eigen::Index>(k), c);
    out << '\n';
  }
}

}  // namespace l2g
