#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include <Eigen/Eigenvalues>

#include "l2g/common.hpp"
#include "l2g/random.hpp"

namespace l2g {

enum class Spectrum {
  LargestAlgebraic,  // λ_1 ≥ λ_2 ≥ ...
  LargestMagnitude,  // |λ_1| ≥ |λ_2| ≥ ...
};

struct EigenOptions {
  Eigen::Index nev = 1;
  Spectrum which = Spectrum::LargestAlgebraic;
  double tol = 1e-10;        // on ‖Av − λv‖ for unit v
  bool relative_tol = false;  // compare against tol·|λ| instead
  int max_iter = 0;          // block expansions; 0 = 50 * nev + 1000
  Eigen::Index block = 0;    // 0 = nev
  Eigen::Index max_basis = 0;  // 0 = max(3 * nev, nev + 2 * block, 40)
  std::uint64_t seed = 0x5EED;
  Matrix start;  // optional initial vectors (n rows), completed randomly up to `block`
};

struct EigenResult {
  Vector values;       // ordered per EigenOptions::which
  Matrix vectors;      // orthonormal columns
  Vector residuals;    // ‖Av − λv‖ per column
  double next_value = std::nan("");  // Ritz value just past the wanted ones, if any
  int iterations = 0;  // block expansions performed
  bool converged = false;
};

namespace detail {

inline std::vector<Eigen::Index> spectrum_order(const Vector& theta, Spectrum which) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(theta.size()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) {
    if (which == Spectrum::LargestMagnitude) {
      const double ma = std::abs(theta(a)), mb = std::abs(theta(b));
      if (ma != mb) return ma > mb;
    }
    return theta(a) > theta(b);
  });
  return idx;
}

// Orthogonalises `block` against the columns of `basis` (blockwise, twice)
// and within itself (classical Gram-Schmidt, twice per column). Columns that
// vanish are dropped.
inline Matrix orthonormalise_against(const Matrix& basis, Matrix block) {
  const Vector start = block.colwise().norm().transpose();
  if (basis.cols() > 0)
    for (int pass = 0; pass < 2; ++pass) block -= basis * (basis.transpose() * block);
  Matrix out(block.rows(), 0);
  for (Eigen::Index c = 0; c < block.cols(); ++c) {
    if (start(c) == 0.0) continue;
    Vector v = block.col(c);
    if (out.cols() > 0)
      for (int pass = 0; pass < 2; ++pass) v -= out * (out.transpose() * v);
    const double norm = v.norm();
    if (norm <= 1e-10 * start(c)) continue;
    out.conservativeResize(Eigen::NoChange, out.cols() + 1);
    out.col(out.cols() - 1) = v / norm;
  }
  return out;
}

}  // namespace detail

/// Extreme eigenpairs of a symmetric operator by restarted block Lanczos with
/// full reorthogonalisation. The Krylov basis is extended by the residuals of
/// the wanted Ritz pairs that have not converged yet, and thick-restarted on
/// the leading Ritz vectors when it reaches `max_basis` columns.
///
/// `apply(X, Y)` must set Y = A X for an n × k block X.
template <typename ApplyFn>
EigenResult symmetric_eigs(ApplyFn&& apply, Eigen::Index n, const EigenOptions& options) {
  const Eigen::Index nev = options.nev;
  if (nev < 1 || nev > n) throw Error("symmetric_eigs: need 1 <= nev <= n");
  const Eigen::Index block = std::min(options.block > 0 ? options.block : nev, n);
  const Eigen::Index max_basis =
      std::min(n, options.max_basis > 0 ? std::max(options.max_basis, nev + block)
                                        : std::max({3 * nev, nev + 2 * block, Eigen::Index{40}}));
  const int max_iter = options.max_iter > 0 ? options.max_iter : static_cast<int>(50 * nev + 1000);

  Rng rng(options.seed);
  Matrix basis(n, 0), image(n, 0);
  Matrix projected(0, 0);  // basisᵀ A basis
  Matrix fresh(n, 0);
  if (options.start.size() > 0) {
    if (options.start.rows() != n) throw Error("symmetric_eigs: start block has the wrong number of rows");
    fresh = detail::orthonormalise_against(basis, options.start);
  }
  if (fresh.cols() < block) {
    const Matrix extra = detail::orthonormalise_against(fresh, rng.normal_matrix(n, block - fresh.cols()));
    fresh.conservativeResize(Eigen::NoChange, fresh.cols() + extra.cols());
    fresh.rightCols(extra.cols()) = extra;
  }

  EigenResult result;
  for (;;) {
    // extend basis, image and the projected matrix by the fresh block
    Matrix fresh_image(n, fresh.cols());
    apply(fresh, fresh_image);
    ++result.iterations;
    const Eigen::Index old = basis.cols(), add = fresh.cols();
    Matrix cross = basis.transpose() * fresh_image;
    Matrix corner = fresh.transpose() * fresh_image;
    basis.conservativeResize(Eigen::NoChange, old + add);
    basis.rightCols(add) = fresh;
    image.conservativeResize(Eigen::NoChange, old + add);
    image.rightCols(add) = fresh_image;
    projected.conservativeResize(old + add, old + add);
    projected.topRightCorner(old, add) = cross;
    projected.bottomLeftCorner(add, old) = cross.transpose();
    projected.bottomRightCorner(add, add) = 0.5 * (corner + corner.transpose());

    Eigen::SelfAdjointEigenSolver<Matrix> small(projected);
    const Vector& theta = small.eigenvalues();
    const auto order = detail::spectrum_order(theta, options.which);
    const Eigen::Index m = basis.cols();
    const Eigen::Index wanted = std::min(nev, m);

    Matrix coeffs(m, m);
    Vector sorted_theta(m);
    for (Eigen::Index k = 0; k < m; ++k) {
      coeffs.col(k) = small.eigenvectors().col(order[static_cast<std::size_t>(k)]);
      sorted_theta(k) = theta(order[static_cast<std::size_t>(k)]);
    }
    // residuals for the wanted pairs and one block beyond them
    const Eigen::Index probe = std::min(m, wanted + block);
    Matrix ritz = basis * coeffs.leftCols(probe);
    Matrix resid = image * coeffs.leftCols(probe) - ritz * sorted_theta.head(probe).asDiagonal();
    Vector resid_norm = resid.colwise().norm().transpose();

    const bool whole_space = m == n;
    bool done = wanted == nev;
    auto converged = [&](Eigen::Index k) {
      return resid_norm(k) <= (options.relative_tol ? options.tol * std::abs(sorted_theta(k)) : options.tol);
    };
    for (Eigen::Index k = 0; k < wanted && done; ++k) done = converged(k);
    if (done || whole_space || result.iterations >= max_iter) {
      result.values = sorted_theta.head(wanted);
      result.vectors = ritz.leftCols(wanted);
      result.residuals = resid_norm.head(wanted);
      if (m > wanted) result.next_value = sorted_theta(wanted);
      result.converged = wanted == nev && (done || whole_space);
      if (whole_space && !done) {
        // Rayleigh-Ritz over the whole space is exact up to rounding
        result.converged = true;
        for (Eigen::Index k = 0; k < wanted; ++k)
          result.converged = result.converged && (converged(k) || resid_norm(k) <= 1e-8);
      }
      return result;
    }

    Matrix expand(n, 0);
    for (Eigen::Index k = 0; k < probe && expand.cols() < block; ++k) {
      if (k < wanted && converged(k)) continue;
      expand.conservativeResize(Eigen::NoChange, expand.cols() + 1);
      expand.col(expand.cols() - 1) = resid.col(k);
    }

    if (max_basis < n && m + block > max_basis) {
      // thick restart: basisᵀ A basis becomes diagonal in the Ritz basis
      const Eigen::Index keep = std::min(m, std::max(nev + block, max_basis - 2 * block));
      basis = (basis * coeffs.leftCols(keep)).eval();
      image = (image * coeffs.leftCols(keep)).eval();
      projected = sorted_theta.head(keep).asDiagonal();
    }
    fresh = detail::orthonormalise_against(basis, expand);
    if (fresh.cols() == 0) fresh = detail::orthonormalise_against(basis, rng.normal_matrix(n, block));
    if (fresh.cols() == 0) {
      result.values = sorted_theta.head(wanted);
      result.vectors = ritz.leftCols(wanted);
      result.residuals = resid_norm.head(wanted);
      result.converged = false;
      return result;
    }
  }
}

}  // namespace l2g
