#pragma once

#include <cmath>
#include <string>

#include <Eigen/Core>
#include <Eigen/SVD>

#include "l2g/common.hpp"

namespace l2g {

template <typename Scalar>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using DenseRowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

/// Relative singular-value threshold below which a square factor is treated
/// as rank deficient.
inline constexpr double kRankTolerance = 1e-12;

/// Rows minus their column means.
template <typename Derived>
DenseMatrix<typename Derived::Scalar> centered(const Eigen::MatrixBase<Derived>& x) {
  return x.rowwise() - x.colwise().mean();
}

/// Maximum element-wise deviation of QQᵀ from the identity.
template <typename Derived>
typename Derived::Scalar orthogonality_error(const Eigen::MatrixBase<Derived>& q) {
  using Scalar = typename Derived::Scalar;
  const auto d = q.rows();
  return (q * q.transpose() - DenseMatrix<Scalar>::Identity(d, d)).cwiseAbs().maxCoeff();
}

/// Nearest orthogonal matrix in Frobenius norm (polar factor UVᵀ of the SVD).
/// Throws when the block is numerically rank deficient.
template <typename Derived>
DenseMatrix<typename Derived::Scalar> nearest_orthogonal(const Eigen::MatrixBase<Derived>& block) {
  using Scalar = typename Derived::Scalar;
  if (block.rows() != block.cols() || block.rows() == 0) throw Error("nearest_orthogonal: block must be square");
  Eigen::BDCSVD<DenseMatrix<Scalar>> svd(block, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  if (!(s(0) > 0) || !(s(s.size() - 1) >= Scalar(kRankTolerance) * s(0)))
    throw Error("nearest_orthogonal: rank-deficient block (sigma_min/sigma_max = " +
                std::to_string(static_cast<double>(s(0) > 0 ? s(s.size() - 1) / s(0) : 0)) + ")");
  return svd.matrixU() * svd.matrixV().transpose();
}

template <typename Scalar>
struct RelativeTransform {
  DenseMatrix<Scalar> rotation;  // maps patch-j coordinates into the patch-i frame
  bool degenerate = false;       // overlap nearly rank deficient
};

/// Orthogonal R minimising ‖x̃_j Rᵀ − x̃_i‖_F over the centred overlap
/// coordinates: with H = x̃_jᵀ x̃_i = UΣVᵀ, R = VUᵀ. Reflections are allowed.
template <typename DerivedI, typename DerivedJ>
RelativeTransform<typename DerivedI::Scalar> estimate_relative_transform(const Eigen::MatrixBase<DerivedI>& xi,
                                                                          const Eigen::MatrixBase<DerivedJ>& xj) {
  using Scalar = typename DerivedI::Scalar;
  if (xi.rows() != xj.rows() || xi.cols() != xj.cols())
    throw Error("estimate_relative_transform: overlap coordinate shapes differ");
  const auto o = xi.rows(), d = xi.cols();
  if (o <= d)
    throw Error("estimate_relative_transform: overlap of " + std::to_string(o) + " nodes is too small for dimension " +
                std::to_string(d) + " (need at least d+1)");
  const DenseMatrix<Scalar> h = centered(xj).transpose() * centered(xi);
  Eigen::BDCSVD<DenseMatrix<Scalar>> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  RelativeTransform<Scalar> out;
  out.rotation = svd.matrixV() * svd.matrixU().transpose();
  out.degenerate = !(s(0) > 0) || !(s(d - 1) >= Scalar(kRankTolerance) * s(0));
  return out;
}

template <typename Scalar>
struct ProcrustesFit {
  DenseMatrix<Scalar> rotation;        // Q
  DenseRowVector<Scalar> translation;  // t
  Scalar distance = 0;                 // ‖X Qᵀ + 1tᵀ − Y‖_F / √n
  bool degenerate = false;             // X or Y has rank < d after centring
};

/// Best rigid motion (orthogonal Q, translation t) taking X onto Y.
template <typename DerivedX, typename DerivedY>
ProcrustesFit<typename DerivedX::Scalar> procrustes(const Eigen::MatrixBase<DerivedX>& x,
                                                    const Eigen::MatrixBase<DerivedY>& y) {
  using Scalar = typename DerivedX::Scalar;
  if (x.rows() != y.rows() || x.cols() != y.cols()) throw Error("procrustes: shapes differ");
  const auto n = x.rows(), d = x.cols();
  if (n < d + 1) throw Error("procrustes: need at least d+1 rows");
  const DenseMatrix<Scalar> xc = centered(x), yc = centered(y);
  Eigen::BDCSVD<DenseMatrix<Scalar>> svd(xc.transpose() * yc, Eigen::ComputeFullU | Eigen::ComputeFullV);
  ProcrustesFit<Scalar> fit;
  // argmin over Q of ‖xc Qᵀ − yc‖ has Qᵀ = UVᵀ
  fit.rotation = (svd.matrixU() * svd.matrixV().transpose()).transpose();
  fit.translation = y.colwise().mean() - x.colwise().mean() * fit.rotation.transpose();
  fit.distance = (xc * fit.rotation.transpose() - yc).norm() / std::sqrt(static_cast<Scalar>(n));

  auto rank_deficient = [&](const DenseMatrix<Scalar>& m) {
    Eigen::BDCSVD<DenseMatrix<Scalar>> s(m);
    const auto& sv = s.singularValues();
    return !(sv(d - 1) > Scalar(kRankTolerance) * sv(0));
  };
  fit.degenerate = rank_deficient(xc) || rank_deficient(yc);
  return fit;
}

/// Recovery error modulo a global rigid motion.
template <typename DerivedX, typename DerivedY>
typename DerivedX::Scalar procrustes_distance(const Eigen::MatrixBase<DerivedX>& x,
                                              const Eigen::MatrixBase<DerivedY>& y) {
  return procrustes(x, y).distance;
}

}  // namespace l2g
