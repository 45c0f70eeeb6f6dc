#pragma once

// Dense kernels behind every EigenScore variant. Everything here is a template
// over an Eigen expression so float archives and double analysis share code.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <span>
#include <string>

#include "gss/error.hpp"

namespace gss {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXd = Matrix<double>;
using VectorXd = Vector<double>;

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const char* what) {
  if (!m.allFinite()) fail(ErrorKind::InvalidInput, std::string(what) + ": non-finite entry");
}

/// J·Z with J = I − (1/K)·11ᵀ, i.e. subtract the column means.
template <typename Derived>
Matrix<typename Derived::Scalar> center_rows(const Eigen::MatrixBase<Derived>& z) {
  require(z.rows() >= 1, ErrorKind::InvalidInput, "center_rows: empty matrix");
  require_finite(z, "center_rows");
  return z.rowwise() - z.colwise().mean();
}

/// ln det(G) for symmetric positive definite G, as the sum of log eigenvalues.
///
/// Eigenvalues at or below `n·eps·λ_max` count as zero and raise
/// ErrorKind::Singular; with a Gram matrix this means the regularizer is too
/// small for the data scale.
template <typename Derived>
typename Derived::Scalar logdet_psd(const Eigen::MatrixBase<Derived>& g,
                                    typename Derived::Scalar symmetry_tol = 1e-8) {
  using Scalar = typename Derived::Scalar;
  require(g.rows() == g.cols() && g.rows() > 0, ErrorKind::InvalidInput,
          "logdet_psd: matrix must be square and non-empty");
  require_finite(g, "logdet_psd");
  const Scalar scale = std::max<Scalar>(Scalar(1), g.cwiseAbs().maxCoeff());
  require((g - g.transpose()).cwiseAbs().maxCoeff() <= symmetry_tol * scale,
          ErrorKind::InvalidInput, "logdet_psd: matrix is not symmetric");

  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> solver(g, Eigen::EigenvaluesOnly);
  require(solver.info() == Eigen::Success, ErrorKind::Numeric,
          "logdet_psd: eigen decomposition did not converge");
  const auto& eig = solver.eigenvalues();
  const Scalar floor = Scalar(g.rows()) * std::numeric_limits<Scalar>::epsilon() *
                       std::max<Scalar>(eig.cwiseAbs().maxCoeff(), std::numeric_limits<Scalar>::min());
  if (eig.minCoeff() <= floor) {
    fail(ErrorKind::Singular,
         "logdet_psd: matrix is singular (smallest eigenvalue " + std::to_string(eig.minCoeff()) +
             "); increase the regularizer alpha");
  }
  return eig.array().log().sum();
}

/// (1/K)·ln det((JZ)(JZ)ᵀ + α·I_K), using the K×K Gram form.
template <typename Derived>
typename Derived::Scalar eigenscore_matrix(const Eigen::MatrixBase<Derived>& z,
                                           typename Derived::Scalar alpha) {
  using Scalar = typename Derived::Scalar;
  require(z.rows() >= 2, ErrorKind::InvalidInput,
          "eigenscore: need at least 2 samples, got " + std::to_string(z.rows()));
  require(z.cols() >= 1, ErrorKind::InvalidInput, "eigenscore: zero embedding width");
  require(alpha > Scalar(0) && std::isfinite(alpha), ErrorKind::InvalidInput,
          "eigenscore: alpha must be positive");
  const Matrix<Scalar> centered = center_rows(z);
  const auto k = centered.rows();
  Matrix<Scalar> gram = centered * centered.transpose();
  gram.diagonal().array() += alpha;
  // Products are symmetric only up to rounding; fold them exactly.
  gram = (gram + gram.transpose()).eval() * Scalar(0.5);
  return logdet_psd(gram) / Scalar(k);
}

/// LOOE_i = E(Z) − E(Z without row i). Larger means row i adds more spread.
template <typename Derived>
Vector<typename Derived::Scalar> loo_eigenscore(const Eigen::MatrixBase<Derived>& z,
                                                typename Derived::Scalar alpha) {
  using Scalar = typename Derived::Scalar;
  const auto k = z.rows();
  require(k >= 3, ErrorKind::InvalidInput,
          "loo_eigenscore: need at least 3 samples, got " + std::to_string(k));
  const Scalar global = eigenscore_matrix(z, alpha);
  Vector<Scalar> out(k);
  Matrix<Scalar> rest(k - 1, z.cols());
  for (Eigen::Index i = 0; i < k; ++i) {
    rest.topRows(i) = z.topRows(i);
    rest.bottomRows(k - 1 - i) = z.bottomRows(k - 1 - i);
    out(i) = global - eigenscore_matrix(rest, alpha);
  }
  return out;
}

/// Euclidean distance of each row to the row mean.
template <typename Derived>
Vector<typename Derived::Scalar> mean_embedding_distance(const Eigen::MatrixBase<Derived>& z) {
  require(z.rows() >= 2, ErrorKind::InvalidInput, "mean_embedding_distance: need at least 2 rows");
  return center_rows(z).rowwise().norm();
}

/// Numerically stable ln Σ exp(x_i).
template <typename Scalar>
Scalar logsumexp(std::span<const Scalar> values) {
  require(!values.empty(), ErrorKind::InvalidInput, "logsumexp: empty input");
  Scalar top = -std::numeric_limits<Scalar>::infinity();
  for (Scalar v : values) top = std::max(top, v);
  if (!std::isfinite(top)) return top;
  Scalar acc = 0;
  for (Scalar v : values) acc += std::exp(v - top);
  return top + std::log(acc);
}

}  // namespace gss
