#pragma once

// Regularized design covariance V = lambda*I + sum_k x_k x_k^T maintained
// incrementally together with its lower Cholesky factor and log-determinant.
//
// A rank-one update costs O(d^2): the factor is repaired with a sweep of
// Givens-style rotations (cf. Seeger, "Low rank updates for the Cholesky
// decomposition", 2008) and the log-determinant follows the identity
//   log det(V + x x^T) = log det V + log(1 + x^T V^{-1} x).
// Only additions arise here, so no downdating is needed.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

namespace parbandit {

class CovarianceState {
 public:
  /// V = lambda * I.  dim and lambda must be positive.
  CovarianceState(Eigen::Index dim, double lambda) {
    if (dim <= 0) throw std::invalid_argument("CovarianceState: dimension must be positive");
    if (!(lambda > 0.0)) throw std::invalid_argument("CovarianceState: lambda must be positive");
    gram_ = Eigen::MatrixXd::Identity(dim, dim) * lambda;
    factor_ = Eigen::MatrixXd::Identity(dim, dim) * std::sqrt(lambda);
    log_det_ = static_cast<double>(dim) * std::log(lambda);
    lambda_ = lambda;
  }

  Eigen::Index dim() const { return gram_.rows(); }
  double lambda() const { return lambda_; }
  const Eigen::MatrixXd& gram() const { return gram_; }
  /// Lower-triangular L with L L^T = gram, positive diagonal.
  const Eigen::MatrixXd& factor() const { return factor_; }
  double log_det() const { return log_det_; }
  std::int64_t n_updates() const { return n_updates_; }

  /// V <- V + x x^T.  A zero vector leaves the matrix untouched but still
  /// counts as an applied update.
  void rank1_update(const Eigen::Ref<const Eigen::VectorXd>& x) {
    if (x.size() != dim()) throw std::invalid_argument("rank1_update: dimension mismatch");
    ++n_updates_;
    if (x.isZero(0.0)) return;

    log_det_ += std::log1p(quadratic_inv(x));
    gram_.selfadjointView<Eigen::Lower>().rankUpdate(x, 1.0);
    gram_.triangularView<Eigen::StrictlyUpper>() = gram_.transpose();

    // LINPACK-style rotation sweep: after step k, column k of the factor is
    // final and the carry vector v spans the remaining subspace.
    Eigen::VectorXd v = x;
    const Eigen::Index d = dim();
    for (Eigen::Index k = 0; k < d; ++k) {
      const double lkk = factor_(k, k);
      const double r = std::hypot(lkk, v[k]);
      const double c = r / lkk;
      const double s = v[k] / lkk;
      factor_(k, k) = r;
      if (k + 1 < d) {
        auto col = factor_.col(k).tail(d - k - 1);
        auto tail = v.tail(d - k - 1);
        col = (col + s * tail) / c;
        tail = c * tail - s * col;
      }
    }
  }

  /// x^T V^{-1} x via one triangular solve.
  double quadratic_inv(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    if (x.size() != dim()) throw std::invalid_argument("quadratic_inv: dimension mismatch");
    return factor_.triangularView<Eigen::Lower>().solve(x).squaredNorm();
  }

  /// sqrt(x^T V^{-1} x), the norm induced by the inverse covariance.
  double mahalanobis_inv(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    return std::sqrt(quadratic_inv(x));
  }

  /// M * eta where M = L^{-T} satisfies M M^T = V^{-1}; used to map standard
  /// normals onto the ellipsoid of V^{-1}.
  Eigen::VectorXd inv_sqrt_apply(const Eigen::Ref<const Eigen::VectorXd>& eta) const {
    if (eta.size() != dim()) throw std::invalid_argument("inv_sqrt_apply: dimension mismatch");
    return factor_.transpose().triangularView<Eigen::Upper>().solve(eta);
  }

  /// V^{-1} b via forward/backward substitution.
  Eigen::VectorXd solve(const Eigen::Ref<const Eigen::VectorXd>& b) const {
    if (b.size() != dim()) throw std::invalid_argument("solve: dimension mismatch");
    Eigen::VectorXd y = factor_.triangularView<Eigen::Lower>().solve(b);
    return factor_.transpose().triangularView<Eigen::Upper>().solve(y);
  }

  /// Half-whitened points: row i of the result is L^{-1} x_i for row i of X,
  /// so its squared norm is the quadratic form above.
  Eigen::MatrixXd whiten_rows(const Eigen::Ref<const Eigen::MatrixXd>& X) const {
    if (X.cols() != dim()) throw std::invalid_argument("whiten_rows: dimension mismatch");
    const Eigen::MatrixXd w = factor_.triangularView<Eigen::Lower>().solve(X.transpose());
    return w.transpose();
  }

  /// x_i^T V^{-1} x_i for every row of X in one triangular solve.
  Eigen::VectorXd quadratic_inv_rows(const Eigen::Ref<const Eigen::MatrixXd>& X) const {
    if (X.cols() != dim()) throw std::invalid_argument("quadratic_inv_rows: dimension mismatch");
    const Eigen::MatrixXd w = factor_.triangularView<Eigen::Lower>().solve(X.transpose());
    return w.colwise().squaredNorm().transpose();
  }

 private:
  Eigen::MatrixXd gram_;
  Eigen::MatrixXd factor_;
  double log_det_ = 0.0;
  double lambda_ = 0.0;
  std::int64_t n_updates_ = 0;
};

struct PsdComparison {
  bool dominated = false;   // whether A <= c * B in the Loewner order
  double witness_value = 0; // max eigenvalue of B^{-1/2} A B^{-1/2}
  double tolerance = 0;     // absolute slack applied to the comparison
};

namespace detail {

/// Largest eigenvalue of a symmetric matrix.  Dense solve up to d = 256;
/// beyond that a power iteration with relative tolerance 1e-9 (deterministic
/// start vector) avoids the O(d^3) cost.
inline double largest_eigenvalue_sym(const Eigen::MatrixXd& M) {
  const Eigen::Index d = M.rows();
  if (d <= 256) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
  }
  Eigen::VectorXd v = Eigen::VectorXd::Ones(d) / std::sqrt(static_cast<double>(d));
  double value = 0.0;
  for (int it = 0; it < 100000; ++it) {
    Eigen::VectorXd w = M.selfadjointView<Eigen::Lower>() * v;
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    v = w / norm;
    const double next = v.dot(M.selfadjointView<Eigen::Lower>() * v);
    if (std::abs(next - value) <= 1e-9 * std::max(1.0, std::abs(next))) return next;
    value = next;
  }
  return value;
}

/// Spectrum bounds of B^{-1/2} A B^{-1/2}, computed from the similar
/// symmetric matrix L_B^{-1} A L_B^{-T}.
inline std::pair<double, double> generalized_eigen_range(const CovarianceState& a,
                                                         const CovarianceState& b) {
  if (a.dim() != b.dim())
    throw std::invalid_argument("psd comparison: dimension mismatch");
  const Eigen::MatrixXd half = b.factor().triangularView<Eigen::Lower>().solve(a.gram());
  Eigen::MatrixXd m =
      b.factor().triangularView<Eigen::Lower>().solve(Eigen::MatrixXd(half.transpose()));
  m = 0.5 * (m + m.transpose());  // symmetrize roundoff
  const Eigen::Index d = m.rows();
  if (d <= 256) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
  }
  // Large case: max via power iteration; min via the shifted complement.
  const double hi = largest_eigenvalue_sym(m);
  Eigen::MatrixXd shifted = Eigen::MatrixXd::Identity(d, d) * hi - m;
  const double lo = hi - largest_eigenvalue_sym(shifted);
  return {lo, hi};
}

}  // namespace detail

/// Tests A <= c * B in the positive-semidefinite order.  The witness is the
/// largest generalized eigenvalue; the comparison allows a relative slack of
/// rel_tol on c so exact boundary cases resolve as dominated.
inline PsdComparison psd_dominates(const CovarianceState& a, const CovarianceState& b, double c,
                                   double rel_tol = 1e-9) {
  const auto [lo, hi] = detail::generalized_eigen_range(a, b);
  (void)lo;
  PsdComparison cmp;
  cmp.witness_value = hi;
  cmp.tolerance = rel_tol * std::max(1.0, std::abs(c));
  cmp.dominated = hi <= c + cmp.tolerance;
  return cmp;
}

/// Smallest alpha with augmented <= alpha * base.  When augmented really is
/// base plus rank-one terms the result is at least 1; it is floored there to
/// absorb eigensolver roundoff.
inline double min_doubling_coefficient(const CovarianceState& base,
                                       const CovarianceState& augmented) {
  const auto [lo, hi] = detail::generalized_eigen_range(augmented, base);
  (void)lo;
  return std::max(1.0, hi);
}

/// Replays the points as rank-one updates on V_0 = lambda*I and returns
///   ( sum_s log(1 + ||x_s||^2_{V_{s-1}^{-1}}),  log det V_n - log det V_0 ).
/// The two sides agree identically in exact arithmetic.
inline std::pair<double, double> elliptical_potential_check(
    double lambda, const std::vector<Eigen::VectorXd>& points) {
  if (!(lambda > 0.0))
    throw std::invalid_argument("elliptical_potential_check: lambda must be positive");
  if (points.empty()) return {0.0, 0.0};
  const Eigen::Index d = points.front().size();
  CovarianceState cov(d, lambda);
  const double log_det0 = cov.log_det();
  double lhs = 0.0;
  for (const auto& x : points) {
    if (x.size() != d)
      throw std::invalid_argument("elliptical_potential_check: dimension mismatch");
    lhs += std::log1p(cov.quadratic_inv(x));
    cov.rank1_update(x);
  }
  return {lhs, cov.log_det() - log_det0};
}

/// For A >= B > 0 returns (max Rayleigh quotient of (A, B), det A / det B).
/// The first never exceeds the second; callers use the pair to cross-check
/// determinant growth against spectral growth.
inline std::pair<double, double> det_ratio_bound_check(const CovarianceState& a,
                                                       const CovarianceState& b) {
  const auto [lo, hi] = detail::generalized_eigen_range(a, b);
  if (lo < 1.0 - 1e-9)
    throw std::invalid_argument("det_ratio_bound_check: first argument does not dominate second");
  return {hi, std::exp(a.log_det() - b.log_det())};
}

}  // namespace parbandit
