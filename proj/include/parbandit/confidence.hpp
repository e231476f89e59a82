#pragma once

// Ridge regression sums and the ellipsoidal confidence sets built on them.
//
// The set at round t is { theta : ||theta - center||_V <= inflation * radius }
// with radius = noise_scale * sqrt(log det V - d log lambda + 2 log(1/delta))
//              + sqrt(lambda) * param_bound
//              + sqrt((t-1) * processors) * misspecification.
// The log-determinant enters exactly (no dimension-based upper bound), and
// algorithm variants that reuse a stale center widen by a constant inflation
// rather than changing the radius formula.

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include <Eigen/Core>

#include "parbandit/covariance.hpp"

namespace parbandit {

/// Problem-scale constants shared by the confidence machinery and the
/// theoretical bound calculators.
struct ProblemScales {
  double noise_scale = 1.0;       // sub-Gaussian scale of reward noise
  double param_bound = 1.0;       // upper bound on ||theta*||
  double action_bound = 1.0;      // upper bound on ||x|| over all arms
  double ridge_lambda = 1.0;      // regularization strength
  double misspecification = 0.0;  // uniform model bias level
  double delta = 0.01;            // confidence failure probability

  void validate() const {
    if (!(noise_scale > 0.0)) throw std::invalid_argument("scales: noise_scale must be positive");
    if (!(param_bound > 0.0)) throw std::invalid_argument("scales: param_bound must be positive");
    if (!(action_bound > 0.0)) throw std::invalid_argument("scales: action_bound must be positive");
    if (!(ridge_lambda > 0.0)) throw std::invalid_argument("scales: ridge_lambda must be positive");
    if (misspecification < 0.0)
      throw std::invalid_argument("scales: misspecification must be nonnegative");
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("scales: delta must be in (0,1)");
  }

  /// (L*S/R)^2, the signal-to-noise ratio used by burn-in bounds.
  double snr() const { return std::pow(action_bound * param_bound / noise_scale, 2); }
};

/// Sufficient statistics of ridge regression: the regularized covariance and
/// the response-weighted design sum.
struct RegressionSums {
  CovarianceState cov;
  Eigen::VectorXd xty;
  std::int64_t count = 0;

  RegressionSums(Eigen::Index dim, double lambda)
      : cov(dim, lambda), xty(Eigen::VectorXd::Zero(dim)) {}

  void add(const Eigen::Ref<const Eigen::VectorXd>& x, double reward) {
    cov.rank1_update(x);
    xty.noalias() += x * reward;
    ++count;
  }
};

/// Ridge estimate V^{-1} (sum of x * reward); the zero vector when no
/// observations have been recorded.
inline Eigen::VectorXd ridge_estimate(const RegressionSums& sums) { return sums.cov.solve(sums.xty); }

/// Confidence radius at round t with the given batch size.  Grows with the
/// log-determinant of the covariance and with accumulated misspecification.
inline double beta_radius(const ProblemScales& scales, const CovarianceState& cov, std::int64_t t,
                          int processors) {
  scales.validate();
  if (t < 1) throw std::invalid_argument("beta_radius: round index must be >= 1");
  if (processors < 1) throw std::invalid_argument("beta_radius: processors must be >= 1");
  const double d = static_cast<double>(cov.dim());
  const double log_term =
      cov.log_det() - d * std::log(scales.ridge_lambda) + 2.0 * std::log(1.0 / scales.delta);
  const double sqrt_beta = scales.noise_scale * std::sqrt(log_term) +
                           std::sqrt(scales.ridge_lambda) * scales.param_bound;
  const double drift = std::sqrt(static_cast<double>(t - 1) * processors) * scales.misspecification;
  return sqrt_beta + drift;
}

/// Ellipsoid { theta : ||theta - center||_V <= inflation * radius }.  Holds a
/// non-owning view of the covariance; callers keep it alive while scoring.
struct ConfidenceSet {
  Eigen::VectorXd center;
  const CovarianceState* cov = nullptr;
  double radius = 0.0;
  double inflation = 1.0;

  double effective_radius() const { return inflation * radius; }
};

/// Optimistic value of one arm: max of x^T theta over the set.
inline double ucb_score(const Eigen::Ref<const Eigen::VectorXd>& x, const ConfidenceSet& set) {
  return x.dot(set.center) + set.effective_radius() * set.cov->mahalanobis_inv(x);
}

/// Optimistic values for all rows of X at once (one triangular solve for the
/// whole batch); identical to calling ucb_score row by row.
inline Eigen::VectorXd ucb_scores(const Eigen::Ref<const Eigen::MatrixXd>& X,
                                  const ConfidenceSet& set) {
  const Eigen::VectorXd quad = set.cov->quadratic_inv_rows(X);
  return X * set.center + set.effective_radius() * quad.cwiseSqrt();
}

/// Perturbed parameter center + effective_radius * V^{-1/2} eta for a caller-
/// supplied standard-normal eta; drawing eta outside keeps sampling replayable.
inline Eigen::VectorXd ts_sample(const ConfidenceSet& set,
                                 const Eigen::Ref<const Eigen::VectorXd>& eta) {
  return set.center + set.effective_radius() * set.cov->inv_sqrt_apply(eta);
}

/// Membership test with a fixed absolute slack for roundoff at the boundary.
inline bool contains(const ConfidenceSet& set, const Eigen::Ref<const Eigen::VectorXd>& theta) {
  const Eigen::VectorXd diff = theta - set.center;
  const double norm =
      (set.cov->factor().transpose().triangularView<Eigen::Upper>() * diff).norm();
  return norm <= set.effective_radius() + 1e-12;
}

}  // namespace parbandit
