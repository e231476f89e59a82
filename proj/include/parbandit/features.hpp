#pragma once

// Feature maps applied to raw arm descriptors before they reach the linear
// machinery.  All maps are deterministic; the random ReLU map derives its
// projection matrix from a stream key so repeated calls agree.

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include <Eigen/Core>

#include "parbandit/rng.hpp"

namespace parbandit {

enum class FeatureKind { Identity, Quadratic, OneHot, OneHotQuadratic, RandomRelu };

struct FeatureScheme {
  FeatureKind kind = FeatureKind::Identity;
  int alphabet_size = 4;     // one-hot code range
  int relu_features = 250;   // output width of the random ReLU map
  std::uint64_t relu_key = 0;
};

/// Output dimension of a scheme on raw inputs of length raw_dim.
inline Eigen::Index expanded_dim(Eigen::Index raw_dim, const FeatureScheme& scheme) {
  switch (scheme.kind) {
    case FeatureKind::Identity:
      return raw_dim;
    case FeatureKind::Quadratic:
      return raw_dim + raw_dim * (raw_dim + 1) / 2;
    case FeatureKind::OneHot:
      return raw_dim * scheme.alphabet_size;
    case FeatureKind::OneHotQuadratic: {
      const Eigen::Index h = raw_dim * scheme.alphabet_size;
      return h + h * (h + 1) / 2;
    }
    case FeatureKind::RandomRelu:
      return scheme.relu_features;
  }
  throw std::invalid_argument("expanded_dim: unknown feature kind");
}

namespace detail {

// Raw entries followed by products x_i * x_j for i <= j, i outermost.
inline void quadratic_into(const Eigen::Ref<const Eigen::VectorXd>& x,
                           Eigen::Ref<Eigen::VectorXd> out) {
  const Eigen::Index d = x.size();
  out.head(d) = x;
  Eigen::Index k = d;
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = i; j < d; ++j) out[k++] = x[i] * x[j];
}

inline void one_hot_into(const Eigen::Ref<const Eigen::VectorXd>& x, int alphabet,
                         Eigen::Ref<Eigen::VectorXd> out) {
  out.setZero();
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double v = x[i];
    const double r = std::round(v);
    if (std::abs(v - r) > 1e-9 || r < 0 || r >= alphabet)
      throw std::invalid_argument("expand_features: one-hot input must hold integer codes in [0, alphabet)");
    out[i * alphabet + static_cast<Eigen::Index>(r)] = 1.0;
  }
}

/// Projection of the random ReLU map, entries iid standard normal in
/// row-major draw order from the scheme's key.
inline Eigen::MatrixXd relu_projection(Eigen::Index raw_dim, const FeatureScheme& scheme) {
  Stream stream(seed_stream(scheme.relu_key, "relu_projection"));
  Eigen::MatrixXd W(scheme.relu_features, raw_dim);
  for (Eigen::Index i = 0; i < W.rows(); ++i)
    for (Eigen::Index j = 0; j < W.cols(); ++j) W(i, j) = stream.normal();
  return W;
}

}  // namespace detail

/// Expands every row of `raw`; output has expanded_dim columns.
inline Eigen::MatrixXd expand_features(const Eigen::Ref<const Eigen::MatrixXd>& raw,
                                       const FeatureScheme& scheme) {
  const Eigen::Index n = raw.rows();
  const Eigen::Index d = raw.cols();
  if (d == 0) throw std::invalid_argument("expand_features: empty input");
  Eigen::MatrixXd out(n, expanded_dim(d, scheme));
  switch (scheme.kind) {
    case FeatureKind::Identity:
      out = raw;
      break;
    case FeatureKind::Quadratic:
      for (Eigen::Index r = 0; r < n; ++r) {
        Eigen::VectorXd row = raw.row(r).transpose();
        Eigen::VectorXd e(out.cols());
        detail::quadratic_into(row, e);
        out.row(r) = e.transpose();
      }
      break;
    case FeatureKind::OneHot:
      for (Eigen::Index r = 0; r < n; ++r) {
        Eigen::VectorXd row = raw.row(r).transpose();
        Eigen::VectorXd e(out.cols());
        detail::one_hot_into(row, scheme.alphabet_size, e);
        out.row(r) = e.transpose();
      }
      break;
    case FeatureKind::OneHotQuadratic:
      for (Eigen::Index r = 0; r < n; ++r) {
        Eigen::VectorXd row = raw.row(r).transpose();
        Eigen::VectorXd hot(d * scheme.alphabet_size);
        detail::one_hot_into(row, scheme.alphabet_size, hot);
        Eigen::VectorXd e(out.cols());
        detail::quadratic_into(hot, e);
        out.row(r) = e.transpose();
      }
      break;
    case FeatureKind::RandomRelu: {
      // phi(x) = relu(W x / sqrt(d)) / sqrt(k): the scaling keeps feature
      // norms comparable across input and output widths.
      const Eigen::MatrixXd W = detail::relu_projection(d, scheme);
      const double in_scale = 1.0 / std::sqrt(static_cast<double>(d));
      const double out_scale = 1.0 / std::sqrt(static_cast<double>(scheme.relu_features));
      out = ((raw * in_scale) * W.transpose()).cwiseMax(0.0) * out_scale;
      break;
    }
  }
  return out;
}

/// Single-vector convenience wrapper.
inline Eigen::VectorXd expand_feature_vector(const Eigen::Ref<const Eigen::VectorXd>& raw,
                                             const FeatureScheme& scheme) {
  return expand_features(Eigen::MatrixXd(raw.transpose()), scheme).row(0).transpose();
}

}  // namespace parbandit
