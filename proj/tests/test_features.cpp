#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "parbandit/features.hpp"
#include "parbandit/rng.hpp"

using namespace parbandit;

TEST_CASE("expanded dimensions for every scheme") {
  FeatureScheme s;
  REQUIRE(expanded_dim(14, s) == 14);

  s.kind = FeatureKind::Quadratic;
  REQUIRE(expanded_dim(14, s) == 119);  // 14 + 14*15/2
  REQUIRE(expanded_dim(3, s) == 9);

  s.kind = FeatureKind::OneHot;
  s.alphabet_size = 4;
  REQUIRE(expanded_dim(8, s) == 32);

  s.kind = FeatureKind::OneHotQuadratic;
  REQUIRE(expanded_dim(8, s) == 32 + 32 * 33 / 2);  // 560

  s.kind = FeatureKind::RandomRelu;
  s.relu_features = 250;
  REQUIRE(expanded_dim(100, s) == 250);
}

TEST_CASE("quadratic expansion lists coordinates then upper products") {
  FeatureScheme s;
  s.kind = FeatureKind::Quadratic;
  Eigen::Vector3d x(2.0, -1.0, 3.0);
  const Eigen::VectorXd e = expand_feature_vector(x, s);
  Eigen::VectorXd want(9);
  want << 2, -1, 3, 4, -2, 6, 1, -3, 9;  // x, then x_i x_j for i <= j
  REQUIRE(e.size() == 9);
  REQUIRE((e - want).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("one-hot encodes integer codes and rejects everything else") {
  FeatureScheme s;
  s.kind = FeatureKind::OneHot;
  s.alphabet_size = 4;
  Eigen::Vector3d x(0.0, 3.0, 1.0);
  const Eigen::VectorXd e = expand_feature_vector(x, s);
  Eigen::VectorXd want = Eigen::VectorXd::Zero(12);
  want[0] = 1.0;   // position 0, code 0
  want[7] = 1.0;   // position 1, code 3
  want[9] = 1.0;   // position 2, code 1
  REQUIRE((e - want).cwiseAbs().maxCoeff() == 0.0);

  // Tiny numeric fuzz on a code is tolerated (CSV round-trips).
  Eigen::Vector3d fuzzy(0.0, 3.0 + 1e-12, 1.0);
  REQUIRE_NOTHROW(expand_feature_vector(fuzzy, s));

  Eigen::Vector3d frac(0.5, 1.0, 2.0);
  REQUIRE_THROWS_AS(expand_feature_vector(frac, s), std::invalid_argument);
  Eigen::Vector3d big(0.0, 4.0, 1.0);
  REQUIRE_THROWS_AS(expand_feature_vector(big, s), std::invalid_argument);
  Eigen::Vector3d neg(0.0, -1.0, 1.0);
  REQUIRE_THROWS_AS(expand_feature_vector(neg, s), std::invalid_argument);
}

TEST_CASE("one-hot-quadratic is the composition of its two parts") {
  FeatureScheme hot;
  hot.kind = FeatureKind::OneHot;
  hot.alphabet_size = 3;
  FeatureScheme quad;
  quad.kind = FeatureKind::Quadratic;
  FeatureScheme both;
  both.kind = FeatureKind::OneHotQuadratic;
  both.alphabet_size = 3;

  Stream stream(64);
  Eigen::MatrixXd codes(5, 6);
  for (Eigen::Index r = 0; r < codes.rows(); ++r)
    for (Eigen::Index c = 0; c < codes.cols(); ++c)
      codes(r, c) = double(stream.uniform_below(3));

  const Eigen::MatrixXd direct = expand_features(codes, both);
  const Eigen::MatrixXd composed = expand_features(expand_features(codes, hot), quad);
  REQUIRE(direct.rows() == 5);
  REQUIRE(direct.cols() == 18 + 18 * 19 / 2);
  REQUIRE((direct - composed).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("random relu features follow phi(x) = relu(Wx/sqrt(d))/sqrt(k)") {
  FeatureScheme s;
  s.kind = FeatureKind::RandomRelu;
  s.relu_features = 40;
  s.relu_key = 777;

  const Eigen::Index d = 9;
  const Eigen::MatrixXd W = detail::relu_projection(d, s);
  REQUIRE(W.rows() == 40);
  REQUIRE(W.cols() == d);

  Stream stream(3);
  Eigen::MatrixXd X(7, d);
  for (Eigen::Index r = 0; r < X.rows(); ++r) X.row(r) = stream.normal_vector(d).transpose();

  const Eigen::MatrixXd got = expand_features(X, s);
  const Eigen::MatrixXd want =
      ((X / std::sqrt(double(d))) * W.transpose()).cwiseMax(0.0) / std::sqrt(40.0);
  REQUIRE((got - want).cwiseAbs().maxCoeff() < 1e-14);
  REQUIRE(got.minCoeff() >= 0.0);

  // Same key, same features; different key, different projection.
  REQUIRE((expand_features(X, s) - got).cwiseAbs().maxCoeff() == 0.0);
  FeatureScheme other = s;
  other.relu_key = 778;
  REQUIRE((expand_features(X, other) - got).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("matrix and vector expansion paths agree") {
  Stream stream(12);
  for (FeatureKind kind : {FeatureKind::Identity, FeatureKind::Quadratic, FeatureKind::RandomRelu}) {
    FeatureScheme s;
    s.kind = kind;
    s.relu_features = 11;
    s.relu_key = 5;
    Eigen::MatrixXd X(4, 6);
    for (Eigen::Index r = 0; r < X.rows(); ++r) X.row(r) = stream.normal_vector(6).transpose();
    const Eigen::MatrixXd batch = expand_features(X, s);
    for (Eigen::Index r = 0; r < X.rows(); ++r) {
      const Eigen::VectorXd single = expand_feature_vector(X.row(r).transpose(), s);
      REQUIRE((batch.row(r).transpose() - single).cwiseAbs().maxCoeff() < 1e-15);
    }
  }
}

TEST_CASE("degenerate inputs are rejected") {
  FeatureScheme s;
  REQUIRE_THROWS_AS(expand_features(Eigen::MatrixXd(3, 0), s), std::invalid_argument);
}
