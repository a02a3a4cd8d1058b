#include <doctest.h>

#include <cmath>
#include <numbers>

#include "glmmix/score.hpp"
#include "oracles.hpp"

using namespace glmmix;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Mixture of N(a_k, I) written directly from its definition.
double mixture_density(const MatrixXd& A, const VectorXd& pi, const VectorXd& x) {
  const double d = static_cast<double>(x.size());
  double p = 0.0;
  for (Index k = 0; k < A.cols(); ++k)
    p += pi(k) * std::exp(-0.5 * (x - A.col(k)).squaredNorm()) / std::pow(2.0 * std::numbers::pi, d / 2.0);
  return p;
}

SymTensor3d fd_score3(const std::function<double(const VectorXd&)>& p, const VectorXd& x, double h) {
  const Index d = x.size();
  Tensor3d t(d, d, d);
  const double px = p(x);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j)
      for (Index k = 0; k < d; ++k) t(i, j, k) = -oracle::fd_third(p, x, i, j, k, h) / px;
  return SymTensor3d::symmetrize(t);
}

MatrixXd two_means(Index d, double sep) {
  MatrixXd A = MatrixXd::Zero(d, 2);
  A(0, 0) = sep / 2.0;
  A(0, 1) = -sep / 2.0;
  if (d > 1) {
    A(1, 0) = 0.3;
    A(1, 1) = 0.1;
  }
  return A;
}

}  // namespace

TEST_CASE("standard Gaussian first score is x") {
  const ScoreModel m = ScoreModel::standard_gaussian(2);
  const VectorXd x = (VectorXd(2) << 1, -2).finished();
  CHECK((m.score1(x) - x).norm() == 0.0);
}

TEST_CASE("Gaussian first score vanishes at the mean") {
  const VectorXd mu = (VectorXd(3) << 0.5, -1, 2).finished();
  MatrixXd S(3, 3);
  S << 2, 0.3, 0, 0.3, 1, 0.2, 0, 0.2, 0.5;
  const ScoreModel m = ScoreModel::gaussian(mu, S);
  CHECK(m.score1(mu).norm() < 1e-14);
}

TEST_CASE("Gaussian scores match finite differences of the density") {
  const VectorXd mu = (VectorXd(2) << 0.5, -1).finished();
  MatrixXd S(2, 2);
  S << 1.5, 0.4, 0.4, 0.8;
  const ScoreModel m = ScoreModel::gaussian(mu, S);
  const MatrixXd P = S.inverse();
  auto p = [&](const VectorXd& x) {
    return std::exp(-0.5 * (x - mu).dot(P * (x - mu))) / (2.0 * std::numbers::pi * std::sqrt(S.determinant()));
  };
  const VectorXd x = (VectorXd(2) << 0.2, 0.1).finished();
  const SymTensor3d fd = fd_score3(p, x, 1e-3);
  CHECK(oracle::max_abs_diff(m.score3(x), fd) < 1e-4);
  auto lp = [&](const VectorXd& y) { return std::log(p(y)); };
  CHECK((m.score1(x) + oracle::fd_gradient(lp, x, 1e-5)).norm() < 1e-8);
}

TEST_CASE("invalid Gaussian parameters are rejected") {
  MatrixXd S = MatrixXd::Identity(2, 2);
  S(1, 1) = 0.0;
  CHECK_THROWS_AS(ScoreModel::gaussian(VectorXd::Zero(2), S), InvalidModelError);
  MatrixXd ns(2, 2);
  ns << 1, 0.5, 0.2, 1;
  CHECK_THROWS_AS(ScoreModel::gaussian(VectorXd::Zero(2), ns), InvalidModelError);
}

TEST_CASE("invalid mixture weights are rejected") {
  const MatrixXd A = two_means(2, 4);
  CHECK_THROWS_AS(ScoreModel::gaussian_mixture(A, VectorXd::Constant(2, 0.4)), InvalidModelError);
  CHECK_THROWS_AS(ScoreModel::gaussian_mixture(A, (VectorXd(2) << 1.5, -0.5).finished()), InvalidModelError);
}

TEST_CASE("mixture first score at a component mean") {
  const MatrixXd A = two_means(3, 8.0);
  const VectorXd pi = (VectorXd(2) << 0.5, 0.5).finished();
  const ScoreModel m = ScoreModel::gaussian_mixture(A, pi);
  const VectorXd x = A.col(0);
  CHECK(m.score1(x).norm() < 1e-6);
  auto lp = [&](const VectorXd& y) { return std::log(mixture_density(A, pi, y)); };
  const VectorXd x2 = (VectorXd(3) << 0.3, -0.2, 1.1).finished();
  CHECK((m.score1(x2) + oracle::fd_gradient(lp, x2, 1e-5)).norm() < 1e-7);
}

TEST_CASE("mixture score does not underflow far from the means") {
  const MatrixXd A = two_means(2, 4.0);
  const ScoreModel m = ScoreModel::gaussian_mixture(A, (VectorXd(2) << 0.3, 0.7).finished());
  const VectorXd x = VectorXd::Constant(2, 60.0);
  const ScoreEvaluation e = m.evaluate(x);
  CHECK(e.s1.allFinite());
  CHECK(e.s2.allFinite());
  CHECK(e.s3.all_finite());
}

TEST_CASE("closed-form Gaussian third score") {
  SUBCASE("d = 1, x = 1 gives H3(1) = -2") {
    CHECK(score3_closed_gaussian(VectorXd::Ones(1))(0, 0, 0) == doctest::Approx(-2.0));
  }
  SUBCASE("x = 0 gives zero") { CHECK(score3_closed_gaussian(VectorXd::Zero(3)).norm() == 0.0); }
}

TEST_CASE("recursion matches closed forms for N(0, I)") {
  const ScoreModel m = ScoreModel::standard_gaussian(4);
  Rng rng(5);
  double err2 = 0.0, err3 = 0.0;
  for (int t = 0; t < 100; ++t) {
    const VectorXd x = standard_normal_vector(rng, 4);
    const MatrixXd s2 = std::get<MatrixXd>(score_m_recursive(m, x, 2));
    err2 = std::max(err2, (s2 - (x * x.transpose() - MatrixXd::Identity(4, 4))).cwiseAbs().maxCoeff());
    const SymTensor3d s3 = std::get<SymTensor3d>(score_m_recursive(m, x, 3));
    err3 = std::max(err3, oracle::max_abs_diff(s3, score3_closed_gaussian(x)));
    err3 = std::max(err3, oracle::max_abs_diff(m.score3(x), score3_closed_gaussian(x)));
  }
  CHECK(err2 <= 1e-10);
  CHECK(err3 <= 1e-10);
}

TEST_CASE("recursion matches the closed form for a general Gaussian") {
  MatrixXd S(3, 3);
  S << 2, 0.3, 0.1, 0.3, 1, 0.2, 0.1, 0.2, 0.5;
  const ScoreModel m = ScoreModel::gaussian((VectorXd(3) << 1, 0, -1).finished(), S);
  const VectorXd x = (VectorXd(3) << 0.4, 0.9, -0.3).finished();
  CHECK(oracle::max_abs_diff(score3_recursive(m, x), m.score3(x)) < 1e-10);
  CHECK((score2_recursive(m, x) - m.score2(x)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("mixture third score matches finite differences of the density") {
  const MatrixXd A = two_means(3, 3.0);
  const VectorXd pi = (VectorXd(2) << 0.4, 0.6).finished();
  const ScoreModel m = ScoreModel::gaussian_mixture(A, pi);
  auto p = [&](const VectorXd& y) { return mixture_density(A, pi, y); };
  Rng rng(6);
  for (int t = 0; t < 5; ++t) {
    const VectorXd x = standard_normal_vector(rng, 3);
    const SymTensor3d fd = fd_score3(p, x, 1e-3);
    CHECK(oracle::max_abs_diff(m.score3(x), fd) <= 1e-4);
    CHECK(oracle::max_abs_diff(score3_recursive(m, x), fd) <= 1e-4);
    MatrixXd fd2(3, 3);
    for (Index i = 0; i < 3; ++i)
      for (Index j = 0; j < 3; ++j) fd2(i, j) = oracle::fd_second(p, x, i, j, 1e-4) / p(x);
    CHECK((m.score2(x) - fd2).cwiseAbs().maxCoeff() <= 1e-4);
  }
}

TEST_CASE("recursion rejects unsupported orders and families") {
  const ScoreModel m = ScoreModel::standard_gaussian(2);
  CHECK_THROWS(score_m_recursive(m, VectorXd::Zero(2), 4));
  const ScoreModel t = ScoreModel::transformed(m, CoordinateMap::affine(2.0, 0.0));
  CHECK_THROWS_AS(score3_recursive(t, VectorXd::Zero(2)), UnsupportedFamilyError);
  CHECK_THROWS_AS(score3_transformed(m, VectorXd::Zero(2)), UnsupportedFamilyError);
}

TEST_CASE("identity transform leaves the score unchanged") {
  const ScoreModel base = ScoreModel::standard_gaussian(3);
  const ScoreModel t = ScoreModel::transformed(base, CoordinateMap::identity());
  const VectorXd x = (VectorXd(3) << 0.3, -1.2, 0.8).finished();
  CHECK(oracle::max_abs_diff(score3_transformed(t, x), base.score3(x)) < 1e-14);
}

TEST_CASE("doubling transform gives the N(0, 4I) score") {
  const ScoreModel t = ScoreModel::transformed(ScoreModel::standard_gaussian(3), CoordinateMap::affine(2.0, 0.0));
  const ScoreModel g4 = ScoreModel::gaussian(VectorXd::Zero(3), 4.0 * MatrixXd::Identity(3, 3));
  Rng rng(7);
  for (int k = 0; k < 10; ++k) {
    const VectorXd x = standard_normal_vector(rng, 3);
    const VectorXd tt = 2.0 * x;
    // t^{(x)3}/64 minus the symmetrized t (x) I / 16 terms.
    Tensor3d ref(3, 3, 3);
    for (Index i = 0; i < 3; ++i)
      for (Index j = 0; j < 3; ++j)
        for (Index l = 0; l < 3; ++l)
          ref(i, j, l) = tt(i) * tt(j) * tt(l) / 64.0 -
                         ((i == j) * tt(l) + (i == l) * tt(j) + (j == l) * tt(i)) / 16.0;
    CHECK(oracle::max_abs_diff(score3_transformed(t, x), ref) < 1e-12);
    CHECK(oracle::max_abs_diff(t.score3(x), g4.score3(tt)) < 1e-12);
    CHECK((t.features(x) - tt).norm() == 0.0);
  }
}

TEST_CASE("cubic transform matches finite differences of the transformed density") {
  const CoordinateMap phi = CoordinateMap::cubic(1.0, 1.0);
  const ScoreModel t = ScoreModel::transformed(ScoreModel::standard_gaussian(1), phi);
  // p_t(s) = N(psi(s)) psi'(s), psi the inverse of x^3 + x found by bisection.
  auto psi = [](double s) {
    double lo = -10.0, hi = 10.0;
    for (int i = 0; i < 200; ++i) {
      const double mid = 0.5 * (lo + hi);
      (mid * mid * mid + mid < s ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  };
  auto p = [&](const VectorXd& s) {
    const double x = psi(s(0));
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi) / (3.0 * x * x + 1.0);
  };
  for (double x : {-0.8, -0.2, 0.4, 1.1}) {
    const VectorXd raw = VectorXd::Constant(1, x);
    const VectorXd s = t.features(raw);
    // Richardson extrapolation removes the O(h^2) truncation term.
    const double f1 = oracle::fd_third(p, s, 0, 0, 0, 2e-3), f2 = oracle::fd_third(p, s, 0, 0, 0, 1e-3);
    const double ref = -(4.0 * f2 - f1) / 3.0 / p(s);
    CHECK(score3_transformed(t, raw)(0, 0, 0) == doctest::Approx(ref).epsilon(1e-4).scale(1.0));
    auto lp = [&](const VectorXd& y) { return std::log(p(y)); };
    CHECK(t.score1(raw)(0) == doctest::Approx(-oracle::fd_gradient(lp, s, 1e-5)(0)).epsilon(1e-6));
  }
}

TEST_CASE("singular transform derivative raises") {
  const ScoreModel t = ScoreModel::transformed(ScoreModel::standard_gaussian(2), CoordinateMap::cubic(1.0, 1e-14));
  CHECK_THROWS_AS(t.score3(VectorXd::Zero(2)), SingularTransformError);
  CHECK_THROWS_AS(CoordinateMap::affine(0.0, 1.0).validate(), InvalidModelError);
}

TEST_CASE("score tensors are permutation symmetric") {
  const ScoreModel m = ScoreModel::gaussian_mixture(two_means(3, 2.0), (VectorXd(2) << 0.5, 0.5).finished());
  const VectorXd x = (VectorXd(3) << 0.1, 0.7, -0.4).finished();
  const ScoreEvaluation e = m.evaluate(x);
  CHECK((e.s2 - e.s2.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(max_asymmetry(e.s3.to_array()) == 0.0);
}

TEST_CASE("packed third score matches the dense one") {
  const ScoreModel m = ScoreModel::transformed(
      ScoreModel::gaussian_mixture(two_means(3, 2.0), (VectorXd(2) << 0.3, 0.7).finished()),
      CoordinateMap::cubic(0.5, 1.0));
  const VectorXd x = (VectorXd(3) << 0.1, 0.7, -0.4).finished();
  std::vector<double> packed;
  m.score3_packed(x, packed);
  CHECK(oracle::max_abs_diff(SymTensor3d::from_packed(3, packed), m.score3(x)) < 1e-12);
}

TEST_CASE("scores have zero mean under the model") {
  const ScoreModel m = ScoreModel::gaussian_mixture(two_means(2, 3.0), (VectorXd(2) << 0.4, 0.6).finished());
  Rng rng(8);
  const Index n = 200000;
  const RowMatrix xs = m.sample(rng, n);
  VectorXd s1 = VectorXd::Zero(2), s1sq = VectorXd::Zero(2);
  std::vector<double> s3(4, 0.0), s3sq(4, 0.0);
  for (Index i = 0; i < n; ++i) {
    const ScoreEvaluation e = m.evaluate(xs.row(i).transpose());
    s1 += e.s1;
    s1sq += e.s1.cwiseAbs2();
    const double v[4] = {e.s3(0, 0, 0), e.s3(0, 0, 1), e.s3(0, 1, 1), e.s3(1, 1, 1)};
    for (int k = 0; k < 4; ++k) {
      s3[k] += v[k];
      s3sq[k] += v[k] * v[k];
    }
  }
  const double nn = static_cast<double>(n);
  for (Index a = 0; a < 2; ++a) {
    const double mean = s1(a) / nn, se = std::sqrt(s1sq(a) / nn / nn);
    CHECK(std::abs(mean) < 5.0 * se);
  }
  for (int k = 0; k < 4; ++k) {
    const double mean = s3[k] / nn, se = std::sqrt(s3sq[k] / nn / nn);
    CHECK(std::abs(mean) < 5.0 * se);
  }
}

TEST_CASE("log density of the mixture") {
  const MatrixXd A = two_means(2, 3.0);
  const VectorXd pi = (VectorXd(2) << 0.4, 0.6).finished();
  const ScoreModel m = ScoreModel::gaussian_mixture(A, pi);
  const VectorXd x = (VectorXd(2) << 0.3, -0.5).finished();
  CHECK(m.log_density(x) == doctest::Approx(std::log(mixture_density(A, pi, x))).epsilon(1e-12));
}
