#include <doctest.h>

#include <cmath>

#include "glmmix/em.hpp"
#include "glmmix/rng.hpp"
#include "glmmix/synthetic.hpp"

using namespace glmmix;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

Dataset linear_data(const VectorXd& u, double s, double b, Index n, std::uint64_t seed) {
  Rng rng(seed);
  Dataset data;
  data.x = ScoreModel::standard_gaussian(u.size()).sample(rng, n);
  data.y = (s * (data.x * u)).array() + b;
  return data;
}

EmState state(VectorXd scales, VectorXd biases, VectorXd weights) {
  EmState st;
  st.scales = std::move(scales);
  st.biases = std::move(biases);
  st.weights = std::move(weights);
  return st;
}

}  // namespace

TEST_CASE("single linear component converges to the truth") {
  const VectorXd u = (VectorXd(3) << 0.6, 0.0, 0.8).finished();
  const Dataset data = linear_data(u, 1.5, 0.3, 5000, 1);
  const EmReport rep = em_refine(data, u, Activation(Activation::Kind::linear),
                                 state(VectorXd::Constant(1, 0.75), VectorXd::Zero(1), VectorXd::Ones(1)),
                                 {.max_iter = 20, .tol = 1e-12});
  CHECK(rep.iterations <= 20);
  CHECK(std::abs(rep.state.scales(0) - 1.5) <= 1e-4);
  CHECK(std::abs(rep.state.biases(0) - 0.3) <= 1e-4);
  CHECK(rep.state.weights(0) == doctest::Approx(1.0));
}

TEST_CASE("single component matches direct least squares") {
  const VectorXd u = (VectorXd(2) << 1.0, 0.0).finished();
  Dataset data = linear_data(u, 2.0, -0.5, 4000, 2);
  Rng rng(3);
  data.y += 0.1 * standard_normal_vector(rng, data.size());
  MatrixXd design(data.size(), 2);
  design.col(0) = data.x * u;
  design.col(1).setOnes();
  const VectorXd ols = design.colPivHouseholderQr().solve(data.y);
  const EmReport rep = em_refine(data, u, Activation(Activation::Kind::linear),
                                 state(VectorXd::Ones(1), VectorXd::Zero(1), VectorXd::Ones(1)),
                                 {.max_iter = 50, .tol = 1e-14});
  CHECK(std::abs(rep.state.scales(0) - ols(0)) <= 1e-4);
  CHECK(std::abs(rep.state.biases(0) - ols(1)) <= 1e-4);
}

TEST_CASE("true parameters are a fixed point") {
  // Noiseless labels with a narrow likelihood make the responsibilities hard.
  GlmMixture m = random_model(4, 2, Activation(Activation::Kind::tanh), 4, {.condition_floor = 0.3});
  m.noise_sigma = 0.0;
  const Dataset data = sample(m, ScoreModel::standard_gaussian(4), 3000, 5);
  const EmReport rep = em_refine(data, m.U, m.activation, state(VectorXd::Ones(2), m.biases, m.weights),
                                 {.max_iter = 1, .sigma = 1e-3});
  CHECK((rep.state.scales - VectorXd::Ones(2)).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK((rep.state.biases - m.biases).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("log-likelihood is monotone and responsibilities are distributions") {
  GlmMixture m = random_model(5, 3, Activation(Activation::Kind::cubic), 6, {.condition_floor = 0.2});
  const Dataset data = sample(m, ScoreModel::standard_gaussian(5), 4000, 7);
  const EmReport rep = em_refine(data, m.U, m.activation,
                                 state(VectorXd::Constant(3, 0.8), VectorXd::Zero(3), VectorXd::Constant(3, 1.0 / 3)),
                                 {.max_iter = 30, .tol = 0.0});
  REQUIRE(rep.loglik_trace.size() >= 2);
  for (std::size_t i = 1; i < rep.loglik_trace.size(); ++i)
    CHECK(rep.loglik_trace[i] >= rep.loglik_trace[i - 1] - 1e-9);
  const VectorXd rows = rep.state.responsibilities.rowwise().sum();
  CHECK((rows.array() - 1.0).abs().maxCoeff() <= 1e-10);
  CHECK(rep.state.responsibilities.minCoeff() >= 0.0);
  CHECK(std::abs(rep.state.weights.sum() - 1.0) <= 1e-12);
  CHECK(rep.state.weights.minCoeff() >= 0.0);
}

TEST_CASE("an empty component is frozen with a warning") {
  const VectorXd u = (VectorXd(2) << 1.0, 0.0).finished();
  const Dataset data = linear_data(u, 1.0, 0.0, 2000, 8);
  MatrixXd dirs(2, 2);
  dirs << 1.0, 0.0, 0.0, 1.0;
  const EmReport rep = em_refine(data, dirs, Activation(Activation::Kind::linear),
                                 state(VectorXd::Ones(2), (VectorXd(2) << 0.0, 50.0).finished(),
                                       (VectorXd(2) << 0.5, 0.5).finished()),
                                 {.max_iter = 5});
  REQUIRE(rep.collapsed.size() == 2);
  CHECK_FALSE(rep.collapsed[0]);
  CHECK(rep.collapsed[1]);
  CHECK_FALSE(rep.warnings.empty());
  CHECK(rep.state.biases(1) == 50.0);
}

TEST_CASE("invalid EM inputs") {
  const VectorXd u = VectorXd::Unit(2, 0);
  const Dataset data = linear_data(u, 1.0, 0.0, 10, 9);
  const EmState ok = state(VectorXd::Ones(1), VectorXd::Zero(1), VectorXd::Ones(1));
  CHECK_THROWS(em_refine(data, MatrixXd::Identity(3, 1), Activation(Activation::Kind::linear), ok));
  CHECK_THROWS(em_refine(data, u, Activation(Activation::Kind::linear),
                         state(VectorXd::Ones(2), VectorXd::Zero(2), VectorXd::Constant(2, 0.5))));
  CHECK_THROWS(em_refine(data, u, Activation(Activation::Kind::linear), ok, {.sigma = 0.0}));
}

TEST_CASE("mixing weights from rho") {
  const MatrixXd dirs = MatrixXd::Identity(3, 2);
  SUBCASE("cubic") {
    const auto w = scale_from_rho(6.0 * (VectorXd(2) << 0.3, 0.7).finished(), Activation(Activation::Kind::cubic), dirs);
    REQUIRE(w.has_value());
    CHECK((w->first - (VectorXd(2) << 0.3, 0.7).finished()).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(w->second == VectorXd::Ones(2));
  }
  SUBCASE("linear is unavailable") {
    CHECK_FALSE(scale_from_rho(VectorXd::Ones(2), Activation(Activation::Kind::linear), dirs).has_value());
  }
  SUBCASE("logistic") {
    const Activation g(Activation::Kind::logistic);
    const VectorXd truth = (VectorXd(2) << 0.25, 0.75).finished();
    const auto w = scale_from_rho(rho(g, 1.0, 0.0).value * truth, g, dirs);
    REQUIRE(w.has_value());
    CHECK((w->first - truth).cwiseAbs().maxCoeff() <= 1e-3);
  }
  SUBCASE("negative coefficients are clipped") {
    const auto w = scale_from_rho((VectorXd(2) << -1.0, 6.0).finished(), Activation(Activation::Kind::cubic), dirs);
    REQUIRE(w.has_value());
    CHECK(w->first(0) == 0.0);
    CHECK(w->first(1) == 1.0);
  }
}

TEST_CASE("golden-section line search") {
  SUBCASE("quadratic") {
    const auto [x, fx] = golden_section_minimize([](double t) { return (t - 2.5) * (t - 2.5) + 1.0; }, 0.0, 0.1);
    CHECK(x == doctest::Approx(2.5).epsilon(1e-7));
    CHECK(fx == doctest::Approx(1.0));
  }
  SUBCASE("minimum behind the start") {
    const auto [x, fx] = golden_section_minimize([](double t) { return std::cosh(t + 3.0); }, 0.0, 0.5);
    CHECK(x == doctest::Approx(-3.0).epsilon(1e-6));
  }
  SUBCASE("never worse than the start") {
    const auto [x, fx] = golden_section_minimize([](double t) { return std::abs(t) < 1e-300 ? -1.0 : t * t; }, 0.0, 1.0);
    CHECK(x == 0.0);
    CHECK(fx == -1.0);
  }
}
