// Activation functions and the expected third derivative rho.

#ifndef GLMMIX_ACTIVATION_HPP
#define GLMMIX_ACTIVATION_HPP

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace glmmix {

class QuadratureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Activation {
 public:
  enum class Kind { linear, cubic, logistic, tanh };

  Activation() = default;
  explicit Activation(Kind kind) : kind_(kind) {}

  static Activation from_name(const std::string& name);

  Kind kind() const { return kind_; }
  std::string name() const;

  double operator()(double z) const { return derivative(z, 0); }
  /// order-th derivative, order in [0, 3].
  double derivative(double z, int order) const;

 private:
  Kind kind_ = Kind::linear;
};

struct RhoEstimate {
  double value = 0.0;
  int quadrature_order = 0;
  double abs_error_bound = 0.0;
};

/// Probabilists' Gauss-Hermite rule: E[f(Z)] ~ sum w_i f(x_i), Z ~ N(0, 1),
/// weights summing to one. Cached per order.
struct GaussHermiteRule {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
};
const GaussHermiteRule& gauss_hermite(int order);

/// E[g'''(z)] with z ~ N(bias, norm_u^2). The order doubles from 10 until
/// two successive estimates agree to 1e-10 (capped at 200); the error bound
/// is the last difference.
RhoEstimate rho(const Activation& g, double norm_u, double bias);

/// E[f(z)] with z ~ N(mean, sd^2) at a fixed quadrature order.
template <typename Fn>
double gaussian_expectation(Fn&& f, double mean, double sd, int order = 100) {
  const GaussHermiteRule& rule = gauss_hermite(order);
  double s = 0.0;
  for (Eigen::Index i = 0; i < rule.nodes.size(); ++i)
    s += rule.weights(i) * f(mean + sd * rule.nodes(i));
  return s;
}

constexpr double kDegeneracyThreshold = 1e-8;

/// |rho| below the degeneracy threshold; the third-moment GLM path carries no
/// signal and the y^3 regression path must be used instead.
bool is_degenerate(const Activation& g, double norm_u, double bias);

}  // namespace glmmix

#endif  // GLMMIX_ACTIVATION_HPP
