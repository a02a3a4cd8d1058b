#include "glmmix/activation.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <sstream>

namespace glmmix {

Activation Activation::from_name(const std::string& name) {
  if (name == "linear") return Activation(Kind::linear);
  if (name == "cubic") return Activation(Kind::cubic);
  if (name == "logistic") return Activation(Kind::logistic);
  if (name == "tanh") return Activation(Kind::tanh);
  throw std::invalid_argument("unknown activation '" + name +
                              "' (expected linear, cubic, logistic or tanh)");
}

std::string Activation::name() const {
  switch (kind_) {
    case Kind::linear: return "linear";
    case Kind::cubic: return "cubic";
    case Kind::logistic: return "logistic";
    case Kind::tanh: return "tanh";
  }
  return "linear";
}

double Activation::derivative(double z, int order) const {
  if (order < 0 || order > 3) throw std::invalid_argument("activation derivative order must be 0..3");
  switch (kind_) {
    case Kind::linear:
      return order == 0 ? z : (order == 1 ? 1.0 : 0.0);
    case Kind::cubic:
      switch (order) {
        case 0: return z * z * z;
        case 1: return 3.0 * z * z;
        case 2: return 6.0 * z;
        default: return 6.0;
      }
    case Kind::logistic: {
      // 1 / (1 + e^{-z}) without overflow for large |z|.
      const double s = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
      const double d1 = s * (1.0 - s);
      switch (order) {
        case 0: return s;
        case 1: return d1;
        case 2: return d1 * (1.0 - 2.0 * s);
        default: return d1 * (1.0 - 6.0 * s + 6.0 * s * s);
      }
    }
    case Kind::tanh: {
      const double t = std::tanh(z);
      const double sech2 = 1.0 - t * t;
      switch (order) {
        case 0: return t;
        case 1: return sech2;
        case 2: return -2.0 * t * sech2;
        default: return -2.0 * sech2 * (1.0 - 3.0 * t * t);
      }
    }
  }
  return 0.0;
}

const GaussHermiteRule& gauss_hermite(int order) {
  if (order < 1) throw std::invalid_argument("Gauss-Hermite order must be positive");
  static std::mutex mutex;
  static std::map<int, GaussHermiteRule> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(order);
  if (it != cache.end()) return it->second;

  // Golub-Welsch on the Jacobi matrix of the monic probabilists' Hermite
  // polynomials: zero diagonal, off-diagonal sqrt(k).
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(order, order);
  for (int k = 1; k < order; ++k) {
    jacobi(k - 1, k) = std::sqrt(static_cast<double>(k));
    jacobi(k, k - 1) = jacobi(k - 1, k);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
  GaussHermiteRule rule;
  rule.nodes = eig.eigenvalues();
  rule.weights = eig.eigenvectors().row(0).transpose().array().square();
  rule.weights /= rule.weights.sum();
  return cache.emplace(order, std::move(rule)).first->second;
}

RhoEstimate rho(const Activation& g, double norm_u, double bias) {
  if (!(norm_u >= 0.0) || !std::isfinite(bias))
    throw std::invalid_argument("rho: norm_u must be >= 0 and bias finite");
  auto third = [&](double z) { return g.derivative(z, 3); };
  if (g.kind() == Activation::Kind::linear) return {0.0, 0, 0.0};
  if (g.kind() == Activation::Kind::cubic) return {6.0, 0, 0.0};

  constexpr int kMaxOrder = 200;
  int order = 10;
  double prev = gaussian_expectation(third, bias, norm_u, order);
  for (;;) {
    const int next = std::min(2 * order, kMaxOrder);
    const double cur = gaussian_expectation(third, bias, norm_u, next);
    const double diff = std::abs(cur - prev);
    if (diff <= 1e-10 || next == kMaxOrder) {
      if (diff > 1e-6) {
        std::ostringstream os;
        os << "rho: Gauss-Hermite quadrature did not converge (|delta| = " << diff
           << " at order " << next << ")";
        throw QuadratureError(os.str());
      }
      return {cur, next, diff};
    }
    prev = cur;
    order = next;
  }
}

bool is_degenerate(const Activation& g, double norm_u, double bias) {
  return std::abs(rho(g, norm_u, bias).value) < kDegeneracyThreshold;
}

}  // namespace glmmix
