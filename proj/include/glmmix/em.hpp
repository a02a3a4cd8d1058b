// EM over the low-dimensional residual parameters of a GLM mixture.
//
// Directions are fixed. Component j explains y through
// y ~ N(g(s_j <u_j, x> + b_j), sigma^2) and is chosen with probability w_j
// independently of x, so EM only moves (s_j, b_j, w_j).

#ifndef GLMMIX_EM_HPP
#define GLMMIX_EM_HPP

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "glmmix/activation.hpp"
#include "glmmix/moments.hpp"

namespace glmmix {

struct EmState {
  Eigen::VectorXd scales;
  Eigen::VectorXd biases;
  Eigen::VectorXd weights;
  Eigen::MatrixXd responsibilities;  // n x r
  double loglik = 0.0;               // mean per-sample log-likelihood
};

struct EmOptions {
  int max_iter = 50;
  double tol = 1e-8;  // on the change of mean log-likelihood
  double sigma = 0.1;
  int sweeps = 3;     // coordinate sweeps over (s_j, b_j) per M-step
};

struct EmReport {
  EmState state;
  int iterations = 0;
  bool converged = false;
  std::vector<double> loglik_trace;  // initial value first
  std::vector<bool> collapsed;
  std::vector<std::string> warnings;
};

EmReport em_refine(const Dataset& data, const Eigen::MatrixXd& directions, const Activation& g,
                   const EmState& init, const EmOptions& options = {});

/// Minimizes f on a line: downhill bracketing from x0, then golden-section
/// search. Returns the best point seen, never worse than x0.
template <typename Fn>
std::pair<double, double> golden_section_minimize(Fn&& f, double x0, double step, double rel_tol = 1e-10,
                                                  int max_iter = 200);

/// Mixing weights w_j = c_j / rho for unit-norm components (scales all 1);
/// nullopt when the activation is degenerate.
std::optional<std::pair<Eigen::VectorXd, Eigen::VectorXd>> scale_from_rho(
    const Eigen::VectorXd& coefficients, const Activation& g, const Eigen::MatrixXd& directions);

// --- implementation ---------------------------------------------------------

template <typename Fn>
std::pair<double, double> golden_section_minimize(Fn&& f, double x0, double step, double rel_tol,
                                                  int max_iter) {
  constexpr double kGold = 1.6180339887498949;
  constexpr double kInvGold = 0.6180339887498949;
  double best_x = x0, best_f = f(x0);
  auto consider = [&](double x, double fx) {
    if (fx < best_f) {
      best_f = fx;
      best_x = x;
    }
  };
  // Bracket: a, b, c with f(b) <= f(a), f(b) <= f(c).
  double a = x0, fa = best_f;
  double b = x0 + step, fb = f(b);
  consider(b, fb);
  if (fb > fa) {
    std::swap(a, b);
    std::swap(fa, fb);
  }
  double c = b + kGold * (b - a), fc = f(c);
  consider(c, fc);
  for (int it = 0; it < 60 && fc < fb; ++it) {
    a = b;
    fa = fb;
    b = c;
    fb = fc;
    c = b + kGold * (b - a);
    fc = f(c);
    consider(c, fc);
  }
  if (fc < fb) return {best_x, best_f};
  double lo = std::min(a, c), hi = std::max(a, c);
  double x1 = hi - kInvGold * (hi - lo), x2 = lo + kInvGold * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  consider(x1, f1);
  consider(x2, f2);
  for (int it = 0; it < max_iter && (hi - lo) > rel_tol * (1.0 + std::abs(best_x)); ++it) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - kInvGold * (hi - lo);
      f1 = f(x1);
      consider(x1, f1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + kInvGold * (hi - lo);
      f2 = f(x2);
      consider(x2, f2);
    }
  }
  return {best_x, best_f};
}

}  // namespace glmmix

#endif  // GLMMIX_EM_HPP
