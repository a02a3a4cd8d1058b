#include "glmmix/em.hpp"

#include <cmath>
#include <sstream>

#include "glmmix/parallel.hpp"

namespace glmmix {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

// E-step: responsibilities and mean log-likelihood.
double expectation(const Eigen::MatrixXd& proj, const Eigen::VectorXd& y, const Activation& g,
                   const EmState& s, double sigma, Eigen::MatrixXd& resp) {
  const Index n = proj.rows(), r = proj.cols();
  resp.resize(n, r);
  const double inv_var = 1.0 / (sigma * sigma);
  const double log_norm = -0.5 * kLog2Pi - std::log(sigma);
  Eigen::VectorXd logw(r);
  for (Index j = 0; j < r; ++j)
    logw(j) = s.weights(j) > 0.0 ? std::log(s.weights(j)) : -std::numeric_limits<double>::infinity();
  const std::size_t blocks = static_cast<std::size_t>((n + kMomentBlockSize - 1) / kMomentBlockSize);
  std::vector<std::vector<double>> partial(blocks);
  parallel_for(blocks, [&](std::size_t b) {
    const Index lo = static_cast<Index>(b) * kMomentBlockSize;
    const Index hi = std::min(n, lo + kMomentBlockSize);
    double acc = 0.0;
    Eigen::VectorXd lp(r);
    for (Index t = lo; t < hi; ++t) {
      double top = -std::numeric_limits<double>::infinity();
      for (Index j = 0; j < r; ++j) {
        const double resid = y(t) - g(s.scales(j) * proj(t, j) + s.biases(j));
        lp(j) = logw(j) - 0.5 * resid * resid * inv_var;
        top = std::max(top, lp(j));
      }
      double sum = 0.0;
      for (Index j = 0; j < r; ++j) sum += std::exp(lp(j) - top);
      const double lse = top + std::log(sum);
      for (Index j = 0; j < r; ++j) resp(t, j) = std::exp(lp(j) - lse);
      acc += lse + log_norm;
    }
    partial[b] = {acc};
  });
  return tree_sum(partial, 0, partial.size())[0] / static_cast<double>(n);
}

}  // namespace

EmReport em_refine(const Dataset& data, const Eigen::MatrixXd& directions, const Activation& g,
                   const EmState& init, const EmOptions& options) {
  data.validate();
  detail::require_same("em_refine directions", directions.rows(), data.dim());
  const Index r = directions.cols();
  if (init.scales.size() != r || init.biases.size() != r || init.weights.size() != r)
    throw std::invalid_argument("em_refine: initial state does not match the number of components");
  if (!(options.sigma > 0.0)) throw std::invalid_argument("em_refine: sigma must be positive");
  for (Index j = 0; j < r; ++j)
    if (std::abs(directions.col(j).norm() - 1.0) > 1e-8)
      throw std::invalid_argument("em_refine: directions must have unit columns");

  const Index n = data.size();
  const Eigen::MatrixXd proj = data.x * directions;

  EmReport report;
  report.state = init;
  report.state.weights = init.weights / init.weights.sum();
  report.collapsed.assign(static_cast<std::size_t>(r), false);
  EmState& s = report.state;
  s.loglik = expectation(proj, data.y, g, s, options.sigma, s.responsibilities);
  report.loglik_trace.push_back(s.loglik);

  for (int it = 0; it < options.max_iter; ++it) {
    // M-step.
    for (Index j = 0; j < r; ++j) {
      const auto col = s.responsibilities.col(j);
      if (col.maxCoeff() < 1e-8) {
        if (!report.collapsed[static_cast<std::size_t>(j)]) {
          std::ostringstream os;
          os << "component " << j << " collapsed (max responsibility " << col.maxCoeff() << "); frozen";
          report.warnings.push_back(os.str());
        }
        report.collapsed[static_cast<std::size_t>(j)] = true;
        continue;
      }
      report.collapsed[static_cast<std::size_t>(j)] = false;
      auto objective = [&](double scale, double bias) {
        double acc = 0.0;
        for (Index t = 0; t < n; ++t) {
          const double resid = data.y(t) - g(scale * proj(t, j) + bias);
          acc += col(t) * resid * resid;
        }
        return acc;
      };
      for (int sweep = 0; sweep < options.sweeps; ++sweep) {
        const double b = s.biases(j);
        s.scales(j) = golden_section_minimize([&](double v) { return objective(v, b); }, s.scales(j),
                                              0.1 * std::max(std::abs(s.scales(j)), 0.1))
                          .first;
        const double sc = s.scales(j);
        s.biases(j) = golden_section_minimize([&](double v) { return objective(sc, v); }, s.biases(j),
                                              0.1 * std::max(std::abs(s.biases(j)), 0.1))
                          .first;
      }
    }
    s.weights = s.responsibilities.colwise().mean().transpose();
    s.weights /= s.weights.sum();

    // E-step.
    const double previous = s.loglik;
    s.loglik = expectation(proj, data.y, g, s, options.sigma, s.responsibilities);
    report.loglik_trace.push_back(s.loglik);
    report.iterations = it + 1;
    if (std::abs(s.loglik - previous) < options.tol) {
      report.converged = true;
      break;
    }
  }
  return report;
}

std::optional<std::pair<Eigen::VectorXd, Eigen::VectorXd>> scale_from_rho(
    const Eigen::VectorXd& coefficients, const Activation& g, const Eigen::MatrixXd& directions) {
  detail::require_same("scale_from_rho", coefficients.size(), directions.cols());
  if (is_degenerate(g, 1.0, 0.0)) return std::nullopt;
  const double rho_value = rho(g, 1.0, 0.0).value;
  Eigen::VectorXd w = (coefficients / rho_value).cwiseMax(0.0);
  if (!(w.sum() > 0.0)) return std::nullopt;
  w /= w.sum();
  return std::make_pair(w, Eigen::VectorXd::Ones(coefficients.size()).eval());
}

}  // namespace glmmix
