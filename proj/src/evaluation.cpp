#include "glmmix/evaluation.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>

#include "glmmix/rng.hpp"

namespace glmmix {

std::vector<Index> hungarian(const Eigen::MatrixXd& cost) {
  detail::require_same("hungarian: square cost matrix", cost.rows(), cost.cols());
  const Index n = cost.rows();
  const double inf = std::numeric_limits<double>::infinity();
  // Potentials u (rows), v (columns); p[j] is the row matched to column j,
  // 1-based with column 0 as the virtual start.
  std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0), v(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<Index> p(static_cast<std::size_t>(n + 1), 0), way(static_cast<std::size_t>(n + 1), 0);
  for (Index i = 1; i <= n; ++i) {
    p[0] = i;
    Index j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n + 1), inf);
    std::vector<char> used(static_cast<std::size_t>(n + 1), 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const Index i0 = p[static_cast<std::size_t>(j0)];
      double delta = inf;
      Index j1 = 0;
      for (Index j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (Index j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const Index j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<Index> assignment(static_cast<std::size_t>(n), -1);
  for (Index j = 1; j <= n; ++j) assignment[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = j - 1;
  return assignment;
}

Eigen::MatrixXd normalize_columns(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd out = m;
  for (Index j = 0; j < out.cols(); ++j) {
    const double norm = out.col(j).norm();
    if (norm > 0.0) out.col(j) /= norm;
  }
  return out;
}

MatchReport match(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& estimate) {
  if (truth.rows() != estimate.rows() || truth.cols() != estimate.cols()) {
    std::ostringstream os;
    os << "match: shape mismatch (" << truth.rows() << "x" << truth.cols() << " vs " << estimate.rows()
       << "x" << estimate.cols() << ")";
    throw DimensionError(os.str());
  }
  const Index r = truth.cols();
  for (Index j = 0; j < r; ++j)
    if (std::abs(truth.col(j).norm() - 1.0) > 1e-6 || std::abs(estimate.col(j).norm() - 1.0) > 1e-6)
      throw std::invalid_argument("match: columns must be unit vectors");
  Eigen::MatrixXd cost(r, r);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < r; ++j)
      cost(i, j) = std::min((truth.col(i) - estimate.col(j)).norm(), (truth.col(i) + estimate.col(j)).norm());
  MatchReport rep;
  rep.permutation = hungarian(cost);
  rep.signs.resize(r);
  rep.per_component_error.resize(r);
  for (Index i = 0; i < r; ++i) {
    const Index j = rep.permutation[static_cast<std::size_t>(i)];
    const double plus = (truth.col(i) - estimate.col(j)).norm();
    const double minus = (truth.col(i) + estimate.col(j)).norm();
    rep.signs(i) = plus <= minus ? 1.0 : -1.0;
    rep.per_component_error(i) = std::min(plus, minus);
  }
  rep.max_error = r > 0 ? rep.per_component_error.maxCoeff() : 0.0;
  rep.mean_error = r > 0 ? rep.per_component_error.mean() : 0.0;
  return rep;
}

double full_parameter_error(const GlmMixture& truth, const GlmMixture& estimate, const MatchReport& report) {
  double worst = 0.0;
  for (Index i = 0; i < truth.components(); ++i) {
    const Index j = report.permutation[static_cast<std::size_t>(i)];
    const double weight_err = (estimate.U.col(j) - truth.U.col(i)).squaredNorm();
    const double bias_err = estimate.biases(j) - truth.biases(i);
    worst = std::max(worst, std::sqrt(weight_err + bias_err * bias_err));
  }
  return worst;
}

LogLogFit fit_log_log(const std::vector<Index>& n_values, const Eigen::VectorXd& errors) {
  const Index k = static_cast<Index>(n_values.size());
  detail::require_same("fit_log_log", k, errors.size());
  if (k < 2) throw std::invalid_argument("fit_log_log: need at least two points");
  Eigen::VectorXd lx(k), ly(k);
  for (Index i = 0; i < k; ++i) {
    lx(i) = std::log(static_cast<double>(n_values[static_cast<std::size_t>(i)]));
    ly(i) = std::log(errors(i));
  }
  const double mx = lx.mean(), my = ly.mean();
  const double sxx = (lx.array() - mx).square().sum();
  const double sxy = ((lx.array() - mx) * (ly.array() - my)).sum();
  LogLogFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (k > 2) {
    const Eigen::ArrayXd resid = ly.array() - (fit.intercept + fit.slope * lx.array());
    const double se = std::sqrt(resid.square().sum() / static_cast<double>(k - 2) / sxx);
    const boost::math::students_t dist(static_cast<double>(k - 2));
    const double tq = boost::math::quantile(boost::math::complement(dist, 0.025));
    fit.ci = {fit.slope - tq * se, fit.slope + tq * se};
    fit.ci_defined = true;
  }
  return fit;
}

SweepResult sweep(const ExperimentConfig& config) {
  config.validate();
  if (config.n_values.empty()) throw std::invalid_argument("sweep: empty n list");
  for (std::size_t i = 1; i < config.n_values.size(); ++i)
    if (config.n_values[i] <= config.n_values[i - 1])
      throw std::invalid_argument("sweep: n values must be strictly increasing");
  SweepResult result;
  result.n_values = config.n_values;
  if (config.trials < 3) {
    result.warnings.push_back("fewer than 3 trials per n; the slope interval is unreliable");
    result.ci_reliable = false;
  }

  ExperimentConfig trial_config = config;
  trial_config.run_em = false;
  const Activation g = config.activation_fn();
  const MomentMode mode = resolve_mode(config.mode, g);
  const ScoreModel input = base_input(config);
  const ScoreModel score = learning_score(config);

  int failures = 0;
  result.errors = Eigen::VectorXd::Zero(static_cast<Index>(config.n_values.size()));
  for (std::size_t ni = 0; ni < config.n_values.size(); ++ni) {
    const Index n = config.n_values[ni];
    int ok = 0;
    for (int trial = 0; trial < config.trials; ++trial) {
      const auto start = std::chrono::steady_clock::now();
      SweepRecord rec;
      rec.n = n;
      rec.trial = trial;
      try {
        const GlmMixture truth = truth_model(config, stream_seed(config.master_seed, "model", {static_cast<std::uint64_t>(trial)}));
        const std::uint64_t learn_seed =
            stream_seed(config.master_seed, "learn", {static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(trial)});
        LearnResult lr;
        if (config.exact_moments) {
          Eigen::VectorXd coeffs(truth.components());
          for (Index j = 0; j < truth.components(); ++j) coeffs(j) = truth.weights(j) * (mode == MomentMode::regression ? 6.0 : rho(g, truth.U.col(j).norm(), truth.biases(j)).value);
          lr = learn_from_tensor(exact_cp_tensor(truth.U, coeffs), trial_config, mode, learn_seed);
        } else {
          const Dataset data = sample(truth, input, n,
                                      stream_seed(config.master_seed, "data", {static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(trial)}));
          lr = learn(data, score, trial_config, learn_seed);
        }
        if (!lr.ok()) throw std::runtime_error(lr.error);
        const MatchReport rep = match(normalize_columns(truth.U), normalize_columns(lr.refined.U));
        rec.max_error = rep.max_error;
        rec.mean_error = rep.mean_error;
        result.errors(static_cast<Index>(ni)) += rep.max_error;
        ++ok;
      } catch (const std::exception& e) {
        rec.error = e.what();
        rec.max_error = rec.mean_error = std::numeric_limits<double>::quiet_NaN();
        ++failures;
      }
      rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      result.records.push_back(rec);
    }
    result.errors(static_cast<Index>(ni)) = ok > 0 ? result.errors(static_cast<Index>(ni)) / ok
                                                   : std::numeric_limits<double>::quiet_NaN();
  }
  const int total = config.trials * static_cast<int>(config.n_values.size());
  if (failures * 5 > total) {
    std::ostringstream os;
    os << "sweep: " << failures << " of " << total << " trials failed";
    throw SweepError(os.str());
  }
  if (config.n_values.size() >= 2 && (result.errors.array() > 0.0).all()) {
    const LogLogFit fit = fit_log_log(config.n_values, result.errors);
    result.slope = fit.slope;
    result.intercept = fit.intercept;
    result.slope_ci = fit.ci;
    result.ci_reliable = result.ci_reliable && fit.ci_defined;
  } else {
    result.ci_reliable = false;
    result.warnings.push_back("slope undefined: need two n values with positive error");
  }
  return result;
}

}  // namespace glmmix
