#include "glmmix/pipeline.hpp"

#include <cmath>
#include <sstream>

#include "glmmix/rng.hpp"

namespace glmmix {

void ExperimentConfig::validate() const {
  std::ostringstream os;
  if (d < 1) os << "d must be >= 1";
  else if (r < 1) os << "r must be >= 1";
  else if (r > d) os << "r > d: need r <= d (got r = " << r << ", d = " << d << ")";
  else if (n < 1) os << "n must be >= 1";
  else if (mode != "glm" && mode != "regression" && mode != "auto") os << "mode must be glm, regression or auto";
  else if (!(decomposition.nu > 0.0 && decomposition.nu <= 1.0)) os << "nu must be in (0, 1]";
  else if (decomposition.iterations < 1) os << "N must be >= 1";
  else if (decomposition.restarts != 0 && decomposition.restarts < r) os << "L must be >= r";
  else if (!(em.sigma > 0.0)) os << "em sigma must be positive";
  else if (input && input->dim() != d) os << "input distribution dimension " << input->dim() << " != d = " << d;
  else if (trials < 1) os << "trials must be >= 1";
  if (!os.str().empty()) throw std::invalid_argument(os.str());
  Activation::from_name(activation);
  if (transform) transform->validate();
}

MomentMode resolve_mode(const std::string& mode, const Activation& g) {
  if (mode == "auto") return is_degenerate(g, 1.0, 0.0) ? MomentMode::regression : MomentMode::glm;
  return moment_mode_from_string(mode);
}

ScoreModel base_input(const ExperimentConfig& config) {
  return config.input ? *config.input : ScoreModel::standard_gaussian(config.d);
}

ScoreModel learning_score(const ExperimentConfig& config) {
  ScoreModel base = base_input(config);
  if (!config.transform) return base;
  return ScoreModel::transformed(std::move(base), *config.transform);
}

GlmMixture truth_model(const ExperimentConfig& config, std::uint64_t seed) {
  RandomModelOptions opts;
  opts.condition_floor = config.condition_floor;
  opts.bias_range = config.bias_range;
  opts.scale_min = config.scale_min;
  opts.scale_max = config.scale_max;
  opts.noise_sigma = config.noise_sigma;
  opts.transform = config.transform;
  return random_model(config.d, config.r, config.activation_fn(), seed, opts);
}

EmState initial_state(const Eigen::VectorXd& coefficients, const Activation& g, MomentMode mode) {
  const Index r = coefficients.size();
  EmState s;
  s.weights = Eigen::VectorXd::Constant(r, 1.0 / static_cast<double>(r));
  s.biases = Eigen::VectorXd::Zero(r);
  s.scales = Eigen::VectorXd::Ones(r);
  const double rho_value = mode == MomentMode::regression ? 6.0 : rho(g, 1.0, 0.0).value;
  if (std::abs(rho_value) < kDegeneracyThreshold) return s;
  for (Index j = 0; j < r; ++j) {
    const double cube = coefficients(j) / (rho_value * s.weights(j));
    if (std::isfinite(cube) && cube != 0.0) s.scales(j) = std::cbrt(cube);
  }
  return s;
}

GlmMixture assemble_model(const Eigen::MatrixXd& directions, const EmState& state, const Activation& g,
                          double noise_sigma, const std::optional<CoordinateMap>& transform) {
  GlmMixture m;
  m.U = directions * state.scales.asDiagonal();
  m.biases = state.biases;
  m.weights = state.weights;
  m.activation = g;
  m.noise_sigma = noise_sigma;
  m.transform = transform;
  return m;
}

namespace {

LearnResult finish_tensor_step(LearnResult result, const ExperimentConfig& config) {
  const Activation g = config.activation_fn();
  const EmState init = initial_state(result.decomposition.coefficients, g, result.mode);
  result.initial = assemble_model(result.decomposition.directions, init, g, config.em.sigma, config.transform);
  result.refined = result.initial;
  return result;
}

LearnResult tensor_step(const SymTensor3d& moment, const ExperimentConfig& config, MomentMode mode,
                        std::uint64_t seed) {
  LearnResult result;
  result.mode = mode;
  try {
    result.decomposition = robust_decompose(moment, config.r, config.decomposition, stream_seed(seed, "decompose"));
  } catch (const UnderRecoveryError& e) {
    result.decomposition = e.partial();
    result.error = e.what();
  }
  return finish_tensor_step(std::move(result), config);
}

}  // namespace

LearnResult learn_from_tensor(const SymTensor3d& moment, const ExperimentConfig& config, MomentMode mode,
                              std::uint64_t seed) {
  return tensor_step(moment, config, mode, seed);
}

LearnResult learn(const Dataset& data, const ScoreModel& score, const ExperimentConfig& config,
                  std::uint64_t seed) {
  data.validate();
  detail::require_same("learn: data vs score dimension", data.dim(), score.dim());
  const Activation g = config.activation_fn();
  const MomentMode mode = resolve_mode(config.mode, g);
  const MomentTensor m3 = empirical_m3(data, score, mode);
  LearnResult result = tensor_step(m3.tensor, config, mode, seed);

  const Index k = result.decomposition.directions.cols();
  if (config.run_em && k > 0) {
    const Index m = config.em_samples > 0 ? std::min(config.em_samples, data.size()) : data.size();
    Dataset sub;
    sub.x.resize(m, data.dim());
    sub.y = data.y.head(m);
    for (Index i = 0; i < m; ++i) sub.x.row(i) = score.features(data.x.row(i).transpose()).transpose();
    const EmState init = initial_state(result.decomposition.coefficients, g, mode);
    EmReport report = em_refine(sub, result.decomposition.directions, g, init, config.em);
    report.state.responsibilities.resize(0, 0);
    result.refined = assemble_model(result.decomposition.directions, report.state, g, config.em.sigma,
                                    config.transform);
    result.em = std::move(report);
  }
  result.rho_values.resize(k);
  for (Index j = 0; j < k; ++j) {
    try {
      result.rho_values(j) = rho(g, result.refined.U.col(j).norm(), result.refined.biases(j)).value;
    } catch (const QuadratureError&) {
      result.rho_values(j) = std::numeric_limits<double>::quiet_NaN();
    }
  }
  return result;
}

}  // namespace glmmix
