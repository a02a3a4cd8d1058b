// End-to-end learning: third-order cross-moment, tensor decomposition, EM.

#ifndef GLMMIX_PIPELINE_HPP
#define GLMMIX_PIPELINE_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "glmmix/activation.hpp"
#include "glmmix/decomposition.hpp"
#include "glmmix/em.hpp"
#include "glmmix/moments.hpp"
#include "glmmix/score.hpp"
#include "glmmix/synthetic.hpp"

namespace glmmix {

struct ExperimentConfig {
  Index d = 10;
  Index r = 3;
  Index n = 100000;
  std::string activation = "cubic";
  std::optional<ScoreModel> input;  // N(0, I_d) when unset
  std::string mode = "auto";        // glm | regression | auto
  DecompositionParams decomposition;
  EmOptions em;
  bool run_em = true;
  Index em_samples = 20000;  // 0 uses every sample

  // Ground truth for gen / sweep.
  double noise_sigma = 0.1;
  double bias_range = 0.5;
  double scale_min = 1.0;
  double scale_max = 1.0;
  double condition_floor = 0.05;
  std::optional<CoordinateMap> transform;

  std::uint64_t master_seed = 0;
  std::string output_dir = ".";

  // Sweep.
  std::vector<Index> n_values;
  int trials = 5;
  bool exact_moments = false;
  double threshold = 0.1;

  Activation activation_fn() const { return Activation::from_name(activation); }
  /// Throws std::invalid_argument naming the violated precondition.
  void validate() const;
};

/// auto resolves to regression iff the activation is degenerate at (1, 0).
MomentMode resolve_mode(const std::string& mode, const Activation& g);

/// Input distribution of the raw draws (without the transform).
ScoreModel base_input(const ExperimentConfig& config);

/// Score model used for learning: the base input, wrapped in the transform.
ScoreModel learning_score(const ExperimentConfig& config);

GlmMixture truth_model(const ExperimentConfig& config, std::uint64_t seed);

/// Initial EM state from decomposition coefficients: uniform weights, zero
/// biases and scales solving c_j = rho w_j s_j^3 (rho = 6 on the y^3 path).
EmState initial_state(const Eigen::VectorXd& coefficients, const Activation& g, MomentMode mode);

GlmMixture assemble_model(const Eigen::MatrixXd& directions, const EmState& state, const Activation& g,
                          double noise_sigma, const std::optional<CoordinateMap>& transform);

struct LearnResult {
  MomentMode mode = MomentMode::glm;
  DecompositionResult decomposition;
  GlmMixture initial;  // scale-only fit from the tensor coefficients
  GlmMixture refined;  // after EM (equals initial when EM is skipped)
  std::optional<EmReport> em;
  Eigen::VectorXd rho_values;
  std::string error;   // non-empty on under-recovery
  bool ok() const { return error.empty(); }
};

/// Runs the pipeline on `data` with randomness from `seed`. Under-recovery
/// is reported in LearnResult::error with the partial estimate filled in.
LearnResult learn(const Dataset& data, const ScoreModel& score, const ExperimentConfig& config,
                  std::uint64_t seed);

/// Tensor step only, on a given moment tensor.
LearnResult learn_from_tensor(const SymTensor3d& moment, const ExperimentConfig& config, MomentMode mode,
                              std::uint64_t seed);

}  // namespace glmmix

#endif  // GLMMIX_PIPELINE_HPP
