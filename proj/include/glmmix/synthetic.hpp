// Ground-truth mixtures of GLMs and sampling from them.

#ifndef GLMMIX_SYNTHETIC_HPP
#define GLMMIX_SYNTHETIC_HPP

#include <cstdint>
#include <optional>

#include <Eigen/Dense>

#include "glmmix/activation.hpp"
#include "glmmix/moments.hpp"
#include "glmmix/score.hpp"

namespace glmmix {

/// E[y | x, h = e_j] = g(<u_j, phi(x)> + b_j), P(h = e_j) = w_j, with
/// additive N(0, noise_sigma^2) label noise.
struct GlmMixture {
  Eigen::MatrixXd U;  // d x r, columns u_j
  Eigen::VectorXd biases;
  Eigen::VectorXd weights;
  Activation activation;
  double noise_sigma = 0.0;
  std::optional<CoordinateMap> transform;

  Index dim() const { return U.rows(); }
  Index components() const { return U.cols(); }

  /// Throws InvalidModelError on inconsistent shapes or an invalid weight vector.
  void validate() const;
};

struct RandomModelOptions {
  double condition_floor = 0.05;
  double bias_range = 0.5;  // biases ~ U[-bias_range, bias_range]
  double scale_min = 1.0;   // column norms ~ U[scale_min, scale_max]
  double scale_max = 1.0;
  double noise_sigma = 0.1;
  std::optional<CoordinateMap> transform;
};

/// Smallest of the min(rows, cols) singular values.
double smallest_singular_value(const Eigen::MatrixXd& m);

/// Random instance: unit directions rejection-sampled until s_min(U) reaches
/// the floor, weights ~ Dirichlet(2, ..., 2), uniform biases.
GlmMixture random_model(Index d, Index r, const Activation& activation, std::uint64_t seed,
                        const RandomModelOptions& options = {});

/// Samples per independently seeded sampling shard.
constexpr Index kSampleShardSize = 65536;

/// n labeled samples; x holds raw input draws and the model sees phi(x)
/// when it carries a transform. The input must then be untransformed.
Dataset sample(const GlmMixture& model, const ScoreModel& input, Index n, std::uint64_t seed,
               Eigen::VectorXi* components = nullptr);

}  // namespace glmmix

#endif  // GLMMIX_SYNTHETIC_HPP
