#include "glmmix/synthetic.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "glmmix/parallel.hpp"
#include "glmmix/rng.hpp"

namespace glmmix {

void GlmMixture::validate() const {
  const Index r = components();
  if (U.rows() < 1 || r < 1) throw InvalidModelError("GLM mixture needs d >= 1 and r >= 1");
  if (biases.size() != r || weights.size() != r) {
    std::ostringstream os;
    os << "GLM mixture: expected " << r << " biases and weights, got " << biases.size() << " and "
       << weights.size();
    throw InvalidModelError(os.str());
  }
  if (!U.allFinite() || !biases.allFinite() || !weights.allFinite())
    throw InvalidModelError("GLM mixture has non-finite parameters");
  if (weights.minCoeff() < 0.0 || std::abs(weights.sum() - 1.0) > 1e-9)
    throw InvalidModelError("GLM mixture weights must be a probability vector");
  if (!(noise_sigma >= 0.0)) throw InvalidModelError("GLM mixture noise_sigma must be >= 0");
  if (transform) transform->validate();
}

double smallest_singular_value(const Eigen::MatrixXd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues().size() ? svd.singularValues().minCoeff() : 0.0;
}

GlmMixture random_model(Index d, Index r, const Activation& activation, std::uint64_t seed,
                        const RandomModelOptions& options) {
  if (d < 1 || r < 1 || r > d) {
    std::ostringstream os;
    os << "random_model: need 1 <= r <= d (got d = " << d << ", r = " << r << ")";
    throw std::invalid_argument(os.str());
  }
  if (options.scale_min <= 0.0 || options.scale_max < options.scale_min)
    throw std::invalid_argument("random_model: need 0 < scale_min <= scale_max");
  Rng rng(seed);
  GlmMixture m;
  m.activation = activation;
  m.noise_sigma = options.noise_sigma;
  m.transform = options.transform;
  m.U.resize(d, r);
  constexpr int kRejectionBudget = 1000;
  int tries = 0;
  for (;; ++tries) {
    if (tries == kRejectionBudget) {
      std::ostringstream os;
      os << "random_model: no U with s_min >= " << options.condition_floor << " after "
         << kRejectionBudget << " draws";
      throw std::runtime_error(os.str());
    }
    for (Index j = 0; j < r; ++j) m.U.col(j) = random_unit_vector(rng, d);
    if (smallest_singular_value(m.U) >= options.condition_floor) break;
  }
  std::uniform_real_distribution<double> scale(options.scale_min, options.scale_max);
  for (Index j = 0; j < r; ++j) m.U.col(j) *= options.scale_max > options.scale_min ? scale(rng) : options.scale_min;
  std::gamma_distribution<double> gamma(2.0, 1.0);
  m.weights.resize(r);
  for (Index j = 0; j < r; ++j) m.weights(j) = gamma(rng);
  m.weights /= m.weights.sum();
  std::uniform_real_distribution<double> bias(-options.bias_range, options.bias_range);
  m.biases.resize(r);
  for (Index j = 0; j < r; ++j) m.biases(j) = options.bias_range > 0.0 ? bias(rng) : 0.0;
  return m;
}

Dataset sample(const GlmMixture& model, const ScoreModel& input, Index n, std::uint64_t seed,
               Eigen::VectorXi* components) {
  model.validate();
  detail::require_same("sample: model vs input dimension", model.dim(), input.dim());
  if (n < 1) throw std::invalid_argument("sample: n must be positive");
  if (model.transform && input.as_transformed())
    throw std::invalid_argument("sample: transform given by both the model and the input");
  Dataset data;
  data.x.resize(n, model.dim());
  data.y.resize(n);
  if (components) components->resize(n);
  const std::size_t shards = static_cast<std::size_t>((n + kSampleShardSize - 1) / kSampleShardSize);
  parallel_for(shards, [&](std::size_t s) {
    Rng rng(stream_seed(seed, "sample", {s}));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 1.0);
    const Index lo = static_cast<Index>(s) * kSampleShardSize;
    const Index hi = std::min(n, lo + kSampleShardSize);
    for (Index i = lo; i < hi; ++i) {
      const Eigen::VectorXd x = input.sample_one(rng);
      Eigen::VectorXd f = input.features(x);
      if (model.transform)
        for (Index a = 0; a < f.size(); ++a) f(a) = model.transform->value(f(a));
      const double u = unif(rng);
      Index h = 0;
      double acc = model.weights(0);
      while (u >= acc && h + 1 < model.components()) acc += model.weights(++h);
      const double eps = noise(rng);
      data.x.row(i) = x.transpose();
      data.y(i) = model.activation(model.U.col(h).dot(f) + model.biases(h)) + model.noise_sigma * eps;
      if (components) (*components)(i) = static_cast<int>(h);
    }
  });
  return data;
}

}  // namespace glmmix
