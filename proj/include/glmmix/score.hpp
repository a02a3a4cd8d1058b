// Score functions of known input distributions.
//
// The m-th order score is S_m(x) = (-1)^m grad^m p(x) / p(x). For the
// Gaussian families the scores are Hermite tensors (mixtures average them
// under the posterior over components); transformed variables t = phi(x)
// use the change-of-variables density with a diagonal Jacobian.
//
// Every model is evaluated at a *raw draw*: the value produced by sample().
// For plain families that is the point itself; for a transformed model it is
// the base-space point x, and the score returned is that of t = phi(x).

#ifndef GLMMIX_SCORE_HPP
#define GLMMIX_SCORE_HPP

#include <memory>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "glmmix/rng.hpp"
#include "glmmix/tensor.hpp"

namespace glmmix {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class InvalidModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class UnsupportedFamilyError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class SingularTransformError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Coordinatewise strictly monotone map phi applied to every coordinate.
struct CoordinateMap {
  enum class Kind { identity, affine, cubic };

  Kind kind = Kind::identity;
  // affine: phi(x) = p0 * x + p1 (p0 != 0)
  // cubic:  phi(x) = p0 * x^3 + p1 * x (p0 >= 0, p1 > 0)
  std::vector<double> params;

  static CoordinateMap identity() { return {}; }
  static CoordinateMap affine(double scale, double shift) { return {Kind::affine, {scale, shift}}; }
  static CoordinateMap cubic(double c3 = 1.0, double c1 = 1.0) { return {Kind::cubic, {c3, c1}}; }

  void validate() const;
  double value(double x) const;
  /// phi and its first four derivatives at x.
  std::array<double, 5> derivatives(double x) const;
};

std::string to_string(CoordinateMap::Kind kind);
CoordinateMap::Kind map_kind_from_string(const std::string& name);

struct ScoreEvaluation {
  Eigen::VectorXd s1;
  Eigen::MatrixXd s2;
  SymTensor3d s3;
};

class ScoreModel;

struct StandardGaussianFamily {
  Index dim = 0;
};

struct GaussianFamily {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  Eigen::MatrixXd precision;
  Eigen::MatrixXd chol_lower;
  double log_norm = 0.0;
};

/// x = A h + z with z ~ N(0, I); columns of `means` are the component means.
struct GaussianMixtureFamily {
  Eigen::MatrixXd means;
  Eigen::VectorXd weights;
};

struct TransformedFamily {
  std::shared_ptr<const ScoreModel> base;
  CoordinateMap map;
};

class ScoreModel {
 public:
  enum class Family { standard_gaussian, gaussian, gaussian_mixture, transformed };

  static ScoreModel standard_gaussian(Index d);
  static ScoreModel gaussian(Eigen::VectorXd mean, Eigen::MatrixXd covariance);
  static ScoreModel gaussian_mixture(Eigen::MatrixXd means, Eigen::VectorXd weights);
  static ScoreModel transformed(ScoreModel base, CoordinateMap map);

  Index dim() const;
  Family family() const;

  const StandardGaussianFamily* as_standard_gaussian() const {
    return std::get_if<StandardGaussianFamily>(&family_);
  }
  const GaussianFamily* as_gaussian() const { return std::get_if<GaussianFamily>(&family_); }
  const GaussianMixtureFamily* as_mixture() const {
    return std::get_if<GaussianMixtureFamily>(&family_);
  }
  const TransformedFamily* as_transformed() const {
    return std::get_if<TransformedFamily>(&family_);
  }

  /// -grad log p.
  Eigen::VectorXd score1(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd score2(const Eigen::VectorXd& x) const;
  SymTensor3d score3(const Eigen::VectorXd& x) const;
  ScoreEvaluation evaluate(const Eigen::VectorXd& x) const;

  /// S_3 at x on the canonical index set i <= j <= k (lexicographic).
  void score3_packed(const Eigen::VectorXd& x, std::vector<double>& out) const;

  /// Posterior E[h | x] of the mixture family.
  Eigen::VectorXd posterior(const Eigen::VectorXd& x) const;

  /// Point in the model's own variable corresponding to a raw draw.
  Eigen::VectorXd features(const Eigen::VectorXd& x) const;

  /// log density of the model's variable at features(x).
  double log_density(const Eigen::VectorXd& x) const;

  Eigen::VectorXd sample_one(Rng& rng) const;
  RowMatrix sample(Rng& rng, Index n) const;

  struct Packed {
    Eigen::VectorXd s1;
    Eigen::MatrixXd s2;
    std::vector<double> s3;
  };
  Packed evaluate_packed(const Eigen::VectorXd& x) const;

 private:
  using Variant =
      std::variant<StandardGaussianFamily, GaussianFamily, GaussianMixtureFamily, TransformedFamily>;
  explicit ScoreModel(Variant family) : family_(std::move(family)) {}

  Variant family_;
};

std::string to_string(ScoreModel::Family family);

/// Closed form S_3 of N(0, I): x^{(x)3} minus the three e_j (x) e_j (x) x terms.
SymTensor3d score3_closed_gaussian(const Eigen::VectorXd& x);

/// S_2 via S_2 = S_1 (x) S_1 - grad S_1 (Gaussian and mixture families).
Eigen::MatrixXd score2_recursive(const ScoreModel& model, const Eigen::VectorXd& x);

/// S_3 via S_3 = S_2 (x) S_1 - grad S_2 (Gaussian and mixture families).
SymTensor3d score3_recursive(const ScoreModel& model, const Eigen::VectorXd& x);

using ScoreTensor = std::variant<Eigen::MatrixXd, SymTensor3d>;

/// Order-m score through the recursion, m in {2, 3}.
ScoreTensor score_m_recursive(const ScoreModel& model, const Eigen::VectorXd& x, int m);

/// S_3 of t = phi(x) for a transformed model, at the raw draw x.
SymTensor3d score3_transformed(const ScoreModel& model, const Eigen::VectorXd& x);

}  // namespace glmmix

#endif  // GLMMIX_SCORE_HPP
