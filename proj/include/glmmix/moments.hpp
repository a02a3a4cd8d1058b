// Empirical cross-moments between the response and input score functions.

#ifndef GLMMIX_MOMENTS_HPP
#define GLMMIX_MOMENTS_HPP

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "glmmix/score.hpp"
#include "glmmix/tensor.hpp"

namespace glmmix {

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Labeled samples; row i of x is the raw input draw of sample i.
struct Dataset {
  RowMatrix x;
  Eigen::VectorXd y;

  Index size() const { return x.rows(); }
  Index dim() const { return x.cols(); }

  /// Throws std::invalid_argument on empty data, shape mismatch or non-finite values.
  void validate() const;
};

/// glm: weights y_i; regression: weights y_i^m for the order-m moment
/// (y^3 for M3, y^2 for M2), the path for linear activations.
enum class MomentMode { glm, regression };

std::string to_string(MomentMode mode);
MomentMode moment_mode_from_string(const std::string& name);

struct MomentTensor {
  SymTensor3d tensor;
  MomentMode mode = MomentMode::glm;
  Index n_samples = 0;
};

/// Samples per accumulation block. Block sums are combined in a fixed
/// pairwise tree, so results are bit-identical for any thread count.
constexpr Index kMomentBlockSize = 2048;

/// (1/n) sum y_i S1(x_i).
Eigen::VectorXd empirical_m1(const Dataset& data, const ScoreModel& score);

/// (1/n) sum y_i^p S2(x_i), p = 1 (glm) or 2 (regression).
Eigen::MatrixXd empirical_m2(const Dataset& data, const ScoreModel& score,
                             MomentMode mode = MomentMode::glm);

/// (1/n) sum y_i^p S3(x_i), p = 1 (glm) or 3 (regression).
MomentTensor empirical_m3(const Dataset& data, const ScoreModel& score,
                          MomentMode mode = MomentMode::glm);

/// The adjusted moment for N(0, I) input written out term by term:
/// E[y x(x)x(x)x] minus the three sums of E[y e_j (x) x (x) e_j]-type terms.
SymTensor3d empirical_m3_four_term(const Dataset& data, MomentMode mode = MomentMode::glm);

/// sum_j coeffs[j] u_j^{(x)3} with u_j the columns of U.
SymTensor3d exact_cp_tensor(const Eigen::MatrixXd& U, const Eigen::VectorXd& coeffs);

}  // namespace glmmix

#endif  // GLMMIX_MOMENTS_HPP
