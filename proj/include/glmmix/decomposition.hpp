// Symmetric CP decomposition of a third-order moment tensor.
//
// The tensor is whitened with a random slice, decomposed in the r-dimensional
// whitened space by restarted power iteration, and the surviving
// eigenvectors are mapped back to input space.
//
// A random slice T(I, I, theta) = sum_j c_j <u_j, theta> u_j u_j^T is in
// general indefinite. Whitening uses |eigenvalue| and records the eigenvalue
// signs s; the whitened components b_j are then orthonormal under the form
// <a, b>_s = a^T diag(s) b rather than the Euclidean one. The power update
// a <- T(I, s.a, s.a) and the overlap test use that form, which is the plain
// update when the slice is definite (s = 1).
//
// An indefinite slice leaves the whitened components only pseudo-orthogonal,
// which amplifies estimation noise, so several slices are drawn and a
// definite one is preferred.

#ifndef GLMMIX_DECOMPOSITION_HPP
#define GLMMIX_DECOMPOSITION_HPP

#include <cstdint>
#include <stdexcept>
#include <utility>

#include <Eigen/Dense>

#include "glmmix/tensor.hpp"

namespace glmmix {

class IllConditionedSliceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DeadPointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct WhiteningResult {
  Eigen::MatrixXd W;                // d x r
  Eigen::MatrixXd V_slice;          // d x d
  Eigen::VectorXd theta;            // d
  Eigen::VectorXd singular_values;  // r, decreasing
  Eigen::MatrixXd basis;            // d x r eigenvectors of the slice
  Eigen::VectorXd signs;            // r, +-1 eigenvalue signs
  int attempts = 1;
};

struct DecompositionResult {
  Eigen::MatrixXd directions;  // d x k, unit columns
  Eigen::VectorXd coefficients;
  Eigen::VectorXd whitened_eigenvalues;
  int n_restarts_used = 0;
  double residual_fro = 0.0;
  int whitening_attempts = 0;
};

class UnderRecoveryError : public std::runtime_error {
 public:
  UnderRecoveryError(const std::string& what, DecompositionResult partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const DecompositionResult& partial() const { return partial_; }

 private:
  DecompositionResult partial_;
};

struct DecompositionParams {
  int restarts = 0;  // L; 0 selects max(50, 10 r)
  int iterations = 100;  // N
  double nu = 0.5;
  int max_whitening_retries = 10;
  int slice_candidates = 16;  // well-conditioned slices compared before choosing
  int slice_trials = 3;       // best-ranked slices decomposed; lowest residual wins
  int polish_sweeps = 100;    // 0 disables the final input-space polish

  int effective_restarts(Index r) const {
    return restarts > 0 ? restarts : std::max(50, 10 * static_cast<int>(r));
  }
};

/// Smallest accepted ratio of the r-th to the first slice singular value.
constexpr double kWhiteningConditionFloor = 1e-10;

/// Whitening with theta ~ N(0, I_d) drawn from `seed`. Returns the whitening
/// data and T(W, W, W). Throws IllConditionedSliceError.
std::pair<WhiteningResult, SymTensor3d> whiten(const SymTensor3d& t, Index r, std::uint64_t seed);

std::pair<WhiteningResult, SymTensor3d> whiten_with_theta(const SymTensor3d& t, Index r,
                                                          const Eigen::VectorXd& theta);

/// Top singular vector of T(I, I, theta) for a random theta; a random unit
/// vector when the slice vanishes.
Eigen::VectorXd svd_init(const SymTensor3d& t_white, std::uint64_t seed);

/// N normalized updates a <- T(I, s.a, s.a). An empty `signs` means all +1.
/// Throws DeadPointError when the contraction vanishes.
Eigen::VectorXd power_iterate(const SymTensor3d& t_white, const Eigen::VectorXd& a0, int n_iter,
                              const Eigen::VectorXd& signs = {});

/// normalize(basis diag(sqrt(singular_values)) v_j) for each column v_j.
Eigen::MatrixXd unwhiten(const Eigen::MatrixXd& white_components, const WhiteningResult& wres);

/// Least-squares coefficients c minimizing ||T - sum_j c_j u_j^{(x)3}||_F.
Eigen::VectorXd fit_coefficients(const SymTensor3d& t, const Eigen::MatrixXd& directions);

double cp_residual(const SymTensor3d& t, const Eigen::MatrixXd& directions,
                   const Eigen::VectorXd& coefficients);

/// Alternating refinement of all directions: joint least-squares
/// coefficients, then u_j <- normalize(R_j(I, u_j, u_j)) where R_j is T minus
/// the other fitted components. Columns before `first` stay fixed. Stops after
/// `sweeps` passes or at a fixed point.
Eigen::MatrixXd polish_directions(const SymTensor3d& t, Eigen::MatrixXd directions, int sweeps, Index first = 0);

/// Robust tensor power method. Directions come back with non-negative
/// coefficients (a negative one is absorbed by flipping the direction).
/// Throws UnderRecoveryError when fewer than r components survive.
DecompositionResult robust_decompose(const SymTensor3d& t, Index r, const DecompositionParams& params,
                                     std::uint64_t seed);

}  // namespace glmmix

#endif  // GLMMIX_DECOMPOSITION_HPP
