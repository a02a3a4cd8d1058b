// Matching recovered components to ground truth and sample-size sweeps.

#ifndef GLMMIX_EVALUATION_HPP
#define GLMMIX_EVALUATION_HPP

#include <array>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "glmmix/pipeline.hpp"
#include "glmmix/synthetic.hpp"

namespace glmmix {

/// Truth component i is matched to estimate column permutation[i], with
/// sign signs[i]; errors are min over sign of ||u_i - s u_hat||.
struct MatchReport {
  std::vector<Index> permutation;
  Eigen::VectorXd signs;
  Eigen::VectorXd per_component_error;
  double max_error = 0.0;
  double mean_error = 0.0;
};

/// Minimum-cost perfect assignment on a square cost matrix (Hungarian
/// method); result[i] is the column assigned to row i.
std::vector<Index> hungarian(const Eigen::MatrixXd& cost);

Eigen::MatrixXd normalize_columns(const Eigen::MatrixXd& m);

/// Both inputs need equal shapes and unit columns.
MatchReport match(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& estimate);

/// Largest over matched components of sqrt(||s_j u_hat - u_j||^2 + (b_hat - b_j)^2).
double full_parameter_error(const GlmMixture& truth, const GlmMixture& estimate, const MatchReport& report);

struct SweepRecord {
  Index n = 0;
  int trial = 0;
  double max_error = 0.0;
  double mean_error = 0.0;
  double seconds = 0.0;
  std::string error;  // non-empty when the trial failed
};

struct SweepResult {
  std::vector<Index> n_values;
  Eigen::VectorXd errors;  // per n, mean over trials of the max matched error
  double slope = 0.0;
  double intercept = 0.0;
  std::array<double, 2> slope_ci{0.0, 0.0};
  bool ci_reliable = true;
  std::vector<SweepRecord> records;
  std::vector<std::string> warnings;
};

class SweepError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LogLogFit {
  double slope = 0.0;
  double intercept = 0.0;
  std::array<double, 2> ci{0.0, 0.0};  // 95%
  bool ci_defined = false;
};

/// OLS of log(errors) on log(n) with a Student-t 95% interval for the slope.
LogLogFit fit_log_log(const std::vector<Index>& n_values, const Eigen::VectorXd& errors);

/// For each n and trial: fresh data, tensor step, max matched direction
/// error. The ground truth depends on the trial only, so U is held fixed
/// across n. Throws SweepError when more than 20% of trials fail.
SweepResult sweep(const ExperimentConfig& config);

}  // namespace glmmix

#endif  // GLMMIX_EVALUATION_HPP
