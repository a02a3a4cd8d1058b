#include "glmmix/moments.hpp"

#include <cmath>
#include <functional>

#include "glmmix/parallel.hpp"
#include "packed.hpp"

namespace glmmix {

namespace {

using Buffer = std::vector<double>;

// Deterministic blocked sum of per-sample contributions of fixed width.
Buffer blocked_sum(Index n, std::size_t width,
                   const std::function<void(Index, Buffer&, Buffer&)>& add_sample) {
  const std::size_t n_blocks = static_cast<std::size_t>((n + kMomentBlockSize - 1) / kMomentBlockSize);
  std::vector<Buffer> parts(n_blocks);
  parallel_for(n_blocks, [&](std::size_t b) {
    Buffer acc(width, 0.0);
    Buffer scratch;
    const Index lo = static_cast<Index>(b) * kMomentBlockSize;
    const Index hi = std::min(n, lo + kMomentBlockSize);
    for (Index i = lo; i < hi; ++i) add_sample(i, acc, scratch);
    parts[b] = std::move(acc);
  });
  return tree_sum(parts, 0, parts.size());
}

double response_power(double y, int power) {
  switch (power) {
    case 1: return y;
    case 2: return y * y;
    default: return y * y * y;
  }
}

void check_finite(const Buffer& b, const char* what) {
  for (double v : b)
    if (!std::isfinite(v))
      throw NumericalError(std::string(what) + ": accumulated moment is not finite");
}

void check_inputs(const Dataset& data, const ScoreModel& score) {
  data.validate();
  detail::require_same("moment input dimension", data.dim(), score.dim());
}

}  // namespace

void Dataset::validate() const {
  if (x.rows() < 1) throw std::invalid_argument("dataset is empty");
  if (y.size() != x.rows())
    throw DimensionError(detail::dims_message("dataset labels", y.size(), x.rows()));
  if (!x.allFinite() || !y.allFinite()) throw std::invalid_argument("dataset has non-finite entries");
}

std::string to_string(MomentMode mode) { return mode == MomentMode::glm ? "glm" : "regression"; }

MomentMode moment_mode_from_string(const std::string& name) {
  if (name == "glm") return MomentMode::glm;
  if (name == "regression") return MomentMode::regression;
  throw std::invalid_argument("unknown moment mode '" + name + "'");
}

Eigen::VectorXd empirical_m1(const Dataset& data, const ScoreModel& score) {
  check_inputs(data, score);
  const Index d = data.dim();
  Buffer sum = blocked_sum(data.size(), static_cast<std::size_t>(d), [&](Index i, Buffer& acc, Buffer&) {
    const Eigen::VectorXd s1 = score.score1(data.x.row(i).transpose());
    for (Index a = 0; a < d; ++a) acc[static_cast<std::size_t>(a)] += data.y(i) * s1(a);
  });
  check_finite(sum, "empirical_m1");
  return Eigen::Map<Eigen::VectorXd>(sum.data(), d) / static_cast<double>(data.size());
}

Eigen::MatrixXd empirical_m2(const Dataset& data, const ScoreModel& score, MomentMode mode) {
  check_inputs(data, score);
  const Index d = data.dim();
  const int power = mode == MomentMode::glm ? 1 : 2;
  Buffer sum = blocked_sum(data.size(), static_cast<std::size_t>(d * d), [&](Index i, Buffer& acc, Buffer&) {
    const Eigen::MatrixXd s2 = score.score2(data.x.row(i).transpose());
    const double w = response_power(data.y(i), power);
    for (Index a = 0; a < d * d; ++a) acc[static_cast<std::size_t>(a)] += w * s2.data()[a];
  });
  check_finite(sum, "empirical_m2");
  Eigen::MatrixXd m = Eigen::Map<Eigen::MatrixXd>(sum.data(), d, d) / static_cast<double>(data.size());
  return 0.5 * (m + m.transpose());
}

MomentTensor empirical_m3(const Dataset& data, const ScoreModel& score, MomentMode mode) {
  check_inputs(data, score);
  const Index d = data.dim();
  const int power = mode == MomentMode::glm ? 1 : 3;
  const std::size_t width = static_cast<std::size_t>(packed::size(d));
  Buffer sum = blocked_sum(data.size(), width, [&](Index i, Buffer& acc, Buffer& s3) {
    score.score3_packed(data.x.row(i).transpose(), s3);
    const double w = response_power(data.y(i), power);
    for (std::size_t p = 0; p < width; ++p) acc[p] += w * s3[p];
  });
  check_finite(sum, "empirical_m3");
  const double inv_n = 1.0 / static_cast<double>(data.size());
  for (double& v : sum) v *= inv_n;
  return {SymTensor3d::from_packed(d, sum), mode, data.size()};
}

SymTensor3d empirical_m3_four_term(const Dataset& data, MomentMode mode) {
  data.validate();
  const Index d = data.dim();
  const int power = mode == MomentMode::glm ? 1 : 3;
  const std::size_t width = static_cast<std::size_t>(packed::size(d));
  // First the raw moment E[y x^{(x)3}] and E[y x], each with the blocked sum.
  Buffer raw = blocked_sum(data.size(), width, [&](Index i, Buffer& acc, Buffer&) {
    packed::add_cube(acc, data.x.row(i).transpose(), response_power(data.y(i), power));
  });
  Buffer first = blocked_sum(data.size(), static_cast<std::size_t>(d), [&](Index i, Buffer& acc, Buffer&) {
    const double w = response_power(data.y(i), power);
    for (Index a = 0; a < d; ++a) acc[static_cast<std::size_t>(a)] += w * data.x(i, a);
  });
  const double inv_n = 1.0 / static_cast<double>(data.size());
  Tensor3d t(d, d, d);
  std::size_t p = 0;
  for (Index i = 0; i < d; ++i)
    for (Index j = i; j < d; ++j)
      for (Index k = j; k < d; ++k, ++p) {
        const double v = raw[p] * inv_n;
        for (auto [a, b, c] : {std::array<Index, 3>{i, j, k}, {i, k, j}, {j, i, k}, {j, k, i},
                               {k, i, j}, {k, j, i}})
          t(a, b, c) = v;
      }
  Eigen::VectorXd m1(d);
  for (Index a = 0; a < d; ++a) m1(a) = first[static_cast<std::size_t>(a)] * inv_n;
  for (Index j = 0; j < d; ++j)
    for (Index a = 0; a < d; ++a) {
      t(j, a, j) -= m1(a);  // E[y e_j (x) x (x) e_j]
      t(j, j, a) -= m1(a);  // E[y e_j (x) e_j (x) x]
      t(a, j, j) -= m1(a);  // E[y x (x) e_j (x) e_j]
    }
  SymTensor3d out = SymTensor3d::symmetrize(t);
  if (!out.all_finite()) throw NumericalError("empirical_m3_four_term: moment is not finite");
  return out;
}

SymTensor3d exact_cp_tensor(const Eigen::MatrixXd& U, const Eigen::VectorXd& coeffs) {
  detail::require_same("exact_cp_tensor", U.cols(), coeffs.size());
  if (U.cols() < 1) throw std::invalid_argument("exact_cp_tensor: needs at least one component");
  const Index d = U.rows();
  Buffer acc(static_cast<std::size_t>(packed::size(d)), 0.0);
  for (Index j = 0; j < U.cols(); ++j) packed::add_cube(acc, U.col(j), coeffs(j));
  return SymTensor3d::from_packed(d, acc);
}

}  // namespace glmmix
