#include "glmmix/score.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "packed.hpp"

namespace glmmix {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

Eigen::VectorXd log_posterior_weights(const GaussianMixtureFamily& f, const Eigen::VectorXd& x,
                                      double* log_norm) {
  const Index k = f.means.cols();
  Eigen::VectorXd logw(k);
  double top = -std::numeric_limits<double>::infinity();
  for (Index c = 0; c < k; ++c) {
    logw(c) = f.weights(c) > 0.0
                  ? std::log(f.weights(c)) - 0.5 * (x - f.means.col(c)).squaredNorm()
                  : -std::numeric_limits<double>::infinity();
    top = std::max(top, logw(c));
  }
  double s = 0.0;
  for (Index c = 0; c < k; ++c) s += std::exp(logw(c) - top);
  const double lse = top + std::log(s);
  if (log_norm) *log_norm = lse;
  return logw.array() - lse;
}

Eigen::VectorXd mixture_posterior(const GaussianMixtureFamily& f, const Eigen::VectorXd& x) {
  return log_posterior_weights(f, x, nullptr).array().exp();
}

// Derivatives of psi = phi^{-1} and of log psi' in t, from derivatives of phi.
struct InverseDerivs {
  double a1, a2, a3;  // psi', psi'', psi'''
  double l1, l2, l3;  // (log psi')', '', '''
};

InverseDerivs inverse_derivs(const std::array<double, 5>& f) {
  const double f1 = f[1], f2 = f[2], f3 = f[3], f4 = f[4];
  if (std::abs(f1) < 1e-12) {
    std::ostringstream os;
    os << "coordinate map is singular: derivative " << f1 << " at x = " << f[0];
    throw SingularTransformError(os.str());
  }
  const double i1 = 1.0 / f1;
  const double i2 = i1 * i1, i3 = i2 * i1, i4 = i3 * i1, i5 = i4 * i1, i6 = i5 * i1;
  InverseDerivs r{};
  r.a1 = i1;
  r.a2 = -f2 * i3;
  r.a3 = -f3 * i4 + 3.0 * f2 * f2 * i5;
  r.l1 = -f2 * i2;
  r.l2 = -f3 * i3 + 2.0 * f2 * f2 * i4;
  r.l3 = -f4 * i4 + 7.0 * f2 * f3 * i5 - 8.0 * f2 * f2 * f2 * i6;
  return r;
}

// Scores of t = phi(s) given the base scores at s (packed order 3).
ScoreModel::Packed transform_scores(const ScoreModel::Packed& base, const Eigen::VectorXd& s,
                                    const CoordinateMap& map) {
  const Index d = s.size();
  // Base log-density derivatives: g = -S1, H = S2 - S1 S1^T,
  // T = -S3 - sym(H (x) g) - g^{(x)3}.
  const Eigen::VectorXd g = -base.s1;
  const Eigen::MatrixXd h = base.s2 - base.s1 * base.s1.transpose();
  std::vector<double> t3(base.s3.size());
  for (std::size_t p = 0; p < t3.size(); ++p) t3[p] = -base.s3[p];
  packed::add_sym_matvec(t3, h, g, -1.0);
  packed::add_cube(t3, g, -1.0);

  std::vector<InverseDerivs> inv(static_cast<std::size_t>(d));
  for (Index i = 0; i < d; ++i) inv[static_cast<std::size_t>(i)] = inverse_derivs(map.derivatives(s(i)));
  auto at = [&](Index i) -> const InverseDerivs& { return inv[static_cast<std::size_t>(i)]; };

  Eigen::VectorXd gt(d);
  Eigen::MatrixXd ht(d, d);
  for (Index i = 0; i < d; ++i) gt(i) = g(i) * at(i).a1 + at(i).l1;
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) {
      ht(i, j) = h(i, j) * at(i).a1 * at(j).a1;
      if (i == j) ht(i, j) += g(i) * at(i).a2 + at(i).l2;
    }
  std::vector<double> tt(t3.size());
  std::size_t p = 0;
  for (Index i = 0; i < d; ++i)
    for (Index j = i; j < d; ++j)
      for (Index k = j; k < d; ++k, ++p) {
        double v = t3[p] * at(i).a1 * at(j).a1 * at(k).a1;
        if (i == j && j == k) {
          v += 3.0 * h(i, i) * at(i).a1 * at(i).a2 + g(i) * at(i).a3 + at(i).l3;
        } else if (i == j) {
          v += h(i, k) * at(i).a2 * at(k).a1;
        } else if (j == k) {
          v += h(i, j) * at(i).a1 * at(j).a2;
        }
        tt[p] = v;
      }

  // Back to scores: S1 = -g, S2 = H + g g^T, S3 = -(T + sym(H (x) g) + g^{(x)3}).
  ScoreModel::Packed out;
  out.s1 = -gt;
  out.s2 = ht + gt * gt.transpose();
  out.s3.assign(tt.size(), 0.0);
  for (std::size_t q = 0; q < tt.size(); ++q) out.s3[q] = -tt[q];
  packed::add_sym_matvec(out.s3, ht, gt, -1.0);
  packed::add_cube(out.s3, gt, -1.0);
  return out;
}

void require_dim(const ScoreModel& m, const Eigen::VectorXd& x) {
  detail::require_same("score model", m.dim(), x.size());
}

}  // namespace

// --- CoordinateMap -----------------------------------------------------------

void CoordinateMap::validate() const {
  switch (kind) {
    case Kind::identity:
      if (!params.empty()) throw InvalidModelError("identity map takes no parameters");
      return;
    case Kind::affine:
      if (params.size() != 2 || params[0] == 0.0 || !std::isfinite(params[0]) ||
          !std::isfinite(params[1]))
        throw InvalidModelError("affine map needs params [scale != 0, shift]");
      return;
    case Kind::cubic:
      if (params.size() != 2 || params[0] < 0.0 || params[1] <= 0.0)
        throw InvalidModelError("cubic map needs params [c3 >= 0, c1 > 0]");
      return;
  }
}

double CoordinateMap::value(double x) const {
  switch (kind) {
    case Kind::identity: return x;
    case Kind::affine: return params[0] * x + params[1];
    case Kind::cubic: return params[0] * x * x * x + params[1] * x;
  }
  return x;
}

std::array<double, 5> CoordinateMap::derivatives(double x) const {
  switch (kind) {
    case Kind::identity: return {x, 1.0, 0.0, 0.0, 0.0};
    case Kind::affine: return {value(x), params[0], 0.0, 0.0, 0.0};
    case Kind::cubic:
      return {value(x), 3.0 * params[0] * x * x + params[1], 6.0 * params[0] * x,
              6.0 * params[0], 0.0};
  }
  return {x, 1.0, 0.0, 0.0, 0.0};
}

std::string to_string(CoordinateMap::Kind kind) {
  switch (kind) {
    case CoordinateMap::Kind::identity: return "identity";
    case CoordinateMap::Kind::affine: return "affine";
    case CoordinateMap::Kind::cubic: return "cubic";
  }
  return "identity";
}

CoordinateMap::Kind map_kind_from_string(const std::string& name) {
  if (name == "identity") return CoordinateMap::Kind::identity;
  if (name == "affine") return CoordinateMap::Kind::affine;
  if (name == "cubic") return CoordinateMap::Kind::cubic;
  throw InvalidModelError("unknown coordinate map kind '" + name + "'");
}

std::string to_string(ScoreModel::Family family) {
  switch (family) {
    case ScoreModel::Family::standard_gaussian: return "standard_gaussian";
    case ScoreModel::Family::gaussian: return "gaussian";
    case ScoreModel::Family::gaussian_mixture: return "gaussian_mixture";
    case ScoreModel::Family::transformed: return "transformed";
  }
  return "standard_gaussian";
}

// --- construction ------------------------------------------------------------

ScoreModel ScoreModel::standard_gaussian(Index d) {
  if (d < 1) throw InvalidModelError("standard_gaussian: dimension must be positive");
  return ScoreModel(StandardGaussianFamily{d});
}

ScoreModel ScoreModel::gaussian(Eigen::VectorXd mean, Eigen::MatrixXd covariance) {
  const Index d = mean.size();
  if (d < 1) throw InvalidModelError("gaussian: dimension must be positive");
  detail::require_same("gaussian covariance rows", covariance.rows(), d);
  detail::require_same("gaussian covariance cols", covariance.cols(), d);
  if (!mean.allFinite() || !covariance.allFinite())
    throw InvalidModelError("gaussian: non-finite parameters");
  if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() >
      1e-12 * std::max(1.0, covariance.cwiseAbs().maxCoeff()))
    throw InvalidModelError("gaussian: covariance is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(covariance, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() <= 1e-10)
    throw InvalidModelError("gaussian: covariance is not positive definite");
  GaussianFamily f;
  f.mean = std::move(mean);
  f.covariance = 0.5 * (covariance + covariance.transpose());
  Eigen::LLT<Eigen::MatrixXd> llt(f.covariance);
  f.chol_lower = llt.matrixL();
  f.precision = llt.solve(Eigen::MatrixXd::Identity(d, d));
  f.precision = 0.5 * (f.precision + f.precision.transpose());
  f.log_norm = -0.5 * static_cast<double>(d) * kLog2Pi -
               f.chol_lower.diagonal().array().log().sum();
  return ScoreModel(std::move(f));
}

ScoreModel ScoreModel::gaussian_mixture(Eigen::MatrixXd means, Eigen::VectorXd weights) {
  if (means.rows() < 1 || means.cols() < 1)
    throw InvalidModelError("gaussian_mixture: needs at least one component");
  detail::require_same("gaussian_mixture weights", weights.size(), means.cols());
  if (!means.allFinite() || !weights.allFinite())
    throw InvalidModelError("gaussian_mixture: non-finite parameters");
  if (weights.minCoeff() < 0.0 || std::abs(weights.sum() - 1.0) > 1e-12)
    throw InvalidModelError("gaussian_mixture: weights must be a probability vector");
  return ScoreModel(GaussianMixtureFamily{std::move(means), std::move(weights)});
}

ScoreModel ScoreModel::transformed(ScoreModel base, CoordinateMap map) {
  map.validate();
  return ScoreModel(
      TransformedFamily{std::make_shared<const ScoreModel>(std::move(base)), std::move(map)});
}

Index ScoreModel::dim() const {
  return std::visit(
      [](const auto& f) -> Index {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, StandardGaussianFamily>) return f.dim;
        else if constexpr (std::is_same_v<F, GaussianFamily>) return f.mean.size();
        else if constexpr (std::is_same_v<F, GaussianMixtureFamily>) return f.means.rows();
        else return f.base->dim();
      },
      family_);
}

ScoreModel::Family ScoreModel::family() const { return static_cast<Family>(family_.index()); }

// --- evaluation --------------------------------------------------------------

ScoreModel::Packed ScoreModel::evaluate_packed(const Eigen::VectorXd& x) const {
  require_dim(*this, x);
  const Index d = x.size();
  Packed out;
  out.s3.assign(static_cast<std::size_t>(packed::size(d)), 0.0);
  if (as_standard_gaussian()) {
    out.s1 = x;
    out.s2 = x * x.transpose() - Eigen::MatrixXd::Identity(d, d);
    packed::add_cube(out.s3, x, 1.0);
    packed::add_sym_identity_vec(out.s3, x, -1.0);
  } else if (const auto* g = as_gaussian()) {
    const Eigen::VectorXd z = g->precision * (x - g->mean);
    out.s1 = z;
    out.s2 = z * z.transpose() - g->precision;
    packed::add_cube(out.s3, z, 1.0);
    packed::add_sym_matvec(out.s3, g->precision, z, -1.0);
  } else if (const auto* m = as_mixture()) {
    const Eigen::VectorXd post = mixture_posterior(*m, x);
    out.s1 = Eigen::VectorXd::Zero(d);
    out.s2 = -Eigen::MatrixXd::Identity(d, d);
    for (Index c = 0; c < m->means.cols(); ++c) {
      if (post(c) == 0.0) continue;
      const Eigen::VectorXd z = x - m->means.col(c);
      out.s1 += post(c) * z;
      out.s2.noalias() += z * (post(c) * z).transpose();
      packed::add_cube(out.s3, z, post(c));
    }
    packed::add_sym_identity_vec(out.s3, out.s1, -1.0);
    out.s2 = (0.5 * (out.s2 + out.s2.transpose())).eval();
  } else {
    const auto& t = *as_transformed();
    Packed base = t.base->evaluate_packed(x);
    if (t.map.kind == CoordinateMap::Kind::identity) return base;
    out = transform_scores(base, t.base->features(x), t.map);
    out.s2 = (0.5 * (out.s2 + out.s2.transpose())).eval();
  }
  return out;
}

ScoreEvaluation ScoreModel::evaluate(const Eigen::VectorXd& x) const {
  Packed p = evaluate_packed(x);
  return {std::move(p.s1), std::move(p.s2), SymTensor3d::from_packed(x.size(), p.s3)};
}

Eigen::VectorXd ScoreModel::score1(const Eigen::VectorXd& x) const {
  require_dim(*this, x);
  if (as_standard_gaussian()) return x;
  if (const auto* g = as_gaussian()) return g->precision * (x - g->mean);
  if (const auto* m = as_mixture()) return x - m->means * mixture_posterior(*m, x);
  return evaluate_packed(x).s1;
}

Eigen::MatrixXd ScoreModel::score2(const Eigen::VectorXd& x) const {
  return evaluate_packed(x).s2;
}

SymTensor3d ScoreModel::score3(const Eigen::VectorXd& x) const {
  std::vector<double> p;
  score3_packed(x, p);
  return SymTensor3d::from_packed(x.size(), p);
}

void ScoreModel::score3_packed(const Eigen::VectorXd& x, std::vector<double>& out) const {
  require_dim(*this, x);
  const Index d = x.size();
  if (as_standard_gaussian()) {
    out.assign(static_cast<std::size_t>(packed::size(d)), 0.0);
    packed::add_cube(out, x, 1.0);
    packed::add_sym_identity_vec(out, x, -1.0);
    return;
  }
  if (const auto* g = as_gaussian()) {
    out.assign(static_cast<std::size_t>(packed::size(d)), 0.0);
    const Eigen::VectorXd z = g->precision * (x - g->mean);
    packed::add_cube(out, z, 1.0);
    packed::add_sym_matvec(out, g->precision, z, -1.0);
    return;
  }
  out = evaluate_packed(x).s3;
}

Eigen::VectorXd ScoreModel::posterior(const Eigen::VectorXd& x) const {
  const auto* m = as_mixture();
  if (!m) throw UnsupportedFamilyError("posterior is defined for the gaussian_mixture family");
  require_dim(*this, x);
  return mixture_posterior(*m, x);
}

Eigen::VectorXd ScoreModel::features(const Eigen::VectorXd& x) const {
  const auto* t = as_transformed();
  if (!t) return x;
  Eigen::VectorXd s = t->base->features(x);
  for (Index i = 0; i < s.size(); ++i) s(i) = t->map.value(s(i));
  return s;
}

double ScoreModel::log_density(const Eigen::VectorXd& x) const {
  require_dim(*this, x);
  const Index d = x.size();
  if (as_standard_gaussian()) return -0.5 * x.squaredNorm() - 0.5 * static_cast<double>(d) * kLog2Pi;
  if (const auto* g = as_gaussian()) {
    const Eigen::VectorXd w = g->chol_lower.triangularView<Eigen::Lower>().solve(x - g->mean);
    return g->log_norm - 0.5 * w.squaredNorm();
  }
  if (const auto* m = as_mixture()) {
    double lse = 0.0;
    log_posterior_weights(*m, x, &lse);
    return lse - 0.5 * static_cast<double>(d) * kLog2Pi;
  }
  const auto& t = *as_transformed();
  const Eigen::VectorXd s = t.base->features(x);
  double logdet = 0.0;
  for (Index i = 0; i < d; ++i) logdet += std::log(std::abs(t.map.derivatives(s(i))[1]));
  return t.base->log_density(x) - logdet;
}

Eigen::VectorXd ScoreModel::sample_one(Rng& rng) const {
  if (const auto* s = as_standard_gaussian()) return standard_normal_vector(rng, s->dim);
  if (const auto* g = as_gaussian())
    return g->mean + g->chol_lower * standard_normal_vector(rng, g->mean.size());
  if (const auto* m = as_mixture()) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double u = unif(rng);
    Index c = 0;
    double acc = m->weights(0);
    while (u >= acc && c + 1 < m->weights.size()) acc += m->weights(++c);
    return m->means.col(c) + standard_normal_vector(rng, m->means.rows());
  }
  return as_transformed()->base->sample_one(rng);
}

RowMatrix ScoreModel::sample(Rng& rng, Index n) const {
  RowMatrix out(n, dim());
  for (Index i = 0; i < n; ++i) out.row(i) = sample_one(rng).transpose();
  return out;
}

// --- free functions ----------------------------------------------------------

SymTensor3d score3_closed_gaussian(const Eigen::VectorXd& x) {
  const Index d = x.size();
  Tensor3d t = outer3(x, x, x);
  for (Index j = 0; j < d; ++j)
    for (Index a = 0; a < d; ++a) {
      t(j, a, j) -= x(a);
      t(j, j, a) -= x(a);
      t(a, j, j) -= x(a);
    }
  return SymTensor3d::symmetrize(t);
}

namespace {

// S1, grad S1 (J[i,l] = d S1_i / d x_l) and grad S2 (G[i,j,l] = d S2_ij / d x_l)
// by the product rule.
struct ScoreDerivatives {
  Eigen::VectorXd s1;
  Eigen::MatrixXd grad_s1;
  Eigen::MatrixXd s2;
  Tensor3d grad_s2;
};

ScoreDerivatives score_derivatives(const ScoreModel& model, const Eigen::VectorXd& x) {
  require_dim(model, x);
  const Index d = x.size();
  ScoreDerivatives r;
  Eigen::MatrixXd precision;
  if (model.as_standard_gaussian()) {
    precision = Eigen::MatrixXd::Identity(d, d);
    r.s1 = x;
  } else if (const auto* g = model.as_gaussian()) {
    precision = g->precision;
    r.s1 = precision * (x - g->mean);
  }
  if (precision.size() > 0) {
    r.grad_s1 = precision;
    r.s2 = r.s1 * r.s1.transpose() - r.grad_s1;
    r.grad_s2 = Tensor3d(d, d, d);
    for (Index i = 0; i < d; ++i)
      for (Index j = 0; j < d; ++j)
        for (Index l = 0; l < d; ++l)
          r.grad_s2(i, j, l) = precision(i, l) * r.s1(j) + r.s1(i) * precision(j, l);
    return r;
  }
  const auto* m = model.as_mixture();
  if (!m)
    throw UnsupportedFamilyError("score recursion needs analytic log-density derivatives; family '" +
                                 to_string(model.family()) + "' is not supported");
  const Eigen::VectorXd post = mixture_posterior(*m, x);
  const Index k = m->means.cols();
  r.s1 = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd second = Eigen::MatrixXd::Zero(d, d);
  for (Index c = 0; c < k; ++c) {
    const Eigen::VectorXd z = x - m->means.col(c);
    r.s1 += post(c) * z;
    second += post(c) * z * z.transpose();
  }
  // d gamma_c / dx = gamma_c (S1 - z_c).
  r.grad_s1 = Eigen::MatrixXd::Identity(d, d) + r.s1 * r.s1.transpose() - second;
  r.s2 = r.s1 * r.s1.transpose() - r.grad_s1;
  r.grad_s2 = Tensor3d(d, d, d);
  for (Index c = 0; c < k; ++c) {
    if (post(c) == 0.0) continue;
    const Eigen::VectorXd z = x - m->means.col(c);
    const Eigen::VectorXd dlog = r.s1 - z;
    for (Index i = 0; i < d; ++i)
      for (Index j = 0; j < d; ++j)
        for (Index l = 0; l < d; ++l) {
          double v = dlog(l) * z(i) * z(j);
          if (i == l) v += z(j);
          if (j == l) v += z(i);
          r.grad_s2(i, j, l) += post(c) * v;
        }
  }
  return r;
}

}  // namespace

Eigen::MatrixXd score2_recursive(const ScoreModel& model, const Eigen::VectorXd& x) {
  ScoreDerivatives r = score_derivatives(model, x);
  return 0.5 * (r.s2 + r.s2.transpose());
}

SymTensor3d score3_recursive(const ScoreModel& model, const Eigen::VectorXd& x) {
  const ScoreDerivatives r = score_derivatives(model, x);
  const Index d = x.size();
  Tensor3d t(d, d, d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j)
      for (Index l = 0; l < d; ++l) t(i, j, l) = r.s2(i, j) * r.s1(l) - r.grad_s2(i, j, l);
  return SymTensor3d::symmetrize(t);
}

ScoreTensor score_m_recursive(const ScoreModel& model, const Eigen::VectorXd& x, int m) {
  if (m == 2) return score2_recursive(model, x);
  if (m == 3) return score3_recursive(model, x);
  throw UnsupportedFamilyError("score recursion is implemented for orders 2 and 3");
}

SymTensor3d score3_transformed(const ScoreModel& model, const Eigen::VectorXd& x) {
  if (!model.as_transformed())
    throw UnsupportedFamilyError("score3_transformed needs a transformed model");
  return model.score3(x);
}

}  // namespace glmmix
