#include "glmmix/decomposition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <sstream>

#include "glmmix/parallel.hpp"
#include "glmmix/rng.hpp"

namespace glmmix {

namespace {

Eigen::VectorXd apply_signs(const Eigen::VectorXd& a, const Eigen::VectorXd& signs) {
  return signs.size() == 0 ? a : Eigen::VectorXd(a.cwiseProduct(signs));
}

// |<a, b>_s| / sqrt(|<a, a>_s| |<b, b>_s|).
double signed_overlap(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const Eigen::VectorXd& s) {
  const double ab = a.dot(apply_signs(b, s));
  const double aa = std::abs(a.dot(apply_signs(a, s)));
  const double bb = std::abs(b.dot(apply_signs(b, s)));
  const double denom = std::sqrt(aa * bb);
  if (denom < 1e-300) return std::numeric_limits<double>::infinity();
  return std::abs(ab) / denom;
}

double signed_value(const SymTensor3d& t, const Eigen::VectorXd& a, const Eigen::VectorXd& s) {
  const Eigen::VectorXd sa = apply_signs(a, s);
  return contract(t, sa, sa, sa);
}

}  // namespace

std::pair<WhiteningResult, SymTensor3d> whiten_with_theta(const SymTensor3d& t, Index r,
                                                          const Eigen::VectorXd& theta) {
  const Index d = t.dim();
  if (r < 1 || r > d) {
    std::ostringstream os;
    os << "whiten: need 1 <= r <= d (r = " << r << ", d = " << d << ")";
    throw std::invalid_argument(os.str());
  }
  WhiteningResult w;
  w.theta = theta;
  w.V_slice = slice_contract(t, theta);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(w.V_slice);
  std::vector<Index> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    return std::abs(eig.eigenvalues()(a)) > std::abs(eig.eigenvalues()(b));
  });
  w.basis.resize(d, r);
  w.singular_values.resize(r);
  w.signs.resize(r);
  for (Index j = 0; j < r; ++j) {
    const Index src = order[static_cast<std::size_t>(j)];
    const double lambda = eig.eigenvalues()(src);
    w.singular_values(j) = std::abs(lambda);
    w.signs(j) = lambda < 0.0 ? -1.0 : 1.0;
    Eigen::VectorXd v = eig.eigenvectors().col(src);
    // Fix the eigenvector sign so the result does not depend on the solver.
    Index top = 0;
    v.cwiseAbs().maxCoeff(&top);
    if (v(top) < 0.0) v = -v;
    w.basis.col(j) = v;
  }
  const double first = w.singular_values(0);
  if (!(first > 0.0) || w.singular_values(r - 1) / first < kWhiteningConditionFloor) {
    std::ostringstream os;
    os << "whiten: ill-conditioned slice (singular value ratio "
       << (first > 0.0 ? w.singular_values(r - 1) / first : 0.0) << ")";
    throw IllConditionedSliceError(os.str());
  }
  w.W = w.basis * w.singular_values.cwiseSqrt().cwiseInverse().asDiagonal();
  SymTensor3d white = multilinear(t, w.W);
  return {std::move(w), std::move(white)};
}

std::pair<WhiteningResult, SymTensor3d> whiten(const SymTensor3d& t, Index r, std::uint64_t seed) {
  Rng rng(seed);
  return whiten_with_theta(t, r, standard_normal_vector(rng, t.dim()));
}

Eigen::VectorXd svd_init(const SymTensor3d& t_white, std::uint64_t seed) {
  Rng rng(seed);
  const Index r = t_white.dim();
  const Eigen::VectorXd theta = standard_normal_vector(rng, r);
  const Eigen::MatrixXd slice = slice_contract(t_white, theta);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(slice);
  Index top = 0;
  const double largest = eig.eigenvalues().cwiseAbs().maxCoeff(&top);
  if (!(largest > 1e-14 * t_white.norm()) || !std::isfinite(largest))
    return random_unit_vector(rng, r);
  return eig.eigenvectors().col(top).normalized();
}

Eigen::VectorXd power_iterate(const SymTensor3d& t_white, const Eigen::VectorXd& a0, int n_iter,
                              const Eigen::VectorXd& signs) {
  detail::require_same("power_iterate", t_white.dim(), a0.size());
  if (n_iter < 1) throw std::invalid_argument("power_iterate: N must be >= 1");
  Eigen::VectorXd a = a0.normalized();
  for (int it = 0; it < n_iter; ++it) {
    const Eigen::VectorXd sa = apply_signs(a, signs);
    const Eigen::VectorXd next = contract_vec(t_white, sa, sa);
    const double norm = next.norm();
    if (!(norm >= 1e-14)) throw DeadPointError("power_iterate: contraction T(I, a, a) vanished");
    a = next / norm;
  }
  return a;
}

Eigen::MatrixXd unwhiten(const Eigen::MatrixXd& white_components, const WhiteningResult& wres) {
  detail::require_same("unwhiten", white_components.rows(), wres.basis.cols());
  Eigen::MatrixXd out = wres.basis * wres.singular_values.cwiseSqrt().asDiagonal() * white_components;
  for (Index j = 0; j < out.cols(); ++j) out.col(j).normalize();
  return out;
}

Eigen::VectorXd fit_coefficients(const SymTensor3d& t, const Eigen::MatrixXd& directions) {
  detail::require_same("fit_coefficients", t.dim(), directions.rows());
  const Index k = directions.cols();
  const Eigen::MatrixXd inner = directions.transpose() * directions;
  const Eigen::MatrixXd gram = inner.array().cube().matrix();
  Eigen::VectorXd rhs(k);
  for (Index j = 0; j < k; ++j)
    rhs(j) = contract(t, directions.col(j), directions.col(j), directions.col(j));
  return gram.colPivHouseholderQr().solve(rhs);
}

double cp_residual(const SymTensor3d& t, const Eigen::MatrixXd& directions,
                   const Eigen::VectorXd& coefficients) {
  SymTensor3d approx = SymTensor3d::zero(t.dim());
  for (Index j = 0; j < directions.cols(); ++j)
    approx += sym_outer3(directions.col(j), coefficients(j));
  return (t - approx).norm();
}

namespace {

using White = std::pair<WhiteningResult, SymTensor3d>;

// Up to `slice_candidates` whitenings of t, best first: a definite slice (all
// signs equal) before an indefinite one, then by singular value ratio.
std::vector<White> ranked_whitenings(const SymTensor3d& t, Index r, const DecompositionParams& params,
                                     std::uint64_t seed) {
  std::vector<White> out;
  std::string last_error;
  int attempt = 0;
  for (; static_cast<int>(out.size()) < params.slice_candidates; ++attempt) {
    if (out.empty() && attempt >= params.max_whitening_retries) break;
    try {
      out.push_back(whiten(t, r, stream_seed(seed, "whiten", {static_cast<std::uint64_t>(attempt)})));
      out.back().first.attempts = attempt + 1;
    } catch (const IllConditionedSliceError& e) {
      last_error = e.what();
    }
  }
  if (out.empty())
    throw IllConditionedSliceError("robust_decompose: whitening failed after " +
                                   std::to_string(params.max_whitening_retries) + " draws: " + last_error);
  auto rank_of = [](const WhiteningResult& w) {
    const bool definite = (w.signs.array() == w.signs(0)).all();
    return std::make_pair(definite ? 1 : 0, w.singular_values(w.signs.size() - 1) / w.singular_values(0));
  };
  std::stable_sort(out.begin(), out.end(),
                   [&](const White& a, const White& b) { return rank_of(a.first) > rank_of(b.first); });
  return out;
}

struct Found {
  std::vector<Eigen::VectorXd> directions;
  std::vector<double> values;
};

// Restarts, then the clustering loop; emits up to r components whose input
// directions are not already in `known`.
Found cluster_pass(const White& white, const DecompositionParams& params, std::uint64_t seed,
                   const std::vector<Eigen::VectorXd>& known) {
  const WhiteningResult& wres = white.first;
  const SymTensor3d& tw = white.second;
  const Eigen::VectorXd& signs = wres.signs;
  const Index r = tw.dim();
  const int restarts = params.effective_restarts(r);

  // Independent restarts; each owns its stream and output slot.
  std::vector<std::optional<Eigen::VectorXd>> candidates(static_cast<std::size_t>(restarts));
  parallel_for(candidates.size(), [&](std::size_t i) {
    const std::uint64_t s = stream_seed(seed, "restart", {i});
    Eigen::VectorXd a0 = svd_init(tw, s);
    for (std::uint64_t retry = 0; retry < 5; ++retry) {
      try {
        candidates[i] = power_iterate(tw, a0, params.iterations, signs);
        return;
      } catch (const DeadPointError&) {
        Rng rng(stream_seed(s, "reinit", {retry}));
        a0 = random_unit_vector(rng, r);
      }
    }
  });

  struct Candidate {
    Eigen::VectorXd a;
    double score;
    std::size_t index;
  };
  std::vector<Candidate> pool;
  for (std::size_t i = 0; i < candidates.size(); ++i)
    if (candidates[i]) pool.push_back({*candidates[i], std::abs(signed_value(tw, *candidates[i], signs)), i});
  std::stable_sort(pool.begin(), pool.end(), [](const Candidate& a, const Candidate& b) {
    if (std::abs(a.score - b.score) > 1e-12 * std::max(1.0, std::max(a.score, b.score)))
      return a.score > b.score;
    return a.index < b.index;
  });

  Found out;
  std::vector<Eigen::VectorXd> seen = known;
  while (!pool.empty() && static_cast<Index>(out.directions.size()) < r) {
    const Candidate best = pool.front();
    pool.erase(pool.begin());
    Eigen::VectorXd refined;
    try {
      refined = power_iterate(tw, best.a, params.iterations, signs);
    } catch (const DeadPointError&) {
      continue;
    }
    std::erase_if(pool, [&](const Candidate& c) {
      return signed_overlap(c.a, refined, signs) > params.nu / 2.0;
    });
    Eigen::MatrixXd col(r, 1);
    col.col(0) = refined;
    const Eigen::VectorXd u = unwhiten(col, wres).col(0);
    const bool duplicate = std::any_of(seen.begin(), seen.end(), [&](const Eigen::VectorXd& v) {
      return std::abs(v.dot(u)) >= 0.999;
    });
    if (duplicate) continue;
    seen.push_back(u);
    out.directions.push_back(u);
    out.values.push_back(signed_value(tw, refined, signs));
  }
  return out;
}

Eigen::MatrixXd as_columns(const std::vector<Eigen::VectorXd>& cols, Index d) {
  Eigen::MatrixXd m(d, static_cast<Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) m.col(static_cast<Index>(j)) = cols[j];
  return m;
}

bool distinct_columns(const Eigen::MatrixXd& m) {
  for (Index a = 0; a < m.cols(); ++a)
    for (Index b = a + 1; b < m.cols(); ++b)
      if (std::abs(m.col(a).dot(m.col(b))) >= 0.999) return false;
  return true;
}

bool is_duplicate(const std::vector<Eigen::VectorXd>& found, const Eigen::VectorXd& u) {
  return std::any_of(found.begin(), found.end(),
                     [&](const Eigen::VectorXd& v) { return std::abs(v.dot(u)) >= 0.999; });
}

// Rank-one refinement of u against T minus the fitted `others`.
Eigen::VectorXd refine_against(const SymTensor3d& t, const std::vector<Eigen::VectorXd>& others,
                               const Eigen::VectorXd& u, int sweeps) {
  Eigen::MatrixXd dirs = as_columns(others, t.dim());
  dirs.conservativeResize(Eigen::NoChange, dirs.cols() + 1);
  dirs.col(dirs.cols() - 1) = u;
  return polish_directions(t, dirs, sweeps, dirs.cols() - 1).col(dirs.cols() - 1);
}

// Clustering on one whitening, deflation for components the restarts missed,
// then the joint polish.
Found decompose_on(const SymTensor3d& t, Index r, const White& white, const DecompositionParams& params,
                   std::uint64_t seed) {
  const Index d = t.dim();
  Found found = cluster_pass(white, params, seed, {});

  // Restarts rarely reach components with a small whitened eigenvalue. The
  // remaining ones are located in the residual after the found part is
  // removed, then polished in the original whitened space, where every
  // component is a fixed point (the residual is only approximately low rank
  // when U is not orthogonal).
  for (std::uint64_t round = 0;
       static_cast<Index>(found.directions.size()) < r && round < static_cast<std::uint64_t>(r); ++round) {
    const Eigen::MatrixXd dirs = as_columns(found.directions, d);
    SymTensor3d residual = t;
    if (dirs.cols() > 0) {
      const Eigen::VectorXd c = fit_coefficients(t, dirs);
      for (Index j = 0; j < dirs.cols(); ++j) residual -= sym_outer3(dirs.col(j), c(j));
    }
    const Index missing = r - static_cast<Index>(found.directions.size());
    const std::uint64_t round_seed = stream_seed(seed, "deflate", {round});
    Found more;
    try {
      more = cluster_pass(ranked_whitenings(residual, missing, params, round_seed).front(), params, round_seed,
                          found.directions);
    } catch (const IllConditionedSliceError&) {
      break;
    }
    if (more.directions.empty()) break;
    const WhiteningResult& wres = white.first;
    for (std::size_t j = 0; j < more.directions.size(); ++j) {
      Eigen::VectorXd u = more.directions[j];
      double value = more.values[j];
      try {
        Eigen::MatrixXd col(r, 1);
        col.col(0) = power_iterate(white.second, (wres.W.transpose() * u).normalized(), params.iterations,
                                   wres.signs);
        const Eigen::VectorXd polished = unwhiten(col, wres).col(0);
        if (!is_duplicate(found.directions, polished)) {
          u = polished;
          value = signed_value(white.second, col.col(0), wres.signs);
        } else {
          u = refine_against(t, found.directions, u, params.iterations);
        }
      } catch (const DeadPointError&) {
      }
      if (is_duplicate(found.directions, u)) continue;
      found.directions.push_back(u);
      found.values.push_back(value);
    }
  }

  if (params.polish_sweeps > 0 && !found.directions.empty()) {
    const Eigen::MatrixXd start = as_columns(found.directions, d);
    const Eigen::MatrixXd polished = polish_directions(t, start, params.polish_sweeps);
    if (distinct_columns(polished) && cp_residual(t, polished, fit_coefficients(t, polished)) <
                                          cp_residual(t, start, fit_coefficients(t, start)))
      for (Index j = 0; j < polished.cols(); ++j) found.directions[static_cast<std::size_t>(j)] = polished.col(j);
  }
  return found;
}

}  // namespace

Eigen::MatrixXd polish_directions(const SymTensor3d& t, Eigen::MatrixXd directions, int sweeps, Index first) {
  detail::require_same("polish_directions", t.dim(), directions.rows());
  const Index k = directions.cols();
  for (int it = 0; it < sweeps; ++it) {
    double step = 0.0;
    for (Index j = first; j < k; ++j) {
      const Eigen::VectorXd c = fit_coefficients(t, directions);
      SymTensor3d rest = t;
      for (Index i = 0; i < k; ++i)
        if (i != j) rest -= sym_outer3(directions.col(i), c(i));
      const Eigen::VectorXd u = directions.col(j);
      Eigen::VectorXd next = contract_vec(rest, u, u);
      const double norm = next.norm();
      if (!(norm >= 1e-14)) continue;
      next /= norm;
      if (next.dot(u) < 0.0) next = -next;
      step = std::max(step, (next - u).norm());
      directions.col(j) = next;
    }
    if (step < 1e-15) break;
  }
  return directions;
}

DecompositionResult robust_decompose(const SymTensor3d& t, Index r, const DecompositionParams& params,
                                     std::uint64_t seed) {
  const Index d = t.dim();
  if (r < 1 || r > d) {
    std::ostringstream os;
    os << "robust_decompose: need 1 <= r <= d (r = " << r << ", d = " << d << ")";
    throw std::invalid_argument(os.str());
  }
  if (params.effective_restarts(r) < r) throw std::invalid_argument("robust_decompose: need L >= r");
  if (!(params.nu > 0.0 && params.nu <= 1.0)) throw std::invalid_argument("robust_decompose: need 0 < nu <= 1");
  if (params.iterations < 1) throw std::invalid_argument("robust_decompose: need N >= 1");
  if (params.slice_candidates < 1 || params.slice_trials < 1)
    throw std::invalid_argument("robust_decompose: need at least one slice");

  // Several slices are decomposed independently; the most complete result
  // with the smallest CP residual wins. Residuals closer than rounding
  // level relative to |T| count as ties, which go to the earlier slice.
  const std::vector<White> whitenings = ranked_whitenings(t, r, params, seed);
  const std::size_t trials = std::min(whitenings.size(), static_cast<std::size_t>(params.slice_trials));
  std::optional<Found> best;
  double best_residual = 0.0;
  int best_attempts = 0;
  const double tie = 1e-12 * t.norm();
  for (std::size_t i = 0; i < trials; ++i) {
    Found f = decompose_on(t, r, whitenings[i], params, i == 0 ? seed : stream_seed(seed, "slice", {i}));
    const Eigen::MatrixXd dirs = as_columns(f.directions, d);
    const double res = dirs.cols() > 0 ? cp_residual(t, dirs, fit_coefficients(t, dirs)) : t.norm();
    const bool better = !best || f.directions.size() > best->directions.size() ||
                        (f.directions.size() == best->directions.size() && res < best_residual - tie);
    if (better) {
      best = std::move(f);
      best_residual = res;
      best_attempts = whitenings[i].first.attempts;
    }
  }

  DecompositionResult result;
  result.n_restarts_used = params.effective_restarts(r);
  result.whitening_attempts = best_attempts;
  const Index k = static_cast<Index>(best->directions.size());
  result.directions = as_columns(best->directions, d);
  result.whitened_eigenvalues = Eigen::Map<const Eigen::VectorXd>(best->values.data(), k);
  result.coefficients = k > 0 ? fit_coefficients(t, result.directions) : Eigen::VectorXd();
  for (Index j = 0; j < k; ++j)
    if (result.coefficients(j) < 0.0) {
      result.coefficients(j) = -result.coefficients(j);
      result.directions.col(j) = -result.directions.col(j);
    }
  result.residual_fro = cp_residual(t, result.directions, result.coefficients);
  if (k < r) {
    std::ostringstream os;
    os << "robust_decompose: recovered " << k << " of " << r << " components";
    throw UnderRecoveryError(os.str(), std::move(result));
  }
  return result;
}

}  // namespace glmmix
