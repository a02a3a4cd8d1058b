// Dense order-3 tensors and multilinear forms.
//
// Index convention is zero-based, mode 1 is the first index and the
// matricization maps (i, j, k) to (i, j * d + k).

#ifndef GLMMIX_TENSOR_HPP
#define GLMMIX_TENSOR_HPP

#include <array>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace glmmix {

using Eigen::Index;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

inline std::string dims_message(const char* op, Index a, Index b) {
  std::ostringstream os;
  os << op << ": dimension mismatch (" << a << " vs " << b << ")";
  return os.str();
}

inline void require_same(const char* op, Index a, Index b) {
  if (a != b) throw DimensionError(dims_message(op, a, b));
}

}  // namespace detail

/// General (not necessarily symmetric) order-3 array of shape n0 x n1 x n2.
template <typename Scalar>
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(Index n0, Index n1, Index n2)
      : dims_{n0, n1, n2}, data_(static_cast<std::size_t>(n0 * n1 * n2), Scalar(0)) {
    if (n0 < 0 || n1 < 0 || n2 < 0) throw DimensionError("Tensor3: negative extent");
  }

  Index dim(int mode) const { return dims_[static_cast<std::size_t>(mode)]; }
  const std::array<Index, 3>& dims() const { return dims_; }

  Scalar& operator()(Index i, Index j, Index k) { return data_[offset(i, j, k)]; }
  const Scalar& operator()(Index i, Index j, Index k) const { return data_[offset(i, j, k)]; }

  const std::vector<Scalar>& data() const { return data_; }
  std::vector<Scalar>& data() { return data_; }

  Scalar squared_norm() const {
    Scalar s(0);
    for (const Scalar& v : data_) s += v * v;
    return s;
  }
  Scalar norm() const { return std::sqrt(squared_norm()); }

 private:
  std::size_t offset(Index i, Index j, Index k) const {
    return static_cast<std::size_t>((i * dims_[1] + j) * dims_[2] + k);
  }

  std::array<Index, 3> dims_{0, 0, 0};
  std::vector<Scalar> data_;
};

/// Dense symmetric order-3 tensor over R^d.
///
/// Values are only created through symmetrizing constructors, so every
/// instance satisfies T[i,j,k] == T[pi(i,j,k)] exactly.
template <typename Scalar>
class SymTensor3 {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  SymTensor3() = default;

  static SymTensor3 zero(Index d) {
    if (d < 0) throw DimensionError("SymTensor3: negative dimension");
    SymTensor3 t;
    t.dim_ = d;
    t.data_.assign(static_cast<std::size_t>(d * d * d), Scalar(0));
    return t;
  }

  /// Symmetrizes a cubic array by averaging over the six index permutations.
  /// Orbits whose entries already agree are copied unchanged, which makes
  /// symmetrization idempotent bit for bit.
  static SymTensor3 symmetrize(const Tensor3<Scalar>& a) {
    detail::require_same("symmetrize", a.dim(0), a.dim(1));
    detail::require_same("symmetrize", a.dim(0), a.dim(2));
    const Index d = a.dim(0);
    SymTensor3 t = zero(d);
    for (Index i = 0; i < d; ++i)
      for (Index j = i; j < d; ++j)
        for (Index k = j; k < d; ++k) {
          const std::array<Scalar, 6> v{a(i, j, k), a(i, k, j), a(j, i, k),
                                        a(j, k, i), a(k, i, j), a(k, j, i)};
          bool equal = true;
          for (const Scalar& e : v) equal = equal && (e == v[0]);
          Scalar s = v[0];
          if (!equal) {
            s = Scalar(0);
            for (const Scalar& e : v) s += e;
            s /= Scalar(6);
          }
          t.set_orbit(i, j, k, s);
        }
    return t;
  }

  /// Builds from values on the canonical index set i <= j <= k, in
  /// lexicographic order (see packed_size()).
  static SymTensor3 from_packed(Index d, const std::vector<Scalar>& packed) {
    if (static_cast<Index>(packed.size()) != packed_size(d))
      throw DimensionError(detail::dims_message("from_packed", static_cast<Index>(packed.size()),
                                                packed_size(d)));
    SymTensor3 t = zero(d);
    std::size_t p = 0;
    for (Index i = 0; i < d; ++i)
      for (Index j = i; j < d; ++j)
        for (Index k = j; k < d; ++k) t.set_orbit(i, j, k, packed[p++]);
    return t;
  }

  static constexpr Index packed_size(Index d) { return d * (d + 1) * (d + 2) / 6; }

  std::vector<Scalar> packed() const {
    std::vector<Scalar> out;
    out.reserve(static_cast<std::size_t>(packed_size(dim_)));
    for (Index i = 0; i < dim_; ++i)
      for (Index j = i; j < dim_; ++j)
        for (Index k = j; k < dim_; ++k) out.push_back((*this)(i, j, k));
    return out;
  }

  Index dim() const { return dim_; }

  const Scalar& operator()(Index i, Index j, Index k) const {
    return data_[static_cast<std::size_t>((i * dim_ + j) * dim_ + k)];
  }

  const std::vector<Scalar>& data() const { return data_; }

  Tensor3<Scalar> to_array() const {
    Tensor3<Scalar> a(dim_, dim_, dim_);
    a.data() = data_;
    return a;
  }

  Scalar squared_norm() const {
    Scalar s(0);
    for (const Scalar& v : data_) s += v * v;
    return s;
  }
  Scalar norm() const { return std::sqrt(squared_norm()); }

  Scalar max_abs() const {
    Scalar m(0);
    for (const Scalar& v : data_) m = std::max(m, std::abs(v));
    return m;
  }

  bool all_finite() const {
    for (const Scalar& v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  SymTensor3& operator+=(const SymTensor3& o) {
    detail::require_same("SymTensor3 +", dim_, o.dim_);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  SymTensor3& operator-=(const SymTensor3& o) {
    detail::require_same("SymTensor3 -", dim_, o.dim_);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  SymTensor3& operator*=(Scalar s) {
    for (Scalar& v : data_) v *= s;
    return *this;
  }

  friend SymTensor3 operator+(SymTensor3 a, const SymTensor3& b) { return a += b; }
  friend SymTensor3 operator-(SymTensor3 a, const SymTensor3& b) { return a -= b; }
  friend SymTensor3 operator*(Scalar s, SymTensor3 a) { return a *= s; }
  friend SymTensor3 operator*(SymTensor3 a, Scalar s) { return a *= s; }

 private:
  void set_orbit(Index i, Index j, Index k, Scalar v) {
    auto at = [this](Index a, Index b, Index c) -> Scalar& {
      return data_[static_cast<std::size_t>((a * dim_ + b) * dim_ + c)];
    };
    at(i, j, k) = v;
    at(i, k, j) = v;
    at(j, i, k) = v;
    at(j, k, i) = v;
    at(k, i, j) = v;
    at(k, j, i) = v;
  }

  Index dim_ = 0;
  std::vector<Scalar> data_;
};

using Tensor3d = Tensor3<double>;
using SymTensor3d = SymTensor3<double>;

/// a (x) b (x) c.
template <typename DerivedA, typename DerivedB, typename DerivedC>
Tensor3<typename DerivedA::Scalar> outer3(const Eigen::MatrixBase<DerivedA>& a,
                                          const Eigen::MatrixBase<DerivedB>& b,
                                          const Eigen::MatrixBase<DerivedC>& c) {
  detail::require_same("outer3", a.size(), b.size());
  detail::require_same("outer3", a.size(), c.size());
  Tensor3<typename DerivedA::Scalar> t(a.size(), b.size(), c.size());
  for (Index i = 0; i < a.size(); ++i)
    for (Index j = 0; j < b.size(); ++j)
      for (Index k = 0; k < c.size(); ++k) t(i, j, k) = a(i) * b(j) * c(k);
  return t;
}

/// u (x) u (x) u, scaled by `weight`.
template <typename Derived>
SymTensor3<typename Derived::Scalar> sym_outer3(const Eigen::MatrixBase<Derived>& u,
                                                typename Derived::Scalar weight = 1) {
  using Scalar = typename Derived::Scalar;
  const Index d = u.size();
  std::vector<Scalar> packed;
  packed.reserve(static_cast<std::size_t>(SymTensor3<Scalar>::packed_size(d)));
  for (Index i = 0; i < d; ++i)
    for (Index j = i; j < d; ++j)
      for (Index k = j; k < d; ++k) packed.push_back(weight * u(i) * u(j) * u(k));
  return SymTensor3<Scalar>::from_packed(d, packed);
}

namespace detail {

// Contracts mode `mode` of `t` with matrix m (t.dim(mode) x m.cols()).
template <typename Scalar, typename Derived>
Tensor3<Scalar> contract_mode(const Tensor3<Scalar>& t, int mode,
                              const Eigen::MatrixBase<Derived>& m) {
  require_same("multilinear", t.dim(mode), m.rows());
  std::array<Index, 3> out_dims = t.dims();
  out_dims[static_cast<std::size_t>(mode)] = m.cols();
  Tensor3<Scalar> out(out_dims[0], out_dims[1], out_dims[2]);
  for (Index i = 0; i < out_dims[0]; ++i)
    for (Index j = 0; j < out_dims[1]; ++j)
      for (Index k = 0; k < out_dims[2]; ++k) {
        Scalar s(0);
        for (Index q = 0; q < t.dim(mode); ++q) {
          switch (mode) {
            case 0: s += t(q, j, k) * m(q, i); break;
            case 1: s += t(i, q, k) * m(q, j); break;
            default: s += t(i, j, q) * m(q, k); break;
          }
        }
        out(i, j, k) = s;
      }
  return out;
}

}  // namespace detail

/// T(M1, M2, M3)[a,b,c] = sum_{ijk} T[i,j,k] M1[i,a] M2[j,b] M3[k,c].
template <typename Scalar, typename D1, typename D2, typename D3>
Tensor3<Scalar> multilinear(const SymTensor3<Scalar>& t, const Eigen::MatrixBase<D1>& m1,
                            const Eigen::MatrixBase<D2>& m2, const Eigen::MatrixBase<D3>& m3) {
  detail::require_same("multilinear", t.dim(), m1.rows());
  detail::require_same("multilinear", t.dim(), m2.rows());
  detail::require_same("multilinear", t.dim(), m3.rows());
  Tensor3<Scalar> out = detail::contract_mode(t.to_array(), 2, m3);
  out = detail::contract_mode(out, 1, m2);
  return detail::contract_mode(out, 0, m1);
}

/// T(M, M, M), which stays symmetric.
template <typename Scalar, typename Derived>
SymTensor3<Scalar> multilinear(const SymTensor3<Scalar>& t, const Eigen::MatrixBase<Derived>& m) {
  return SymTensor3<Scalar>::symmetrize(multilinear(t, m, m, m));
}

/// T(I, I, theta): the theta-weighted combination of the d x d slices.
template <typename Scalar, typename Derived>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> slice_contract(
    const SymTensor3<Scalar>& t, const Eigen::MatrixBase<Derived>& theta) {
  detail::require_same("slice_contract", t.dim(), theta.size());
  const Index d = t.dim();
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(d, d);
  for (Index i = 0; i < d; ++i)
    for (Index j = i; j < d; ++j) {
      Scalar s(0);
      for (Index k = 0; k < d; ++k) s += t(i, j, k) * theta(k);
      out(i, j) = s;
      out(j, i) = s;
    }
  return out;
}

/// T(I, a, b) as a vector.
template <typename Scalar, typename DA, typename DB>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> contract_vec(const SymTensor3<Scalar>& t,
                                                      const Eigen::MatrixBase<DA>& a,
                                                      const Eigen::MatrixBase<DB>& b) {
  detail::require_same("contract_vec", t.dim(), a.size());
  detail::require_same("contract_vec", t.dim(), b.size());
  const Index d = t.dim();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out(d);
  for (Index i = 0; i < d; ++i) {
    Scalar s(0);
    for (Index j = 0; j < d; ++j) {
      Scalar r(0);
      for (Index k = 0; k < d; ++k) r += t(i, j, k) * b(k);
      s += r * a(j);
    }
    out(i) = s;
  }
  return out;
}

/// T(a, b, c) as a scalar.
template <typename Scalar, typename DA, typename DB, typename DC>
Scalar contract(const SymTensor3<Scalar>& t, const Eigen::MatrixBase<DA>& a,
                const Eigen::MatrixBase<DB>& b, const Eigen::MatrixBase<DC>& c) {
  detail::require_same("contract", t.dim(), a.size());
  return a.dot(contract_vec(t, b, c));
}

/// Mode-1 unfolding, d x d^2, with (i, j, k) -> (i, j * d + k).
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> matricize(const SymTensor3<Scalar>& t) {
  const Index d = t.dim();
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(d, d * d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j)
      for (Index k = 0; k < d; ++k) out(i, j * d + k) = t(i, j, k);
  return out;
}

/// Largest |T[i,j,k] - T[pi(i,j,k)]| over all permutations; zero for valid values.
template <typename Scalar>
Scalar max_asymmetry(const Tensor3<Scalar>& a) {
  Scalar worst(0);
  const Index d = a.dim(0);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j)
      for (Index k = 0; k < d; ++k) {
        const Scalar v = a(i, j, k);
        for (Scalar w : {a(i, k, j), a(j, i, k), a(j, k, i), a(k, i, j), a(k, j, i)})
          worst = std::max(worst, std::abs(v - w));
      }
  return worst;
}

}  // namespace glmmix

#endif  // GLMMIX_TENSOR_HPP
