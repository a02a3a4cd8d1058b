// Helpers for symmetric order-3 values stored on i <= j <= k.
#ifndef GLMMIX_SRC_PACKED_HPP
#define GLMMIX_SRC_PACKED_HPP

#include <vector>

#include <Eigen/Dense>

namespace glmmix::packed {

using Eigen::Index;

inline Index size(Index d) { return d * (d + 1) * (d + 2) / 6; }

// out += w * z^{(x)3}
inline void add_cube(std::vector<double>& out, const Eigen::VectorXd& z, double w) {
  const Index d = z.size();
  std::size_t p = 0;
  for (Index i = 0; i < d; ++i) {
    const double wi = w * z(i);
    for (Index j = i; j < d; ++j) {
      const double wij = wi * z(j);
      for (Index k = j; k < d; ++k) out[p++] += wij * z(k);
    }
  }
}

// out += w * (M_ij v_k + M_ik v_j + M_jk v_i), M symmetric.
inline void add_sym_matvec(std::vector<double>& out, const Eigen::MatrixXd& m,
                           const Eigen::VectorXd& v, double w) {
  const Index d = v.size();
  std::size_t p = 0;
  for (Index i = 0; i < d; ++i)
    for (Index j = i; j < d; ++j)
      for (Index k = j; k < d; ++k)
        out[p++] += w * (m(i, j) * v(k) + m(i, k) * v(j) + m(j, k) * v(i));
}

// Same with M = I.
inline void add_sym_identity_vec(std::vector<double>& out, const Eigen::VectorXd& v, double w) {
  const Index d = v.size();
  std::size_t p = 0;
  for (Index i = 0; i < d; ++i)
    for (Index j = i; j < d; ++j)
      for (Index k = j; k < d; ++k) {
        double s = 0.0;
        if (i == j) s += v(k);
        if (i == k) s += v(j);
        if (j == k) s += v(i);
        out[p++] += w * s;
      }
}

}  // namespace glmmix::packed

#endif  // GLMMIX_SRC_PACKED_HPP
