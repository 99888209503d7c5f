#pragma once

// Templated derivative kernels shared by geometry, detection and the model
// API. Every kernel takes the packed point z = (u, p) and raw theta at scalar
// type S and returns exact derivatives one nesting level up.

#include <cmath>
#include <span>
#include <vector>

#include "bifinfer/dense.hpp"
#include "bifinfer/dual.hpp"
#include "bifinfer/model.hpp"

namespace bifinfer::detail {

template <class S>
using Vec = std::vector<S>;

template <class S>
Vec<S> to_vec(const Eigen::VectorXd& x) {
  Vec<S> out(static_cast<std::size_t>(x.size()));
  for (Eigen::Index i = 0; i < x.size(); ++i) out[static_cast<std::size_t>(i)] = S(x[i]);
  return out;
}

template <class S>
Vec<S> eval(const ModelDef& m, std::span<const S> z, std::span<const S> theta) {
  Vec<S> out(static_cast<std::size_t>(m.state_dim));
  eval_rhs<S>(m, z, theta, out);
  return out;
}

/// dF/dz (N x (N+1)) at scalar type S, one column per forward pass.
template <class S>
dense::Matrix<S> jacobian_z(const ModelDef& m, std::span<const S> z, std::span<const S> theta) {
  using T = Dual<S>;
  const std::size_t n = static_cast<std::size_t>(m.state_dim);
  Vec<T> zz(z.size());
  Vec<T> th(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) th[i] = T(theta[i]);
  Vec<T> out(n);
  dense::Matrix<S> jac(n, n + 1);
  for (std::size_t k = 0; k <= n; ++k) {
    for (std::size_t i = 0; i <= n; ++i) zz[i] = T(z[i], S(i == k ? 1.0 : 0.0));
    eval_rhs<T>(m, zz, th, out);
    for (std::size_t i = 0; i < n; ++i) jac(i, k) = out[i].d;
  }
  return jac;
}

/// dF/dtheta (N x M) in raw coordinates.
template <class S>
dense::Matrix<S> jacobian_theta(const ModelDef& m, std::span<const S> z, std::span<const S> theta) {
  using T = Dual<S>;
  const std::size_t n = static_cast<std::size_t>(m.state_dim);
  const std::size_t mm = theta.size();
  Vec<T> zz(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) zz[i] = T(z[i]);
  Vec<T> th(mm);
  Vec<T> out(n);
  dense::Matrix<S> jac(n, mm);
  for (std::size_t k = 0; k < mm; ++k) {
    for (std::size_t i = 0; i < mm; ++i) th[i] = T(theta[i], S(i == k ? 1.0 : 0.0));
    eval_rhs<T>(m, zz, th, out);
    for (std::size_t i = 0; i < n; ++i) jac(i, k) = out[i].d;
  }
  return jac;
}

/// State Jacobian dF/du with every entry carrying its derivative along the
/// direction (dz, dtheta). Returned at scalar type Dual<S>.
template <class S>
dense::Matrix<Dual<S>> state_jacobian_along(const ModelDef& m, std::span<const S> z, std::span<const S> theta,
                                            std::span<const S> dz, std::span<const S> dtheta) {
  using In = Dual<S>;   // direction perturbation
  using T = Dual<In>;   // column perturbation on top
  const std::size_t n = static_cast<std::size_t>(m.state_dim);
  Vec<T> zz(z.size());
  Vec<T> th(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    th[i] = T(In(theta[i], dtheta.empty() ? S(0.0) : dtheta[i]), In(0.0));
  }
  Vec<T> out(n);
  dense::Matrix<In> ju(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i <= n; ++i) {
      zz[i] = T(In(z[i], dz.empty() ? S(0.0) : dz[i]), In(i == j ? 1.0 : 0.0));
    }
    eval_rhs<T>(m, zz, th, out);
    for (std::size_t i = 0; i < n; ++i) ju(i, j) = out[i].d;
  }
  return ju;
}

/// det(dF/du) and its derivative along (dz, dtheta).
template <class S>
Dual<S> det_along(const ModelDef& m, std::span<const S> z, std::span<const S> theta, std::span<const S> dz,
                  std::span<const S> dtheta) {
  return dense::determinant(state_jacobian_along<S>(m, z, theta, dz, dtheta));
}

/// Unnormalized tangent from the bordered system [J; ref^T] t = e_{N+1}.
/// The result is parallel to the minor-determinant tangent and satisfies
/// ref . t = 1. Returns false if the bordered matrix is singular.
template <class S>
bool bordered_tangent(const dense::Matrix<S>& jac, std::span<const double> ref, Vec<S>& t) {
  const std::size_t n = jac.rows();
  dense::Matrix<S> a(n + 1, n + 1);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= n; ++j) a(i, j) = jac(i, j);
  for (std::size_t j = 0; j <= n; ++j) a(n, j) = S(ref[j]);
  auto f = dense::lu_factor(std::move(a));
  if (f.singular || f.min_pivot <= 1e-14 * f.max_pivot) return false;
  dense::Matrix<S> rhs(n + 1, 1);
  rhs(n, 0) = S(1.0);
  auto x = dense::lu_solve(f, rhs);
  t.resize(n + 1);
  for (std::size_t i = 0; i <= n; ++i) t[i] = x(i, 0);
  return true;
}

/// Signs used inside |det| and |d det/ds|. Zero means "use the sign of the
/// real value"; +-1 forces a one-sided limit at a non-smooth point.
struct AbsSigns {
  double det = 0.0;
  double slope = 0.0;
};

template <class S>
S signed_abs(const S& x, double forced) {
  double s = forced;
  if (s == 0.0) s = value_of(x) > 0.0 ? 1.0 : (value_of(x) < 0.0 ? -1.0 : 0.0);
  return x * s;
}

template <class S>
struct MeasureParts {
  S det;
  S slope;
  S phi;
};

/// Bifurcation measure phi = (1 + |det| / (|d det/ds| + eps))^-1 at scalar S.
/// `ref` fixes the tangent orientation (only its sign matters for |slope|).
template <class S>
bool measure_parts(const ModelDef& m, std::span<const S> z, std::span<const S> theta, std::span<const double> ref,
                   double eps_den, AbsSigns signs, MeasureParts<S>& out) {
  const auto jac = jacobian_z<S>(m, z, theta);
  Vec<S> t;
  if (!bordered_tangent<S>(jac, ref, t)) return false;
  S norm2(0.0);
  for (const auto& c : t) norm2 += c * c;
  using std::sqrt;
  const S norm = sqrt(norm2);
  for (auto& c : t) c = c / norm;
  const Dual<S> dd = det_along<S>(m, z, theta, t, {});
  out.det = dd.v;
  out.slope = dd.d;
  const S ratio = signed_abs(dd.v, signs.det) / (signed_abs(dd.d, signs.slope) + eps_den);
  out.phi = 1.0 / (1.0 + ratio);
  return true;
}

/// Normal deformation dz/dtheta = -J^T (J J^T)^{-1} dF/dtheta, (N+1) x M.
template <class S>
bool normal_deformation(const dense::Matrix<S>& jac, const dense::Matrix<S>& ftheta, dense::Matrix<S>& out) {
  const std::size_t n = jac.rows();
  const std::size_t np1 = jac.cols();
  const std::size_t mm = ftheta.cols();
  dense::Matrix<S> jjt(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      S s(0.0);
      for (std::size_t k = 0; k < np1; ++k) s += jac(i, k) * jac(j, k);
      jjt(i, j) = s;
    }
  auto f = dense::lu_factor(std::move(jjt));
  if (f.singular || f.min_pivot <= 1e-24 * std::max(1.0, f.max_pivot)) return false;
  auto x = dense::lu_solve(f, ftheta);
  out = dense::Matrix<S>(np1, mm);
  for (std::size_t a = 0; a < np1; ++a)
    for (std::size_t b = 0; b < mm; ++b) {
      S s(0.0);
      for (std::size_t i = 0; i < n; ++i) s += jac(i, a) * x(i, b);
      out(a, b) = -s;
    }
  return true;
}

}  // namespace bifinfer::detail
