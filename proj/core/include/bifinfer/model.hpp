#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "bifinfer/dual.hpp"
#include "bifinfer/errors.hpp"

namespace bifinfer {

enum class ParamTransform { identity, log10 };

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double x) const { return x >= lo && x <= hi; }
  double width() const { return hi - lo; }
};

/// Per-component state bounds used for root seeding and trace termination.
struct StateBox {
  std::vector<Interval> bounds;
};

/// Raw optimization coordinates (before the model's parameter transform).
struct ParameterVector {
  Eigen::VectorXd values;

  ParameterVector() = default;
  explicit ParameterVector(Eigen::VectorXd v) : values(std::move(v)) {}
  ParameterVector(std::initializer_list<double> v) : values(v.size()) {
    Eigen::Index i = 0;
    for (double x : v) values[i++] = x;
  }
  Eigen::Index size() const { return values.size(); }
  double operator[](Eigen::Index i) const { return values[i]; }
  bool finite() const { return values.allFinite(); }
};

/// A point (u, p) in the augmented state space. `z()` packs it as (u_1..u_N, p).
struct StatePoint {
  Eigen::VectorXd u;
  double p = 0.0;

  StatePoint() = default;
  StatePoint(Eigen::VectorXd state, double control) : u(std::move(state)), p(control) {}

  Eigen::VectorXd z() const {
    Eigen::VectorXd out(u.size() + 1);
    out.head(u.size()) = u;
    out[u.size()] = p;
    return out;
  }
  static StatePoint from_z(const Eigen::VectorXd& z) {
    const Eigen::Index n = z.size() - 1;
    return StatePoint(z.head(n), z[n]);
  }
};

/// Right-hand side F(u, p; theta_eff) for one scalar type. `theta` is already
/// transformed; `out` has length N.
template <class S>
using RhsFn = std::function<void(std::span<const S> u, const S& p, std::span<const S> theta, std::span<S> out)>;

/// Optional closed-form first derivatives in raw parameter coordinates,
/// used to cross-check the perturbation path.
struct ClosedFormDerivatives {
  std::function<Eigen::MatrixXd(const StatePoint&, const ParameterVector&)> dF_dz;
  std::function<Eigen::MatrixXd(const StatePoint&, const ParameterVector&)> dF_dtheta;
};

/// An ODE right-hand side F_theta(u, p) with exact derivative access.
///
/// The rhs is stored once per scalar type (double and up to three nested
/// dual levels) so that every derivative needed downstream is exact.
struct ModelDef {
  std::string name;
  int state_dim = 0;
  int param_dim = 0;
  ParamTransform transform = ParamTransform::identity;
  Interval p_window;
  std::function<StateBox(std::span<const double> theta_eff)> u_box;

  RhsFn<double> rhs0;
  RhsFn<D1> rhs1;
  RhsFn<D2> rhs2;
  RhsFn<D3> rhs3;

  std::optional<ClosedFormDerivatives> closed_form;

  template <class S>
  const RhsFn<S>& rhs() const {
    if constexpr (std::is_same_v<S, double>) {
      return rhs0;
    } else if constexpr (std::is_same_v<S, D1>) {
      return rhs1;
    } else if constexpr (std::is_same_v<S, D2>) {
      return rhs2;
    } else {
      static_assert(std::is_same_v<S, D3>, "derivative nesting deeper than three levels is not instantiated");
      return rhs3;
    }
  }

  /// Parameters after the transform (10^theta for log10).
  Eigen::VectorXd effective_params(const ParameterVector& theta) const;
  StateBox box(const ParameterVector& theta) const;
};

/// Build a ModelDef from a generic callable `fn(u, p, theta, out)` that is
/// valid for every scalar type. The callable is instantiated for all nesting
/// levels.
template <class Fn>
ModelDef make_model(std::string name, int state_dim, int param_dim, Fn fn,
                    ParamTransform transform = ParamTransform::identity, Interval p_window = {-1.0, 1.0}) {
  ModelDef m;
  m.name = std::move(name);
  m.state_dim = state_dim;
  m.param_dim = param_dim;
  m.transform = transform;
  m.p_window = p_window;
  m.rhs0 = fn;
  m.rhs1 = fn;
  m.rhs2 = fn;
  m.rhs3 = fn;
  m.u_box = [state_dim](std::span<const double>) {
    return StateBox{std::vector<Interval>(static_cast<std::size_t>(state_dim), Interval{-10.0, 10.0})};
  };
  return m;
}

/// Transform raw theta into the parameters seen by the rhs, at any scalar type.
template <class S>
void transform_params(const ModelDef& m, std::span<const S> raw, std::span<S> eff) {
  if (m.transform == ParamTransform::identity) {
    for (std::size_t i = 0; i < raw.size(); ++i) eff[i] = raw[i];
  } else {
    using std::exp;
    constexpr double ln10 = 2.302585092994045684;
    for (std::size_t i = 0; i < raw.size(); ++i) eff[i] = exp(raw[i] * ln10);
  }
}

/// Evaluate F at the packed point z = (u, p) with raw parameters.
template <class S>
void eval_rhs(const ModelDef& m, std::span<const S> z, std::span<const S> raw_theta, std::span<S> out) {
  const std::size_t n = static_cast<std::size_t>(m.state_dim);
  S eff_buf[16];
  std::vector<S> eff_heap;
  std::span<S> eff;
  if (raw_theta.size() <= 16) {
    eff = std::span<S>(eff_buf, raw_theta.size());
  } else {
    eff_heap.resize(raw_theta.size());
    eff = eff_heap;
  }
  transform_params<S>(m, raw_theta, eff);
  m.rhs<S>()(z.first(n), z[n], std::span<const S>(eff.data(), eff.size()), out);
}

enum class Derivative {
  dF_du,        // N x N
  dF_dz,        // N x (N+1)
  dF_dtheta,    // N x M
  ddet_dz,      // (N+1) x 1
  ddet_dtheta,  // M x 1
  d2F_dz2,      // N x (N+1)^2, row i holds the Hessian of F_i flattened row-major
  d2F_dz_dtheta // N x (N+1)*M, row i holds d^2 F_i / dz_a dtheta_b at column a*M + b
};

/// F_theta(u, p). Throws UsageError on dimension mismatch and
/// ModelEvaluationError on non-finite input or output.
Eigen::VectorXd evaluate(const ModelDef& model, const StatePoint& z, const ParameterVector& theta);

/// Exact derivative blocks (chain rule through the parameter transform applied).
Eigen::MatrixXd differentiate(const ModelDef& model, const StatePoint& z, const ParameterVector& theta,
                              Derivative which);

/// Throws UsageError unless z and theta match the model's dimensions and are finite.
void check_inputs(const ModelDef& model, const StatePoint& z, const ParameterVector& theta);

}  // namespace bifinfer
