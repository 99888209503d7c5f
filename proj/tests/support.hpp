#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "bifinfer/continuation.hpp"
#include "bifinfer/cost.hpp"
#include "bifinfer/detection.hpp"
#include "bifinfer/geometry.hpp"
#include "bifinfer/model.hpp"
#include "bifinfer/models.hpp"
#include "bifinfer/rng.hpp"

namespace testing {

using namespace bifinfer;

// F = p - u^3 + u
inline ModelDef cubic() {
  return make_model("cubic", 1, 1, [](auto u, const auto& p, auto, auto out) { out[0] = p - u[0] * u[0] * u[0] + u[0]; },
                    ParamTransform::identity, {-1.0, 1.0});
}

// Unit circle u^2 + p^2 = r^2 with r = theta1: a single closed branch.
inline ModelDef circle() {
  return make_model("circle", 1, 1, [](auto u, const auto& p, auto th, auto out) { out[0] = u[0] * u[0] + p * p - th[0] * th[0]; },
                    ParamTransform::identity, {-2.0, 2.0});
}

// Saddle-node mirrored in p, so its branch is traced in the opposite direction.
inline ModelDef saddle_node_mirrored() {
  return make_model(
      "saddle-node-mirrored", 1, 2,
      [](auto u, const auto& p, auto th, auto out) { out[0] = -p + th[0] * u[0] + th[1] * u[0] * u[0] * u[0]; },
      ParamTransform::identity, {-3.0, 3.0});
}

// Central differences of evaluate() in z, step 1e-6 (1 + |x|).
inline Eigen::MatrixXd fd_dF_dz(const ModelDef& m, const StatePoint& z, const ParameterVector& th) {
  const Eigen::VectorXd x = z.z();
  Eigen::MatrixXd out(m.state_dim, x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double h = 1e-6 * (1.0 + std::abs(x[j]));
    Eigen::VectorXd a = x, b = x;
    a[j] += h;
    b[j] -= h;
    out.col(j) = (evaluate(m, StatePoint::from_z(a), th) - evaluate(m, StatePoint::from_z(b), th)) / (2 * h);
  }
  return out;
}

inline Eigen::MatrixXd fd_dF_dtheta(const ModelDef& m, const StatePoint& z, const ParameterVector& th) {
  Eigen::MatrixXd out(m.state_dim, th.size());
  for (Eigen::Index j = 0; j < th.size(); ++j) {
    const double h = 1e-6 * (1.0 + std::abs(th[j]));
    ParameterVector a = th, b = th;
    a.values[j] += h;
    b.values[j] -= h;
    out.col(j) = (evaluate(m, z, a) - evaluate(m, z, b)) / (2 * h);
  }
  return out;
}

inline double rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const double scale = std::max({a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff(), 1e-300});
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

// A reference parameter point for each built-in, away from degenerate sets.
inline ParameterVector reference_theta(const ModelDef& m) {
  if (m.name == "saddle-node") return {2.5, -1.0};
  if (m.name == "pitchfork") return {0.5, -1.0};
  if (m.name == "toggle") return {1.14, 1.277, 0.019, 1.01, -0.261};
  if (m.name == "scaling-chain") {
    ParameterVector th;
    th.values = Eigen::VectorXd::Constant(m.param_dim, 0.5);
    return th;
  }
  if (m.name == "degenerate-pair") return {0.0, -1.0 / 3.0};
  return {0.0};
}

// Random point on a traced branch of the model.
inline std::vector<StatePoint> curve_points(const ModelDef& m, const ParameterVector& th, int count, std::uint64_t seed) {
  const Diagram d = continuation::trace_branches(m, th);
  std::vector<StatePoint> out;
  if (d.branches.empty()) return out;
  rng::CounterStream s(seed, 7);
  for (int i = 0; i < count; ++i) {
    const auto& b = d.branches[static_cast<std::size_t>(s.uniform() * d.branches.size()) % d.branches.size()];
    const auto& smp = b.samples[static_cast<std::size_t>(s.uniform() * b.samples.size()) % b.samples.size()];
    out.push_back(smp.z);
  }
  return out;
}

// Everything the gradient oracles need from one full pipeline evaluation.
struct Pipeline {
  double psi = NAN;
  double L = NAN;
  std::vector<double> p;
  std::vector<Eigen::VectorXd> dp;
  Eigen::VectorXd grad_psi;
  Eigen::VectorXd grad_L;
};

inline Pipeline pipeline(const ModelDef& m, const ParameterVector& th, const std::vector<double>& targets,
                         bool gradient, const TraceSettings& ts = {}) {
  const Diagram d = continuation::trace_branches(m, th, m.p_window, ts);
  const auto pred = detection::predictions(m, th, d);
  Pipeline r;
  for (const auto& x : pred.points) {
    r.p.push_back(x.z.p);
    r.dp.push_back(x.dp_dtheta);
  }
  const auto D = cost::TargetSet::make(targets, m.p_window);
  if (gradient) {
    const auto g = geometry::grad_total_measure(m, th, d);
    r.psi = g.value;
    r.grad_psi = g.grad;
    const auto rep = cost::grad_loss(m, th, d, pred, D);
    r.L = rep.L;
    r.grad_L = rep.grad;
  } else {
    r.psi = geometry::total_measure(d);
    r.L = cost::loss(m, th, d, pred, D).L;
  }
  return r;
}

}  // namespace testing
