#include "bifinfer/detection.hpp"

#include <algorithm>
#include <cmath>

#include "bifinfer/errors.hpp"
#include "bifinfer/geometry.hpp"

namespace bifinfer::detection {

namespace {

Eigen::VectorXd extended_residual(const ModelDef& model, const ParameterVector& theta, const Eigen::VectorXd& z) {
  const Eigen::Index n = model.state_dim;
  const StatePoint sp = StatePoint::from_z(z);
  Eigen::VectorXd g(n + 1);
  g.head(n) = evaluate(model, sp, theta);
  g[n] = geometry::determinant(model, theta, sp);
  return g;
}

Eigen::MatrixXd extended_jacobian(const ModelDef& model, const ParameterVector& theta, const StatePoint& z) {
  const Eigen::Index n = model.state_dim;
  Eigen::MatrixXd a(n + 1, n + 1);
  a.topRows(n) = differentiate(model, z, theta, Derivative::dF_dz);
  a.row(n) = differentiate(model, z, theta, Derivative::ddet_dz).transpose();
  return a;
}

// Hadamard bound on |det(dF/du)|, used to make the det residual scale-aware.
double det_scale(const ModelDef& model, const ParameterVector& theta, const StatePoint& z) {
  const Eigen::MatrixXd j = differentiate(model, z, theta, Derivative::dF_du);
  double s = 1.0;
  for (Eigen::Index i = 0; i < j.rows(); ++i) s *= j.row(i).norm();
  return std::max(1.0, s);
}

bool nonsingular(const Eigen::FullPivLU<Eigen::MatrixXd>& lu) {
  const double biggest = lu.maxPivot();
  if (!(biggest > 0.0)) return false;
  const auto& m = lu.matrixLU();
  double smallest = INFINITY;
  for (Eigen::Index i = 0; i < m.rows(); ++i) smallest = std::min(smallest, std::abs(m(i, i)));
  return smallest > 1e-14 * biggest;
}

}  // namespace

std::vector<Bracket> detect_crossings(const Branch& branch, double zero_det) {
  std::vector<Bracket> out;
  const auto& s = branch.samples;
  const std::size_t n = s.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(s[i].det) <= zero_det) {
      // A closed branch repeats its first sample at the end.
      if (branch.closed && i == n - 1 && n > 1) continue;
      out.push_back({i, i});
      continue;
    }
    if (i + 1 < n && std::abs(s[i + 1].det) > zero_det && s[i].det * s[i + 1].det < 0.0) out.push_back({i, i + 1});
  }
  return out;
}

BifurcationPoint refine_bifurcation(const ModelDef& model, const ParameterVector& theta, const StatePoint& z_guess,
                                    const DetectionSettings& settings) {
  check_inputs(model, z_guess, theta);
  const Eigen::Index n = model.state_dim;
  Eigen::VectorXd z = z_guess.z();
  auto converged = [&](const Eigen::VectorXd& g, const Eigen::VectorXd& at) {
    return g.head(n).lpNorm<Eigen::Infinity>() <= settings.tol &&
           std::abs(g[n]) <= settings.tol * det_scale(model, theta, StatePoint::from_z(at));
  };

  Eigen::VectorXd g;
  try {
    g = extended_residual(model, theta, z);
  } catch (const ModelEvaluationError& e) {
    throw RefinementError(std::string("extended system not finite at the guess: ") + e.what());
  }
  // Keep iterating past the tolerance while Newton still moves: at a regular
  // zero this costs one extra step, at a degenerate one it drives the slope
  // check towards its true value.
  for (int it = 0; it < settings.max_iterations; ++it) {
    const StatePoint sp = StatePoint::from_z(z);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(extended_jacobian(model, theta, sp));
    if (!nonsingular(lu)) {
      if (converged(g, z)) break;
      throw RefinementError("extended Jacobian is singular away from a solution");
    }
    const Eigen::VectorXd step = -lu.solve(g);
    const double merit = g.norm();
    double lambda = 1.0;
    bool accepted = false;
    Eigen::VectorXd trial;
    Eigen::VectorXd gt;
    for (int k = 0; k < 12; ++k, lambda *= 0.5) {
      trial = z + lambda * step;
      try {
        gt = extended_residual(model, theta, trial);
      } catch (const ModelEvaluationError&) {
        continue;
      }
      if (gt.norm() < merit) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (converged(g, z)) break;
      throw RefinementError("damped Newton on the extended system stalled");
    }
    z = trial;
    g = gt;
    if (converged(g, z) && (lambda * step).norm() <= 1e-12 * (1.0 + z.norm())) break;
  }
  if (!g.allFinite() || !converged(g, z)) throw RefinementError("extended system did not converge");

  BifurcationPoint bp;
  bp.z = StatePoint::from_z(z);
  try {
    bp.det_slope = geometry::directional_det_derivative(model, theta, bp.z);
  } catch (const DegenerateGeometryError&) {
    bp.det_slope = 0.0;
  }
  bp.degenerate = !(std::abs(bp.det_slope) > settings.eps_slope);
  return bp;
}

Eigen::VectorXd grad_bifurcation(const ModelDef& model, const ParameterVector& theta, const BifurcationPoint& bp) {
  const Eigen::Index n = model.state_dim;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(extended_jacobian(model, theta, bp.z));
  if (!nonsingular(lu)) throw DegenerateSensitivityError("extended Jacobian is singular at the bifurcation");
  Eigen::MatrixXd b(n + 1, model.param_dim);
  b.topRows(n) = differentiate(model, bp.z, theta, Derivative::dF_dtheta);
  b.row(n) = differentiate(model, bp.z, theta, Derivative::ddet_dtheta).transpose();
  const Eigen::MatrixXd x = lu.solve(b);
  Eigen::VectorXd dp = -x.row(n).transpose();
  if (!dp.allFinite()) throw DegenerateSensitivityError("non-finite bifurcation sensitivity");
  return dp;
}

PredictionSet predictions(const ModelDef& model, const ParameterVector& theta, const Diagram& diagram,
                          const DetectionSettings& settings) {
  PredictionSet out;
  std::vector<BifurcationPoint> found;
  std::vector<DegenerateCrossing> flags;
  const double reach = 2.0 * diagram.settings.step;

  for (std::size_t bi = 0; bi < diagram.branches.size(); ++bi) {
    const Branch& b = diagram.branches[bi];
    for (const Bracket& br : detect_crossings(b, settings.zero_det)) {
      const auto& lo = b.samples[br.first];
      const auto& hi = b.samples[br.second];
      Eigen::VectorXd guess = lo.z.z();
      if (br.first != br.second) {
        const double t = lo.det / (lo.det - hi.det);
        guess += t * (hi.z.z() - lo.z.z());
      }
      DegenerateCrossing flag{static_cast<int>(bi), br.first, br.second, StatePoint::from_z(guess), ""};
      try {
        BifurcationPoint bp = refine_bifurcation(model, theta, StatePoint::from_z(guess), settings);
        bp.branch_id = static_cast<int>(bi);
        bp.first = br.first;
        bp.second = br.second;
        flag.z = bp.z;
        if ((bp.z.z() - guess).norm() > reach + (hi.z.z() - lo.z.z()).norm()) {
          flag.reason = "refinement left the bracket";
        } else if (bp.degenerate) {
          flag.reason = "det crosses zero with vanishing slope";
        } else {
          bp.dp_dtheta = grad_bifurcation(model, theta, bp);
          found.push_back(std::move(bp));
          continue;
        }
      } catch (const RefinementError& e) {
        flag.reason = e.what();
      } catch (const DegenerateSensitivityError& e) {
        flag.reason = e.what();
      }
      flags.push_back(std::move(flag));
    }
  }

  std::stable_sort(found.begin(), found.end(), [](const auto& a, const auto& b) { return a.z.p < b.z.p; });
  auto close = [&](const StatePoint& a, const StatePoint& b) {
    return std::abs(a.p - b.p) <= settings.merge_tol && (a.u - b.u).norm() <= settings.merge_tol;
  };
  for (auto& p : found) {
    bool dup = false;
    for (const auto& q : out.points) dup = dup || close(p.z, q.z);
    if (!dup) out.points.push_back(std::move(p));
  }
  for (auto& f : flags) {
    bool dup = false;
    for (const auto& q : out.degenerate_flags) dup = dup || close(f.z, q.z);
    if (!dup) out.degenerate_flags.push_back(std::move(f));
  }
  return out;
}

}  // namespace bifinfer::detection
