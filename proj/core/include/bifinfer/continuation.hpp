#pragma once

#include <vector>

#include <Eigen/Dense>

#include "bifinfer/diagram.hpp"
#include "bifinfer/model.hpp"

namespace bifinfer::continuation {

/// Distinct roots of F(., p0) = 0 inside the state box, found by damped
/// Newton on the deflated residual F(u) * prod_r (1/|u - r|^2 + 1) from
/// Latin-hypercube seeds. Seeds that fail or hit a singular step are dropped.
std::vector<Eigen::VectorXd> find_roots_deflated(const ModelDef& model, const ParameterVector& theta, double p0,
                                                 const TraceSettings& settings = {});

/// Damped Newton on the bordered system [F(z); (z - guess).direction] = 0.
/// Throws CorrectorError on non-convergence and SingularityError when the
/// bordered Jacobian is singular.
StatePoint newton_correct(const ModelDef& model, const ParameterVector& theta, const StatePoint& guess,
                          const Eigen::VectorXd& direction, double tol = 1e-10, int max_iterations = 25);

/// Trace every branch of F = 0 crossing the model's p-window (or `window`
/// if given) by pseudo-arclength continuation, annotating each sample with
/// det, tangent, chord length and measure.
Diagram trace_branches(const ModelDef& model, const ParameterVector& theta, const TraceSettings& settings = {});
Diagram trace_branches(const ModelDef& model, const ParameterVector& theta, Interval window,
                       const TraceSettings& settings);

/// Shortest distance from z to the polyline of a branch.
double distance_to_branch(const Eigen::VectorXd& z, const Branch& branch);

}  // namespace bifinfer::continuation
