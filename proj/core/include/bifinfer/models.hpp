#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bifinfer/model.hpp"

namespace bifinfer::models {

/// F = p + theta1*u + theta2*u^3. Two folds for theta1 > 0 > theta2.
ModelDef saddle_node();

/// F = theta1 + p*u + theta2*u^3. Imperfect pitchfork for theta1 != 0.
ModelDef pitchfork();

/// Two-species toggle switch with Hill cooperativity 2:
///   du1/dt = (a1 + (p u2)^2) / (1 + (p u2)^2) - mu1 u1
///   du2/dt = (a2 + (k u1)^2) / (1 + (k u1)^2) - mu2 u2
/// theta = log10(a1, a2, mu1, mu2, k).
ModelDef toggle_switch();

/// Chain of N states, M parameters:
///   du1/dt = sin^2 p - (theta1 sin^2 p + 1) u1
///   du_n/dt = u_{n-1} - (mu_n^2 + 1) u_n,   n = 2..N
/// mu_n is the plain sum of the contiguous slice scaling_chain_slice(N, M, n)
/// of theta_2..theta_M.
ModelDef scaling_chain(int states, int params);

/// Half-open index range [first, last) into theta used by mu_n (n is 1-based,
/// n >= 2). Slices tile theta_2..theta_M as evenly as possible; when there are
/// fewer parameters than downstream states, neighbouring states share one.
std::pair<int, int> scaling_chain_slice(int states, int params, int n);

/// F = (u2, p + theta1*u1 + theta2*u1^3 + 2*u1*u2). At theta = (0, -1/3) the
/// steady-state curve (u1, 0, u1^3/3) carries a Jordan block with the double
/// eigenvalue u1, so two eigenvalues cross zero together at the origin and
/// det(dF/du) = u1^2 touches zero without changing sign.
ModelDef degenerate_pair();

/// F = p - u with one parameter that the rhs never reads.
ModelDef linear();

/// Look up a built-in by CLI name. `states`/`params` apply to scaling-chain.
ModelDef by_name(std::string_view name, int states = 4, int params = 4);
std::vector<std::string> names();

/// Right-hand side of the toggle-switch steady-state relation
///   k/mu1 = (1 + (p u'/mu2)^2) sqrt((a2 - u')/(u' - 1)) / (a1 + (p u'/mu2)^2),   u' = u2 mu2.
/// Throws OracleDomainError unless u' lies strictly between 1 and a2.
double toggle_steady_relation(double u2, double p, const ParameterVector& theta);

/// Cluster id for toggle-switch parameters: 1 for mutual activation
/// (a1 < 1, a2 < 1), 2 for mutual inhibition (a1 > 1, a2 > 1), 0 otherwise.
int toggle_cluster(const ParameterVector& theta);

}  // namespace bifinfer::models
