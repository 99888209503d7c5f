#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bifinfer/diagram.hpp"
#include "bifinfer/model.hpp"

namespace bifinfer::detection {

struct DetectionSettings {
  double tol = 1e-10;
  int max_iterations = 25;
  double eps_slope = 1e-8;   // |d det/ds| at or below this is a degenerate crossing
  double merge_tol = 1e-6;   // points closer than this in p and in u are one prediction
  double zero_det = 1e-12;   // a sample with |det| below this is itself a crossing
};

/// Sample indices bracketing a zero of det. first == second when a sample
/// sits on the zero.
struct Bracket {
  std::size_t first = 0;
  std::size_t second = 0;
  bool operator==(const Bracket&) const = default;
};

struct BifurcationPoint {
  StatePoint z;
  double det_slope = 0.0;     // d det/ds along the unit tangent
  Eigen::VectorXd dp_dtheta;  // empty until grad_bifurcation ran
  int branch_id = -1;
  std::size_t first = 0;
  std::size_t second = 0;
  bool degenerate = false;    // slope check failed
};

struct DegenerateCrossing {
  int branch_id = -1;
  std::size_t first = 0;
  std::size_t second = 0;
  StatePoint z;  // refined point if refinement converged, bracket guess otherwise
  std::string reason;
};

struct PredictionSet {
  std::vector<BifurcationPoint> points;  // sorted by p
  std::vector<DegenerateCrossing> degenerate_flags;

  std::size_t size() const { return points.size(); }
  std::vector<double> locations() const {
    std::vector<double> p;
    for (const auto& x : points) p.push_back(x.z.p);
    return p;
  }
};

/// Every sign change of det between consecutive samples, plus one bracket per
/// sample whose det is numerically zero (neighbouring pairs are then skipped).
std::vector<Bracket> detect_crossings(const Branch& branch, double zero_det = 1e-12);

/// Damped Newton on G = [F; det(dF/du)] from z_guess. Throws RefinementError
/// if it does not converge; sets `degenerate` when |d det/ds| <= eps_slope.
BifurcationPoint refine_bifurcation(const ModelDef& model, const ParameterVector& theta, const StatePoint& z_guess,
                                    const DetectionSettings& settings = {});

/// dp/dtheta = -p_hat . (dG/dz)^{-1} dG/dtheta. Throws DegenerateSensitivityError
/// when dG/dz is singular.
Eigen::VectorXd grad_bifurcation(const ModelDef& model, const ParameterVector& theta, const BifurcationPoint& bp);

/// Detect, refine, attach sensitivities and merge coincident points.
PredictionSet predictions(const ModelDef& model, const ParameterVector& theta, const Diagram& diagram,
                          const DetectionSettings& settings = {});

}  // namespace bifinfer::detection
