#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "bifinfer/detection.hpp"
#include "bifinfer/diagram.hpp"
#include "bifinfer/model.hpp"

namespace bifinfer::cost {

/// Target control-condition values D, strictly increasing inside the window.
struct TargetSet {
  std::vector<double> values;

  /// Sorts and validates; throws UsageError when empty, repeated, non-finite
  /// or outside `window`.
  static TargetSet make(std::vector<double> values, Interval window);
  std::size_t size() const { return values.size(); }
};

struct CostConfig {
  double lambda = 1.0;  // weight of the unsupervised term
  detection::DetectionSettings detection;
};

struct CostReport {
  double L = 0.0;
  double E = 0.0;             // NaN when there are no predictions
  double psi = 0.0;
  std::size_t n_predictions = 0;
  std::size_t n_targets = 0;
  double unsupervised = 0.0;  // coefficient * lambda * log psi
  double coefficient = 0.0;   // |P| - |D|, or -|D| when |P| = 0
  Eigen::VectorXd grad;       // empty for value-only reports
  Eigen::VectorXd grad_unsupervised;
  Eigen::VectorXd grad_supervised;
  Eigen::VectorXd grad_psi;
};

/// Mean over targets of the geometric mean over predictions of |p - p'|.
/// Returns nullopt when there are no predictions.
std::optional<double> supervised_error(std::span<const double> predictions, std::span<const double> targets);
std::optional<double> supervised_error(const detection::PredictionSet& p, const TargetSet& d);

/// L = (|P| - |D|) lambda log psi + E, or -|D| lambda log psi without predictions.
/// Throws UndefinedMeasureError for an empty diagram.
CostReport loss(const ModelDef& model, const ParameterVector& theta, const Diagram& diagram,
                const detection::PredictionSet& p, const TargetSet& d, const CostConfig& cfg = {});

/// Same value plus dL/dtheta in raw coordinates.
CostReport grad_loss(const ModelDef& model, const ParameterVector& theta, const Diagram& diagram,
                     const detection::PredictionSet& p, const TargetSet& d, const CostConfig& cfg = {});

}  // namespace bifinfer::cost
