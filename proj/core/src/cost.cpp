#include "bifinfer/cost.hpp"

#include <algorithm>
#include <cmath>

#include "bifinfer/errors.hpp"
#include "bifinfer/geometry.hpp"

namespace bifinfer::cost {

namespace {

constexpr double kExactMatch = 1e-14;

CostReport value_only(const Diagram& diagram, const detection::PredictionSet& p, const TargetSet& d,
                      const CostConfig& cfg) {
  if (diagram.empty || diagram.branches.empty()) {
    throw UndefinedMeasureError("no branch was traced for this theta; re-seed the parameters");
  }
  if (d.size() == 0) throw UsageError("target set is empty");
  if (cfg.lambda < 0.0) throw UsageError("lambda must be non-negative");
  CostReport r;
  r.n_predictions = p.size();
  r.n_targets = d.size();
  r.psi = geometry::total_measure(diagram);
  const auto e = supervised_error(p, d);
  r.E = e ? *e : NAN;
  r.coefficient = r.n_predictions == 0 ? -static_cast<double>(r.n_targets)
                                       : static_cast<double>(r.n_predictions) - static_cast<double>(r.n_targets);
  r.unsupervised = r.coefficient == 0.0 ? 0.0 : r.coefficient * cfg.lambda * std::log(r.psi);
  r.L = r.unsupervised + (e ? *e : 0.0);
  return r;
}

}  // namespace

TargetSet TargetSet::make(std::vector<double> values, Interval window) {
  if (values.empty()) throw UsageError("target set must not be empty");
  std::sort(values.begin(), values.end());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) throw UsageError("targets must be finite");
    if (!window.contains(values[i])) throw UsageError("target outside the p-window");
    if (i > 0 && !(values[i] > values[i - 1])) throw UsageError("targets must be distinct");
  }
  return TargetSet{std::move(values)};
}

std::optional<double> supervised_error(std::span<const double> predictions, std::span<const double> targets) {
  if (predictions.empty()) return std::nullopt;
  const double inv = 1.0 / static_cast<double>(predictions.size());
  double sum = 0.0;
  for (double t : targets) {
    double prod = 1.0;
    for (double p : predictions) prod *= std::pow(std::abs(p - t), inv);
    sum += prod;
  }
  return sum / static_cast<double>(targets.size());
}

std::optional<double> supervised_error(const detection::PredictionSet& p, const TargetSet& d) {
  const auto loc = p.locations();
  return supervised_error(loc, d.values);
}

CostReport loss(const ModelDef&, const ParameterVector&, const Diagram& diagram, const detection::PredictionSet& p,
                const TargetSet& d, const CostConfig& cfg) {
  return value_only(diagram, p, d, cfg);
}

CostReport grad_loss(const ModelDef& model, const ParameterVector& theta, const Diagram& diagram,
                     const detection::PredictionSet& p, const TargetSet& d, const CostConfig& cfg) {
  CostReport r = value_only(diagram, p, d, cfg);
  const Eigen::Index m = model.param_dim;
  r.grad_unsupervised = Eigen::VectorXd::Zero(m);
  r.grad_supervised = Eigen::VectorXd::Zero(m);

  if (r.coefficient != 0.0 && cfg.lambda != 0.0) {
    const auto g = geometry::grad_total_measure(model, theta, diagram);
    r.grad_psi = g.grad;
    r.grad_unsupervised = r.coefficient * cfg.lambda * g.grad / g.value;
  }

  if (!p.points.empty()) {
    for (const auto& bp : p.points) {
      if (bp.dp_dtheta.size() != m) throw DegenerateSensitivityError("prediction without sensitivity");
    }
    const double inv = 1.0 / static_cast<double>(p.size());
    for (double t : d.values) {
      double prod = 1.0;
      for (const auto& bp : p.points) prod *= std::pow(std::abs(bp.z.p - t), inv);
      Eigen::VectorXd inner = Eigen::VectorXd::Zero(m);
      for (const auto& bp : p.points) {
        const double diff = bp.z.p - t;
        if (std::abs(diff) < kExactMatch) continue;
        inner += bp.dp_dtheta / diff;  // sign(diff) / |diff|
      }
      r.grad_supervised += prod * inv * inner;
    }
    r.grad_supervised /= static_cast<double>(d.size());
  }
  r.grad = r.grad_unsupervised + r.grad_supervised;
  return r;
}

}  // namespace bifinfer::cost
