#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bifinfer/cost.hpp"
#include "bifinfer/diagram.hpp"
#include "bifinfer/model.hpp"

namespace bifinfer::optimize {

enum class Method { gd, adam };
enum class Termination { converged, max_steps, failed_trace };

const char* to_string(Method m);
const char* to_string(Termination t);

struct OptimizerConfig {
  Method method = Method::gd;
  double learning_rate = 0.01;
  int max_steps = 2000;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double tol_E = 1e-2;
  int streak = 3;  // consecutive converged evaluations required
  std::uint64_t seed = 0;
};

struct OptimizerState {
  Eigen::VectorXd theta;
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  int t = 0;
  bool rejected = false;  // last step had a non-finite gradient
};

/// Standard-normal raw coordinates from the counter-based stream keyed by seed.
ParameterVector init_params(int M, std::uint64_t seed, ParamTransform transform = ParamTransform::identity);

OptimizerState make_state(const ParameterVector& theta);

/// One gd or bias-corrected adam update. A non-finite gradient leaves theta
/// untouched and sets `rejected`.
OptimizerState step(const OptimizerState& state, const Eigen::VectorXd& grad, const OptimizerConfig& cfg);

struct StepRecord {
  Eigen::VectorXd theta;
  double L = NAN;
  double E = NAN;
  double psi = NAN;
  std::size_t n_predictions = 0;
  std::vector<double> predictions;
};

struct RunRecord {
  std::uint64_t seed = 0;
  std::vector<StepRecord> steps;
  Termination termination = Termination::max_steps;
  int converged_at = -1;  // first evaluation of the final converged streak
  double wall_seconds = 0.0;
  std::string note;       // why a run failed, empty otherwise
  detection::PredictionSet final_predictions;

  const Eigen::VectorXd& final_theta() const { return steps.back().theta; }
  bool converged() const { return termination == Termination::converged; }
};

/// trace -> predictions -> grad_loss -> step until the streak criterion holds
/// or max_steps updates were taken. Starts from `theta0` or init_params(seed).
RunRecord run_inference(const ModelDef& model, const cost::TargetSet& targets, const OptimizerConfig& opt,
                        const cost::CostConfig& cost_cfg, const TraceSettings& trace,
                        const std::optional<ParameterVector>& theta0 = std::nullopt);

/// n_runs independent runs with seeds base_seed .. base_seed + n_runs - 1, on up
/// to `jobs` threads (0 = hardware concurrency). Records are ordered by seed.
std::vector<RunRecord> run_batch(const ModelDef& model, const cost::TargetSet& targets, int n_runs,
                                 std::uint64_t base_seed, const OptimizerConfig& opt,
                                 const cost::CostConfig& cost_cfg, const TraceSettings& trace, int jobs = 0);

struct BatchSummary {
  int runs = 0;
  int converged = 0;
  double converged_fraction = 0.0;
  std::vector<int> clusters;  // per run; 0 when not applicable
};

/// Convergence fraction and, for the toggle switch, cluster ids of final theta.
BatchSummary summarize(const ModelDef& model, const std::vector<RunRecord>& runs);

}  // namespace bifinfer::optimize
