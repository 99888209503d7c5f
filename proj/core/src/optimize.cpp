#include "bifinfer/optimize.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>

#include "bifinfer/continuation.hpp"
#include "bifinfer/detection.hpp"
#include "bifinfer/errors.hpp"
#include "bifinfer/models.hpp"
#include "bifinfer/rng.hpp"

namespace bifinfer::optimize {

const char* to_string(Method m) { return m == Method::gd ? "gd" : "adam"; }

const char* to_string(Termination t) {
  switch (t) {
    case Termination::converged: return "converged";
    case Termination::max_steps: return "max_steps";
    case Termination::failed_trace: return "failed_trace";
  }
  return "unknown";
}

ParameterVector init_params(int M, std::uint64_t seed, ParamTransform) {
  if (M < 1) throw UsageError("parameter dimension must be positive");
  // Stream 1 keeps these draws disjoint from the root-seeding stream 0.
  rng::CounterStream s(seed, 1);
  ParameterVector th;
  th.values.resize(M);
  for (int i = 0; i < M; ++i) th.values[i] = s.normal();
  return th;
}

OptimizerState make_state(const ParameterVector& theta) {
  OptimizerState s;
  s.theta = theta.values;
  s.m = Eigen::VectorXd::Zero(theta.values.size());
  s.v = Eigen::VectorXd::Zero(theta.values.size());
  return s;
}

OptimizerState step(const OptimizerState& state, const Eigen::VectorXd& grad, const OptimizerConfig& cfg) {
  OptimizerState s = state;
  if (grad.size() != s.theta.size() || !grad.allFinite()) {
    s.rejected = true;
    return s;
  }
  s.rejected = false;
  if (cfg.method == Method::gd) {
    s.theta -= cfg.learning_rate * grad;
    return s;
  }
  s.t += 1;
  s.m = cfg.beta1 * s.m + (1.0 - cfg.beta1) * grad;
  s.v = cfg.beta2 * s.v + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(cfg.beta1, s.t);
  const double c2 = 1.0 - std::pow(cfg.beta2, s.t);
  const Eigen::VectorXd mhat = s.m / c1;
  const Eigen::VectorXd vhat = s.v / c2;
  s.theta -= cfg.learning_rate * (mhat.array() / (vhat.array().sqrt() + cfg.epsilon)).matrix();
  return s;
}

RunRecord run_inference(const ModelDef& model, const cost::TargetSet& targets, const OptimizerConfig& opt,
                        const cost::CostConfig& cost_cfg, const TraceSettings& trace,
                        const std::optional<ParameterVector>& theta0) {
  if (!(opt.learning_rate > 0.0) || opt.max_steps < 0) throw UsageError("invalid optimizer configuration");
  const auto start = std::chrono::steady_clock::now();
  RunRecord rec;
  rec.seed = opt.seed;
  OptimizerState state = make_state(theta0 ? *theta0 : init_params(model.param_dim, opt.seed, model.transform));
  int streak = 0;

  for (int k = 0;; ++k) {
    const ParameterVector theta{state.theta};
    StepRecord sr;
    sr.theta = state.theta;
    cost::CostReport report;
    detection::PredictionSet pred;
    bool failed = false;
    try {
      const Diagram d = continuation::trace_branches(model, theta, trace);
      if (d.empty) {
        rec.note = "no branch inside the window";
        failed = true;
      } else {
        pred = detection::predictions(model, theta, d, cost_cfg.detection);
        report = cost::grad_loss(model, theta, d, pred, targets, cost_cfg);
      }
    } catch (const Error& e) {
      rec.note = e.what();
      failed = true;
    }
    if (!failed) {
      sr.L = report.L;
      sr.E = report.E;
      sr.psi = report.psi;
      sr.n_predictions = report.n_predictions;
      sr.predictions = pred.locations();
      rec.final_predictions = pred;
    }
    rec.steps.push_back(std::move(sr));
    if (failed) {
      rec.termination = Termination::failed_trace;
      break;
    }

    const bool ok = report.n_predictions == targets.size() && report.E < opt.tol_E;
    streak = ok ? streak + 1 : 0;
    if (streak >= std::max(1, opt.streak)) {
      rec.termination = Termination::converged;
      rec.converged_at = k - streak + 1;
      break;
    }
    if (k >= opt.max_steps) {
      rec.termination = Termination::max_steps;
      break;
    }
    state = step(state, report.grad, opt);
    if (state.rejected) {
      rec.note = "non-finite gradient";
      rec.termination = Termination::failed_trace;
      break;
    }
  }
  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

std::vector<RunRecord> run_batch(const ModelDef& model, const cost::TargetSet& targets, int n_runs,
                                 std::uint64_t base_seed, const OptimizerConfig& opt,
                                 const cost::CostConfig& cost_cfg, const TraceSettings& trace, int jobs) {
  if (n_runs < 1) throw UsageError("n_runs must be at least 1");
  std::vector<RunRecord> out(static_cast<std::size_t>(n_runs));
  int workers = jobs > 0 ? jobs : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  workers = std::min(workers, n_runs);
  std::atomic<int> next{0};
  auto work = [&] {
    for (int i = next++; i < n_runs; i = next++) {
      OptimizerConfig cfg = opt;
      cfg.seed = base_seed + static_cast<std::uint64_t>(i);
      out[static_cast<std::size_t>(i)] = run_inference(model, targets, cfg, cost_cfg, trace);
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  return out;
}

BatchSummary summarize(const ModelDef& model, const std::vector<RunRecord>& runs) {
  BatchSummary s;
  s.runs = static_cast<int>(runs.size());
  const bool toggle = model.name == "toggle";
  for (const auto& r : runs) {
    if (r.converged()) ++s.converged;
    s.clusters.push_back(toggle && !r.steps.empty() ? models::toggle_cluster(ParameterVector{r.final_theta()}) : 0);
  }
  s.converged_fraction = s.runs > 0 ? static_cast<double>(s.converged) / s.runs : 0.0;
  return s;
}

}  // namespace bifinfer::optimize
