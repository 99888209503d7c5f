#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "bifinfer/continuation.hpp"
#include "bifinfer/cost.hpp"
#include "bifinfer/detection.hpp"
#include "bifinfer/errors.hpp"
#include "bifinfer/geometry.hpp"
#include "bifinfer/io.hpp"
#include "bifinfer/models.hpp"
#include "bifinfer/optimize.hpp"
#include "svg.hpp"

namespace bifinfer::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::vector<double> parse_list(const std::string& text, const char* what) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto pos = text.find(',', start);
    const std::string item = text.substr(start, pos == std::string::npos ? std::string::npos : pos - start);
    double x = 0.0;
    const auto r = std::from_chars(item.data(), item.data() + item.size(), x);
    if (item.empty() || r.ec != std::errc() || r.ptr != item.data() + item.size() || !std::isfinite(x)) {
      throw UsageError(std::string("cannot parse ") + what + ": '" + text + "'");
    }
    out.push_back(x);
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& text, const char* what) {
  std::vector<int> out;
  for (double x : parse_list(text, what)) {
    if (x != std::floor(x) || x < 1) throw UsageError(std::string(what) + " must be positive integers");
    out.push_back(static_cast<int>(x));
  }
  return out;
}

Interval parse_range(const std::string& text) {
  // The separator is the first ':' after the first character, so "-3:3" works.
  const auto pos = text.find(':', 1);
  if (pos == std::string::npos) throw UsageError("p-range must look like a:b, got '" + text + "'");
  const auto lo = parse_list(text.substr(0, pos), "p-range");
  const auto hi = parse_list(text.substr(pos + 1), "p-range");
  if (lo.size() != 1 || hi.size() != 1 || !(hi[0] > lo[0])) throw UsageError("p-range needs a < b, got '" + text + "'");
  return {lo[0], hi[0]};
}

std::string iso_timestamp() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << text;
}

ordered_json to_json(const std::vector<double>& v) {
  ordered_json a = ordered_json::array();
  for (double x : v) a.push_back(x);
  return a;
}

ordered_json to_json(const Eigen::VectorXd& v) {
  ordered_json a = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

// Options shared by the model-driven subcommands.
struct Common {
  std::string model;
  int states = 4;
  int params = 4;
  std::string p_range;
  double step = 0.02;
  int max_samples = 10000;
  int interior_seeds = 5;
  int root_seeds = 16;
  std::string out;

  void add(CLI::App* app) {
    app->add_option("--model", model, "Built-in model name")->required();
    app->add_option("--states", states, "State dimension for scaling-chain")->check(CLI::PositiveNumber);
    app->add_option("--params", params, "Parameter dimension for scaling-chain")->check(CLI::PositiveNumber);
    app->add_option("--p-range", p_range, "Control window a:b (defaults to the model's window)");
    app->add_option("--step", step, "Continuation step size")->check(CLI::PositiveNumber);
    app->add_option("--max-samples", max_samples, "Samples per branch before truncation")->check(CLI::PositiveNumber);
    app->add_option("--interior-seeds", interior_seeds, "Interior p values used for root seeding");
    app->add_option("--root-seeds", root_seeds, "Latin-hypercube seeds per p value")->check(CLI::PositiveNumber);
    app->add_option("--out", out, "Output directory (default $BIFINFER_OUT_DIR or .)");
  }

  ModelDef make_model() const {
    ModelDef m;
    try {
      m = models::by_name(model, states, params);
    } catch (const UsageError&) {
      std::string known;
      for (const auto& n : models::names()) known += (known.empty() ? "" : ", ") + n;
      throw UsageError("unknown model '" + model + "' (known: " + known + ")");
    }
    if (!p_range.empty()) m.p_window = parse_range(p_range);
    return m;
  }

  TraceSettings trace() const {
    TraceSettings s;
    s.step = step;
    s.max_samples = max_samples;
    s.interior_seeds = interior_seeds;
    s.root_seeds = root_seeds;
    return s;
  }

  fs::path out_dir() const {
    std::string dir = out;
    if (dir.empty()) {
      const char* env = std::getenv("BIFINFER_OUT_DIR");
      dir = env && *env ? env : ".";
    }
    fs::create_directories(dir);
    return dir;
  }

  ordered_json manifest(const std::string& command, const ModelDef& m) const {
    ordered_json j;
    j["command"] = command;
    j["tool_version"] = kVersion;
    j["timestamp"] = iso_timestamp();
    j["model"] = m.name;
    if (m.name == "scaling-chain") {
      j["states"] = states;
      j["params"] = params;
    }
    j["p_window"] = {m.p_window.lo, m.p_window.hi};
    const TraceSettings s = trace();
    j["trace"] = {{"step", s.step},
                  {"max_samples", s.max_samples},
                  {"corrector_tol", s.corrector_tol},
                  {"max_corrector_iterations", s.max_corrector_iterations},
                  {"interior_seeds", s.interior_seeds},
                  {"root_seeds", s.root_seeds},
                  {"root_separation", s.root_separation},
                  {"max_backoff", s.max_backoff},
                  {"eps_den", s.eps_den},
                  {"seed", s.seed}};
    return j;
  }
};

ParameterVector parse_theta(const std::string& text, const ModelDef& m) {
  const auto v = parse_list(text, "theta");
  if (static_cast<int>(v.size()) != m.param_dim) {
    throw UsageError("model '" + m.name + "' takes " + std::to_string(m.param_dim) + " parameters, got " +
                     std::to_string(v.size()));
  }
  ParameterVector th;
  th.values = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  return th;
}

ordered_json detection_json(const detection::DetectionSettings& d) {
  return {{"tol", d.tol}, {"eps_slope", d.eps_slope}, {"merge_tol", d.merge_tol}, {"zero_det", d.zero_det}};
}

// ---------------------------------------------------------------- trace

int cmd_trace(const Common& c, const std::string& theta_text, std::ostream& out, std::ostream& err) {
  const ModelDef m = c.make_model();
  const ParameterVector theta = parse_theta(theta_text, m);
  const fs::path dir = c.out_dir();
  const Diagram d = continuation::trace_branches(m, theta, m.p_window, c.trace());
  const detection::DetectionSettings det;
  const auto pred = detection::predictions(m, theta, d, det);

  ordered_json man = c.manifest("trace", m);
  man["theta"] = to_json(theta.values);
  man["detection"] = detection_json(det);
  man["outputs"] = {"diagram.csv", "predictions.json"};
  write_file(dir / "diagram.csv", io::diagram_csv(d));
  write_file(dir / "predictions.json", io::predictions_json(pred));
  write_file(dir / "manifest.json", man.dump(2) + "\n");

  if (d.empty) {
    err << "error: no steady-state branch inside the window\n";
    return kSolverFailure;
  }
  out << d.branches.size() << " branch(es), " << d.sample_count() << " samples"
      << (d.truncated ? " (some truncated)" : "") << "\n";
  for (const auto& p : pred.points) out << "bifurcation at p = " << io::format_double(p.z.p) << "\n";
  for (const auto& f : pred.degenerate_flags) {
    out << "degenerate crossing near p = " << io::format_double(f.z.p) << ": " << f.reason << "\n";
  }
  return kOk;
}

// ---------------------------------------------------------------- infer

struct InferOptions {
  std::string targets;
  int runs = 1;
  std::string optimizer = "gd";
  double lr = 0.01;
  int max_steps = 2000;
  std::uint64_t seed = 0;
  int jobs = 0;
  double tol_e = 1e-2;
  double lambda = 1.0;
  std::string theta0;
};

int cmd_infer(const Common& c, const InferOptions& o, std::ostream& out) {
  const ModelDef m = c.make_model();
  const auto targets = cost::TargetSet::make(parse_list(o.targets, "targets"), m.p_window);
  optimize::OptimizerConfig opt;
  if (o.optimizer == "gd") {
    opt.method = optimize::Method::gd;
  } else if (o.optimizer == "adam") {
    opt.method = optimize::Method::adam;
  } else {
    throw UsageError("optimizer must be gd or adam");
  }
  if (!(o.lr > 0.0)) throw UsageError("learning rate must be positive");
  if (o.runs < 1) throw UsageError("runs must be at least 1");
  opt.learning_rate = o.lr;
  opt.max_steps = o.max_steps;
  opt.tol_E = o.tol_e;
  opt.seed = o.seed;
  cost::CostConfig cc;
  cc.lambda = o.lambda;
  if (cc.lambda < 0.0) throw UsageError("lambda must be non-negative");
  const TraceSettings ts = c.trace();
  const fs::path dir = c.out_dir();

  std::vector<optimize::RunRecord> runs;
  if (!o.theta0.empty()) {
    if (o.runs != 1) throw UsageError("--theta0 fixes the start, so --runs must be 1");
    runs.push_back(optimize::run_inference(m, targets, opt, cc, ts, parse_theta(o.theta0, m)));
  } else {
    runs = optimize::run_batch(m, targets, o.runs, o.seed, opt, cc, ts, o.jobs);
  }
  const auto summary = optimize::summarize(m, runs);

  ordered_json man = c.manifest("infer", m);
  man["targets"] = to_json(targets.values);
  man["optimizer"] = {{"method", optimize::to_string(opt.method)},
                      {"learning_rate", opt.learning_rate},
                      {"max_steps", opt.max_steps},
                      {"beta1", opt.beta1},
                      {"beta2", opt.beta2},
                      {"epsilon", opt.epsilon},
                      {"tol_E", opt.tol_E},
                      {"streak", opt.streak}};
  man["cost"] = {{"lambda", cc.lambda}, {"detection", detection_json(cc.detection)}};
  man["runs"] = o.runs;
  man["base_seed"] = o.seed;
  if (!o.theta0.empty()) man["theta0"] = to_json(parse_theta(o.theta0, m).values);
  ordered_json wall = ordered_json::array();
  for (const auto& r : runs) wall.push_back({{"seed", r.seed}, {"wall_seconds", r.wall_seconds}});
  man["wall_time"] = std::move(wall);
  man["outputs"] = {"runs.json", "summary.csv"};
  write_file(dir / "runs.json", io::runs_json(runs));
  write_file(dir / "summary.csv", io::summary_csv(runs, summary));
  write_file(dir / "manifest.json", man.dump(2) + "\n");

  out << summary.converged << "/" << summary.runs << " runs converged\n";
  return kOk;
}

// ---------------------------------------------------------------- gradcheck

struct Pipeline {
  double psi = NAN;
  double L = NAN;
  std::vector<double> p;
  std::vector<Eigen::VectorXd> dp;
  Eigen::VectorXd grad_psi;
  Eigen::VectorXd grad_L;
};

Pipeline evaluate_pipeline(const ModelDef& m, const ParameterVector& theta, const cost::TargetSet& targets,
                           const TraceSettings& ts, bool with_gradient) {
  const Diagram d = continuation::trace_branches(m, theta, m.p_window, ts);
  if (d.empty) throw UndefinedMeasureError("empty diagram");
  const auto pred = detection::predictions(m, theta, d);
  Pipeline r;
  for (const auto& x : pred.points) {
    r.p.push_back(x.z.p);
    r.dp.push_back(x.dp_dtheta);
  }
  if (with_gradient) {
    const auto g = geometry::grad_total_measure(m, theta, d);
    r.psi = g.value;
    r.grad_psi = g.grad;
    const auto rep = cost::grad_loss(m, theta, d, pred, targets);
    r.L = rep.L;
    r.grad_L = rep.grad;
  } else {
    r.psi = geometry::total_measure(d);
    r.L = cost::loss(m, theta, d, pred, targets).L;
  }
  return r;
}

bool within_relative(double analytic, double fd, double rel) {
  return std::abs(analytic - fd) <= rel * std::max(std::abs(analytic), std::abs(fd)) + 1e-10;
}

int cmd_gradcheck(const Common& c, const std::string& theta_text, const std::string& targets_text, double h,
                  std::ostream& out) {
  const ModelDef m = c.make_model();
  const ParameterVector theta = parse_theta(theta_text, m);
  const auto targets = cost::TargetSet::make(parse_list(targets_text, "targets"), m.p_window);
  if (!(h > 0.0)) throw UsageError("fd-step must be positive");
  const TraceSettings ts = c.trace();
  const fs::path dir = c.out_dir();

  const Pipeline base = evaluate_pipeline(m, theta, targets, ts, true);
  ordered_json comps = ordered_json::array();
  bool all_pass = true;
  bool untestable = false;
  for (int j = 0; j < m.param_dim; ++j) {
    ParameterVector tp = theta, tm = theta;
    tp.values[j] += h;
    tm.values[j] -= h;
    const Pipeline a = evaluate_pipeline(m, tp, targets, ts, false);
    const Pipeline b = evaluate_pipeline(m, tm, targets, ts, false);
    ordered_json x;
    x["component"] = j;
    x["n_predictions"] = {b.p.size(), base.p.size(), a.p.size()};
    if (a.p.size() != base.p.size() || b.p.size() != base.p.size()) {
      x["testable"] = false;
      x["reason"] = "number of predictions changes inside the finite-difference bracket";
      untestable = true;
      comps.push_back(std::move(x));
      continue;
    }
    x["testable"] = true;
    const double fd_psi = (a.psi - b.psi) / (2 * h);
    const double fd_L = (a.L - b.L) / (2 * h);
    const bool psi_ok = within_relative(base.grad_psi[j], fd_psi, 0.02);
    const bool L_ok = within_relative(base.grad_L[j], fd_L, 0.01);
    x["psi"] = {{"analytic", base.grad_psi[j]}, {"fd", fd_psi}, {"tolerance", "2% relative"}, {"pass", psi_ok}};
    x["loss"] = {{"analytic", base.grad_L[j]}, {"fd", fd_L}, {"tolerance", "1% relative"}, {"pass", L_ok}};
    ordered_json dps = ordered_json::array();
    bool dp_ok = true;
    for (std::size_t k = 0; k < base.p.size(); ++k) {
      const double fd = (a.p[k] - b.p[k]) / (2 * h);
      const bool ok = std::abs(base.dp[k][j] - fd) <= 1e-4;
      dp_ok = dp_ok && ok;
      dps.push_back({{"p", base.p[k]}, {"analytic", base.dp[k][j]}, {"fd", fd}, {"pass", ok}});
    }
    x["dp_dtheta"] = std::move(dps);
    all_pass = all_pass && psi_ok && L_ok && dp_ok;
    comps.push_back(std::move(x));
  }

  ordered_json report;
  report["model"] = m.name;
  report["theta"] = to_json(theta.values);
  report["targets"] = to_json(targets.values);
  report["fd_step"] = h;
  report["psi"] = base.psi;
  report["loss"] = base.L;
  report["predictions"] = to_json(base.p);
  report["components"] = std::move(comps);
  report["untestable"] = untestable;
  report["pass"] = all_pass && !untestable;
  ordered_json man = c.manifest("gradcheck", m);
  man["theta"] = to_json(theta.values);
  man["targets"] = to_json(targets.values);
  man["fd_step"] = h;
  man["outputs"] = {"gradcheck.json"};
  write_file(dir / "gradcheck.json", report.dump(2) + "\n");
  write_file(dir / "manifest.json", man.dump(2) + "\n");

  if (untestable) {
    out << "gradcheck: some components are untestable (|P| changes inside the bracket)\n";
    return kUntestable;
  }
  out << "gradcheck: " << (all_pass ? "pass" : "FAIL") << "\n";
  return all_pass ? kOk : kGradcheckFailed;
}

// ---------------------------------------------------------------- bench

int cmd_bench(const std::string& states_text, int params, int repeats, const std::string& out_text,
              std::ostream& out) {
  const auto states = parse_int_list(states_text, "states");
  if (params < 1 || repeats < 1) throw UsageError("params and repeats must be positive");
  std::string dir_text = out_text;
  if (dir_text.empty()) {
    const char* env = std::getenv("BIFINFER_OUT_DIR");
    dir_text = env && *env ? env : ".";
  }
  const fs::path dir = dir_text;
  fs::create_directories(dir);

  std::ostringstream csv;
  csv << "N,median_seconds\n";
  std::vector<double> xs, ys;
  for (int n : states) {
    const ModelDef m = models::scaling_chain(n, params);
    ParameterVector theta;
    theta.values = Eigen::VectorXd::Constant(params, 0.5);
    const Diagram d = continuation::trace_branches(m, theta);
    std::vector<double> times;
    (void)geometry::grad_total_measure(m, theta, d);  // warm caches and allocator
    for (int r = 0; r < repeats; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      const auto g = geometry::grad_total_measure(m, theta, d);
      const auto t1 = std::chrono::steady_clock::now();
      if (!std::isfinite(g.value)) throw Error("non-finite measure in benchmark");
      times.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    std::sort(times.begin(), times.end());
    const double median = times.size() % 2 ? times[times.size() / 2]
                                           : 0.5 * (times[times.size() / 2 - 1] + times[times.size() / 2]);
    csv << n << ',' << io::format_double(median) << '\n';
    xs.push_back(std::log(static_cast<double>(n)));
    ys.push_back(std::log(median));
  }
  write_file(dir / "scaling.csv", csv.str());
  ordered_json man;
  man["command"] = "bench";
  man["tool_version"] = kVersion;
  man["timestamp"] = iso_timestamp();
  man["states"] = states;
  man["params"] = params;
  man["repeats"] = repeats;
  man["outputs"] = {"scaling.csv"};
  write_file(dir / "manifest.json", man.dump(2) + "\n");

  std::set<double> distinct(xs.begin(), xs.end());
  if (distinct.size() < 2) {
    out << "log-log slope: undefined (needs at least two distinct N)\n";
    return kOk;
  }
  const double n = static_cast<double>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  out << "log-log slope: " << io::format_double(slope) << "\n";
  return kOk;
}

// ---------------------------------------------------------------- render

int cmd_render(const std::string& diagram_path, const std::string& targets_text, const std::string& out_path,
               std::ostream& out) {
  std::ifstream f(diagram_path, std::ios::binary);
  if (!f) throw DataError("cannot read " + diagram_path);
  std::stringstream buf;
  buf << f.rdbuf();
  const auto d = io::parse_diagram_csv(buf.str());
  const auto targets = targets_text.empty() ? std::vector<double>{} : parse_list(targets_text, "targets");
  fs::path target = out_path;
  if (target.empty()) {
    const char* env = std::getenv("BIFINFER_OUT_DIR");
    target = fs::path(env && *env ? env : ".") / "fig.svg";
  }
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  write_file(target, render_svg(d, targets));
  out << "wrote " << target.string() << " with " << count_markers(d) << " bifurcation marker(s)\n";
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Infer ODE parameters from target bifurcation locations"};
  app.set_version_flag("--version", kVersion);
  app.set_config("--config", "", "TOML/INI file with one key per flag; subcommand keys go in a [section]");
  app.require_subcommand(1);

  Common trace_c, infer_c, grad_c;
  std::string trace_theta, grad_theta, grad_targets;
  double fd_step = 1e-4;
  InferOptions infer_o;
  std::string bench_states = "2,4,8,16,32", bench_out;
  int bench_params = 4, bench_repeats = 5;
  std::string render_diagram, render_targets, render_out;

  auto* trace = app.add_subcommand("trace", "Trace the bifurcation diagram for one theta");
  trace_c.add(trace);
  trace->add_option("--theta", trace_theta, "Comma-separated raw parameters")->required();

  auto* infer = app.add_subcommand("infer", "Fit theta so bifurcations land on the targets");
  infer_c.add(infer);
  infer->add_option("--targets", infer_o.targets, "Comma-separated target p values")->required();
  infer->add_option("--runs", infer_o.runs, "Number of seeded runs");
  infer->add_option("--optimizer", infer_o.optimizer, "gd or adam");
  infer->add_option("--lr", infer_o.lr, "Learning rate");
  infer->add_option("--max-steps", infer_o.max_steps, "Optimizer steps per run");
  infer->add_option("--seed", infer_o.seed, "Base seed; run i uses seed + i");
  infer->add_option("--jobs", infer_o.jobs, "Worker threads (0 = all cores)");
  infer->add_option("--tol-e", infer_o.tol_e, "Supervised error threshold for convergence");
  infer->add_option("--lambda", infer_o.lambda, "Weight of the unsupervised term");
  infer->add_option("--theta0", infer_o.theta0, "Fixed starting theta instead of a seeded draw");

  auto* grad = app.add_subcommand("gradcheck", "Compare analytic gradients against re-traced finite differences");
  grad_c.add(grad);
  grad->add_option("--theta", grad_theta, "Comma-separated raw parameters")->required();
  grad->add_option("--targets", grad_targets, "Comma-separated target p values")->required();
  grad->add_option("--fd-step", fd_step, "Central difference step");

  auto* bench = app.add_subcommand("bench", "Time gradient evaluation on the scaling chain");
  bench->add_option("--states", bench_states, "Comma-separated state dimensions");
  bench->add_option("--params", bench_params, "Parameter dimension");
  bench->add_option("--repeats", bench_repeats, "Timed repetitions per N");
  bench->add_option("--out", bench_out, "Output directory");

  auto* render = app.add_subcommand("render", "Draw a diagram CSV as SVG");
  render->add_option("--diagram", render_diagram, "diagram.csv written by trace")->required();
  render->add_option("--targets", render_targets, "Comma-separated target p values");
  render->add_option("--out", render_out, "Output SVG path");

  std::vector<std::string> args;
  for (int i = argc - 1; i > 0; --i) args.emplace_back(argv[i]);
  try {
    app.parse(std::move(args));
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  }

  try {
    if (*trace) return cmd_trace(trace_c, trace_theta, out, err);
    if (*infer) return cmd_infer(infer_c, infer_o, out);
    if (*grad) return cmd_gradcheck(grad_c, grad_theta, grad_targets, fd_step, out);
    if (*bench) return cmd_bench(bench_states, bench_params, bench_repeats, bench_out, out);
    if (*render) return cmd_render(render_diagram, render_targets, render_out, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kSolverFailure;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kSolverFailure;
  }
  return kUsage;
}

}  // namespace bifinfer::cli
