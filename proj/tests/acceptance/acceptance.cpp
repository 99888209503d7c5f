// Acceptance suite. `acceptance` runs every criterion; `acceptance 3 7` runs a
// subset. One PASS/FAIL line per criterion; exit status 1 if any failed.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "bifinfer/io.hpp"
#include "bifinfer/optimize.hpp"
#include "cli.hpp"
#include "support.hpp"

using namespace bifinfer;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += "failed: " + what;
    }
  }
  void note(const std::string& what) {
    if (!detail.empty()) detail += "; ";
    detail += what;
  }
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

struct Criterion {
  int id;
  const char* title;
  double limit_seconds;
  std::function<void(Outcome&)> body;
};

// 1. Closed-form fold placement.
void fold_placement(Outcome& o) {
  {
    const auto m = models::saddle_node();
    const ParameterVector th{2.5, -1};
    const auto P = detection::predictions(m, th, continuation::trace_branches(m, th));
    o.require(P.size() == 2, "saddle-node |P| = 2");
    if (P.size() == 2) {
      o.require(std::abs(P.points[0].z.p + 1.521452) < 1e-4 && std::abs(P.points[1].z.p - 1.521452) < 1e-4,
                "saddle-node p = -+1.521452");
      o.note("saddle-node p = " + fmt("%.7f", P.points[0].z.p) + ", " + fmt("%.7f", P.points[1].z.p));
    }
  }
  {
    const auto m = models::pitchfork();
    const ParameterVector th{0.5, -1};
    const auto P = detection::predictions(m, th, continuation::trace_branches(m, th));
    o.require(P.size() == 1, "pitchfork |P| = 1");
    if (P.size() == 1) {
      o.require(std::abs(P.points[0].z.p - 1.190551) < 1e-4 && std::abs(P.points[0].z.u[0] + 0.629961) < 1e-4,
                "pitchfork (u, p) = (-0.629961, 1.190551)");
      o.note("pitchfork (u, p) = (" + fmt("%.7f", P.points[0].z.u[0]) + ", " + fmt("%.7f", P.points[0].z.p) + ")");
    }
  }
}

// 2. Sensitivity of bifurcation locations.
void sensitivity(Outcome& o) {
  {
    const auto m = models::saddle_node();
    const ParameterVector th{2.5, -1};
    const auto P = detection::predictions(m, th, continuation::trace_branches(m, th));
    o.require(P.size() == 2, "saddle-node |P| = 2");
    if (P.size() == 2) {
      const auto& g = P.points[0].dp_dtheta;  // fold at u* > 0, p < 0
      o.require(std::abs(g[0] + 0.912871) < 1e-6 && std::abs(g[1] + 0.760726) < 1e-6, "dp/dtheta = (-u*, -u*^3)");
      o.note("dp/dtheta = (" + fmt("%.7f", g[0]) + ", " + fmt("%.7f", g[1]) + ")");
    }
  }
  struct Case {
    ModelDef m;
    ParameterVector th;
  };
  const std::vector<Case> cases = {
      {models::saddle_node(), {2.5, -1}},          {models::pitchfork(), {0.5, -1}},
      {models::toggle_switch(), testing::reference_theta(models::toggle_switch())},
      {models::scaling_chain(4, 4), {-1.6, 0.5, 0.5, 0.5}}, {models::degenerate_pair(), {1.0, -1.0}},
      {models::linear(), {0.0}}};
  const double h = 1e-5;
  double worst = 0.0;
  for (const auto& c : cases) {
    const std::vector<double> dummy{c.m.p_window.lo};
    const auto base = testing::pipeline(c.m, c.th, dummy, false);
    for (Eigen::Index j = 0; j < c.th.size(); ++j) {
      ParameterVector a = c.th, b = c.th;
      a.values[j] += h;
      b.values[j] -= h;
      const auto pa = testing::pipeline(c.m, a, dummy, false);
      const auto pb = testing::pipeline(c.m, b, dummy, false);
      if (pa.p.size() != base.p.size() || pb.p.size() != base.p.size()) {
        o.require(false, c.m.name + " |P| changed inside the difference bracket");
        continue;
      }
      for (std::size_t i = 0; i < base.p.size(); ++i) worst = std::max(worst, std::abs((pa.p[i] - pb.p[i]) / (2 * h) - base.dp[i][j]));
    }
    o.note(c.m.name + " |P|=" + std::to_string(base.p.size()));
  }
  o.require(worst < 1e-4, "full-pipeline differences within 1e-4");
  o.note("max |analytic - FD| = " + fmt("%.2e", worst));
}

// 3. Leibniz-rule gradient of the total measure.
void measure_gradient(Outcome& o) {
  double worst = 0.0;
  for (const auto& m : {models::saddle_node(), models::pitchfork(), models::toggle_switch()}) {
    const auto th = testing::reference_theta(m);
    const auto g = geometry::grad_total_measure(m, th, continuation::trace_branches(m, th));
    for (Eigen::Index j = 0; j < th.size(); ++j) {
      ParameterVector a = th, b = th;
      a.values[j] += 1e-4;
      b.values[j] -= 1e-4;
      const double fd = (geometry::total_measure(continuation::trace_branches(m, a)) -
                         geometry::total_measure(continuation::trace_branches(m, b))) /
                        2e-4;
      const double rel = std::abs(g.grad[j] - fd) / std::abs(fd);
      worst = std::max(worst, rel);
      if (rel > 0.02) o.require(false, m.name + " component " + std::to_string(j + 1) + " off by " + fmt("%.2f%%", 100 * rel));
    }
  }
  o.note("max relative error " + fmt("%.3f%%", 100 * worst));
}

// 4. Loss gradient.
void loss_gradient(Outcome& o) {
  struct Case {
    ModelDef m;
    ParameterVector th;
    std::vector<double> D;
  };
  double worst = 0.0;
  for (const auto& c : {Case{models::saddle_node(), {2.5, -1}, {-1, 1}}, Case{models::pitchfork(), {0.5, -1}, {2}}}) {
    const auto base = testing::pipeline(c.m, c.th, c.D, true);
    for (Eigen::Index j = 0; j < c.th.size(); ++j) {
      const double h = 1e-5;
      ParameterVector a = c.th, b = c.th;
      a.values[j] += h;
      b.values[j] -= h;
      const auto pa = testing::pipeline(c.m, a, c.D, false);
      const auto pb = testing::pipeline(c.m, b, c.D, false);
      o.require(pa.p.size() == base.p.size() && pb.p.size() == base.p.size(), c.m.name + " away from |P| changes");
      const double fd = (pa.L - pb.L) / (2 * h);
      const double rel = std::abs(base.grad_L[j] - fd) / std::abs(fd);
      worst = std::max(worst, rel);
      if (rel > 0.01) o.require(false, c.m.name + " component " + std::to_string(j + 1) + " off by " + fmt("%.2f%%", 100 * rel));
    }
  }
  o.note("max relative error " + fmt("%.2e", worst));
}

// 5. Gradient descent on the saddle-node.
void saddle_inference(Outcome& o) {
  const auto m = models::saddle_node();
  const auto D = cost::TargetSet::make({-1, 1}, m.p_window);
  optimize::OptimizerConfig opt;
  opt.method = optimize::Method::gd;
  opt.learning_rate = 0.01;
  opt.max_steps = 2000;
  int runs = 0, converged = 0;
  double worst_tail = 0.0;
  std::string seeds;
  for (std::uint64_t seed = 0; runs < 10; ++seed) {
    // Initial draws inside the two-fold basin theta1 > 0 > theta2 with |theta| <= 2.
    const auto th0 = optimize::init_params(2, seed);
    if (!(th0[0] > 0 && th0[1] < 0 && th0.values.norm() <= 2.0)) continue;
    opt.seed = seed;
    const auto rec = optimize::run_inference(m, D, opt, {}, {}, th0);
    ++runs;
    if (rec.converged()) {
      ++converged;
    } else {
      // Smallest E over the last 100 evaluations, to show how close the run came.
      double best = INFINITY;
      for (std::size_t k = rec.steps.size() > 100 ? rec.steps.size() - 100 : 0; k < rec.steps.size(); ++k)
        if (std::isfinite(rec.steps[k].E)) best = std::min(best, rec.steps[k].E);
      worst_tail = std::max(worst_tail, best);
    }
    seeds += (seeds.empty() ? "" : ",") + std::to_string(seed) + (rec.converged() ? "+" : "-");
  }
  o.require(converged >= 8, "at least 8/10 runs converge");
  o.note(std::to_string(converged) + "/10 converged (seeds " + seeds + ")");
  if (converged < 10) o.note("worst non-converged run: min E over last 100 steps " + fmt("%.3g", worst_tail));
}

// 6. Toggle-switch clustering.
void toggle_clusters(Outcome& o) {
  const auto m = models::toggle_switch();
  const auto D = cost::TargetSet::make({4, 5}, m.p_window);
  optimize::OptimizerConfig opt;
  opt.method = optimize::Method::adam;
  opt.learning_rate = 0.1;
  opt.max_steps = 500;
  const auto runs = optimize::run_batch(m, D, 40, 0, opt, {}, {}, 0);
  const auto s = optimize::summarize(m, runs);
  int clustered = 0, failed = 0;
  double best_E = INFINITY;
  std::map<int, int> final_clusters;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (runs[i].converged() && s.clusters[i] != 0) ++clustered;
    if (runs[i].termination == optimize::Termination::failed_trace) ++failed;
    ++final_clusters[s.clusters[i]];
    for (const auto& st : runs[i].steps)
      if (std::isfinite(st.E)) best_E = std::min(best_E, st.E);
  }
  o.require(s.converged_fraction >= 0.7, "at least 70% of runs converge");
  o.require(clustered == s.converged, "every converged run in cluster 1 or 2");
  o.note(std::to_string(s.converged) + "/40 converged, " + std::to_string(clustered) + " of them clustered, " +
         std::to_string(failed) + " failed traces");
  o.note("final theta clusters {1: " + std::to_string(final_clusters[1]) + ", 2: " + std::to_string(final_clusters[2]) +
         ", mixed: " + std::to_string(final_clusters[0]) + "}");
  o.note("smallest E reached by any run " + fmt("%.3g", best_E));
}

// 7. Only k / mu1 enters the toggle steady-state relation.
void toggle_invariance(Outcome& o) {
  const auto m = models::toggle_switch();
  const auto th = testing::reference_theta(m);
  const auto base = detection::predictions(m, th, continuation::trace_branches(m, th)).locations();
  o.require(!base.empty(), "reference theta has bifurcations");
  double worst = 0.0;
  for (double f : {0.5, 2.0, 10.0}) {
    ParameterVector s = th;
    s.values[2] += std::log10(f);  // mu1
    s.values[4] += std::log10(f);  // k
    const auto p = detection::predictions(m, s, continuation::trace_branches(m, s)).locations();
    if (p.size() != base.size()) {
      o.require(false, "|P| unchanged at factor " + fmt("%g", f));
      continue;
    }
    for (std::size_t i = 0; i < p.size(); ++i) worst = std::max(worst, std::abs(p[i] - base[i]));
  }
  o.require(worst < 1e-6, "p-locations unchanged within 1e-6");
  o.note(std::to_string(base.size()) + " bifurcations, max shift " + fmt("%.2e", worst));
}

// 8. Complexity scaling, via the bench command.
void complexity(Outcome& o) {
  const auto dir = std::filesystem::temp_directory_path() / "bifinfer_acceptance_bench";
  std::filesystem::create_directories(dir);
  const std::string out_dir = dir.string();
  const char* argv[] = {"bifinfer", "bench", "--states", "2,4,8,16,32", "--params", "4", "--repeats", "15", "--out", out_dir.c_str()};
  std::ostringstream out, err;
  const int code = cli::run(10, argv, out, err);
  o.require(code == 0, "bench exits 0");
  const std::string text = out.str();
  const auto at = text.find("slope: ");
  double slope = NAN;
  if (at != std::string::npos) slope = std::strtod(text.c_str() + at + 7, nullptr);
  o.require(slope >= 1.5 && slope <= 2.5, "log-log slope in [1.5, 2.5]");
  o.note("slope " + fmt("%.3f", slope));
}

// 9. Property suite.
void properties(Outcome& o) {
  const std::vector<ModelDef> all = {models::saddle_node(),      models::pitchfork(), models::toggle_switch(),
                                     models::scaling_chain(4, 4), models::degenerate_pair(), models::linear()};
  double worst_orth = 0.0, worst_normal = 0.0;
  bool phi_ok = true;
  for (const auto& m : all) {
    const auto th = testing::reference_theta(m);
    const auto pts = testing::curve_points(m, th, 100, 99);
    o.require(pts.size() == 100, m.name + " has 100 curve points");
    for (const auto& z : pts) {
      const Eigen::VectorXd t = geometry::tangent_field(m, th, z).unit;
      const Eigen::MatrixXd j = differentiate(m, z, th, Derivative::dF_dz);
      worst_orth = std::max(worst_orth, (j * t).cwiseAbs().maxCoeff());
      const Eigen::MatrixXd v = geometry::deformation_field(m, th, z).matrix;
      worst_normal = std::max(worst_normal, (t.transpose() * v).cwiseAbs().maxCoeff());
    }
    for (const auto& b : continuation::trace_branches(m, th).branches)
      for (const auto& s : b.samples) phi_ok = phi_ok && s.measure >= 0.0 && s.measure <= 1.0;
  }
  o.require(worst_orth < 1e-10, "tangent orthogonality");
  o.require(worst_normal < 1e-8, "deformation normality");
  o.require(phi_ok, "phi in [0, 1]");

  double worst_halving = 0.0;
  for (const auto& m : {models::saddle_node(), models::pitchfork(), models::toggle_switch()}) {
    const auto th = testing::reference_theta(m);
    TraceSettings half;
    half.step = 0.01;
    const double a = geometry::total_measure(continuation::trace_branches(m, th));
    const double b = geometry::total_measure(continuation::trace_branches(m, th, m.p_window, half));
    worst_halving = std::max(worst_halving, std::abs(a - b) / a);
  }
  o.require(worst_halving < 0.01, "psi stable under step halving");

  const auto m = models::toggle_switch();
  const auto D = cost::TargetSet::make({4, 5}, m.p_window);
  optimize::OptimizerConfig opt;
  opt.method = optimize::Method::adam;
  opt.learning_rate = 0.1;
  opt.max_steps = 10;
  const auto r1 = optimize::run_batch(m, D, 2, 5, opt, {}, {}, 2);
  const auto r2 = optimize::run_batch(m, D, 2, 5, opt, {}, {}, 1);
  bool identical = io::runs_json(r1) == io::runs_json(r2);
  for (std::size_t i = 0; i < r1.size() && identical; ++i) {
    identical = r1[i].steps.size() == r2[i].steps.size();
    for (std::size_t k = 0; k < r1[i].steps.size() && identical; ++k)
      identical = r1[i].steps[k].theta == r2[i].steps[k].theta &&
                  std::memcmp(&r1[i].steps[k].L, &r2[i].steps[k].L, sizeof(double)) == 0;
  }
  o.require(identical, "seeded runs bit-identical");
  o.note("orthogonality " + fmt("%.1e", worst_orth) + ", normality " + fmt("%.1e", worst_normal) + ", halving " +
         fmt("%.3f%%", 100 * worst_halving));
}

// 10. Degenerate handling.
void degenerate(Outcome& o) {
  const auto m = models::degenerate_pair();
  const ParameterVector th{0.0, -1.0 / 3.0};
  const auto P = detection::predictions(m, th, continuation::trace_branches(m, th));
  bool near_origin = false;
  for (const auto& x : P.points) near_origin = near_origin || std::abs(x.z.p) < 1e-3;
  bool flagged = false;
  for (const auto& f : P.degenerate_flags) flagged = flagged || std::abs(f.z.p) < 1e-3;
  o.require(!near_origin, "double crossing excluded from P");
  o.require(flagged, "double crossing reported as degenerate");
  if (!P.degenerate_flags.empty()) o.note("flag: " + P.degenerate_flags.front().reason);

  const auto dir = std::filesystem::temp_directory_path() / "bifinfer_acceptance_gradcheck";
  std::filesystem::create_directories(dir);
  const std::string out_dir = dir.string();
  // theta1 = 0 separates |P| = 0 from |P| = 2 on the saddle-node.
  const char* argv[] = {"bifinfer", "gradcheck", "--model", "saddle-node", "--theta", "0,-1", "--targets", "-1,1",
                        "--fd-step", "1e-2", "--out", out_dir.c_str()};
  std::ostringstream out, err;
  const int code = cli::run(12, argv, out, err);
  o.require(code == 3, "gradcheck exits 3 on a |P| transition");
  o.note("gradcheck exit " + std::to_string(code));
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "closed-form fold placement", 5, fold_placement},
      {2, "sensitivity correctness", 30, sensitivity},
      {3, "Leibniz-rule measure gradient", 120, measure_gradient},
      {4, "loss gradient", 120, loss_gradient},
      {5, "saddle-node inference convergence", 600, saddle_inference},
      {6, "toggle-switch clustering", 1800, toggle_clusters},
      {7, "k/mu1 invariance", 120, toggle_invariance},
      {8, "complexity scaling", 300, complexity},
      {9, "property suite", 300, properties},
      {10, "degenerate handling", 60, degenerate},
  };
  std::vector<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.push_back(std::atoi(argv[i]));

  bool all = true;
  for (const auto& c : criteria) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.id) == wanted.end()) continue;
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.body(o);
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    o.require(secs < c.limit_seconds, "runtime under " + fmt("%g s", c.limit_seconds));
    all = all && o.pass;
    std::printf("%s criterion %d (%s) [%.1f s]: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.title, secs, o.detail.c_str());
    std::fflush(stdout);
  }
  return all ? 0 : 1;
}
