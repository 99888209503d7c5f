#include <doctest.h>

#include <cmath>

#include "support.hpp"

using namespace bifinfer;

namespace {

Branch synthetic(std::initializer_list<double> dets) {
  Branch b;
  double p = 0.0;
  for (double d : dets) {
    BranchSample s;
    s.z = StatePoint(Eigen::VectorXd::Zero(1), p);
    s.det = d;
    p += 0.1;
    b.samples.push_back(s);
  }
  return b;
}

const double kFoldU = std::sqrt(2.5 / 3.0);
const double kFoldP = 2.5 * kFoldU - kFoldU * kFoldU * kFoldU;  // |p| at the fold

}  // namespace

TEST_CASE("detect_crossings") {
  CHECK(detection::detect_crossings(synthetic({1, 0.5, -0.2, -1})) == std::vector<detection::Bracket>{{1, 2}});
  CHECK(detection::detect_crossings(synthetic({-1, -1, -1})).empty());
  // An exact zero sample brackets itself and swallows its neighbours.
  CHECK(detection::detect_crossings(synthetic({1, 0.5, 0.0, -1})) == std::vector<detection::Bracket>{{2, 2}});
  const auto d = continuation::trace_branches(models::saddle_node(), {2.5, -1});
  CHECK(detection::detect_crossings(d.branches.at(0)).size() == 2);
}

TEST_CASE("refine_bifurcation") {
  SUBCASE("saddle-node folds") {
    const auto m = models::saddle_node();
    for (double sign : {1.0, -1.0}) {
      const auto bp = detection::refine_bifurcation(m, {2.5, -1}, StatePoint(Eigen::VectorXd::Constant(1, 0.8 * sign), -1.4 * sign));
      CHECK(bp.z.u[0] == doctest::Approx(sign * 0.912871).epsilon(1e-6));
      CHECK(bp.z.p == doctest::Approx(-sign * 1.521452).epsilon(1e-6));
      CHECK_FALSE(bp.degenerate);
    }
  }
  SUBCASE("pitchfork") {
    const auto bp = detection::refine_bifurcation(models::pitchfork(), {0.5, -1},
                                                  StatePoint(Eigen::VectorXd::Constant(1, -0.6), 1.1));
    CHECK(bp.z.u[0] == doctest::Approx(-std::cbrt(0.25)).epsilon(1e-9));
    CHECK(bp.z.p == doctest::Approx(3 * std::cbrt(0.0625)).epsilon(1e-9));
  }
  SUBCASE("no bifurcation") {
    CHECK_THROWS_AS(detection::refine_bifurcation(models::linear(), {0.0}, StatePoint(Eigen::VectorXd::Zero(1), 0.2)),
                    RefinementError);
  }
}

TEST_CASE("grad_bifurcation closed forms") {
  {
    const auto m = models::saddle_node();
    const auto bp = detection::refine_bifurcation(m, {2.5, -1}, StatePoint(Eigen::VectorXd::Constant(1, 0.9), -1.5));
    const auto g = detection::grad_bifurcation(m, {2.5, -1}, bp);
    CHECK(g[0] == doctest::Approx(-kFoldU).epsilon(1e-9));
    CHECK(g[1] == doctest::Approx(-kFoldU * kFoldU * kFoldU).epsilon(1e-9));
  }
  {
    const auto m = models::pitchfork();
    const auto bp = detection::refine_bifurcation(m, {0.5, -1}, StatePoint(Eigen::VectorXd::Constant(1, -0.6), 1.1));
    const auto g = detection::grad_bifurcation(m, {0.5, -1}, bp);
    CHECK(g[0] == doctest::Approx(std::cbrt(4.0)).epsilon(1e-9));
  }
}

TEST_CASE("degenerate sensitivity is reported") {
  const auto m = models::degenerate_pair();
  detection::BifurcationPoint bp;
  bp.z = StatePoint(Eigen::VectorXd::Zero(2), 0.0);
  CHECK_THROWS_AS(detection::grad_bifurcation(m, {0.0, -1.0 / 3.0}, bp), DegenerateSensitivityError);
}

TEST_CASE("predictions on the minimal models") {
  SUBCASE("saddle-node") {
    const auto m = models::saddle_node();
    const auto P = detection::predictions(m, {2.5, -1}, continuation::trace_branches(m, {2.5, -1}));
    REQUIRE(P.size() == 2);
    CHECK(P.points[0].z.p == doctest::Approx(-kFoldP).epsilon(1e-9));
    CHECK(P.points[1].z.p == doctest::Approx(kFoldP).epsilon(1e-9));
    CHECK(std::abs(P.points[0].z.p + P.points[1].z.p) < 1e-10);
    CHECK(P.degenerate_flags.empty());
  }
  SUBCASE("pitchfork") {
    const auto m = models::pitchfork();
    const auto P = detection::predictions(m, {0.5, -1}, continuation::trace_branches(m, {0.5, -1}));
    REQUIRE(P.size() == 1);
    CHECK(P.points[0].z.p == doctest::Approx(1.190551).epsilon(1e-6));
  }
  SUBCASE("linear") {
    const auto m = models::linear();
    const auto P = detection::predictions(m, {0.0}, continuation::trace_branches(m, {0.0}));
    CHECK(P.size() == 0);
    CHECK(P.degenerate_flags.empty());
  }
}

TEST_CASE("every prediction satisfies both equality conditions") {
  for (const auto& m : {models::saddle_node(), models::pitchfork(), models::toggle_switch()}) {
    CAPTURE(m.name);
    const auto th = testing::reference_theta(m);
    const auto P = detection::predictions(m, th, continuation::trace_branches(m, th));
    CHECK(P.size() > 0);
    for (const auto& x : P.points) {
      CHECK(evaluate(m, x.z, th).norm() <= 1e-10);
      CHECK(std::abs(geometry::determinant(m, th, x.z)) <= 1e-10);
      CHECK(std::abs(x.det_slope) > 1e-8);
      CHECK(x.dp_dtheta.size() == m.param_dim);
    }
  }
}

TEST_CASE("predictions are stable under step halving") {
  for (const auto& m : {models::saddle_node(), models::pitchfork(), models::toggle_switch()}) {
    CAPTURE(m.name);
    const auto th = testing::reference_theta(m);
    TraceSettings half;
    half.step = 0.01;
    const auto a = detection::predictions(m, th, continuation::trace_branches(m, th)).locations();
    const auto b = detection::predictions(m, th, continuation::trace_branches(m, th, m.p_window, half)).locations();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) < 1e-6);
  }
}

TEST_CASE("the same fold seen on two branches counts once") {
  const auto m = models::saddle_node();
  auto d = continuation::trace_branches(m, {2.5, -1});
  d.branches.push_back(d.branches.front());
  const auto P = detection::predictions(m, {2.5, -1}, d);
  CHECK(P.size() == 2);
}

TEST_CASE("a double zero of det is flagged, not refined") {
  const auto m = models::degenerate_pair();
  const ParameterVector th{0.0, -1.0 / 3.0};
  const auto P = detection::predictions(m, th, continuation::trace_branches(m, th));
  CHECK(P.size() == 0);
  REQUIRE(P.degenerate_flags.size() >= 1);
  for (const auto& f : P.degenerate_flags) {
    CHECK(std::abs(f.z.p) < 1e-3);
    CHECK_FALSE(f.reason.empty());
  }
}

TEST_CASE("sensitivities match re-traced differences") {
  for (const auto& m : {models::saddle_node(), models::pitchfork(), models::toggle_switch()}) {
    CAPTURE(m.name);
    const auto th = testing::reference_theta(m);
    const auto base = testing::pipeline(m, th, {m.p_window.lo + 0.25 * m.p_window.width()}, false);
    REQUIRE_FALSE(base.p.empty());
    for (Eigen::Index j = 0; j < th.size(); ++j) {
      ParameterVector a = th, b = th;
      a.values[j] += 1e-5;
      b.values[j] -= 1e-5;
      const auto pa = testing::pipeline(m, a, {m.p_window.lo + 0.25 * m.p_window.width()}, false);
      const auto pb = testing::pipeline(m, b, {m.p_window.lo + 0.25 * m.p_window.width()}, false);
      REQUIRE(pa.p.size() == base.p.size());
      REQUIRE(pb.p.size() == base.p.size());
      for (std::size_t i = 0; i < base.p.size(); ++i) CHECK(std::abs((pa.p[i] - pb.p[i]) / 2e-5 - base.dp[i][j]) < 1e-4);
    }
  }
}
