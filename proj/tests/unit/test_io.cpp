#include <doctest.h>

#include <cmath>

#include <nlohmann/json.hpp>

#include "bifinfer/io.hpp"
#include "support.hpp"

using namespace bifinfer;

TEST_CASE("format_double round-trips") {
  for (double x : {0.0, -1.5, 1.0 / 3.0, 1e-300, 6.02214076e23, -0.1}) CHECK(std::stod(io::format_double(x)) == x);
  CHECK(io::format_double(2.5) == "2.5");
}

TEST_CASE("diagram CSV round-trip") {
  const auto m = models::toggle_switch();
  const auto d = continuation::trace_branches(m, testing::reference_theta(m));
  const auto parsed = io::parse_diagram_csv(io::diagram_csv(d));
  CHECK(parsed.state_dim == 2);
  REQUIRE(parsed.branches.size() == d.branches.size());
  for (std::size_t b = 0; b < d.branches.size(); ++b) {
    REQUIRE(parsed.branches[b].size() == d.branches[b].samples.size());
    for (std::size_t i = 0; i < parsed.branches[b].size(); ++i) {
      const auto& a = parsed.branches[b][i];
      const auto& s = d.branches[b].samples[i];
      CHECK(a.p == s.z.p);
      CHECK(a.u[0] == s.z.u[0]);
      CHECK(a.u[1] == s.z.u[1]);
      CHECK(a.det == s.det);
      CHECK(a.measure == s.measure);
      CHECK(a.ds == s.ds);
      CHECK(a.tangent.size() == 3);
    }
  }
}

TEST_CASE("malformed diagram CSV") {
  CHECK_THROWS_AS(io::parse_diagram_csv(""), DataError);
  CHECK_THROWS_AS(io::parse_diagram_csv("branch_id,p,u_1,det,measure,ds,t_1,t_2\n"), DataError);
  CHECK_THROWS_AS(io::parse_diagram_csv("hello,world\n0,1\n"), DataError);
  CHECK_THROWS_AS(io::parse_diagram_csv("branch_id,p,u_1,det,measure,ds,t_1,t_2\n0,1,2,3\n"), DataError);
  CHECK_THROWS_AS(io::parse_diagram_csv("branch_id,p,u_1,det,measure,ds,t_1,t_2\n0,x,2,3,0.5,0,1,0\n"), DataError);
}

TEST_CASE("predictions JSON") {
  const auto m = models::saddle_node();
  const auto P = detection::predictions(m, {2.5, -1}, continuation::trace_branches(m, {2.5, -1}));
  const auto j = nlohmann::json::parse(io::predictions_json(P));
  REQUIRE(j["points"].size() == 2);
  CHECK(j["points"][0]["p"].get<double>() == P.points[0].z.p);
  CHECK(j["points"][1]["dp_dtheta"].size() == 2);
  CHECK(j["degenerate"].empty());
}

TEST_CASE("run records serialise without wall time") {
  optimize::RunRecord r;
  r.seed = 3;
  r.wall_seconds = 12.5;
  r.termination = optimize::Termination::max_steps;
  r.steps.push_back(optimize::StepRecord{});
  r.steps.back().theta = Eigen::Vector2d(0.5, -1);
  r.steps.back().L = 0.25;
  r.steps.back().E = 0.25;
  const std::string a = io::runs_json({r});
  CHECK(a.find("12.5") == std::string::npos);
  r.wall_seconds = 99.0;
  CHECK(io::runs_json({r}) == a);
  const auto j = nlohmann::json::parse(a);
  CHECK(j[0]["seed"] == 3);
  CHECK(j[0]["termination"] == "max_steps");

  const std::string csv = io::summary_csv({r}, optimize::summarize(models::saddle_node(), {r}));
  CHECK(csv.rfind("seed,converged,termination,steps,final_E,final_L,n_predictions,cluster,theta_1,theta_2\n", 0) == 0);
}
