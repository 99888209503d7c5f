#include "bifinfer/io.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "bifinfer/errors.hpp"

namespace bifinfer::io {

namespace {

using nlohmann::ordered_json;

ordered_json vec(const Eigen::VectorXd& v) {
  ordered_json a = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

ordered_json point_json(const StatePoint& z) {
  return ordered_json{{"p", z.p}, {"u", vec(z.u)}};
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_number(std::string_view s, std::size_t line) {
  double x = 0.0;
  const auto* end = s.data() + s.size();
  const auto r = std::from_chars(s.data(), end, x);
  if (r.ec != std::errc() || r.ptr != end) {
    throw DataError("line " + std::to_string(line) + ": not a number: '" + std::string(s) + "'");
  }
  return x;
}

}  // namespace

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

std::string diagram_csv(const Diagram& d) {
  const std::size_t n = static_cast<std::size_t>(d.box.bounds.size());
  std::ostringstream os;
  os << "branch_id,p";
  for (std::size_t i = 1; i <= n; ++i) os << ",u_" << i;
  os << ",det,measure,ds";
  for (std::size_t i = 1; i <= n + 1; ++i) os << ",t_" << i;
  os << '\n';
  for (std::size_t b = 0; b < d.branches.size(); ++b) {
    for (const auto& s : d.branches[b].samples) {
      os << b << ',' << format_double(s.z.p);
      for (Eigen::Index i = 0; i < s.z.u.size(); ++i) os << ',' << format_double(s.z.u[i]);
      os << ',' << format_double(s.det) << ',' << format_double(s.measure) << ',' << format_double(s.ds);
      for (Eigen::Index i = 0; i < s.tangent.size(); ++i) os << ',' << format_double(s.tangent[i]);
      os << '\n';
    }
  }
  return os.str();
}

CsvDiagram parse_diagram_csv(std::string_view text) {
  std::vector<std::string_view> lines;
  for (auto l : split(text, '\n')) {
    if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
    if (!l.empty()) lines.push_back(l);
  }
  if (lines.empty()) throw DataError("diagram file is empty");
  const auto header = split(lines[0], ',');
  if (header.size() < 7 || header[0] != "branch_id" || header[1] != "p") throw DataError("unexpected diagram header");
  std::size_t n = 0;
  while (2 + n < header.size() && header[2 + n] == "u_" + std::to_string(n + 1)) ++n;
  if (n == 0 || header.size() != 2 + n + 3 + n + 1 || header[2 + n] != "det" || header[3 + n] != "measure" ||
      header[4 + n] != "ds") {
    throw DataError("unexpected diagram header");
  }
  CsvDiagram out;
  out.state_dim = static_cast<int>(n);
  int current = -1;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto f = split(lines[li], ',');
    if (f.size() != header.size()) throw DataError("line " + std::to_string(li + 1) + ": wrong number of fields");
    CsvSample s;
    const double id = parse_number(f[0], li + 1);
    if (id < 0 || id != std::floor(id)) throw DataError("line " + std::to_string(li + 1) + ": bad branch id");
    s.branch_id = static_cast<int>(id);
    s.p = parse_number(f[1], li + 1);
    for (std::size_t i = 0; i < n; ++i) s.u.push_back(parse_number(f[2 + i], li + 1));
    s.det = parse_number(f[2 + n], li + 1);
    s.measure = parse_number(f[3 + n], li + 1);
    s.ds = parse_number(f[4 + n], li + 1);
    for (std::size_t i = 0; i <= n; ++i) s.tangent.push_back(parse_number(f[5 + n + i], li + 1));
    if (s.branch_id != current) {
      if (s.branch_id < current) throw DataError("line " + std::to_string(li + 1) + ": branch ids must not decrease");
      current = s.branch_id;
      out.branches.emplace_back();
    }
    out.branches.back().push_back(std::move(s));
  }
  if (out.branches.empty()) throw DataError("diagram file has no samples");
  return out;
}

std::string predictions_json(const detection::PredictionSet& p) {
  ordered_json j;
  j["points"] = ordered_json::array();
  for (const auto& bp : p.points) {
    ordered_json x = point_json(bp.z);
    x["det_slope"] = bp.det_slope;
    x["dp_dtheta"] = vec(bp.dp_dtheta);
    x["branch_id"] = bp.branch_id;
    x["bracket"] = {bp.first, bp.second};
    j["points"].push_back(std::move(x));
  }
  j["degenerate"] = ordered_json::array();
  for (const auto& f : p.degenerate_flags) {
    ordered_json x = point_json(f.z);
    x["branch_id"] = f.branch_id;
    x["bracket"] = {f.first, f.second};
    x["reason"] = f.reason;
    j["degenerate"].push_back(std::move(x));
  }
  return j.dump(2) + "\n";
}

std::string runs_json(const std::vector<optimize::RunRecord>& runs) {
  ordered_json a = ordered_json::array();
  for (const auto& r : runs) {
    ordered_json x;
    x["seed"] = r.seed;
    x["termination"] = optimize::to_string(r.termination);
    x["converged_at"] = r.converged_at;
    x["note"] = r.note;
    ordered_json steps = ordered_json::array();
    for (const auto& s : r.steps) {
      steps.push_back(ordered_json{{"theta", vec(s.theta)},
                                   {"L", s.L},
                                   {"E", s.E},
                                   {"psi", s.psi},
                                   {"n_predictions", s.n_predictions},
                                   {"predictions", s.predictions}});
    }
    x["steps"] = std::move(steps);
    ordered_json fin = ordered_json::array();
    for (const auto& bp : r.final_predictions.points) {
      ordered_json y = point_json(bp.z);
      y["dp_dtheta"] = vec(bp.dp_dtheta);
      fin.push_back(std::move(y));
    }
    x["final_predictions"] = std::move(fin);
    a.push_back(std::move(x));
  }
  return a.dump(2) + "\n";
}

std::string summary_csv(const std::vector<optimize::RunRecord>& runs, const optimize::BatchSummary& summary) {
  std::ostringstream os;
  const Eigen::Index m = runs.empty() || runs[0].steps.empty() ? 0 : runs[0].final_theta().size();
  os << "seed,converged,termination,steps,final_E,final_L,n_predictions,cluster";
  for (Eigen::Index i = 1; i <= m; ++i) os << ",theta_" << i;
  os << '\n';
  for (std::size_t k = 0; k < runs.size(); ++k) {
    const auto& r = runs[k];
    const auto& last = r.steps.back();
    os << r.seed << ',' << (r.converged() ? "true" : "false") << ',' << optimize::to_string(r.termination) << ','
       << r.steps.size() << ',' << format_double(last.E) << ',' << format_double(last.L) << ','
       << last.n_predictions << ',' << summary.clusters[k];
    for (Eigen::Index i = 0; i < last.theta.size(); ++i) os << ',' << format_double(last.theta[i]);
    os << '\n';
  }
  return os.str();
}

}  // namespace bifinfer::io
