#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace bifinfer::cli {

namespace {

constexpr double kPanelW = 480.0;
constexpr double kPanelH = 320.0;
constexpr double kMargin = 48.0;

// Fixed-precision output keeps the file byte-stable across platforms.
std::string num(double x) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  os << (std::abs(x) < 0.005 ? 0.0 : x);
  return os.str();
}

struct Marker {
  double p;
  std::vector<double> u;
};

std::vector<Marker> markers(const io::CsvDiagram& d) {
  std::vector<Marker> out;
  for (const auto& b : d.branches) {
    for (std::size_t i = 0; i + 1 < b.size(); ++i) {
      const auto& a = b[i];
      const auto& c = b[i + 1];
      const bool zero_here = a.det == 0.0 && i > 0 && b[i - 1].det * c.det < 0.0;
      if (!(a.det * c.det < 0.0) && !zero_here) continue;
      const double t = zero_here ? 0.0 : a.det / (a.det - c.det);
      Marker m{a.p + t * (c.p - a.p), {}};
      for (std::size_t k = 0; k < a.u.size(); ++k) m.u.push_back(a.u[k] + t * (c.u[k] - a.u[k]));
      out.push_back(std::move(m));
    }
  }
  return out;
}

}  // namespace

int count_markers(const io::CsvDiagram& d) { return static_cast<int>(markers(d).size()); }

std::string render_svg(const io::CsvDiagram& d, const std::vector<double>& targets) {
  const int n = d.state_dim;
  double pmin = INFINITY, pmax = -INFINITY;
  std::vector<double> umin(static_cast<std::size_t>(n), INFINITY), umax(static_cast<std::size_t>(n), -INFINITY);
  for (const auto& b : d.branches) {
    for (const auto& s : b) {
      pmin = std::min(pmin, s.p);
      pmax = std::max(pmax, s.p);
      for (int k = 0; k < n; ++k) {
        umin[k] = std::min(umin[k], s.u[k]);
        umax[k] = std::max(umax[k], s.u[k]);
      }
    }
  }
  for (double t : targets) {
    pmin = std::min(pmin, t);
    pmax = std::max(pmax, t);
  }
  if (!(pmax > pmin)) {
    pmin -= 0.5;
    pmax += 0.5;
  }
  for (int k = 0; k < n; ++k) {
    if (!(umax[k] > umin[k])) {
      umin[k] -= 0.5;
      umax[k] += 0.5;
    }
  }
  const auto found = markers(d);

  std::ostringstream os;
  const double width = kPanelW;
  const double height = kPanelH * n;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\"" << num(height)
     << "\" viewBox=\"0 0 " << num(width) << ' ' << num(height) << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (int k = 0; k < n; ++k) {
    const double top = kPanelH * k;
    const double x0 = kMargin, x1 = kPanelW - kMargin / 2;
    const double y0 = top + kPanelH - kMargin, y1 = top + kMargin / 2;
    auto X = [&](double p) { return x0 + (p - pmin) / (pmax - pmin) * (x1 - x0); };
    auto Y = [&](double u) { return y0 + (u - umin[k]) / (umax[k] - umin[k]) * (y1 - y0); };

    os << "<g id=\"panel-u" << k + 1 << "\">\n";
    os << "<rect x=\"" << num(x0) << "\" y=\"" << num(y1) << "\" width=\"" << num(x1 - x0) << "\" height=\""
       << num(y0 - y1) << "\" fill=\"none\" stroke=\"#444\"/>\n";
    os << "<text x=\"" << num((x0 + x1) / 2) << "\" y=\"" << num(y0 + 32) << "\" font-size=\"12\" text-anchor=\"middle\">p</text>\n";
    os << "<text x=\"12\" y=\"" << num((y0 + y1) / 2) << "\" font-size=\"12\">u" << k + 1 << "</text>\n";
    os << "<text x=\"" << num(x0) << "\" y=\"" << num(y0 + 16) << "\" font-size=\"10\" text-anchor=\"middle\">"
       << num(pmin) << "</text>\n";
    os << "<text x=\"" << num(x1) << "\" y=\"" << num(y0 + 16) << "\" font-size=\"10\" text-anchor=\"middle\">"
       << num(pmax) << "</text>\n";
    for (double t : targets) {
      os << "<line class=\"target\" x1=\"" << num(X(t)) << "\" y1=\"" << num(y0) << "\" x2=\"" << num(X(t))
         << "\" y2=\"" << num(y1) << "\" stroke=\"#e0c000\" stroke-width=\"2\"/>\n";
    }
    for (const auto& b : d.branches) {
      // Split each branch into runs of constant det sign.
      std::size_t i = 0;
      while (i + 1 < b.size()) {
        const bool positive = b[i].det + b[i + 1].det >= 0.0;
        std::size_t j = i + 1;
        while (j + 1 < b.size() && ((b[j].det + b[j + 1].det >= 0.0) == positive)) ++j;
        os << "<polyline fill=\"none\" stroke=\"black\" stroke-width=\"1.5\""
           << (positive ? "" : " stroke-dasharray=\"5,3\"") << " points=\"";
        for (std::size_t s = i; s <= j; ++s) os << (s > i ? " " : "") << num(X(b[s].p)) << ',' << num(Y(b[s].u[k]));
        os << "\"/>\n";
        i = j;
      }
    }
    for (const auto& m : found) {
      os << "<circle class=\"bifurcation\" cx=\"" << num(X(m.p)) << "\" cy=\"" << num(Y(m.u[k]))
         << "\" r=\"4\" fill=\"red\"/>\n";
    }
    os << "</g>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace bifinfer::cli
