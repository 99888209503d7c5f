#include "bifinfer/models.hpp"

#include <algorithm>
#include <cmath>

namespace bifinfer::models {

namespace {

constexpr double kLn10 = 2.302585092994045684;

Eigen::MatrixXd row(std::initializer_list<double> v) {
  Eigen::MatrixXd m(1, static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) m(0, i++) = x;
  return m;
}

}  // namespace

ModelDef saddle_node() {
  auto m = make_model(
      "saddle-node", 1, 2,
      [](auto u, const auto& p, auto th, auto out) { out[0] = p + th[0] * u[0] + th[1] * u[0] * u[0] * u[0]; },
      ParamTransform::identity, {-3.0, 3.0});
  m.closed_form = ClosedFormDerivatives{
      [](const StatePoint& z, const ParameterVector& th) {
        const double u = z.u[0];
        return row({th[0] + 3.0 * th[1] * u * u, 1.0});
      },
      [](const StatePoint& z, const ParameterVector&) {
        const double u = z.u[0];
        return row({u, u * u * u});
      }};
  return m;
}

ModelDef pitchfork() {
  auto m = make_model(
      "pitchfork", 1, 2,
      [](auto u, const auto& p, auto th, auto out) { out[0] = th[0] + p * u[0] + th[1] * u[0] * u[0] * u[0]; },
      ParamTransform::identity, {-2.0, 3.0});
  m.closed_form = ClosedFormDerivatives{
      [](const StatePoint& z, const ParameterVector& th) {
        const double u = z.u[0];
        return row({z.p + 3.0 * th[1] * u * u, u});
      },
      [](const StatePoint& z, const ParameterVector&) {
        const double u = z.u[0];
        return row({1.0, u * u * u});
      }};
  return m;
}

ModelDef toggle_switch() {
  auto m = make_model(
      "toggle", 2, 5,
      [](auto u, const auto& p, auto th, auto out) {
        const auto x = p * u[1];
        const auto y = th[4] * u[0];
        out[0] = (th[0] + x * x) / (1.0 + x * x) - th[2] * u[0];
        out[1] = (th[1] + y * y) / (1.0 + y * y) - th[3] * u[1];
      },
      ParamTransform::log10, {3.0, 7.0});
  m.u_box = [](std::span<const double> eff) {
    // Steady states satisfy min(1,a_k)/mu_k <= u_k <= max(1,a_k)/mu_k.
    StateBox b;
    b.bounds.push_back({0.0, 2.0 * std::max(1.0, eff[0]) / eff[2]});
    b.bounds.push_back({0.0, 2.0 * std::max(1.0, eff[1]) / eff[3]});
    return b;
  };
  m.closed_form = ClosedFormDerivatives{
      [](const StatePoint& z, const ParameterVector& th) {
        const double a1 = std::pow(10.0, th[0]), a2 = std::pow(10.0, th[1]);
        const double mu1 = std::pow(10.0, th[2]), mu2 = std::pow(10.0, th[3]), k = std::pow(10.0, th[4]);
        const double u1 = z.u[0], u2 = z.u[1], p = z.p;
        const double x = p * u2, y = k * u1;
        const double hx = 2.0 * x * (1.0 - a1) / std::pow(1.0 + x * x, 2);
        const double hy = 2.0 * y * (1.0 - a2) / std::pow(1.0 + y * y, 2);
        Eigen::MatrixXd j(2, 3);
        j << -mu1, hx * p, hx * u2, hy * k, -mu2, 0.0;
        return j;
      },
      [](const StatePoint& z, const ParameterVector& th) {
        const double a2 = std::pow(10.0, th[1]);
        const double eff[5] = {std::pow(10.0, th[0]), a2, std::pow(10.0, th[2]), std::pow(10.0, th[3]),
                               std::pow(10.0, th[4])};
        const double u1 = z.u[0], u2 = z.u[1], p = z.p;
        const double x = p * u2, y = eff[4] * u1;
        const double hy = 2.0 * y * (1.0 - a2) / std::pow(1.0 + y * y, 2);
        Eigen::MatrixXd j = Eigen::MatrixXd::Zero(2, 5);
        j(0, 0) = 1.0 / (1.0 + x * x);
        j(1, 1) = 1.0 / (1.0 + y * y);
        j(0, 2) = -u1;
        j(1, 3) = -u2;
        j(1, 4) = hy * u1;
        for (int c = 0; c < 5; ++c) j.col(c) *= eff[c] * kLn10;
        return j;
      }};
  return m;
}

std::pair<int, int> scaling_chain_slice(int states, int params, int n) {
  const int k = params - 1;
  const int downstream = states - 1;
  if (k <= 0 || downstream <= 0) return {0, 0};
  const int j = n - 2;
  int first = j * k / downstream;
  int last = (j + 1) * k / downstream;
  if (last <= first) last = first + 1;
  return {1 + first, 1 + std::min(last, k)};
}

ModelDef scaling_chain(int states, int params) {
  if (states < 1 || params < 1) throw UsageError("scaling-chain needs N >= 1 and M >= 1");
  std::vector<std::pair<int, int>> slices(static_cast<std::size_t>(states), {0, 0});
  for (int n = 2; n <= states; ++n) slices[static_cast<std::size_t>(n - 1)] = scaling_chain_slice(states, params, n);
  auto m = make_model(
      "scaling-chain", states, params,
      [slices](auto u, const auto& p, auto th, auto out) {
        using std::sin;
        const auto sp = sin(p);
        const auto s2 = sp * sp;
        out[0] = s2 - (th[0] * s2 + 1.0) * u[0];
        for (std::size_t n = 1; n < u.size(); ++n) {
          auto mu = 0.0 * u[n];
          for (int i = slices[n].first; i < slices[n].second; ++i) mu = mu + th[static_cast<std::size_t>(i)];
          out[n] = u[n - 1] - (mu * mu + 1.0) * u[n];
        }
      },
      ParamTransform::identity, {0.1, 3.0});
  m.closed_form = ClosedFormDerivatives{
      [slices](const StatePoint& z, const ParameterVector& th) {
        const auto nn = z.u.size();
        Eigen::MatrixXd j = Eigen::MatrixXd::Zero(nn, nn + 1);
        const double s = std::sin(z.p), c = std::cos(z.p);
        j(0, 0) = -(th[0] * s * s + 1.0);
        j(0, nn) = 2.0 * s * c * (1.0 - th[0] * z.u[0]);
        for (Eigen::Index n = 1; n < nn; ++n) {
          double mu = 0.0;
          for (int i = slices[static_cast<std::size_t>(n)].first; i < slices[static_cast<std::size_t>(n)].second; ++i)
            mu += th[i];
          j(n, n - 1) = 1.0;
          j(n, n) = -(mu * mu + 1.0);
        }
        return j;
      },
      [slices](const StatePoint& z, const ParameterVector& th) {
        const auto nn = z.u.size();
        Eigen::MatrixXd j = Eigen::MatrixXd::Zero(nn, th.size());
        const double s = std::sin(z.p);
        j(0, 0) = -s * s * z.u[0];
        for (Eigen::Index n = 1; n < nn; ++n) {
          const auto [first, last] = slices[static_cast<std::size_t>(n)];
          double mu = 0.0;
          for (int i = first; i < last; ++i) mu += th[i];
          for (int i = first; i < last; ++i) j(n, i) += -2.0 * mu * z.u[n];
        }
        return j;
      }};
  return m;
}

ModelDef degenerate_pair() {
  auto m = make_model(
      "degenerate-pair", 2, 2,
      [](auto u, const auto& p, auto th, auto out) {
        out[0] = u[1];
        out[1] = p + th[0] * u[0] + th[1] * u[0] * u[0] * u[0] + 2.0 * u[0] * u[1];
      },
      ParamTransform::identity, {-1.0, 1.0});
  m.closed_form = ClosedFormDerivatives{
      [](const StatePoint& z, const ParameterVector& th) {
        const double u1 = z.u[0], u2 = z.u[1];
        Eigen::MatrixXd j(2, 3);
        j << 0.0, 1.0, 0.0, th[0] + 3.0 * th[1] * u1 * u1 + 2.0 * u2, 2.0 * u1, 1.0;
        return j;
      },
      [](const StatePoint& z, const ParameterVector&) {
        const double u1 = z.u[0];
        Eigen::MatrixXd j(2, 2);
        j << 0.0, 0.0, u1, u1 * u1 * u1;
        return j;
      }};
  return m;
}

ModelDef linear() {
  auto m = make_model(
      "linear", 1, 1, [](auto u, const auto& p, auto, auto out) { out[0] = p - u[0]; }, ParamTransform::identity,
      {-1.0, 1.0});
  m.closed_form = ClosedFormDerivatives{[](const StatePoint&, const ParameterVector&) { return row({-1.0, 1.0}); },
                                        [](const StatePoint&, const ParameterVector&) { return row({0.0}); }};
  return m;
}

ModelDef by_name(std::string_view name, int states, int params) {
  if (name == "saddle-node") return saddle_node();
  if (name == "pitchfork") return pitchfork();
  if (name == "toggle" || name == "toggle-switch") return toggle_switch();
  if (name == "scaling-chain") return scaling_chain(states, params);
  if (name == "degenerate-pair") return degenerate_pair();
  if (name == "linear") return linear();
  throw UsageError("unknown model '" + std::string(name) + "'");
}

std::vector<std::string> names() {
  return {"saddle-node", "pitchfork", "toggle", "scaling-chain", "degenerate-pair", "linear"};
}

double toggle_steady_relation(double u2, double p, const ParameterVector& theta) {
  if (theta.size() != 5) throw UsageError("toggle parameters have length 5");
  const double a1 = std::pow(10.0, theta[0]);
  const double a2 = std::pow(10.0, theta[1]);
  const double mu2 = std::pow(10.0, theta[3]);
  const double up = u2 * mu2;
  const double ratio = (a2 - up) / (up - 1.0);
  if (!(ratio > 0.0) || !std::isfinite(ratio)) {
    throw OracleDomainError("u' = u2*mu2 must lie strictly between 1 and a2");
  }
  const double x2 = std::pow(p * up / mu2, 2);
  return (1.0 + x2) * std::sqrt(ratio) / (a1 + x2);
}

int toggle_cluster(const ParameterVector& theta) {
  // log10 coordinates: a < 1 iff theta < 0.
  if (theta[0] < 0.0 && theta[1] < 0.0) return 1;
  if (theta[0] > 0.0 && theta[1] > 0.0) return 2;
  return 0;
}

}  // namespace bifinfer::models
