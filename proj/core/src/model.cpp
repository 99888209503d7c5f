#include "bifinfer/model.hpp"

#include <cmath>
#include <sstream>

#include "bifinfer/detail/kernels.hpp"
#include "eigen_span.hpp"

namespace bifinfer {

namespace {

std::string describe(const StatePoint& z, const ParameterVector& theta) {
  std::ostringstream os;
  os.precision(17);
  os << "u=[";
  for (Eigen::Index i = 0; i < z.u.size(); ++i) os << (i ? "," : "") << z.u[i];
  os << "] p=" << z.p << " theta=[";
  for (Eigen::Index i = 0; i < theta.size(); ++i) os << (i ? "," : "") << theta[i];
  os << "]";
  return os.str();
}

}  // namespace

Eigen::VectorXd ModelDef::effective_params(const ParameterVector& theta) const {
  if (transform == ParamTransform::identity) return theta.values;
  return theta.values.unaryExpr([](double x) { return std::pow(10.0, x); });
}

StateBox ModelDef::box(const ParameterVector& theta) const {
  const Eigen::VectorXd eff = effective_params(theta);
  return u_box(std::span<const double>(eff.data(), static_cast<std::size_t>(eff.size())));
}

void check_inputs(const ModelDef& model, const StatePoint& z, const ParameterVector& theta) {
  if (z.u.size() != model.state_dim) {
    throw UsageError("state dimension " + std::to_string(z.u.size()) + " does not match model '" + model.name +
                     "' (N=" + std::to_string(model.state_dim) + ")");
  }
  if (theta.size() != model.param_dim) {
    throw UsageError("parameter dimension " + std::to_string(theta.size()) + " does not match model '" + model.name +
                     "' (M=" + std::to_string(model.param_dim) + ")");
  }
  if (!theta.finite()) throw UsageError("non-finite parameters: " + describe(z, theta));
  if (!z.u.allFinite() || !std::isfinite(z.p)) throw UsageError("non-finite state: " + describe(z, theta));
}

Eigen::VectorXd evaluate(const ModelDef& model, const StatePoint& z, const ParameterVector& theta) {
  check_inputs(model, z, theta);
  const Eigen::VectorXd zz = z.z();
  Eigen::VectorXd out(model.state_dim);
  eval_rhs<double>(model, std::span<const double>(zz.data(), static_cast<std::size_t>(zz.size())),
                   std::span<const double>(theta.values.data(), static_cast<std::size_t>(theta.size())),
                   std::span<double>(out.data(), static_cast<std::size_t>(out.size())));
  if (!out.allFinite()) throw ModelEvaluationError("non-finite rhs in model '" + model.name + "' at " + describe(z, theta));
  return out;
}

Eigen::MatrixXd differentiate(const ModelDef& model, const StatePoint& z, const ParameterVector& theta,
                              Derivative which) {
  check_inputs(model, z, theta);
  const std::size_t n = static_cast<std::size_t>(model.state_dim);
  const std::size_t mm = static_cast<std::size_t>(model.param_dim);
  const Eigen::VectorXd zz = z.z();
  const std::span<const double> zs(zz.data(), n + 1);
  const std::span<const double> ts(theta.values.data(), mm);

  Eigen::MatrixXd out;
  switch (which) {
    case Derivative::dF_du:
      out = to_eigen(detail::jacobian_z<double>(model, zs, ts)).leftCols(static_cast<Eigen::Index>(n));
      break;
    case Derivative::dF_dz:
      out = to_eigen(detail::jacobian_z<double>(model, zs, ts));
      break;
    case Derivative::dF_dtheta:
      out = to_eigen(detail::jacobian_theta<double>(model, zs, ts));
      break;
    case Derivative::ddet_dz: {
      out.resize(static_cast<Eigen::Index>(n + 1), 1);
      std::vector<double> dir(n + 1, 0.0);
      for (std::size_t k = 0; k <= n; ++k) {
        dir.assign(n + 1, 0.0);
        dir[k] = 1.0;
        out(static_cast<Eigen::Index>(k), 0) = detail::det_along<double>(model, zs, ts, dir, {}).d;
      }
      break;
    }
    case Derivative::ddet_dtheta: {
      out.resize(static_cast<Eigen::Index>(mm), 1);
      std::vector<double> dir(mm, 0.0);
      for (std::size_t k = 0; k < mm; ++k) {
        dir.assign(mm, 0.0);
        dir[k] = 1.0;
        out(static_cast<Eigen::Index>(k), 0) = detail::det_along<double>(model, zs, ts, {}, dir).d;
      }
      break;
    }
    case Derivative::d2F_dz2: {
      out.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>((n + 1) * (n + 1)));
      std::vector<D1> zd(n + 1);
      std::vector<D1> td(mm);
      for (std::size_t i = 0; i < mm; ++i) td[i] = D1(ts[i]);
      for (std::size_t a = 0; a <= n; ++a) {
        for (std::size_t i = 0; i <= n; ++i) zd[i] = D1(zs[i], i == a ? 1.0 : 0.0);
        const auto jac = detail::jacobian_z<D1>(model, zd, td);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t b = 0; b <= n; ++b)
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(a * (n + 1) + b)) = jac(i, b).d;
      }
      break;
    }
    case Derivative::d2F_dz_dtheta: {
      out.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>((n + 1) * mm));
      std::vector<D1> zd(n + 1);
      std::vector<D1> td(mm);
      for (std::size_t a = 0; a <= n; ++a) {
        for (std::size_t i = 0; i <= n; ++i) zd[i] = D1(zs[i], i == a ? 1.0 : 0.0);
        for (std::size_t i = 0; i < mm; ++i) td[i] = D1(ts[i]);
        const auto jt = detail::jacobian_theta<D1>(model, zd, td);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t b = 0; b < mm; ++b)
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(a * mm + b)) = jt(i, b).d;
      }
      break;
    }
    default:
      throw UsageError("unsupported derivative selector");
  }
  if (!out.allFinite()) {
    throw ModelEvaluationError("non-finite derivative in model '" + model.name + "' at " + describe(z, theta));
  }
  return out;
}

}  // namespace bifinfer
