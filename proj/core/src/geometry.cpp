#include "bifinfer/geometry.hpp"

#include <cmath>
#include <string>

#include "bifinfer/detail/kernels.hpp"
#include "eigen_span.hpp"

namespace bifinfer::geometry {

namespace {

Eigen::MatrixXd jacobian(const ModelDef& model, const ParameterVector& theta, const Eigen::VectorXd& z) {
  return to_eigen(detail::jacobian_z<double>(model, cspan(z), cspan(theta.values)));
}

void require_rank(const Eigen::MatrixXd& jac) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(jac.transpose());
  const Eigen::VectorXd diag = qr.matrixQR().diagonal().cwiseAbs();
  const double largest = diag.maxCoeff();
  if (!(largest > 0.0) || diag.minCoeff() < 1e-12 * largest) {
    throw DegenerateGeometryError("dF/dz is rank deficient; no unique tangent");
  }
}

double sign_of(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

Tangent tangent_field(const ModelDef& model, const ParameterVector& theta, const StatePoint& z) {
  check_inputs(model, z, theta);
  const Eigen::MatrixXd jac = jacobian(model, theta, z.z());
  require_rank(jac);
  const Eigen::Index n = jac.rows();
  Tangent t;
  t.raw.resize(n + 1);
  Eigen::MatrixXd minor(n, n);
  for (Eigen::Index i = 0; i <= n; ++i) {
    if (i > 0) minor.leftCols(i) = jac.leftCols(i);
    if (i < n) minor.rightCols(n - i) = jac.rightCols(n - i);
    const double det = n == 0 ? 1.0 : minor.partialPivLu().determinant();
    t.raw[i] = (i % 2 == 0 ? 1.0 : -1.0) * det;
  }
  const double norm = t.raw.norm();
  if (!(norm > 0.0)) throw DegenerateGeometryError("tangent field vanishes");
  t.unit = t.raw / norm;
  return t;
}

Eigen::VectorXd tangent_qr(const ModelDef& model, const ParameterVector& theta, const StatePoint& z) {
  const Eigen::MatrixXd jac = jacobian(model, theta, z.z());
  const Eigen::Index n = jac.rows();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(jac.transpose());
  const Eigen::VectorXd diag = qr.matrixQR().diagonal().cwiseAbs();
  const double largest = diag.maxCoeff();
  if (!(largest > 0.0) || diag.minCoeff() < 1e-12 * largest) {
    throw DegenerateGeometryError("dF/dz is rank deficient; no unique tangent");
  }
  Eigen::VectorXd e = Eigen::VectorXd::Zero(n + 1);
  e[n] = 1.0;
  Eigen::VectorXd t = qr.householderQ() * e;
  double s = sign_of(t[n]);
  for (Eigen::Index i = 0; s == 0.0 && i <= n; ++i) s = sign_of(t[i]);
  return t * (s < 0.0 ? -1.0 : 1.0) / t.norm();
}

double determinant(const ModelDef& model, const ParameterVector& theta, const StatePoint& z) {
  check_inputs(model, z, theta);
  const Eigen::MatrixXd jac = jacobian(model, theta, z.z());
  return jac.leftCols(jac.rows()).partialPivLu().determinant();
}

double directional_det_derivative(const ModelDef& model, const ParameterVector& theta, const StatePoint& z) {
  const Tangent t = tangent_field(model, theta, z);
  const Eigen::VectorXd zz = z.z();
  return detail::det_along<double>(model, cspan(zz), cspan(theta.values), cspan(t.unit), {}).d;
}

double bifurcation_measure(double det, double slope, double eps_den) {
  return 1.0 / (1.0 + std::abs(det) / (std::abs(slope) + eps_den));
}

double bifurcation_measure(const ModelDef& model, const ParameterVector& theta, const StatePoint& z, double eps_den) {
  return bifurcation_measure(determinant(model, theta, z), directional_det_derivative(model, theta, z), eps_den);
}

DeformationField deformation_field(const ModelDef& model, const ParameterVector& theta, const StatePoint& z) {
  check_inputs(model, z, theta);
  const Eigen::VectorXd zz = z.z();
  const auto jac = detail::jacobian_z<double>(model, cspan(zz), cspan(theta.values));
  const auto ft = detail::jacobian_theta<double>(model, cspan(zz), cspan(theta.values));
  dense::Matrix<double> v;
  if (!detail::normal_deformation<double>(jac, ft, v)) {
    throw DegenerateGeometryError("dF/dz is rank deficient; normal deformation undefined");
  }
  return {to_eigen(v)};
}

double total_measure(const Diagram& diagram) {
  double num = 0.0;
  double den = 0.0;
  for (const auto& b : diagram.branches) {
    for (std::size_t i = 1; i < b.samples.size(); ++i) {
      const double ds = b.samples[i].ds;
      num += 0.5 * (b.samples[i - 1].measure + b.samples[i].measure) * ds;
      den += ds;
    }
  }
  if (!(den > 0.0)) throw UndefinedMeasureError("total measure undefined: diagram has no arclength");
  return num / den;
}

namespace {

struct SampleTerms {
  double phi = 0.0;
  Eigen::VectorXd stretch;  // T.(dV_j/dz).T
  Eigen::VectorXd left;     // dphi_j + phi * stretch_j, limit from the previous sample
  Eigen::VectorXd right;    // same, limit from the next sample
  Eigen::MatrixXd deformation;
};

Eigen::VectorXd dphi_along_deformation(const ModelDef& model, const ParameterVector& theta, const BranchSample& s,
                                       const Eigen::VectorXd& z, const dense::Matrix<double>& v,
                                       detail::AbsSigns signs, double eps_den, long index) {
  const std::size_t np1 = static_cast<std::size_t>(z.size());
  const std::size_t mm = static_cast<std::size_t>(theta.size());
  Eigen::VectorXd out(static_cast<Eigen::Index>(mm));
  std::vector<D1> zd(np1);
  std::vector<D1> td(mm);
  detail::MeasureParts<D1> parts;
  for (std::size_t j = 0; j < mm; ++j) {
    for (std::size_t a = 0; a < np1; ++a) zd[a] = D1(z[static_cast<Eigen::Index>(a)], v(a, j));
    for (std::size_t b = 0; b < mm; ++b) td[b] = D1(theta[static_cast<Eigen::Index>(b)], b == j ? 1.0 : 0.0);
    if (!detail::measure_parts<D1>(model, zd, td, cspan(s.tangent), eps_den, signs, parts)) {
      throw DegenerateGeometryError("bordered tangent system singular at sample " + std::to_string(index), index);
    }
    out[static_cast<Eigen::Index>(j)] = parts.phi.d;
  }
  return out;
}

SampleTerms sample_terms(const ModelDef& model, const ParameterVector& theta, const Branch& branch, std::size_t i,
                         double eps_den, long index) {
  const BranchSample& s = branch.samples[i];
  const Eigen::VectorXd z = s.z.z();
  const std::size_t np1 = static_cast<std::size_t>(z.size());
  const std::size_t mm = static_cast<std::size_t>(theta.size());
  const auto zs = cspan(z);
  const auto ts = cspan(theta.values);

  SampleTerms out;
  out.phi = s.measure;

  const auto jac = detail::jacobian_z<double>(model, zs, ts);
  const auto ft = detail::jacobian_theta<double>(model, zs, ts);
  dense::Matrix<double> v;
  if (!detail::normal_deformation<double>(jac, ft, v)) {
    throw DegenerateGeometryError("normal deformation undefined at sample " + std::to_string(index), index);
  }
  out.deformation = to_eigen(v);

  // Stretch: derivative of the deformation field along the unit tangent, projected back on it.
  std::vector<D1> zd(np1);
  std::vector<D1> td(mm);
  for (std::size_t a = 0; a < np1; ++a) zd[a] = D1(z[static_cast<Eigen::Index>(a)], s.tangent[static_cast<Eigen::Index>(a)]);
  for (std::size_t b = 0; b < mm; ++b) td[b] = D1(theta[static_cast<Eigen::Index>(b)]);
  const auto jac_d = detail::jacobian_z<D1>(model, zd, td);
  const auto ft_d = detail::jacobian_theta<D1>(model, zd, td);
  dense::Matrix<D1> v_d;
  if (!detail::normal_deformation<D1>(jac_d, ft_d, v_d)) {
    throw DegenerateGeometryError("normal deformation undefined at sample " + std::to_string(index), index);
  }
  out.stretch.resize(static_cast<Eigen::Index>(mm));
  for (std::size_t j = 0; j < mm; ++j) {
    double acc = 0.0;
    for (std::size_t a = 0; a < np1; ++a) acc += s.tangent[static_cast<Eigen::Index>(a)] * v_d(a, j).d;
    out.stretch[static_cast<Eigen::Index>(j)] = acc;
  }

  // One-sided limits at kinks: the sign inside |det| or |slope| is taken from the neighbour.
  const auto& samples = branch.samples;
  const std::size_t prev = i > 0 ? i - 1 : i + 1;
  const std::size_t next = i + 1 < samples.size() ? i + 1 : i - 1;
  detail::AbsSigns left_signs;
  detail::AbsSigns right_signs;
  if (s.kink == Kink::det_zero) {
    left_signs.det = sign_of(samples[prev].det);
    right_signs.det = sign_of(samples[next].det);
  } else if (s.kink == Kink::slope_zero) {
    left_signs.slope = sign_of(samples[prev].slope);
    right_signs.slope = sign_of(samples[next].slope);
  }
  const Eigen::VectorXd dphi_left = dphi_along_deformation(model, theta, s, z, v, left_signs, eps_den, index);
  const Eigen::VectorXd dphi_right = s.kink == Kink::none
                                         ? dphi_left
                                         : dphi_along_deformation(model, theta, s, z, v, right_signs, eps_den, index);
  out.left = dphi_left + out.phi * out.stretch;
  out.right = dphi_right + out.phi * out.stretch;
  return out;
}

// Arclength gained at an end that slides along face `face` when the curve moves
// by the normal deformation; `outward` is the unit tangent pointing out of the branch.
Eigen::VectorXd end_slide(const Eigen::MatrixXd& deformation, const Eigen::VectorXd& outward, int face) {
  const double t = outward[face];
  if (std::abs(t) < 1e-14) throw DegenerateGeometryError("branch end is tangent to the window boundary");
  return -deformation.row(face).transpose() / t;
}

}  // namespace

MeasureGradient grad_total_measure(const ModelDef& model, const ParameterVector& theta, const Diagram& diagram) {
  const Eigen::Index mm = theta.size();
  const double eps_den = diagram.settings.eps_den;
  double num = 0.0;
  double den = 0.0;
  Eigen::VectorXd dnum = Eigen::VectorXd::Zero(mm);
  Eigen::VectorXd dden = Eigen::VectorXd::Zero(mm);

  long offset = 0;
  for (const auto& b : diagram.branches) {
    const std::size_t n = b.samples.size();
    std::vector<SampleTerms> terms;
    terms.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      terms.push_back(sample_terms(model, theta, b, i, eps_den, offset + static_cast<long>(i)));
    }
    for (std::size_t i = 1; i < n; ++i) {
      const double w = 0.5 * b.samples[i].ds;
      num += w * (terms[i - 1].phi + terms[i].phi);
      den += b.samples[i].ds;
      dnum += w * (terms[i - 1].right + terms[i].left);
      dden += w * (terms[i - 1].stretch + terms[i].stretch);
    }
    if (!b.closed && n >= 2) {
      if (b.start_face >= 0) {
        const Eigen::VectorXd slide = end_slide(terms.front().deformation, -b.samples.front().tangent, b.start_face);
        dnum += terms.front().phi * slide;
        dden += slide;
      }
      if (b.end_face >= 0) {
        const Eigen::VectorXd slide = end_slide(terms.back().deformation, b.samples.back().tangent, b.end_face);
        dnum += terms.back().phi * slide;
        dden += slide;
      }
    }
    offset += static_cast<long>(n);
  }
  if (!(den > 0.0)) throw UndefinedMeasureError("total measure undefined: diagram has no arclength");
  MeasureGradient out;
  out.value = num / den;
  out.grad = (dnum - out.value * dden) / den;
  return out;
}

}  // namespace bifinfer::geometry
