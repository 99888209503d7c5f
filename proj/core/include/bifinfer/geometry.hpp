#pragma once

#include <Eigen/Dense>

#include "bifinfer/diagram.hpp"
#include "bifinfer/model.hpp"

namespace bifinfer::geometry {

inline constexpr double kEpsDen = 1e-12;

struct Tangent {
  Eigen::VectorXd raw;   // sum_i e_i (-1)^i det(dF/dz with column i removed)
  Eigen::VectorXd unit;  // raw / |raw|
};

/// Tangent field from signed minor determinants of the N x (N+1) Jacobian.
/// Throws DegenerateGeometryError if dF/dz has rank < N.
Tangent tangent_field(const ModelDef& model, const ParameterVector& theta, const StatePoint& z);

/// Unit nullspace of dF/dz from a Householder QR of its transpose, oriented
/// so the p component is non-negative (first non-zero component on ties).
Eigen::VectorXd tangent_qr(const ModelDef& model, const ParameterVector& theta, const StatePoint& z);

/// det(dF/du) via LU with partial pivoting.
double determinant(const ModelDef& model, const ParameterVector& theta, const StatePoint& z);

/// Unit-tangent directional derivative of det(dF/du), tangent oriented as in tangent_field.
double directional_det_derivative(const ModelDef& model, const ParameterVector& theta, const StatePoint& z);

/// phi = (1 + |det| / (|slope| + eps_den))^-1.
double bifurcation_measure(double det, double slope, double eps_den = kEpsDen);
double bifurcation_measure(const ModelDef& model, const ParameterVector& theta, const StatePoint& z,
                           double eps_den = kEpsDen);

struct DeformationField {
  Eigen::MatrixXd matrix;  // (N+1) x M
};

/// Normal deformation dz/dtheta = -J^T (J J^T)^{-1} dF/dtheta.
DeformationField deformation_field(const ModelDef& model, const ParameterVector& theta, const StatePoint& z);

/// Trapezoid-rule total measure over all branches. Throws UndefinedMeasureError
/// for a diagram without any segment.
double total_measure(const Diagram& diagram);

struct MeasureGradient {
  double value = 0.0;
  Eigen::VectorXd grad;
};

/// Generalised Leibniz rule for d(total measure)/dtheta on the traced diagram,
/// without re-tracing. Per sample it integrates the total derivative of phi
/// along the normal deformation plus phi times the stretch T.(dV/dz).T; the
/// normalising arclength contributes its own stretch term. Ends that sit on
/// the window or state-box boundary add the sliding-endpoint term.
MeasureGradient grad_total_measure(const ModelDef& model, const ParameterVector& theta, const Diagram& diagram);

}  // namespace bifinfer::geometry
