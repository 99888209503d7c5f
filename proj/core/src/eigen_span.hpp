#pragma once

#include <span>

#include <Eigen/Dense>

#include "bifinfer/dense.hpp"

namespace bifinfer {

inline std::span<const double> cspan(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

inline Eigen::MatrixXd to_eigen(const dense::Matrix<double>& a) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(a.rows()), static_cast<Eigen::Index>(a.cols()));
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = a(i, j);
  return out;
}

inline dense::Matrix<double> to_dense(const Eigen::MatrixXd& a) {
  dense::Matrix<double> out(static_cast<std::size_t>(a.rows()), static_cast<std::size_t>(a.cols()));
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) out(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = a(i, j);
  return out;
}

}  // namespace bifinfer
