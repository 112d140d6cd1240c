#pragma once

#include <complex>
#include <numbers>

#include <Eigen/Dense>

namespace mimoshape {

using Complex = std::complex<double>;
using RVector = Eigen::VectorXd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using CMatrix = Eigen::MatrixXcd;

inline constexpr double kLn2 = std::numbers::ln2;

}  // namespace mimoshape
