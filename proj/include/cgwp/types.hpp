#pragma once

#include <complex>
#include <cstddef>

#include <Eigen/Dense>

namespace cgwp {

using cplx = std::complex<double>;

inline constexpr cplx kI{0.0, 1.0};

using RVec = Eigen::VectorXd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using CMat = Eigen::MatrixXcd;

/// Relative tolerance used for the symmetry invariants of width matrices.
inline constexpr double kTolSym = 1e-12;

}  // namespace cgwp
