#pragma once

#include "ratlim/numeric.hpp"

#include <Eigen/Dense>

namespace ratlim {

using RealMatrixX = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
using RealVectorX = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

// Certificate that a nonnegative matrix J has spectral radius < 1: y = (I - J)^{-1} 1
// exists with y >= 1, so J y = y - 1 < y componentwise. `bound` is then
// max_i (J y)_i / y_i, an upper bound on the spectral radius.
struct SubunitCertificate {
  bool certified = false;
  Real bound = 1;
};

SubunitCertificate certify_subunit_radius(const RealMatrixX& J);

// Perron root of a nonnegative square matrix (largest real part eigenvalue).
Real perron_root(const RealMatrixX& M);

}  // namespace ratlim
