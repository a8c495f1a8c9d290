#include "ratlim/linalg.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace ratlim {

SubunitCertificate certify_subunit_radius(const RealMatrixX& J) {
  const auto n = J.rows();
  SubunitCertificate out;
  if (n == 0) {
    out.certified = true;
    out.bound = 0;
    return out;
  }
  RealMatrixX A = RealMatrixX::Identity(n, n) - J;
  Eigen::FullPivLU<RealMatrixX> lu(A);
  if (!lu.isInvertible()) return out;
  RealVectorX y = lu.solve(RealVectorX::Ones(n));
  Real worst = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!std::isfinite(y(i)) || y(i) < 1 - 1e-9L) return out;
    worst = std::max(worst, 1 - 1 / y(i));
  }
  out.certified = true;
  out.bound = worst;
  return out;
}

Real perron_root(const RealMatrixX& M) {
  if (M.rows() == 0) return 0;
  Eigen::EigenSolver<RealMatrixX> es(M, false);
  Real best = 0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) best = std::max(best, es.eigenvalues()(i).real());
  return best;
}

}  // namespace ratlim
