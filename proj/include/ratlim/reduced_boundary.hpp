#pragma once

#include "ratlim/kernels.hpp"
#include "ratlim/products.hpp"
#include "ratlim/walks.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace ratlim {

// Finite-resolution reading of R_mu = { y : H(., y) = H(., e) } on a candidate ball.
struct EquivalenceReport {
  int probe_radius = 0;
  int candidate_radius = 0;
  Real tol = 0;
  std::vector<std::string> candidates;
  std::vector<Real> deviation;  // max over probes of |H(x,y) - H(x,e)| / H(x,e)
  std::vector<std::vector<int>> classes;
  std::vector<int> members;  // indices of candidates equivalent to e
  std::vector<std::string> R_mu_members;
  bool inverse_closed = true;  // members closed under inverses that stay in the candidate ball
  bool product_closed = true;  // members closed under products that stay in the candidate ball
  std::string statement;

  nlohmann::json to_json() const;
};

EquivalenceReport detect_R_mu(const WalkSpec& spec, int candidate_radius, int probe_radius, Real tol = 1e-6L);
// Candidates and probes range over the product of the two factor balls.
EquivalenceReport detect_R_mu(const ProductWalk& pw, int candidate_radius, int probe_radius, Real tol = 1e-6L);

// One row per (x, class); entries outside the candidate set pass through unchanged.
KernelTable reduced_kernel_table(const EquivalenceReport& report, const KernelTable& table);

}  // namespace ratlim
