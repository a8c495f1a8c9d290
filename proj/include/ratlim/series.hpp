#pragma once

#include "ratlim/linalg.hpp"
#include "ratlim/walks.hpp"
#include <json.hpp>

#include <string>
#include <vector>

namespace ratlim {

template <class Scalar>
struct PowerSeries {
  std::vector<Scalar> c;  // c[n] = coefficient of z^n
  std::string precision;  // "rational", "long double (64-bit mantissa)", ...

  int order() const { return static_cast<int>(c.size()) - 1; }
};

Real evaluate(const PowerSeries<Real>& s, Real z);
Real evaluate_derivative(const PowerSeries<Real>& s, Real z);
nlohmann::json to_json(const PowerSeries<Real>& s);
nlohmann::json to_json(const PowerSeries<Rational>& s);

struct FirstPassageSolution {
  Real z = 0;
  std::vector<Real> F;  // indexed by alphabet slot
  bool converged = false;
  int iterations = 0;
  Real residual = 0;
  // Collatz-Wielandt upper bound on the spectral radius of the Jacobian at the solution.
  Real jacobian_radius = 0;
};

// F_i(z) = F(e, a_i | z) for a nearest-neighbour walk, from
//   F_i = z mu(a_i) + z mu(e) F_i + z sum_{j != i} mu(a_j) F_{j^-1} F_i.
class FirstPassageSystem {
 public:
  explicit FirstPassageSystem(const WalkSpec& spec);

  const Alphabet& alphabet() const { return alphabet_; }
  int size() const { return alphabet_.degree(); }
  Real identity_mass() const { return mu_e_; }
  Real letter_mass(int slot) const { return mu_[static_cast<std::size_t>(slot)]; }

  std::vector<Real> apply(Real z, const std::vector<Real>& F) const;
  RealMatrixX jacobian(Real z, const std::vector<Real>& F) const;
  // Minimal nonnegative fixed point by Newton iteration from below (0 or `warm`).
  FirstPassageSolution solve(Real z, const std::vector<Real>* warm = nullptr) const;
  // Plain monotone iteration F <- apply(z, F).
  std::vector<Real> iterate(Real z, std::vector<Real> seed, int steps) const;

  Real green(Real z, const std::vector<Real>& F) const;
  Real first_passage(const Word& x, const std::vector<Real>& F) const;

 private:
  Alphabet alphabet_;
  Real mu_e_ = 0;
  std::vector<Real> mu_;
  std::vector<int> inverse_slot_;
};

// Coefficients of every F_i up to z^N (slot order).
template <class Scalar>
std::vector<PowerSeries<Scalar>> first_passage_series(const WalkSpec& spec, int N);
template <class Scalar>
PowerSeries<Scalar> series_coefficients(const WalkSpec& spec, Letter i, int N);
// G(e, x | z) up to z^N.
template <class Scalar>
PowerSeries<Scalar> green_series(const WalkSpec& spec, const Word& x, int N);

struct SingularityCertificate {
  Real r = 0;   // lower end of the final bracket: the system still converges there
  Real lo = 0;
  Real hi = 0;  // the system fails here
  int bisection_steps = 0;
  FirstPassageSolution at_r;
};

SingularityCertificate singularity_radius(const WalkSpec& spec);

struct PuiseuxData {
  std::string target;
  Real r = 0;
  Real alpha = 0;
  Real beta = 0;         // Richardson combination of the two scales
  Real beta_coarse = 0;  // eps = 1e-6
  Real beta_fine = 0;    // eps = 1e-8
  Real agreement = 0;    // |beta_coarse - beta_fine| / beta_fine
  Real exponent_check = 0;
  bool composite = false;
  Real alpha_assembled = 0;
  Real gamma = 0;
  Real beta_assembled = 0;
  Real assembly_gap = 0;  // |beta_assembled - beta| / beta
};

nlohmann::json to_json(const PuiseuxData& p);

// (alpha, beta) for G(z) (index 0 of `alpha0/beta0`) and every F_i.
struct PuiseuxTable {
  Real r = 0;
  Real alpha0 = 0, beta0 = 0;
  std::vector<Real> alpha, beta;  // by slot
  Real gamma(const Alphabet& alphabet, const Word& x) const;
  Real alpha_of(const Alphabet& alphabet, const Word& x) const;
  Real beta_of(const Alphabet& alphabet, const Word& x) const { return alpha_of(alphabet, x) * gamma(alphabet, x); }
};

PuiseuxData puiseux_extract(const WalkSpec& spec, const Word& x);
PuiseuxData puiseux_extract_first_passage(const WalkSpec& spec, Letter i);
PuiseuxTable puiseux_table(const WalkSpec& spec);

struct SecondOrderGreen {
  Real z = 0;
  Real g = 0;    // G(x, y | z)
  Real g2 = 0;   // sum_v G(x, v | z) G(v, y | z), partial sum
  Real phi = 0;  // g2 / g
  Real tail_estimate = 0;
  int shells = 0;  // tube radius around the geodesic [x, y] at which the stopping rule fired
};

// Shells are the sets of v at tree distance l from the geodesic between x and y.
SecondOrderGreen green_second_order(const WalkSpec& spec, const Word& x, const Word& y, Real z, Real tol = 1e-13L,
                                    int max_shells = 2'000'000);

struct PhiRatio {
  Real value = 0;  // lim_{z -> r-} Phi(x,y|z) / Phi(e,y|z)
  Real error = 0;
  std::vector<Real> deltas, samples;
};

PhiRatio phi_ratio_at_radius(const WalkSpec& spec, const Word& x, const Word& y);

struct DerivativeCheck {
  Real series_derivative = 0;   // from term-by-term differentiation of G(x,y|z)
  Real resolvent_derivative = 0;  // (G2 - G) / z
  Real relative_gap = 0;
  Real g2_over_z2 = 0;  // the uncorrected form G2 / z^2, for comparison
};

DerivativeCheck green_derivative_check(const WalkSpec& spec, const Word& x, const Word& y, Real z, int N = 400);

}  // namespace ratlim
