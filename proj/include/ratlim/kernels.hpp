#pragma once

#include "ratlim/series.hpp"
#include "ratlim/walks.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace ratlim {

// phi(n) = (1 + (q-1)/(q+1) n) q^(-n/2)
Real spherical(int q, int n);
HighFloat spherical_high(int q, int n);

struct SphericalFunction {
  int q = 2;
  std::vector<Real> values;  // phi(0..N)
  // max_n |(1/(q+1)) phi(n-1) + (q/(q+1)) phi(n+1) - rho(P1) phi(n)| / phi(n), 1 <= n < N
  Real recurrence_residual = 0;
};

SphericalFunction spherical_function(int q, int N);

struct KernelValue {
  Real value = 0;
  Real error = 0;
  bool stabilized = false;
  int depth = -1;  // -1 for finite arguments
};

// Limit along a ray of a function of the ray index n, by Neville extrapolation in 1/n on
// samples up to `depth`; stabilized when the readings at depth-4 and depth agree within tol.
KernelValue ray_limit(const std::function<Real(int)>& sample, int first_index, int depth, Real tol = 1e-9L);

Real ratio_kernel_isotropic(int q, const Word& x, const Word& y);
// Boundary value q^(-hor(x, xi)/2) with a stabilization reading at depth-4.
KernelValue ratio_kernel_isotropic(int q, const Word& x, const EndPrefix& xi);
// Independent reading: finite-y values along the prefix, extrapolated.
KernelValue ratio_kernel_isotropic_limit(int q, const Word& x, const EndPrefix& xi);

// K(x, y | t) = F(x, y | 1/t) / F(e, y | 1/t) for finite y.
Real martin_kernel_nn(const WalkSpec& spec, const Word& x, const Word& y, Real t);
// Boundary kernel from the F-products at 1/t; t equal to rho (within 1e-12) uses alpha_i.
KernelValue martin_kernel_nn(const WalkSpec& spec, const Word& x, const EndPrefix& xi, Real t);
KernelValue martin_kernel_nn_at_rho(const WalkSpec& spec, const Word& x, const EndPrefix& xi);

// H(x, y) = beta(x^-1 y) / beta(y) from the assembled Puiseux data.
Real ratio_kernel_nn(const WalkSpec& spec, const Word& x, const Word& y);
KernelValue ratio_kernel_nn_limit(const WalkSpec& spec, const Word& x, const EndPrefix& xi);

struct GammaTelescoping {
  Real lhs = 0;  // gamma(x^-1 y) - gamma(y)
  Real rhs = 0;  // gamma(x^-1 x_m) - gamma(x_m), x_m = x ^ y
};

GammaTelescoping gamma_telescoping(const WalkSpec& spec, const Word& x, const Word& y);

// Doob transform p^f(x, y) = p(x, y) f(y) / (t f(x)).
template <class Scalar>
class DoobTransform {
 public:
  using Function = std::function<Scalar(const Word&)>;

  DoobTransform(const WalkSpec& spec, Function f, Scalar t, Real tol = 1e-9L)
      : spec_(spec), f_(std::move(f)), t_(t), tol_(tol) {}

  std::vector<std::pair<Word, Scalar>> row(const Word& x) const {
    const Alphabet& alphabet = spec_.alphabet();
    const Scalar fx = f_(x);
    if (!(fx > Scalar(0))) throw ValidationError("f is not positive at " + x.str());
    std::vector<std::pair<Word, Scalar>> out;
    Scalar pf(0);
    for (const auto& [g, p] : spec_.steps().steps) {
      Word y = multiply(alphabet, x, g);
      Scalar fy = f_(y);
      Scalar mass = from_rational<Scalar>(p);
      pf += mass * fy;
      out.emplace_back(std::move(y), mass * fy / (t_ * fx));
    }
    Scalar residual = pf - t_ * fx;
    if (residual < Scalar(0)) residual = -residual;
    if (as_long_double(Scalar(residual / fx)) > tol_) throw ValidationError("f is not t-harmonic at " + x.str());
    return out;
  }

  const WalkSpec& spec() const { return spec_; }
  Scalar t() const { return t_; }

 private:
  WalkSpec spec_;
  Function f_;
  Scalar t_;
  Real tol_;
};

struct RadialGreen {
  std::vector<Real> values;  // G_Q(x_k, e | 1) along the ray, k = 0..K
  Real tail_error = 0;       // extrapolation error of the scale-function normaliser
};

// Green function to the root of a transformed chain whose distance process is a
// birth-death chain (radial walk and radial f). Uses the scale function of the chain.
RadialGreen doob_green_to_root(const DoobTransform<Real>& Q, const EndPrefix& ray, int K);

struct HarmonicityCheck {
  Real max_residual = 0;
  Word worst;
};

// max over |x| <= radius of |sum_w p(x,w) f(w) - t f(x)| / f(x)
template <class Scalar>
HarmonicityCheck verify_t_harmonic(const WalkSpec& spec, const std::function<Scalar(const Word&)>& f, Scalar t,
                                   int radius);

using GreenFunction = std::function<Real(const Word&, const Word&)>;

// G(x, y | z) for a nearest-neighbour free-group walk.
GreenFunction nn_green_function(const WalkSpec& spec, Real z);

struct AnconaConfig {
  int min_distance = 4;
  int max_distance = 10;
  int samples_per_distance = 64;
  int max_separation = 8;
  std::uint64_t seed = 1;
};

struct AnconaReport {
  std::vector<int> distances;
  std::vector<Real> anc_min, anc_max;  // bracket of G(x,y) / (G(x,w) G(w,y)) per distance
  Real harnack = 0;                    // max (G(x',y)/G(x,y))^(1/d(x,x'))
  std::vector<int> separations;
  std::vector<Real> quadruple_deviation;  // max |G(x,y)G(x',y')/(G(x,y')G(x',y)) - 1| per separation
  Real quadruple_decay = 0;               // fitted per-unit decay factor; 0 when deviations vanish
  Real stability_spread = 0;              // max relative change of the bracket ends from min to max distance
  bool stable = false;                    // spread <= 10%
};

AnconaReport ancona_harnack_check(const Alphabet& alphabet, const GreenFunction& G, const AnconaConfig& config);

// Ratio-limit kernel on a single factor, with boundary extension.
class RatioKernel {
 public:
  virtual ~RatioKernel() = default;
  virtual const Alphabet& alphabet() const = 0;
  virtual std::string id() const = 0;
  virtual Real value(const Word& x, const Word& y) const = 0;
  virtual KernelValue boundary(const Word& x, const EndPrefix& xi) const = 0;
};

// Tree kernels for isotropic walks, Puiseux-assembled kernels for nearest-neighbour free-group
// walks, exponential kernels for rank-1 lattice walks.
std::unique_ptr<RatioKernel> make_ratio_kernel(const WalkSpec& spec);

// Exponential tilt minimising sum_k mu(k) e^(c k) for a walk on Z (rank-1 free group).
Real lattice_tilt(const WalkSpec& spec);

struct KernelEntry {
  std::string x;
  std::string y_or_prefix;
  int depth = -1;
  Real value = 0;
  Real error = 0;
  bool stabilized = true;
};

struct KernelTable {
  std::string kernel_id;
  std::vector<KernelEntry> entries;

  std::string to_csv() const;
  nlohmann::json to_json() const;
};

// C_x = 1 / (rho^k p^(k)(e, x)) with k the first time x is reachable.
Real ratio_bound_constant(const WalkSpec& spec, const Word& x, Real rho);

}  // namespace ratlim
