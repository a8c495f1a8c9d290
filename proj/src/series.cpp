#include "ratlim/series.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <mutex>

namespace ratlim {

Real evaluate(const PowerSeries<Real>& s, Real z) {
  Real acc = 0;
  for (auto it = s.c.rbegin(); it != s.c.rend(); ++it) acc = acc * z + *it;
  return acc;
}

Real evaluate_derivative(const PowerSeries<Real>& s, Real z) {
  Real acc = 0;
  for (int n = s.order(); n >= 1; --n) acc = acc * z + n * s.c[static_cast<std::size_t>(n)];
  return acc;
}

nlohmann::json to_json(const PowerSeries<Real>& s) {
  nlohmann::json j;
  j["precision"] = s.precision;
  j["mantissa_bits"] = std::numeric_limits<Real>::digits;
  j["order"] = s.order();
  std::vector<double> c;
  for (Real v : s.c) c.push_back(static_cast<double>(v));
  j["coefficients"] = c;
  return j;
}

nlohmann::json to_json(const PowerSeries<Rational>& s) {
  nlohmann::json j;
  j["precision"] = s.precision;
  j["exact"] = true;
  j["order"] = s.order();
  std::vector<std::string> c;
  for (const auto& v : s.c) c.push_back(to_string(v));
  j["coefficients"] = c;
  return j;
}

FirstPassageSystem::FirstPassageSystem(const WalkSpec& spec) : alphabet_(spec.alphabet()) {
  if (!spec.nearest_neighbour())
    throw ValidationError("first-passage system needs a nearest-neighbour walk; use the matrix machinery for range " +
                          std::to_string(spec.range()));
  mu_e_ = to_real(spec.steps().identity_mass());
  for (Letter a : alphabet_.letters()) {
    mu_.push_back(to_real(spec.steps().mass(Word::trusted({a}))));
    inverse_slot_.push_back(alphabet_.slot(alphabet_.inverse(a)));
  }
}

std::vector<Real> FirstPassageSystem::apply(Real z, const std::vector<Real>& F) const {
  const int d = size();
  std::vector<Real> out(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) {
    Real back = 0;
    for (int j = 0; j < d; ++j)
      if (j != i) back += mu_[static_cast<std::size_t>(j)] * F[static_cast<std::size_t>(inverse_slot_[static_cast<std::size_t>(j)])];
    out[static_cast<std::size_t>(i)] =
        z * mu_[static_cast<std::size_t>(i)] + z * (mu_e_ + back) * F[static_cast<std::size_t>(i)];
  }
  return out;
}

RealMatrixX FirstPassageSystem::jacobian(Real z, const std::vector<Real>& F) const {
  const int d = size();
  RealMatrixX J = RealMatrixX::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    Real diag = mu_e_;
    for (int j = 0; j < d; ++j) {
      if (j == i) continue;
      int jb = inverse_slot_[static_cast<std::size_t>(j)];
      diag += mu_[static_cast<std::size_t>(j)] * F[static_cast<std::size_t>(jb)];
      J(i, jb) += z * mu_[static_cast<std::size_t>(j)] * F[static_cast<std::size_t>(i)];
    }
    J(i, i) += z * diag;
  }
  return J;
}

FirstPassageSolution FirstPassageSystem::solve(Real z, const std::vector<Real>* warm) const {
  if (z < 0) throw ValidationError("z must be >= 0");
  const int d = size();
  FirstPassageSolution out;
  out.z = z;
  std::vector<Real> x = warm ? *warm : std::vector<Real>(static_cast<std::size_t>(d), 0);
  const Real tiny = 16 * std::numeric_limits<Real>::epsilon();
  Real last_step = std::numeric_limits<Real>::infinity();
  for (int it = 0; it < 4000; ++it) {
    std::vector<Real> phi = apply(z, x);
    RealMatrixX J = jacobian(z, x);
    SubunitCertificate cert = certify_subunit_radius(J);
    if (!cert.certified) {
      out.iterations = it;
      return out;  // no finite minimal solution with a stable Jacobian
    }
    RealMatrixX A = RealMatrixX::Identity(d, d) - J;
    RealVectorX rhs(d);
    for (int i = 0; i < d; ++i) rhs(i) = phi[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(i)];
    RealVectorX delta = A.fullPivLu().solve(rhs);
    Real step = 0, scale = 1;
    for (int i = 0; i < d; ++i) {
      x[static_cast<std::size_t>(i)] += delta(i);
      step = std::max(step, std::fabs(delta(i)));
      scale = std::max(scale, std::fabs(x[static_cast<std::size_t>(i)]));
      if (!std::isfinite(x[static_cast<std::size_t>(i)]) || x[static_cast<std::size_t>(i)] > 1e12L) {
        out.iterations = it;
        return out;
      }
    }
    // converged once the Newton step reaches rounding level, or stops shrinking
    // near a singular Jacobian where rounding is amplified by 1/(1 - rho(J))
    if (step <= tiny * scale || (step <= 1e-9L * scale && step >= 0.5L * last_step)) {
      out.iterations = it + 1;
      out.converged = true;
      out.F = x;
      std::vector<Real> check = apply(z, x);
      for (int i = 0; i < d; ++i)
        out.residual = std::max(out.residual, std::fabs(check[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(i)]));
      SubunitCertificate final_cert = certify_subunit_radius(jacobian(z, x));
      out.jacobian_radius = final_cert.certified ? final_cert.bound : 1;
      out.converged = final_cert.certified;
      return out;
    }
    last_step = step;
  }
  out.iterations = 4000;
  return out;
}

std::vector<Real> FirstPassageSystem::iterate(Real z, std::vector<Real> seed, int steps) const {
  for (int k = 0; k < steps; ++k) seed = apply(z, seed);
  return seed;
}

Real FirstPassageSystem::green(Real z, const std::vector<Real>& F) const {
  Real s = mu_e_;
  for (int j = 0; j < size(); ++j)
    s += mu_[static_cast<std::size_t>(j)] * F[static_cast<std::size_t>(inverse_slot_[static_cast<std::size_t>(j)])];
  return 1 / (1 - z * s);
}

Real FirstPassageSystem::first_passage(const Word& x, const std::vector<Real>& F) const {
  Real p = 1;
  for (Letter a : x.letters()) p *= F[static_cast<std::size_t>(alphabet_.slot(a))];
  return p;
}

// ---------------------------------------------------------------------------

namespace {

template <class Scalar>
std::string precision_tag() {
  if constexpr (std::is_same_v<Scalar, Rational>) {
    return "rational";
  } else if constexpr (std::is_same_v<Scalar, Real>) {
    return "long double (" + std::to_string(std::numeric_limits<Real>::digits) + "-bit mantissa)";
  } else {
    return "mpfr (" + std::to_string(HighFloat::default_precision()) + " digits)";
  }
}

// (a * b)[m] over the first m+1 coefficients.
template <class Scalar>
Scalar convolve_at(const std::vector<Scalar>& a, const std::vector<Scalar>& b, int m) {
  Scalar acc(0);
  for (int k = 1; k < m; ++k) acc += a[static_cast<std::size_t>(k)] * b[static_cast<std::size_t>(m - k)];
  return acc;  // a[0] = b[0] = 0 for first-passage series
}

template <class Scalar>
std::vector<Scalar> multiply_truncated(const std::vector<Scalar>& a, const std::vector<Scalar>& b, int N) {
  std::vector<Scalar> out(static_cast<std::size_t>(N) + 1, Scalar(0));
  for (int i = 0; i <= N; ++i) {
    if (a[static_cast<std::size_t>(i)] == Scalar(0)) continue;
    for (int j = 0; i + j <= N; ++j) out[static_cast<std::size_t>(i + j)] += a[static_cast<std::size_t>(i)] * b[static_cast<std::size_t>(j)];
  }
  return out;
}

}  // namespace

template <class Scalar>
std::vector<PowerSeries<Scalar>> first_passage_series(const WalkSpec& spec, int N) {
  if (!spec.nearest_neighbour())
    throw ValidationError("first-passage series need a nearest-neighbour walk; use the matrix machinery for range " +
                          std::to_string(spec.range()));
  if (N < 0) throw ValidationError("series order must be >= 0");
  const Alphabet& alphabet = spec.alphabet();
  const int d = alphabet.degree();
  const Scalar mu_e = from_rational<Scalar>(spec.steps().identity_mass());
  std::vector<Scalar> mu;
  std::vector<int> inv;
  for (Letter a : alphabet.letters()) {
    mu.push_back(from_rational<Scalar>(spec.steps().mass(Word::trusted({a}))));
    inv.push_back(alphabet.slot(alphabet.inverse(a)));
  }
  std::vector<std::vector<Scalar>> f(static_cast<std::size_t>(d), std::vector<Scalar>(static_cast<std::size_t>(N) + 1, Scalar(0)));
  for (int n = 1; n <= N; ++n) {
    for (int i = 0; i < d; ++i) {
      Scalar v = n == 1 ? mu[static_cast<std::size_t>(i)] : Scalar(0);
      v += mu_e * f[static_cast<std::size_t>(i)][static_cast<std::size_t>(n - 1)];
      for (int j = 0; j < d; ++j) {
        if (j == i || mu[static_cast<std::size_t>(j)] == Scalar(0)) continue;
        v += mu[static_cast<std::size_t>(j)] *
             convolve_at(f[static_cast<std::size_t>(inv[static_cast<std::size_t>(j)])], f[static_cast<std::size_t>(i)], n - 1);
      }
      f[static_cast<std::size_t>(i)][static_cast<std::size_t>(n)] = v;
    }
  }
  std::vector<PowerSeries<Scalar>> out;
  for (int i = 0; i < d; ++i) out.push_back({std::move(f[static_cast<std::size_t>(i)]), precision_tag<Scalar>()});
  return out;
}

template <class Scalar>
PowerSeries<Scalar> series_coefficients(const WalkSpec& spec, Letter i, int N) {
  auto all = first_passage_series<Scalar>(spec, N);
  return all[static_cast<std::size_t>(spec.alphabet().slot(i))];
}

template <class Scalar>
PowerSeries<Scalar> green_series(const WalkSpec& spec, const Word& x, int N) {
  auto F = first_passage_series<Scalar>(spec, N);
  const Alphabet& alphabet = spec.alphabet();
  // h(z) = z (mu(e) + sum_j mu(a_j) F_{j^-1}(z)), G = 1 / (1 - h)
  std::vector<Scalar> h(static_cast<std::size_t>(N) + 1, Scalar(0));
  if (N >= 1) h[1] = from_rational<Scalar>(spec.steps().identity_mass());
  for (Letter a : alphabet.letters()) {
    Scalar m = from_rational<Scalar>(spec.steps().mass(Word::trusted({a})));
    if (m == Scalar(0)) continue;
    const auto& back = F[static_cast<std::size_t>(alphabet.slot(alphabet.inverse(a)))].c;
    for (int n = 1; n <= N; ++n) h[static_cast<std::size_t>(n)] += m * back[static_cast<std::size_t>(n - 1)];
  }
  std::vector<Scalar> g(static_cast<std::size_t>(N) + 1, Scalar(0));
  g[0] = Scalar(1);
  for (int n = 1; n <= N; ++n) {
    Scalar acc(0);
    for (int k = 1; k <= n; ++k) acc += h[static_cast<std::size_t>(k)] * g[static_cast<std::size_t>(n - k)];
    g[static_cast<std::size_t>(n)] = acc;
  }
  for (Letter a : x.letters()) g = multiply_truncated(F[static_cast<std::size_t>(alphabet.slot(a))].c, g, N);
  return {std::move(g), precision_tag<Scalar>()};
}

#define RATLIM_INSTANTIATE(S)                                                                            \
  template std::vector<PowerSeries<S>> first_passage_series<S>(const WalkSpec&, int);                  \
  template PowerSeries<S> series_coefficients<S>(const WalkSpec&, Letter, int);                        \
  template PowerSeries<S> green_series<S>(const WalkSpec&, const Word&, int);

RATLIM_INSTANTIATE(Real)
RATLIM_INSTANTIATE(Rational)
RATLIM_INSTANTIATE(HighFloat)
#undef RATLIM_INSTANTIATE

// ---------------------------------------------------------------------------

namespace {

std::mutex cache_mutex;
std::map<std::string, SingularityCertificate> radius_cache;
std::map<std::string, PuiseuxTable> puiseux_cache;

SingularityCertificate compute_radius(const WalkSpec& spec) {
  FirstPassageSystem sys(spec);
  SingularityCertificate cert;
  FirstPassageSolution lo_sol = sys.solve(0);
  Real lo = 0, hi = 2;
  // r exceeds 2 for walks with small spectral radius (large rank)
  while (true) {
    FirstPassageSolution s = sys.solve(hi, &lo_sol.F);
    if (!s.converged) break;
    if (hi >= 1024) throw ConvergenceError("bisection bracket not found in (0, 1024]");
    lo = hi;
    lo_sol = s;
    hi *= 2;
  }
  int steps = 0;
  while (true) {
    Real mid = lo + (hi - lo) / 2;
    if (mid <= lo || mid >= hi) break;
    FirstPassageSolution s = sys.solve(mid, &lo_sol.F);
    if (s.converged) {
      lo = mid;
      lo_sol = s;
    } else {
      hi = mid;
    }
    ++steps;
  }
  if (hi - lo > 1e-12L) throw ConvergenceError("singularity bracket wider than 1e-12");
  cert.r = lo;
  cert.lo = lo;
  cert.hi = hi;
  cert.bisection_steps = steps;
  cert.at_r = lo_sol;
  return cert;
}

struct ThreeScale {
  Real r;
  FirstPassageSolution at_r, coarse, fine;
};

constexpr Real kEpsCoarse = 1e-6L;
constexpr Real kEpsFine = 1e-8L;

ThreeScale three_scale(const WalkSpec& spec) {
  FirstPassageSystem sys(spec);
  SingularityCertificate cert = singularity_radius(spec);
  ThreeScale t{cert.r, cert.at_r, sys.solve(cert.r - kEpsCoarse), sys.solve(cert.r - kEpsFine)};
  if (!t.coarse.converged || !t.fine.converged) throw ConvergenceError("first-passage system failed just below r");
  return t;
}

struct Differenced {
  Real alpha, beta, beta_coarse, beta_fine, exponent;
};

Differenced difference(Real at_r, Real coarse, Real fine) {
  Differenced d;
  d.alpha = at_r;
  Real d1 = at_r - coarse, d2 = at_r - fine;
  d.beta_coarse = d1 / std::sqrt(kEpsCoarse);
  d.beta_fine = d2 / std::sqrt(kEpsFine);
  Real k = std::sqrt(kEpsCoarse / kEpsFine);
  d.beta = (k * d.beta_fine - d.beta_coarse) / (k - 1);
  d.exponent = (d1 > 0 && d2 > 0) ? std::log(d1 / d2) / std::log(kEpsCoarse / kEpsFine) : 0;
  return d;
}

PuiseuxData package(const std::string& target, Real r, const Differenced& d) {
  PuiseuxData p;
  p.target = target;
  p.r = r;
  p.alpha = d.alpha;
  p.beta = d.beta;
  p.beta_coarse = d.beta_coarse;
  p.beta_fine = d.beta_fine;
  p.agreement = std::fabs(d.beta_coarse - d.beta_fine) / std::fabs(d.beta_fine);
  p.exponent_check = d.exponent;
  if (!(p.exponent_check >= 0.45L && p.exponent_check <= 0.55L))
    throw ConvergenceError("not a square-root singularity at requested precision (exponent " +
                           std::to_string(static_cast<double>(p.exponent_check)) + ") for " + target);
  return p;
}

}  // namespace

SingularityCertificate singularity_radius(const WalkSpec& spec) {
  std::string key = walk_spec_to_text(spec);
  {
    std::lock_guard<std::mutex> lock(cache_mutex);
    if (auto it = radius_cache.find(key); it != radius_cache.end()) return it->second;
  }
  SingularityCertificate cert = compute_radius(spec);
  std::lock_guard<std::mutex> lock(cache_mutex);
  radius_cache.emplace(key, cert);
  return cert;
}

Real PuiseuxTable::alpha_of(const Alphabet& alphabet, const Word& x) const {
  Real a = alpha0;
  for (Letter l : x.letters()) a *= alpha[static_cast<std::size_t>(alphabet.slot(l))];
  return a;
}

Real PuiseuxTable::gamma(const Alphabet& alphabet, const Word& x) const {
  Real g = beta0 / alpha0;
  for (Letter l : x.letters()) {
    auto s = static_cast<std::size_t>(alphabet.slot(l));
    g += beta[s] / alpha[s];
  }
  return g;
}

PuiseuxTable puiseux_table(const WalkSpec& spec) {
  std::string key = walk_spec_to_text(spec);
  {
    std::lock_guard<std::mutex> lock(cache_mutex);
    if (auto it = puiseux_cache.find(key); it != puiseux_cache.end()) return it->second;
  }
  FirstPassageSystem sys(spec);
  ThreeScale t = three_scale(spec);
  PuiseuxTable table;
  table.r = t.r;
  Differenced g = difference(sys.green(t.r, t.at_r.F), sys.green(t.r - kEpsCoarse, t.coarse.F),
                             sys.green(t.r - kEpsFine, t.fine.F));
  package("G(z)", t.r, g);
  table.alpha0 = g.alpha;
  table.beta0 = g.beta;
  for (int i = 0; i < sys.size(); ++i) {
    auto s = static_cast<std::size_t>(i);
    Differenced f = difference(t.at_r.F[s], t.coarse.F[s], t.fine.F[s]);
    package("F_" + std::to_string(sys.alphabet().letter(i)), t.r, f);
    table.alpha.push_back(f.alpha);
    table.beta.push_back(f.beta);
  }
  std::lock_guard<std::mutex> lock(cache_mutex);
  puiseux_cache.emplace(key, table);
  return table;
}

PuiseuxData puiseux_extract_first_passage(const WalkSpec& spec, Letter i) {
  FirstPassageSystem sys(spec);
  auto s = static_cast<std::size_t>(sys.alphabet().slot(i));
  ThreeScale t = three_scale(spec);
  return package("F_" + std::to_string(i), t.r, difference(t.at_r.F[s], t.coarse.F[s], t.fine.F[s]));
}

PuiseuxData puiseux_extract(const WalkSpec& spec, const Word& x) {
  FirstPassageSystem sys(spec);
  ThreeScale t = three_scale(spec);
  auto value = [&](Real z, const FirstPassageSolution& s) { return sys.first_passage(x, s.F) * sys.green(z, s.F); };
  PuiseuxData p = package("G(e," + x.str() + ")", t.r,
                          difference(value(t.r, t.at_r), value(t.r - kEpsCoarse, t.coarse), value(t.r - kEpsFine, t.fine)));
  PuiseuxTable table = puiseux_table(spec);
  p.composite = true;
  p.alpha_assembled = table.alpha_of(sys.alphabet(), x);
  p.gamma = table.gamma(sys.alphabet(), x);
  p.beta_assembled = p.alpha_assembled * p.gamma;
  p.assembly_gap = std::fabs(p.beta_assembled - p.beta) / p.beta;
  return p;
}

nlohmann::json to_json(const PuiseuxData& p) {
  nlohmann::json j;
  j["target"] = p.target;
  j["precision"] = "long double";
  j["mantissa_bits"] = std::numeric_limits<Real>::digits;
  j["r"] = static_cast<double>(p.r);
  j["alpha"] = static_cast<double>(p.alpha);
  j["beta"] = static_cast<double>(p.beta);
  j["beta_coarse"] = static_cast<double>(p.beta_coarse);
  j["beta_fine"] = static_cast<double>(p.beta_fine);
  j["beta_scale_agreement"] = static_cast<double>(p.agreement);
  j["exponent_check"] = static_cast<double>(p.exponent_check);
  if (p.composite) {
    j["alpha_assembled"] = static_cast<double>(p.alpha_assembled);
    j["gamma"] = static_cast<double>(p.gamma);
    j["beta_assembled"] = static_cast<double>(p.beta_assembled);
    j["assembly_gap"] = static_cast<double>(p.assembly_gap);
  }
  return j;
}

// ---------------------------------------------------------------------------

SecondOrderGreen green_second_order(const WalkSpec& spec, const Word& x, const Word& y, Real z, Real tol,
                                    int max_shells) {
  FirstPassageSystem sys(spec);
  const Alphabet& alphabet = sys.alphabet();
  if (!(z > 0)) throw ValidationError("z must be positive");
  FirstPassageSolution sol = sys.solve(z);
  if (!sol.converged) throw ConvergenceError("first-passage system diverges at z = " + std::to_string(static_cast<double>(z)));
  const auto& F = sol.F;
  const int d = sys.size();
  Word path = multiply(alphabet, invert(alphabet, x), y);
  const int m = path.length();

  const Real G = sys.green(z, F);
  const Real Fxy = sys.first_passage(path, F);
  SecondOrderGreen out;
  out.z = z;
  out.g = Fxy * G;
  const Real unit = G * G * Fxy;

  // Excluded branch directions along the geodesic, counted with multiplicity.
  std::vector<int> excluded(static_cast<std::size_t>(d), 0);
  for (int l = 0; l < m; ++l) {
    ++excluded[static_cast<std::size_t>(alphabet.slot(path[l]))];
    ++excluded[static_cast<std::size_t>(alphabet.slot(alphabet.inverse(path[l])))];
  }
  std::vector<Real> c(static_cast<std::size_t>(d));
  std::vector<int> inv(static_cast<std::size_t>(d));
  for (int b = 0; b < d; ++b) {
    inv[static_cast<std::size_t>(b)] = alphabet.slot(alphabet.inverse(alphabet.letter(b)));
    c[static_cast<std::size_t>(b)] = F[static_cast<std::size_t>(b)] * F[static_cast<std::size_t>(inv[static_cast<std::size_t>(b)])];
  }

  Real total = (m + 1) * unit;
  std::vector<Real> W = c, next(static_cast<std::size_t>(d));
  int quiet = 0, stalled = 0;
  Real prev_inc = std::numeric_limits<Real>::infinity();
  Real ratio = 0;
  for (int shell = 1; shell <= max_shells; ++shell) {
    Real s = 0;
    for (int b = 0; b < d; ++b)
      s += (m + 1 - excluded[static_cast<std::size_t>(b)]) * W[static_cast<std::size_t>(b)];
    Real inc = unit * s;
    total += inc;
    ratio = inc / prev_inc;
    if (shell > 1 && ratio > 1 - 1e-7L) {
      if (++stalled >= 50)
        throw ConvergenceError("G2 shell increments not decreasing: z = " + std::to_string(static_cast<double>(z)) +
                               " is at or beyond the radius of convergence");
    } else {
      stalled = 0;
    }
    quiet = inc < tol * total ? quiet + 1 : 0;
    prev_inc = inc;
    out.shells = shell;
    if (quiet >= 3) break;
    Real sum = 0;
    for (int b = 0; b < d; ++b) sum += W[static_cast<std::size_t>(b)];
    for (int b = 0; b < d; ++b)
      next[static_cast<std::size_t>(b)] = c[static_cast<std::size_t>(b)] * (sum - W[static_cast<std::size_t>(inv[static_cast<std::size_t>(b)])]);
    std::swap(W, next);
    if (shell == max_shells) throw ConvergenceError("G2 shell sum did not settle within " + std::to_string(max_shells) + " shells");
  }
  out.g2 = total;
  out.tail_estimate = ratio < 1 ? prev_inc * ratio / (1 - ratio) : std::numeric_limits<Real>::infinity();
  out.phi = out.g2 / out.g;
  return out;
}

PhiRatio phi_ratio_at_radius(const WalkSpec& spec, const Word& x, const Word& y) {
  SingularityCertificate cert = singularity_radius(spec);
  PhiRatio out;
  std::vector<Real> s;
  for (int k = 0; k < 6; ++k) {
    Real delta = 1e-4L / std::pow(4.0L, k);
    Real z = cert.r * (1 - delta);
    Real num = green_second_order(spec, x, y, z).phi;
    Real den = green_second_order(spec, Word(), y, z).phi;
    out.deltas.push_back(delta);
    out.samples.push_back(num / den);
    s.push_back(std::sqrt(delta));
  }
  Extrapolation e = extrapolate_limit(s, out.samples);
  out.value = e.value;
  out.error = e.error;
  return out;
}

DerivativeCheck green_derivative_check(const WalkSpec& spec, const Word& x, const Word& y, Real z, int N) {
  const Alphabet& alphabet = spec.alphabet();
  PowerSeries<Real> g = green_series<Real>(spec, multiply(alphabet, invert(alphabet, x), y), N);
  SecondOrderGreen second = green_second_order(spec, x, y, z);
  DerivativeCheck out;
  out.series_derivative = evaluate_derivative(g, z);
  out.resolvent_derivative = (second.g2 - second.g) / z;
  out.relative_gap = std::fabs(out.series_derivative - out.resolvent_derivative) / std::fabs(out.series_derivative);
  out.g2_over_z2 = second.g2 / (z * z);
  return out;
}

}  // namespace ratlim
