#include "ratlim/kernels.hpp"

#include "ratlim/matrix_boundary.hpp"
#include "ratlim/report.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace ratlim {

Real spherical(int q, int n) {
  if (q < 2 || n < 0) throw ValidationError("spherical(q, n) needs q >= 2 and n >= 0");
  Real c = static_cast<Real>(q - 1) / (q + 1);
  return (1 + c * n) * std::pow(static_cast<Real>(q), -static_cast<Real>(n) / 2);
}

HighFloat spherical_high(int q, int n) {
  if (q < 2 || n < 0) throw ValidationError("spherical(q, n) needs q >= 2 and n >= 0");
  HighFloat c = HighFloat(q - 1) / (q + 1);
  return (1 + c * n) * boost::multiprecision::pow(HighFloat(q), -HighFloat(n) / 2);
}

SphericalFunction spherical_function(int q, int N) {
  SphericalFunction out;
  out.q = q;
  for (int n = 0; n <= N; ++n) out.values.push_back(spherical(q, n));
  const Real rho = simple_walk_spectral_radius(q);
  for (int n = 1; n < N; ++n) {
    const auto i = static_cast<std::size_t>(n);
    Real lhs = out.values[i - 1] / (q + 1) + q * out.values[i + 1] / (q + 1);
    out.recurrence_residual = std::max(out.recurrence_residual, std::fabs(lhs - rho * out.values[i]) / out.values[i]);
  }
  if (N >= 1) {
    // at the root all q+1 neighbours are one level out
    Real lhs = out.values[1];
    out.recurrence_residual = std::max(out.recurrence_residual, std::fabs(lhs - rho * out.values[0]));
  }
  return out;
}

KernelValue ray_limit(const std::function<Real(int)>& sample, int first_index, int depth, Real tol) {
  auto reading = [&](int top) {
    std::vector<Real> h, v;
    for (int k = 0; k < 8; ++k) {
      int n = top - 3 * k;
      if (n < first_index || n < 1) break;
      h.push_back(1.0L / n);
      v.push_back(sample(n));
    }
    if (h.size() < 3) throw ValidationError("prefix too short to resolve confluent");
    std::reverse(h.begin(), h.end());
    std::reverse(v.begin(), v.end());
    return extrapolate_limit(h, v);
  };
  KernelValue out;
  out.depth = depth;
  Extrapolation deep = reading(depth);
  out.value = deep.value;
  out.error = deep.error;
  try {
    Extrapolation shallow = reading(depth - 4);
    Real gap = std::fabs(deep.value - shallow.value);
    out.error = std::max(out.error, gap);
    out.stabilized = gap <= tol * std::fabs(deep.value);
  } catch (const ValidationError&) {
    out.stabilized = false;
  }
  return out;
}

Real ratio_kernel_isotropic(int q, const Word& x, const Word& y) {
  return spherical(q, distance(x, y)) / spherical(q, y.length());
}

KernelValue ratio_kernel_isotropic(int q, const Word& x, const EndPrefix& xi) {
  KernelValue out;
  out.depth = xi.depth();
  int hor = horocycle(x, xi);
  out.value = std::pow(static_cast<Real>(q), -static_cast<Real>(hor) / 2);
  try {
    out.stabilized = horocycle(x, xi, xi.depth() - 4) == hor;
  } catch (const ValidationError&) {
    out.stabilized = false;
  }
  return out;
}

KernelValue ratio_kernel_isotropic_limit(int q, const Word& x, const EndPrefix& xi) {
  int m = confluent(x, xi).length();
  return ray_limit([&](int n) { return ratio_kernel_isotropic(q, x, xi.vertex(n)); },
                   std::max(m + 1, x.length() + 1), xi.depth());
}

namespace {

FirstPassageSolution solve_at_t(const WalkSpec& spec, Real t) {
  FirstPassageSystem sys(spec);
  SingularityCertificate cert = singularity_radius(spec);
  Real z = 1 / t;
  if (z > cert.hi) throw ValidationError("t must be >= rho = " + std::to_string(static_cast<double>(1 / cert.r)));
  FirstPassageSolution s = sys.solve(std::min(z, cert.r));
  if (!s.converged) throw ConvergenceError("first-passage system failed at z = 1/t");
  return s;
}

KernelValue product_kernel(const Alphabet& alphabet, const Word& x, const EndPrefix& xi, const std::vector<Real>& F,
                           Real per_factor_error) {
  if (xi.depth() <= x.length())
    throw ValidationError("end prefix of depth " + std::to_string(xi.depth()) + " is too short for |x| = " +
                          std::to_string(x.length()));
  KernelValue out;
  out.depth = xi.depth();
  const int m = confluent(x, xi).length();
  Real num = 1, den = 1;
  for (int l = m; l < x.length(); ++l) num *= F[static_cast<std::size_t>(alphabet.slot(alphabet.inverse(x[l])))];
  for (int l = 0; l < m; ++l) den *= F[static_cast<std::size_t>(alphabet.slot(x[l]))];
  out.value = num / den;
  out.error = out.value * per_factor_error * x.length();
  try {
    out.stabilized = confluent(x, xi.truncated(xi.depth() - 4)).length() == m;
  } catch (const ValidationError&) {
    out.stabilized = false;
  }
  return out;
}

}  // namespace

Real martin_kernel_nn(const WalkSpec& spec, const Word& x, const Word& y, Real t) {
  FirstPassageSystem sys(spec);
  FirstPassageSolution s = solve_at_t(spec, t);
  const Alphabet& alphabet = spec.alphabet();
  return sys.first_passage(multiply(alphabet, invert(alphabet, x), y), s.F) / sys.first_passage(y, s.F);
}

KernelValue martin_kernel_nn(const WalkSpec& spec, const Word& x, const EndPrefix& xi, Real t) {
  SingularityCertificate cert = singularity_radius(spec);
  if (std::fabs(t * cert.r - 1) <= 1e-12L) return martin_kernel_nn_at_rho(spec, x, xi);
  FirstPassageSolution s = solve_at_t(spec, t);
  return product_kernel(spec.alphabet(), x, xi, s.F, 64 * std::numeric_limits<Real>::epsilon());
}

KernelValue martin_kernel_nn_at_rho(const WalkSpec& spec, const Word& x, const EndPrefix& xi) {
  FirstPassageSystem sys(spec);
  PuiseuxTable table = puiseux_table(spec);
  SingularityCertificate cert = singularity_radius(spec);
  // alpha_i read at the lower bracket end; its offset from r is beta_i sqrt(hi - lo)
  Real worst = 0;
  for (std::size_t i = 0; i < table.alpha.size(); ++i) worst = std::max(worst, table.beta[i] / table.alpha[i]);
  Real per_factor = worst * std::sqrt(std::max(cert.hi - cert.lo, std::numeric_limits<Real>::epsilon()));
  return product_kernel(spec.alphabet(), x, xi, table.alpha, per_factor);
}

Real ratio_kernel_nn(const WalkSpec& spec, const Word& x, const Word& y) {
  const Alphabet& alphabet = spec.alphabet();
  PuiseuxTable table = puiseux_table(spec);
  return table.beta_of(alphabet, multiply(alphabet, invert(alphabet, x), y)) / table.beta_of(alphabet, y);
}

KernelValue ratio_kernel_nn_limit(const WalkSpec& spec, const Word& x, const EndPrefix& xi) {
  int m = confluent(x, xi).length();
  return ray_limit([&](int n) { return ratio_kernel_nn(spec, x, xi.vertex(n)); }, std::max(m + 1, x.length() + 1),
                   xi.depth());
}

GammaTelescoping gamma_telescoping(const WalkSpec& spec, const Word& x, const Word& y) {
  const Alphabet& alphabet = spec.alphabet();
  PuiseuxTable table = puiseux_table(spec);
  Word xm = x.prefix(common_prefix_length(x, y));
  Word xinv = invert(alphabet, x);
  GammaTelescoping out;
  out.lhs = table.gamma(alphabet, multiply(alphabet, xinv, y)) - table.gamma(alphabet, y);
  out.rhs = table.gamma(alphabet, multiply(alphabet, xinv, xm)) - table.gamma(alphabet, xm);
  return out;
}

RadialGreen doob_green_to_root(const DoobTransform<Real>& Q, const EndPrefix& ray, int K) {
  static constexpr int kLevels[] = {256, 512, 1024, 2048, 4096};
  const int top = kLevels[4];
  if (ray.depth() < top + 1) throw ValidationError("ray too short for the scale-function sums (need depth " +
                                                   std::to_string(top + 1) + ")");
  if (K < 0 || K >= kLevels[0]) throw ValidationError("K out of range");
  auto split = [&](const Word& x) {
    Real up = 0, down = 0, stay = 0;
    for (const auto& [y, p] : Q.row(x)) {
      if (y.length() > x.length())
        up += p;
      else if (y.length() < x.length())
        down += p;
      else
        stay += p;
    }
    return std::array<Real, 3>{up, down, stay};
  };
  auto root = split(Word());
  std::vector<Real> partial(static_cast<std::size_t>(top) + 1);
  Real pi = 1;
  partial[0] = 1;
  for (int j = 1; j <= top; ++j) {
    auto s = split(ray.vertex(j));
    if (!(s[0] > 0)) throw ValidationError("transformed chain cannot move outward at level " + std::to_string(j));
    pi *= s[1] / s[0];
    partial[static_cast<std::size_t>(j)] = partial[static_cast<std::size_t>(j - 1)] + pi;
  }
  std::vector<Real> h, v;
  for (int J : kLevels) {
    h.push_back(1.0L / J);
    v.push_back(partial[static_cast<std::size_t>(J)]);
  }
  Extrapolation total = extrapolate_limit(h, v);
  auto hit = [&](int k) { return (total.value - partial[static_cast<std::size_t>(k - 1)]) / total.value; };
  RadialGreen out;
  Real g00 = 1 / (1 - root[2] - root[0] * hit(1));
  out.values.push_back(g00);
  for (int k = 1; k <= K; ++k) out.values.push_back(hit(k) * g00);
  out.tail_error = total.error / total.value;
  return out;
}

template <class Scalar>
HarmonicityCheck verify_t_harmonic(const WalkSpec& spec, const std::function<Scalar(const Word&)>& f, Scalar t,
                                   int radius) {
  const Alphabet& alphabet = spec.alphabet();
  BallIndex ball(alphabet, radius);
  HarmonicityCheck out;
  for (std::int64_t i = 0; i < ball.size(); ++i) {
    Word x = ball.word(i);
    Scalar acc(0);
    for (const auto& [g, p] : spec.steps().steps) acc += from_rational<Scalar>(p) * f(multiply(alphabet, x, g));
    Scalar fx = f(x);
    Scalar diff = acc - t * fx;
    if (diff < Scalar(0)) diff = -diff;
    Real rel = as_long_double(Scalar(diff / fx));
    if (rel > out.max_residual || i == 0) {
      out.max_residual = rel;
      out.worst = x;
    }
  }
  return out;
}

template HarmonicityCheck verify_t_harmonic<Real>(const WalkSpec&, const std::function<Real(const Word&)>&, Real, int);
template HarmonicityCheck verify_t_harmonic<Rational>(const WalkSpec&, const std::function<Rational(const Word&)>&,
                                                      Rational, int);

GreenFunction nn_green_function(const WalkSpec& spec, Real z) {
  FirstPassageSystem sys(spec);
  SingularityCertificate cert = singularity_radius(spec);
  if (z > cert.hi) throw ValidationError("z beyond the radius of convergence");
  FirstPassageSolution s = sys.solve(std::min(z, cert.r));
  if (!s.converged) throw ConvergenceError("first-passage system failed at z");
  Real G = sys.green(std::min(z, cert.r), s.F);
  Alphabet alphabet = spec.alphabet();
  std::vector<Real> F = s.F;
  return [alphabet, F, G](const Word& x, const Word& y) {
    Word path = multiply(alphabet, invert(alphabet, x), y);
    Real p = G;
    for (Letter a : path.letters()) p *= F[static_cast<std::size_t>(alphabet.slot(a))];
    return p;
  };
}

namespace {

Word random_word(const Alphabet& alphabet, std::mt19937_64& rng, int length, std::optional<Letter> avoid_first = {}) {
  std::vector<Letter> letters;
  for (int i = 0; i < length; ++i) {
    std::vector<Letter> options;
    for (Letter a : alphabet.letters()) {
      if (i == 0 && avoid_first && a == *avoid_first) continue;
      if (i > 0 && a == alphabet.inverse(letters.back())) continue;
      options.push_back(a);
    }
    std::uniform_int_distribution<std::size_t> pick(0, options.size() - 1);
    letters.push_back(options[pick(rng)]);
  }
  return Word::trusted(std::move(letters));
}

// Random word of the given length whose first letter does not cancel the last letter of `x`.
Word random_continuation(const Alphabet& alphabet, std::mt19937_64& rng, const Word& x, int length) {
  if (x.is_identity()) return random_word(alphabet, rng, length);
  return random_word(alphabet, rng, length, alphabet.inverse(x[x.length() - 1]));
}

}  // namespace

AnconaReport ancona_harnack_check(const Alphabet& alphabet, const GreenFunction& G, const AnconaConfig& config) {
  if (config.min_distance < 2 || config.max_distance < config.min_distance)
    throw ValidationError("ancona distances need 2 <= min <= max");
  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<int> short_len(0, 3);
  AnconaReport out;
  for (int D = config.min_distance; D <= config.max_distance; ++D) {
    Real lo = std::numeric_limits<Real>::infinity(), hi = 0;
    std::uniform_int_distribution<int> cut(1, D - 1);
    for (int s = 0; s < config.samples_per_distance; ++s) {
      Word x = random_word(alphabet, rng, short_len(rng));
      Word g = random_continuation(alphabet, rng, x, D);
      Word y = multiply(alphabet, x, g);
      Word w = multiply(alphabet, x, g.prefix(cut(rng)));
      Real ratio = G(x, y) / (G(x, w) * G(w, y));
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
    }
    out.distances.push_back(D);
    out.anc_min.push_back(lo);
    out.anc_max.push_back(hi);
  }
  std::uniform_int_distribution<int> step_len(1, 2);
  for (int s = 0; s < config.samples_per_distance; ++s) {
    Word x = random_word(alphabet, rng, short_len(rng));
    Word xp = multiply(alphabet, x, random_continuation(alphabet, rng, x, step_len(rng)));
    Word y = random_word(alphabet, rng, 2 * short_len(rng));
    int d = distance(x, xp);
    Real a = G(xp, y) / G(x, y);
    out.harnack = std::max({out.harnack, std::pow(a, 1.0L / d), std::pow(1 / a, 1.0L / d)});
  }
  for (int n = 1; n <= config.max_separation; ++n) {
    Real worst = 0;
    for (int s = 0; s < config.samples_per_distance; ++s) {
      Word u = random_word(alphabet, rng, n);
      Word x = random_word(alphabet, rng, step_len(rng), u[0]);
      Word xp = random_word(alphabet, rng, step_len(rng), u[0]);
      Word y = multiply(alphabet, u, random_continuation(alphabet, rng, u, step_len(rng)));
      Word yp = multiply(alphabet, u, random_continuation(alphabet, rng, u, step_len(rng)));
      Real q = G(x, y) * G(xp, yp) / (G(x, yp) * G(xp, y));
      worst = std::max(worst, std::fabs(q - 1));
    }
    out.separations.push_back(n);
    out.quadruple_deviation.push_back(worst);
  }
  // log-linear fit of the deviation against separation, when deviations are resolvable
  std::vector<std::pair<Real, Real>> pts;
  for (std::size_t i = 0; i < out.separations.size(); ++i)
    if (out.quadruple_deviation[i] > 1e-14L) pts.emplace_back(out.separations[i], std::log(out.quadruple_deviation[i]));
  if (pts.size() >= 2) {
    Real mx = 0, my = 0;
    for (auto [a, b] : pts) mx += a, my += b;
    mx /= pts.size();
    my /= pts.size();
    Real sxy = 0, sxx = 0;
    for (auto [a, b] : pts) sxy += (a - mx) * (b - my), sxx += (a - mx) * (a - mx);
    out.quadruple_decay = std::exp(sxy / sxx);
  }
  out.stability_spread = std::max(std::fabs(out.anc_max.back() / out.anc_max.front() - 1),
                                  std::fabs(out.anc_min.back() / out.anc_min.front() - 1));
  out.stable = out.stability_spread <= 0.1L;
  return out;
}

// ---------------------------------------------------------------------------

namespace {

class IsotropicKernel : public RatioKernel {
 public:
  explicit IsotropicKernel(int q) : q_(q), alphabet_(Alphabet::tree(q)) {}
  const Alphabet& alphabet() const override { return alphabet_; }
  std::string id() const override { return "H(tree, q=" + std::to_string(q_) + ")"; }
  Real value(const Word& x, const Word& y) const override { return ratio_kernel_isotropic(q_, x, y); }
  KernelValue boundary(const Word& x, const EndPrefix& xi) const override { return ratio_kernel_isotropic(q_, x, xi); }

 private:
  int q_;
  Alphabet alphabet_;
};

class NearestNeighbourKernel : public RatioKernel {
 public:
  explicit NearestNeighbourKernel(const WalkSpec& spec) : spec_(spec) { puiseux_table(spec_); }
  const Alphabet& alphabet() const override { return spec_.alphabet(); }
  std::string id() const override { return "H(free nearest-neighbour)"; }
  Real value(const Word& x, const Word& y) const override { return ratio_kernel_nn(spec_, x, y); }
  KernelValue boundary(const Word& x, const EndPrefix& xi) const override {
    return martin_kernel_nn_at_rho(spec_, x, xi);
  }

 private:
  WalkSpec spec_;
};

class LatticeKernel : public RatioKernel {
 public:
  explicit LatticeKernel(const WalkSpec& spec) : alphabet_(spec.alphabet()), tilt_(lattice_tilt(spec)) {}
  const Alphabet& alphabet() const override { return alphabet_; }
  std::string id() const override { return "H(lattice)"; }
  Real value(const Word& x, const Word&) const override { return std::exp(tilt_ * position(x)); }
  KernelValue boundary(const Word& x, const EndPrefix& xi) const override {
    KernelValue v;
    v.value = std::exp(tilt_ * position(x));
    v.depth = xi.depth();
    v.stabilized = true;
    return v;
  }

 private:
  static int position(const Word& x) {
    int s = 0;
    for (Letter a : x.letters()) s += a;
    return s;
  }
  Alphabet alphabet_;
  Real tilt_;
};

}  // namespace

Real lattice_tilt(const WalkSpec& spec) {
  const Alphabet& alphabet = spec.alphabet();
  if (alphabet.kind() != Alphabet::Kind::free_group || alphabet.rank() != 1)
    throw ValidationError("lattice kernel needs a walk on the rank-1 free group (Z)");
  std::vector<std::pair<int, Real>> mu;
  for (const auto& [g, p] : spec.steps().steps) {
    int k = 0;
    for (Letter a : g.letters()) k += a;
    mu.emplace_back(k, to_real(p));
  }
  auto slope = [&](Real c) {
    Real s = 0;
    for (auto [k, p] : mu) s += p * k * std::exp(c * k);
    return s;
  };
  Real lo = -40, hi = 40;
  for (int i = 0; i < 200 && hi - lo > 0; ++i) {
    Real mid = (lo + hi) / 2;
    if (mid <= lo || mid >= hi) break;
    (slope(mid) > 0 ? hi : lo) = mid;
  }
  return (lo + hi) / 2;
}

std::unique_ptr<RatioKernel> make_ratio_kernel(const WalkSpec& spec) {
  if (spec.is_isotropic()) return std::make_unique<IsotropicKernel>(spec.q());
  const Alphabet& alphabet = spec.alphabet();
  if (alphabet.kind() == Alphabet::Kind::free_group && alphabet.rank() == 1) return std::make_unique<LatticeKernel>(spec);
  if (spec.nearest_neighbour()) return std::make_unique<NearestNeighbourKernel>(spec);
  return make_matrix_ratio_kernel(spec);
}

std::string KernelTable::to_csv() const {
  std::ostringstream os;
  os << "# schema: 1\n# kernel: " << kernel_id << "\n";
  os << "x,y_or_prefix,depth,value,error,stabilized\n";
  for (const auto& e : entries)
    os << csv_quote(e.x) << ',' << csv_quote(e.y_or_prefix) << ',' << e.depth << ',' << format_real(e.value) << ','
       << format_real(e.error) << ',' << (e.stabilized ? "true" : "false") << '\n';
  return os.str();
}

nlohmann::json KernelTable::to_json() const {
  nlohmann::json j;
  j["schema"] = 1;
  j["kernel"] = kernel_id;
  j["entries"] = nlohmann::json::array();
  for (const auto& e : entries)
    j["entries"].push_back({{"x", e.x},
                            {"y_or_prefix", e.y_or_prefix},
                            {"depth", e.depth},
                            {"value", json_real(e.value)},
                            {"error", json_real(e.error)},
                            {"stabilized", e.stabilized}});
  return j;
}

Real ratio_bound_constant(const WalkSpec& spec, const Word& x, Real rho) {
  const int horizon = 4 * x.length() + 4;
  auto series = transition_series<Real>(spec, {x}, horizon);
  for (int k = 0; k <= horizon; ++k) {
    Real p = series.values[0][static_cast<std::size_t>(k)];
    if (p > 0) return 1 / (std::pow(rho, static_cast<Real>(k)) * p);
  }
  throw ValidationError(x.str() + " not reachable within " + std::to_string(horizon) + " steps");
}

}  // namespace ratlim
