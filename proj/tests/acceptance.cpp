#include "ratlim/kernels.hpp"
#include "ratlim/matrix_boundary.hpp"
#include "ratlim/products.hpp"
#include "ratlim/reduced_boundary.hpp"
#include "ratlim/report.hpp"
#include "ratlim/series.hpp"
#include "ratlim/walks.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace ratlim;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Collects named checks; the first failure is what the summary line reports.
class Checks {
 public:
  void require(bool ok, const std::string& what) {
    if (!ok && pass_) first_failure_ = what;
    pass_ = pass_ && ok;
    if (ok) notes_.push_back(what);
  }
  void note(const std::string& what) { notes_.push_back(what); }
  Outcome done() const {
    Outcome o;
    o.pass = pass_;
    if (!pass_) {
      o.detail = first_failure_;
      return o;
    }
    for (std::size_t i = 0; i < notes_.size(); ++i) o.detail += (i ? "; " : "") + notes_[i];
    return o;
  }

 private:
  bool pass_ = true;
  std::string first_failure_;
  std::vector<std::string> notes_;
};

std::string fmt(Real v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3Lg", v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

WalkSpec f2() { return *preset_walk("f2-lazy-uniform"); }

Outcome tree_kernel() {
  auto t0 = std::chrono::steady_clock::now();
  Alphabet t = Alphabet::tree(2);
  EndPrefix xi = EndPrefix::periodic(t, {1, 2}, 30);
  BallIndex ball(t, 3);
  Real worst = 0;
  for (std::int64_t i = 0; i < ball.size(); ++i) {
    Word x = ball.word(i);
    Real closed = std::pow(2.0L, -horocycle(x, xi) / 2.0L);
    Real value = ratio_kernel_isotropic_limit(2, x, xi).value;
    worst = std::max(worst, std::fabs(value - closed) / closed);
  }
  double secs = seconds_since(t0);
  Checks c;
  c.require(worst < 1e-6L, "max rel error " + fmt(worst) + " (< 1e-6)");
  c.require(secs < 1, "runtime " + fmt(secs) + " s (< 1 s)");
  return c.done();
}

Outcome spherical_eigenfunction() {
  Checks c;
  Real worst = 0, worst_rho = 0;
  for (int q : {2, 3, 4}) {
    SphericalFunction s = spherical_function(q, 51);
    Real rho1 = simple_walk_spectral_radius(q);
    for (int n = 1; n <= 50; ++n) {
      Real lhs = s.values[static_cast<std::size_t>(n - 1)] / (q + 1) + q * s.values[static_cast<std::size_t>(n + 1)] / (q + 1);
      worst = std::max(worst, std::fabs(lhs - rho1 * s.values[static_cast<std::size_t>(n)]) / s.values[static_cast<std::size_t>(n)]);
    }
    HighFloat closed = 2 * sqrt(HighFloat(q)) / (q + 1);
    Real from_transform = spectral_radius(WalkSpec::isotropic(q, {Rational(0), Rational(1)})).value;
    worst_rho = std::max(worst_rho, std::fabs(from_transform - static_cast<Real>(closed)) / static_cast<Real>(closed));
  }
  c.require(worst < 1e-10L, "recurrence residual " + fmt(worst) + " (< 1e-10)");
  c.require(worst_rho < 8 * std::numeric_limits<Real>::epsilon(), "rho(P1) vs 2 sqrt(q)/(q+1) rel " + fmt(worst_rho));
  return c.done();
}

Outcome dirichlet_decay() {
  const int q = 2;
  WalkSpec p1 = WalkSpec::isotropic(q, {Rational(0), Rational(1)});
  DoobTransform<Real> Q(p1, [](const Word& x) { return spherical(q, x.length()); }, simple_walk_spectral_radius(q));
  EndPrefix ray = EndPrefix::periodic(Alphabet::tree(q), {1, 2}, 4097);
  RadialGreen g = doob_green_to_root(Q, ray, 20);
  Real worst = 0;
  for (int k = 0; k <= 20; ++k) {
    Real expected = (2.0L * q / (q - 1)) / (1 + static_cast<Real>(q - 1) / (q + 1) * k);
    worst = std::max(worst, std::fabs(g.values[static_cast<std::size_t>(k)] - expected));
  }
  Checks c;
  c.require(worst < 1e-8L, "max abs error " + fmt(worst) + " for |x| <= 20 (< 1e-8)");
  return c.done();
}

Outcome avez_on_z() {
  auto t0 = std::chrono::steady_clock::now();
  WalkSpec z = *preset_walk("z-lazy");
  Real worst = 0;
  for (const char* x : {"1", "-1", "1,1", "-1,-1", "1,1,1", "-1,-1,-1"}) {
    RatioSequence r = ratio_sequence(z, parse_word(z.alphabet(), x), Word(), 10000);
    worst = std::max(worst, std::fabs(r.last - 1));
  }
  double secs = seconds_since(t0);
  Checks c;
  c.require(worst < 1e-2L, "max |ratio - 1| at n = 10^4 is " + fmt(worst) + " (< 1e-2)");
  c.require(secs < 5, "runtime " + fmt(secs) + " s (< 5 s)");
  return c.done();
}

LocalLimitFit f2_return_fit() {
  auto g = green_series<Real>(f2(), Word(), 2000);
  return fit_local_limit(g.c, {500, 2000});
}

Outcome free_group_singularity() {
  SingularityCertificate cert = singularity_radius(f2());
  Real closed = 5 / (1 + 2 * std::sqrt(3.0L));
  LocalLimitFit fit = f2_return_fit();
  Checks c;
  c.require(std::fabs(cert.r - closed) < 1e-10L, "|r - 5/(1+2 sqrt 3)| = " + fmt(std::fabs(cert.r - closed)) + " (< 1e-10)");
  c.require(std::fabs(1 / cert.r - fit.rho_hat) < 1e-3L,
            "|1/r - rho_hat| = " + fmt(std::fabs(1 / cert.r - fit.rho_hat)) + " (< 1e-3)");
  return c.done();
}

Outcome local_limit_exponent() {
  auto t0 = std::chrono::steady_clock::now();
  LocalLimitFit fit = f2_return_fit();
  double secs = seconds_since(t0);
  Checks c;
  c.require(fit.alpha_hat >= 1.4L && fit.alpha_hat <= 1.6L, "alpha_hat " + fmt(fit.alpha_hat) + " in [1.4, 1.6]");
  c.require(secs < 30, "runtime " + fmt(secs) + " s (< 30 s)");
  return c.done();
}

Outcome ratio_kernel_convergence() {
  WalkSpec spec = f2();
  const Alphabet& a = spec.alphabet();
  EndPrefix xi = EndPrefix::periodic(a, {1, 2}, 40);
  BallIndex ball(a, 2);
  bool monotone = true;
  Real worst_final = 0, worst_rel = 0, worst_gamma = 0;
  std::string nonmonotone;
  for (std::int64_t i = 0; i < ball.size(); ++i) {
    Word x = ball.word(i);
    const int m = common_prefix_length(x, xi.word());
    Real K = martin_kernel_nn_at_rho(spec, x, xi).value;
    Real prev = std::numeric_limits<Real>::infinity();
    for (int n = m + 1; n <= 12; ++n) {
      Word y = xi.vertex(n);
      Real gap = std::fabs(ratio_kernel_nn(spec, x, y) - K);
      if (gap > prev * (1 + 1e-12L) + 1e-15L) {
        monotone = false;
        nonmonotone = x.str();
      }
      prev = gap;
      GammaTelescoping g = gamma_telescoping(spec, x, y);
      worst_gamma = std::max(worst_gamma, std::fabs(g.lhs - g.rhs));
    }
    worst_final = std::max(worst_final, prev);
    worst_rel = std::max(worst_rel, prev / K);
  }
  Checks c;
  c.require(monotone, monotone ? "gaps decrease monotonically" : "gap not monotone for x = " + nonmonotone);
  c.require(worst_gamma < 1e-10L, "gamma telescoping max deviation " + fmt(worst_gamma) + " (< 1e-10)");
  c.require(worst_final < 1e-3L, "final gap at depth 12 is " + fmt(worst_final) + " (relative " + fmt(worst_rel) +
                                     ", needs < 1e-3)");
  return c.done();
}

Outcome matrix_cross_oracle() {
  WalkSpec spec = f2();
  PassageMachinery m(spec);
  EndPrefix xi = EndPrefix::periodic(spec.alphabet(), {1, 2}, 10 * m.D());
  BallIndex ball(spec.alphabet(), 2);
  Real worst = 0, worst_gap = 0, worst_rate = 0;
  for (std::int64_t i = 0; i < ball.size(); ++i) {
    Word x = ball.word(i);
    MatrixKernelValue v = martin_kernel_matrix(m, x, xi);
    Real closed = martin_kernel_nn_at_rho(spec, x, xi).value;
    worst = std::max(worst, std::fabs(v.value - closed) / closed);
    worst_gap = std::max(worst_gap, v.contraction.seed_gap);
    worst_rate = std::max(worst_rate, v.contraction.rate);
  }
  Checks c;
  c.require(worst < 1e-4L, "max rel gap to the alpha-product form " + fmt(worst) + " (< 1e-4)");
  c.require(worst_gap < 1e-10L, "seed gap " + fmt(worst_gap) + " (< 1e-10)");
  c.require(worst_rate < 1, "contraction rate " + fmt(worst_rate) + " (< 1)");
  return c.done();
}

Outcome cartesian_product() {
  ProductWalk pw = *preset_product("t3xZ");
  Real rho1 = spectral_radius(pw.first).value, rho2 = spectral_radius(pw.second).value;
  CartesianAsymptotics predicted = cartesian_asymptotics(pw, rho1, 1.5L, rho2, 0.5L);
  auto s = product_series<Real>(pw, ProductElement{}, 2000);
  LocalLimitFit fit = fit_local_limit(s, {500, 2000});
  bool exact = true;
  const Alphabet& t = pw.first.alphabet();
  const Alphabet& z = pw.second.alphabet();
  std::vector<ProductElement> ys{{Word(), Word()}, {parse_word(t, "1"), parse_word(z, "1")},
                                 {parse_word(t, "2,3"), parse_word(z, "-1,-1")}};
  std::vector<std::vector<Rational>> mixture;
  for (const auto& y : ys) mixture.push_back(product_series<Rational>(pw, y, 10));
  for (int n = 0; n <= 10; ++n) {
    auto law = product_distribution<Rational>(pw, n);
    for (std::size_t i = 0; i < ys.size(); ++i) {
      auto it = law.find(ys[i]);
      Rational direct = it == law.end() ? Rational(0) : it->second;
      exact = exact && mixture[i][static_cast<std::size_t>(n)] == direct;
    }
  }
  Checks c;
  c.require(std::fabs(fit.rho_hat - predicted.rho) < 1e-3L,
            "|rho_hat - (s rho1 + (1-s) rho2)| = " + fmt(std::fabs(fit.rho_hat - predicted.rho)) + " (< 1e-3)");
  c.require(exact, "binomial mixture exact for n <= 10");
  c.require(std::fabs(fit.alpha_hat - 2) <= 0.15L, "alpha_hat " + fmt(fit.alpha_hat) + " within 0.15 of 2");
  return c.done();
}

Outcome reduced_boundary() {
  EquivalenceReport free = detect_R_mu(f2(), 4, 4, 1e-6L);
  ProductWalk pw = *preset_product("t3xZ");
  EquivalenceReport prod = detect_R_mu(pw, 4, 4, 1e-6L);
  std::set<std::string> members(prod.R_mu_members.begin(), prod.R_mu_members.end());
  BallIndex zb(pw.second.alphabet(), 4);
  bool all = true;
  for (std::int64_t i = 0; i < zb.size(); ++i) all = all && members.count("e|" + zb.word(i).str());
  Checks c;
  c.require(free.R_mu_members == std::vector<std::string>{"e"},
            "F2: " + std::to_string(free.R_mu_members.size()) + " member(s) of " + std::to_string(free.candidates.size()));
  c.require(all, "t3xZ: all (e, m), |m| <= 4, are members (" + std::to_string(members.size()) + " members)");
  return c.done();
}

Outcome harmonicity() {
  Checks c;
  {
    WalkSpec t3 = *preset_walk("t3-lazy-iso");
    EndPrefix xi = EndPrefix::periodic(t3.alphabet(), {1, 2}, 30);
    std::function<Real(const Word&)> f = [&](const Word& x) { return ratio_kernel_isotropic(2, x, xi).value; };
    Real res = verify_t_harmonic<Real>(t3, f, spectral_radius(t3).value, 3).max_residual;
    c.require(res < 1e-8L, "tree kernel residual " + fmt(res));
  }
  WalkSpec spec = f2();
  Real rho = 1 / singularity_radius(spec).r;
  EndPrefix xi = EndPrefix::periodic(spec.alphabet(), {1, 2}, 40);
  {
    std::function<Real(const Word&)> f = [&](const Word& x) { return martin_kernel_nn_at_rho(spec, x, xi).value; };
    Real res = verify_t_harmonic<Real>(spec, f, rho, 3).max_residual;
    c.require(res < 1e-8L, "free-group closed-form residual " + fmt(res));
  }
  {
    PassageMachinery m(spec);
    MatrixKernelField field(m, xi, 4);
    std::function<Real(const Word&)> f = [&](const Word& x) { return field.at(x); };
    Real res = verify_t_harmonic<Real>(spec, f, 1 / m.radius(), 3).max_residual;
    c.require(res < 1e-8L, "matrix-machinery residual " + fmt(res));
  }
  {
    std::istringstream text(
        "mode finite\nrank 2\n"
        "e 1/4\n1 1/8\n-1 1/8\n2 1/8\n-2 1/8\n"
        "1,2 1/16\n-2,-1 1/16\n2,1 1/16\n-1,-2 1/16\n");
    WalkSpec two = parse_walk_spec(text);
    PassageMachinery m(two);
    EndPrefix eta = EndPrefix::periodic(two.alphabet(), {1, 2}, 12 * m.D());
    MatrixKernelField field(m, eta, 5);
    std::function<Real(const Word&)> f = [&](const Word& x) { return field.at(x); };
    Real res = verify_t_harmonic<Real>(two, f, 1 / m.radius(), 3).max_residual;
    c.require(res < 1e-8L, "matrix-machinery residual on a range-2 walk " + fmt(res));
  }
  return c.done();
}

Outcome property_suites() {
  Checks c;
  {
    Alphabet a = Alphabet::free_group(2);
    BallIndex ball(a, 4);
    const std::size_t n = static_cast<std::size_t>(ball.size());
    std::vector<Rational> theta(n * n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        theta[i * n + j] = ultrametric(a, ball.word(static_cast<std::int64_t>(i)), ball.word(static_cast<std::int64_t>(j)));
    std::size_t violations = 0;
    for (std::size_t u = 0; u < n; ++u)
      for (std::size_t v = 0; v < n; ++v)
        for (std::size_t x = 0; x < n; ++x)
          if (theta[u * n + x] > std::max(theta[u * n + v], theta[v * n + x])) ++violations;
    c.require(violations == 0, "ultrametric inequality on " + std::to_string(n) + "^3 triples");
  }
  {
    WalkSpec spec = f2();
    const Alphabet& a = spec.alphabet();
    std::vector<std::map<Word, Rational>> law;
    for (int n = 0; n <= 8; ++n) law.push_back(distribution<Rational>(spec, n));
    bool ok = true;
    for (int n = 0; n <= 8; ++n)
      for (int m = 0; n + m <= 8; ++m) {
        std::map<Word, Rational> conv;
        for (const auto& [x, p] : law[static_cast<std::size_t>(n)])
          for (const auto& [y, r] : law[static_cast<std::size_t>(m)]) conv[multiply(a, x, y)] += p * r;
        ok = ok && conv == law[static_cast<std::size_t>(n + m)];
      }
    c.require(ok, "Chapman-Kolmogorov exact for n + m <= 8");
  }
  {
    WalkSpec spec = f2();
    AnconaConfig config;
    config.min_distance = 4;
    config.max_distance = 10;
    AnconaReport rep = ancona_harnack_check(spec.alphabet(), nn_green_function(spec, singularity_radius(spec).r), config);
    c.require(rep.stable, "Ancona bracket spread " + fmt(rep.stability_spread) + " from distance 4 to 10 (<= 10%)");
  }
  {
    WalkSpec spec = f2();
    const Alphabet& a = spec.alphabet();
    Word y = EndPrefix::periodic(a, {1, 2}, 10).vertex(10);
    Real worst = 0;
    std::string at;
    BallIndex ball(a, 1);
    for (std::int64_t i = 0; i < ball.size(); ++i) {
      Word x = ball.word(i);
      PhiRatio p = phi_ratio_at_radius(spec, x, y);
      if (std::fabs(p.value - 1) > worst) {
        worst = std::fabs(p.value - 1);
        at = x.str();
      }
    }
    c.require(worst <= 0.05L, "Phi ratio max |ratio - 1| = " + fmt(worst) + " at x = " + at + " (<= 5%)");
  }
  return c.done();
}

struct Criterion {
  int id;
  std::string name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  int only = 0;
  app.add_option("--only", only, "run a single criterion (1-12)")->check(CLI::Range(1, 12));
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria{
      {1, "tree boundary kernel", tree_kernel},
      {2, "spherical eigenfunction", spherical_eigenfunction},
      {3, "Dirichlet-regularity decay", dirichlet_decay},
      {4, "Avez ratio on Z", avez_on_z},
      {5, "free-group singularity", free_group_singularity},
      {6, "local-limit exponent on F2", local_limit_exponent},
      {7, "ratio-kernel convergence", ratio_kernel_convergence},
      {8, "matrix machinery cross-oracle", matrix_cross_oracle},
      {9, "Cartesian product", cartesian_product},
      {10, "reduced boundary", reduced_boundary},
      {11, "harmonicity of boundary kernels", harmonicity},
      {12, "property suites", property_suites},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    if (only != 0 && c.id != only) continue;
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    double secs = seconds_since(t0);
    if (!o.pass) ++failures;
    std::printf("[%s] criterion %d: %s (%s) [%.2f s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
