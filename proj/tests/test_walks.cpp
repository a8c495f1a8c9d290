#include "ratlim/convolution.hpp"
#include "ratlim/kernels.hpp"
#include "ratlim/series.hpp"
#include "ratlim/walks.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace ratlim;

namespace {

WalkSpec preset(const char* name) { return *preset_walk(name); }

std::vector<Word> ball_words(const Alphabet& a, int r) {
  BallIndex b(a, r);
  std::vector<Word> out;
  for (std::int64_t i = 0; i < b.size(); ++i) out.push_back(b.word(i));
  return out;
}

}  // namespace

TEST_SUITE("walks") {
  TEST_CASE("radial projection of the lazy simple walk on T3") {
    RadialChain chain(preset("t3-lazy-iso"));
    for (int k = 1; k <= 5; ++k) {
      CHECK(chain.probability(k, k + 1) == Rational(1, 3));
      CHECK(chain.probability(k, k - 1) == Rational(1, 6));
      CHECK(chain.probability(k, k) == Rational(1, 2));
    }
    CHECK(chain.probability(0, 1) == Rational(1, 2));
    CHECK(chain.probability(0, 0) == Rational(1, 2));
    for (int k = 0; k <= 6; ++k) {
      Rational total = 0;
      for (const auto& [kn, p] : chain.row(k)) total += p;
      CHECK(total == 1);
    }
  }

  TEST_CASE("sphere intersections against the explicit tree") {
    const int q = 2;
    Alphabet t = Alphabet::tree(q);
    BallIndex ball(t, 8);
    for (int k = 0; k <= 4; ++k) {
      // any vertex at distance k; counts do not depend on the choice
      Word x = k == 0 ? Word() : ball.word(ball.count_within(k - 1));
      REQUIRE(x.length() == k);
      for (int d = 0; d <= 4; ++d)
        for (int kn = 0; kn <= 8; ++kn) {
          std::int64_t brute = 0;
          for (std::int64_t i = 0; i < ball.size(); ++i)
            if (ball.length(i) == kn && distance(x, ball.word(i)) == d) ++brute;
          CHECK(RadialChain::sphere_intersection(q, k, d, kn) == brute);
        }
    }
    CHECK_THROWS_WITH_AS(RadialChain(preset("f2-lazy-uniform")), "radial projection requires isotropy",
                         ValidationError);
  }

  TEST_CASE("radial engine equals brute-force tree convolution") {
    for (int q : {2, 3}) {
      for (auto a : {std::vector<Rational>{Rational(1, 2), Rational(1, 2)},
                     std::vector<Rational>{Rational(1, 4), Rational(1, 4), Rational(1, 2)}}) {
        WalkSpec spec = WalkSpec::isotropic(q, a);
        std::vector<Word> targets;
        for (const Word& y : ball_words(spec.alphabet(), 6))
          if (y.length() <= 6 && (targets.size() < 40 || y.length() == 6)) targets.push_back(y);
        const int n_max = spec.range() == 1 ? 8 : 4;
        auto radial = transition_series<Rational>(spec, targets, n_max);
        CHECK(radial.engine == "radial");
        for (int n = 0; n <= n_max; ++n) {
          auto law = distribution<Rational>(spec, n);
          for (std::size_t t = 0; t < targets.size(); ++t) {
            auto it = law.find(targets[t]);
            Rational brute = it == law.end() ? Rational(0) : it->second;
            CHECK(radial.values[t][static_cast<std::size_t>(n)] == brute);
          }
        }
      }
    }
  }

  TEST_CASE("n-step examples") {
    WalkSpec z = preset("z-lazy");
    WalkSpec f2 = preset("f2-lazy-uniform");
    auto zero = nstep<Rational>(f2, 0, {Word(), parse_word(f2.alphabet(), "1")});
    CHECK(zero.at(Word()).value == 1);
    CHECK(zero.at(parse_word(f2.alphabet(), "1")).value == 0);
    CHECK(nstep<Rational>(z, 2, {Word()}).at(Word()).value == Rational(3, 8));
    CHECK(nstep<Rational>(f2, 2, {Word()}).at(Word()).value == Rational(1, 5));
  }

  TEST_CASE("Chapman-Kolmogorov, exact, n + m <= 8") {
    WalkSpec f2 = preset("f2-lazy-uniform");
    const Alphabet& a = f2.alphabet();
    std::vector<std::map<Word, Rational>> law;
    for (int n = 0; n <= 8; ++n) law.push_back(distribution<Rational>(f2, n));
    for (int n = 0; n <= 8; ++n)
      for (int m = 0; n + m <= 8; ++m) {
        std::map<Word, Rational> conv;
        for (const auto& [x, p] : law[static_cast<std::size_t>(n)])
          for (const auto& [y, r] : law[static_cast<std::size_t>(m)]) conv[multiply(a, x, y)] += p * r;
        CHECK(conv == law[static_cast<std::size_t>(n + m)]);
      }
  }

  TEST_CASE("pruned mass brackets the exact value") {
    WalkSpec f2 = preset("f2-lazy-uniform");
    std::vector<Word> targets = {Word(), parse_word(f2.alphabet(), "1,2"), parse_word(f2.alphabet(), "-2,-2,1")};
    NStepOptions loose;
    loose.prune_threshold = 1e-4L;
    loose.max_pruned = 1.0L;
    auto approx = transition_series<Real>(f2, targets, 14, loose);
    auto exact = transition_series<Rational>(f2, targets, 14);
    bool pruned_something = false;
    for (int n = 0; n <= 14; ++n) {
      Real eps = approx.pruned[static_cast<std::size_t>(n)];
      if (eps > 0) pruned_something = true;
      for (std::size_t t = 0; t < targets.size(); ++t) {
        Real lo = approx.values[t][static_cast<std::size_t>(n)];
        Real truth = to_real(exact.values[t][static_cast<std::size_t>(n)]);
        CHECK(lo <= truth * (1 + 1e-15L));
        CHECK(truth <= (lo + eps) * (1 + 1e-15L));
      }
    }
    CHECK(pruned_something);
  }

  TEST_CASE("serial and parallel engines agree bit for bit") {
    WalkSpec f2 = preset("f2-lazy-uniform");
    NStepOptions serial, parallel;
    serial.execution = Execution::serial;
    parallel.execution = Execution::parallel;
    std::vector<Word> targets = {Word(), parse_word(f2.alphabet(), "1,-2")};
    auto a = transition_series<Real>(f2, targets, 20, serial);
    auto b = transition_series<Real>(f2, targets, 20, parallel);
    CHECK(a.values == b.values);
    CHECK(a.pruned == b.pruned);
    auto c = transition_series<Real>(preset("t3-lazy-iso"), {Word()}, 500, serial);
    auto d = transition_series<Real>(preset("t3-lazy-iso"), {Word()}, 500, parallel);
    CHECK(c.values == d.values);
  }

  TEST_CASE("gather step: serial reference equals the OpenMP version") {
    conv::GatherTable<Real> t;
    const std::int64_t n = 1000;
    t.weight = {0.5L, 0.25L, 0.25L};
    t.source.assign(3, std::vector<std::int64_t>(static_cast<std::size_t>(n)));
    for (std::int64_t i = 0; i < n; ++i) {
      t.source[0][static_cast<std::size_t>(i)] = i;
      t.source[1][static_cast<std::size_t>(i)] = i - 1;
      t.source[2][static_cast<std::size_t>(i)] = i + 1 < n ? i + 1 : -1;
    }
    std::vector<Real> in(static_cast<std::size_t>(n)), a(in.size()), b(in.size());
    for (std::int64_t i = 0; i < n; ++i) in[static_cast<std::size_t>(i)] = std::sin(static_cast<Real>(i));
    conv::gather_step_serial(t, in.data(), n, a.data(), n);
    conv::gather_step_parallel(t, in.data(), n, b.data(), n);
    CHECK(a == b);
  }

  TEST_CASE("ratio sequences") {
    WalkSpec z = preset("z-lazy");
    RatioSequence trivial = ratio_sequence(z, Word(), Word(), 50);
    for (Real r : trivial.ratio) CHECK(r == 1);
    RatioSequence one = ratio_sequence(z, Word(), parse_word(z.alphabet(), "1"), 4000);
    CHECK(std::fabs(one.last - 1) < 1e-3L);
    // T3: h(e, y) = phi(1) for |y| = 1
    WalkSpec t3 = preset("t3-lazy-iso");
    RatioSequence tree = ratio_sequence(t3, Word(), parse_word(t3.alphabet(), "1"), 4000);
    CHECK(std::fabs(tree.last - spherical(2, 1)) < 2e-3L);
  }

  TEST_CASE("ratio sequence skips zero denominators") {
    Alphabet z = Alphabet::free_group(1);
    WalkSpec srw = WalkSpec::finite(z, {{Word(z, {1}), Rational(1, 2)}, {Word(z, {-1}), Rational(1, 2)}});
    RatioSequence seq = ratio_sequence(srw, Word(), Word(z, {1, 1}), 20);
    CHECK(!seq.skipped.empty());
    CHECK(!seq.warnings.empty());
    for (Real r : seq.ratio) CHECK(std::isfinite(r));
  }

  TEST_CASE("ratio sequence stays below C_x") {
    WalkSpec f2 = preset("f2-lazy-uniform");
    Real rho = spectral_radius(f2).value;
    auto ee = green_series<Real>(f2, Word(), 2000).c;
    for (const Word& x : ball_words(f2.alphabet(), 2)) {
      Real cx = ratio_bound_constant(f2, x, rho);
      auto xe = green_series<Real>(f2, x, 2000).c;
      Real worst = 0;
      for (int n = 50; n <= 2000; ++n)
        worst = std::max(worst, xe[static_cast<std::size_t>(n)] / ee[static_cast<std::size_t>(n)]);
      CHECK(worst <= cx);
    }
    RatioSequence seq = ratio_sequence(f2, parse_word(f2.alphabet(), "1"), Word(), 12);
    CHECK(seq.ratio.back() <= ratio_bound_constant(f2, parse_word(f2.alphabet(), "1"), rho));
  }

  TEST_CASE("local-limit fit") {
    std::vector<Real> synthetic(2001);
    for (int n = 1; n <= 2000; ++n) synthetic[static_cast<std::size_t>(n)] = 3 * std::pow(0.9L, n) * std::pow(n, -1.5L);
    LocalLimitFit f = fit_local_limit(synthetic, {500, 2000});
    CHECK(std::fabs(f.rho_hat - 0.9L) < 1e-6L);
    CHECK(std::fabs(f.alpha_hat - 1.5L) < 1e-6L);
    CHECK(f.has_shifted);

    auto t3 = transition_series<Real>(preset("t3-lazy-iso"), {Word()}, 2000);
    LocalLimitFit tree = fit_local_limit(t3.values[0], {500, 2000});
    CHECK(std::fabs(tree.alpha_hat - 1.5L) < 0.1L);

    auto z = transition_series<Real>(preset("z-lazy"), {Word()}, 5000);
    LocalLimitFit lattice = fit_local_limit(z.values[0], {500, 5000});
    CHECK(std::fabs(lattice.rho_hat - 1) < 1e-4L);
    CHECK(std::fabs(lattice.alpha_hat - 0.5L) < 0.01L);

    CHECK_THROWS_AS(fit_local_limit(synthetic, {10, 12}), ValidationError);
    CHECK_THROWS_AS(parse_window("5"), ValidationError);
  }

  TEST_CASE("spectral radius") {
    WalkSpec p1 = WalkSpec::isotropic(2, {Rational(0), Rational(1)});
    CHECK(std::fabs(spectral_radius(p1).value - 2 * std::sqrt(2.0L) / 3) < 1e-17L);
    CHECK(std::fabs(spectral_radius(preset("t3-lazy-iso")).value - (0.5L + 0.5L * 2 * std::sqrt(2.0L) / 3)) < 1e-17L);
    CHECK(std::fabs(spectral_radius(preset("f2-lazy-uniform")).value - (1 + 2 * std::sqrt(3.0L)) / 5) < 1e-10L);
    CHECK(std::fabs(spectral_radius(preset("z-lazy")).value - 1) < 1e-12L);
  }

  TEST_CASE("walk-spec text format") {
    std::istringstream text("mode finite\nrank 2\ne 1/5\n1 1/5\n-1 1/5\n2 0.2\n-2 1/5\n");
    WalkSpec spec = parse_walk_spec(text);
    CHECK(spec.nearest_neighbour());
    CHECK(spec.symmetric());
    std::istringstream round(walk_spec_to_text(spec));
    CHECK(walk_spec_to_text(parse_walk_spec(round)) == walk_spec_to_text(spec));
    std::istringstream iso("mode isotropic\nq 2\n0 1/2\n1 1/2\n");
    CHECK(parse_walk_spec(iso).is_isotropic());
    std::istringstream bad_sum("mode finite\nrank 2\ne 1/2\n1 1/5\n-1 1/5\n2 1/5\n-2 1/5\n");
    CHECK_THROWS_AS(parse_walk_spec(bad_sum), ValidationError);
    std::istringstream bad_mode("mode weird\n");
    CHECK_THROWS_AS(parse_walk_spec(bad_mode), ValidationError);
    std::istringstream not_generating("mode finite\nrank 2\ne 1/2\n1 1/2\n");
    CHECK_THROWS_AS(parse_walk_spec(not_generating), ValidationError);
    CHECK_THROWS_AS(load_walk_spec("/nonexistent/walk.txt"), ValidationError);
  }
}
