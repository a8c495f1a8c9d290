#include "ratlim/products.hpp"

#include <doctest.h>

#include <cmath>

using namespace ratlim;

namespace {

EndPrefix z_end(int sign, int depth) {
  return EndPrefix::periodic(Alphabet::free_group(1), {static_cast<Letter>(sign)}, depth);
}

}  // namespace

TEST_SUITE("products") {
  TEST_CASE("kernel at the roots is 1") {
    for (const char* name : {"t3xZ", "t3xt3"}) {
      ProductWalk pw = *preset_product(name);
      ProductKernel k(pw);
      CHECK(k.value(ProductElement{}, ProductPoint{Word(), Word()}).value == doctest::Approx(1.0));
      EndPrefix xi = EndPrefix::periodic(pw.first.alphabet(), {1, 2}, 30);
      CHECK(k.value(ProductElement{}, ProductPoint{xi, Word()}).value == doctest::Approx(1.0));
    }
  }

  TEST_CASE("T3 x Z with the lattice coordinate at infinity") {
    ProductWalk pw = *preset_product("t3xZ");
    ProductKernel k(pw);
    const Alphabet& t = pw.first.alphabet();
    Word y1 = parse_word(t, "1,2,3");
    for (const char* x1s : {"e", "1", "3,1", "2,1,2"}) {
      Word x1 = parse_word(t, x1s);
      Real expected = ratio_kernel_isotropic(2, x1, y1);
      for (int sign : {1, -1}) {
        KernelValue v = k.value({x1, parse_word(pw.second.alphabet(), "1,1")}, ProductPoint{y1, z_end(sign, 40)});
        CHECK(std::fabs(v.value - expected) < 1e-12L * expected);
      }
    }
  }

  TEST_CASE("T x T with both coordinates at the boundary") {
    ProductWalk pw = *preset_product("t3xt3");
    ProductKernel k(pw);
    const Alphabet& t = pw.first.alphabet();
    EndPrefix xi1 = EndPrefix::periodic(t, {1, 2}, 30), xi2 = EndPrefix::periodic(t, {3, 1}, 30);
    for (const char* a : {"e", "1", "2,3"})
      for (const char* b : {"e", "3", "1,2"}) {
        Word x1 = parse_word(t, a), x2 = parse_word(t, b);
        KernelValue v = k.value({x1, x2}, ProductPoint{xi1, xi2});
        Real expected = ratio_kernel_isotropic(2, x1, xi1).value * ratio_kernel_isotropic(2, x2, xi2).value;
        CHECK(std::fabs(v.value - expected) < 1e-12L * expected);
      }
  }

  TEST_CASE("Cartesian asymptotic combination") {
    ProductWalk sym = ProductWalk::cartesian_product(*preset_walk("z-lazy"), *preset_walk("z-lazy"), Rational(1, 2));
    CartesianAsymptotics a = cartesian_asymptotics(sym, 0.8L, 0.5L, 0.8L, 0.5L);
    CHECK(a.rho == doctest::Approx(0.8));
    CHECK(a.theta == doctest::Approx(0.5));
    CHECK(a.C == doctest::Approx(0.5));
    ProductWalk pw = *preset_product("t3xZ");
    Real rho1 = spectral_radius(pw.first).value;
    CartesianAsymptotics b = cartesian_asymptotics(pw, rho1, 1.5L, 1, 0.5L);
    CHECK(b.alpha == 2);
    CHECK(b.rho == doctest::Approx(static_cast<double>((rho1 + 1) / 2)));
    CHECK_THROWS_AS(cartesian_asymptotics(*preset_product("t3xt3"), 1, 1, 1, 1), ValidationError);
    CHECK_THROWS_AS(ProductWalk::cartesian_product(pw.first, pw.second, Rational(1)), ValidationError);
  }

  TEST_CASE("boundary identification") {
    ProductWalk tz = *preset_product("t3xZ");
    const Alphabet& t = tz.first.alphabet();
    std::vector<ProductElement> probes;
    BallIndex b1(t, 2), b2(tz.second.alphabet(), 2);
    for (std::int64_t i = 0; i < b1.size(); ++i)
      for (std::int64_t j = 0; j < b2.size(); ++j) probes.push_back({b1.word(i), b2.word(j)});
    Word y1 = parse_word(t, "1,2");
    EndPrefix xi = EndPrefix::periodic(t, {1, 2}, 30);
    std::vector<ProductPoint> cands{{y1, z_end(1, 30)}, {y1, z_end(-1, 30)}, {xi, z_end(1, 30)}, {xi, Word()},
                                    {y1, z_end(1, 30)}};
    Identification id = identify_equivalent_boundary(ProductKernel(tz), cands, probes);
    REQUIRE(id.classes.size() == 2);
    CHECK(id.classes[0] == std::vector<int>{0, 1, 4});
    CHECK(id.classes[1] == std::vector<int>{2, 3});

    ProductWalk tt = *preset_product("t3xt3");
    EndPrefix eta = EndPrefix::periodic(t, {3, 1}, 30);
    std::vector<ProductElement> tprobes;
    for (std::int64_t i = 0; i < b1.size(); ++i)
      for (std::int64_t j = 0; j < b1.size(); ++j) tprobes.push_back({b1.word(i), b1.word(j)});
    std::vector<ProductPoint> distinct{{xi, eta}, {eta, xi}, {xi, xi}, {xi, y1}, {y1, eta}};
    Identification none = identify_equivalent_boundary(ProductKernel(tt), distinct, tprobes);
    CHECK(none.classes.size() == distinct.size());
  }

  TEST_CASE("lattice products have a single class") {
    ProductWalk zz = ProductWalk::cartesian_product(*preset_walk("z-lazy"), *preset_walk("z-lazy"), Rational(1, 3));
    const Alphabet& z = zz.first.alphabet();
    std::vector<ProductElement> probes;
    BallIndex b(z, 3);
    for (std::int64_t i = 0; i < b.size(); ++i)
      for (std::int64_t j = 0; j < b.size(); ++j) probes.push_back({b.word(i), b.word(j)});
    std::vector<ProductPoint> cands{{z_end(1, 20), z_end(1, 20)},
                                    {z_end(-1, 20), parse_word(z, "1,1,1")},
                                    {parse_word(z, "-1,-1"), z_end(-1, 20)},
                                    {parse_word(z, "1"), parse_word(z, "-1,-1,-1,-1")}};
    CHECK(identify_equivalent_boundary(ProductKernel(zz), cands, probes).classes.size() == 1);
  }

  TEST_CASE("direct product factorises exactly") {
    for (const char* name : {"z-lazy", "t3-lazy-iso"}) {
      WalkSpec f = *preset_walk(name);
      ProductWalk pw = ProductWalk::direct_product(f, f);
      int top = std::string(name) == "z-lazy" ? 10 : 5;
      for (int n = 0; n <= top; ++n) {
        auto joint = product_distribution<Rational>(pw, n);
        auto marginal = distribution<Rational>(f, n);
        for (const auto& [y, p] : joint) CHECK(p == marginal[y.first] * marginal[y.second]);
        CHECK(joint.size() == marginal.size() * marginal.size());
      }
    }
  }

  TEST_CASE("Cartesian n-step law is the binomial mixture") {
    ProductWalk pw = *preset_product("t3xZ");
    const Alphabet& t = pw.first.alphabet();
    const Alphabet& z = pw.second.alphabet();
    std::vector<ProductElement> ys{{Word(), Word()}, {parse_word(t, "1"), parse_word(z, "-1")},
                                   {parse_word(t, "1,2,3"), parse_word(z, "1,1")}};
    std::vector<std::vector<Rational>> series;
    for (const auto& y : ys) series.push_back(product_series<Rational>(pw, y, 10));
    for (int n = 0; n <= 10; ++n) {
      auto law = product_distribution<Rational>(pw, n);
      for (std::size_t i = 0; i < ys.size(); ++i) {
        auto it = law.find(ys[i]);
        Rational direct = it == law.end() ? Rational(0) : it->second;
        CHECK(series[i][static_cast<std::size_t>(n)] == direct);
      }
    }
  }

  TEST_CASE("direct product spectral radius is the product of the factors") {
    ProductWalk pw = *preset_product("t3xt3");
    Real rho1 = spectral_radius(pw.first).value;
    auto s = product_series<Real>(pw, ProductElement{}, 2000);
    LocalLimitFit fit = fit_local_limit(s, {500, 2000});
    CHECK(std::fabs(fit.rho_hat - rho1 * rho1) < 1e-3L);
    CHECK(std::fabs(fit.alpha_hat - 3) < 0.3L);
  }

  TEST_CASE("product report") {
    ProductWalk pw = *preset_product("t3xZ");
    CartesianAsymptotics a = cartesian_asymptotics(pw, 0.9L, 1.5L, 1, 0.5L);
    std::vector<ProductPoint> cands{{Word(), z_end(1, 10)}};
    Identification id;
    id.classes = {{0}};
    auto j = product_report(pw, a, cands, id);
    CHECK(j["schema"] == 1);
    CHECK(j["kind"] == "cartesian");
    CHECK(j["classes"][0][0] == "e|1,1,1,1,1,1,1,1,1,1...");
    CHECK(j["factors"].size() == 2);
  }
}
