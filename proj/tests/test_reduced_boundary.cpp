#include "ratlim/reduced_boundary.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

using namespace ratlim;

namespace {

std::set<std::string> member_set(const EquivalenceReport& r) {
  return {r.R_mu_members.begin(), r.R_mu_members.end()};
}

KernelTable grid_table(const ProductWalk& pw, int probe_radius, int candidate_radius) {
  ProductKernel k(pw);
  BallIndex p1(pw.first.alphabet(), probe_radius), p2(pw.second.alphabet(), probe_radius);
  BallIndex c1(pw.first.alphabet(), candidate_radius), c2(pw.second.alphabet(), candidate_radius);
  KernelTable t;
  t.kernel_id = "H";
  for (std::int64_t a = 0; a < p1.size(); ++a)
    for (std::int64_t b = 0; b < p2.size(); ++b) {
      ProductElement x{p1.word(a), p2.word(b)};
      for (std::int64_t c = 0; c < c1.size(); ++c)
        for (std::int64_t d = 0; d < c2.size(); ++d) {
          ProductElement y{c1.word(c), c2.word(d)};
          t.entries.push_back({product_element_str(x), product_element_str(y), -1, k.value(x, y), 0, true});
        }
    }
  return t;
}

}  // namespace

TEST_SUITE("reduced_boundary") {
  TEST_CASE("free group: only the identity") {
    EquivalenceReport r = detect_R_mu(*preset_walk("f2-lazy-uniform"), 4, 4);
    CHECK(r.R_mu_members == std::vector<std::string>{"e"});
    CHECK(r.members == std::vector<int>{0});
    CHECK(r.classes.size() == r.candidates.size());
    CHECK(r.inverse_closed);
    CHECK(r.statement.find("no non-trivial member") != std::string::npos);
    for (std::size_t i = 1; i < r.deviation.size(); ++i) CHECK(r.deviation[i] > 1e-6L);
  }

  TEST_CASE("non-membership persists as the probe ball grows") {
    WalkSpec spec = *preset_walk("f2-lazy-uniform");
    for (int p = 2; p <= 4; ++p) CHECK(detect_R_mu(spec, 3, p).R_mu_members.size() == 1);
  }

  TEST_CASE("T3 x Z: the lattice coordinate is invisible") {
    ProductWalk pw = *preset_product("t3xZ");
    EquivalenceReport r = detect_R_mu(pw, 4, 4);
    std::set<std::string> expected;
    BallIndex z(pw.second.alphabet(), 4);
    for (std::int64_t i = 0; i < z.size(); ++i) expected.insert("e|" + z.word(i).str());
    CHECK(member_set(r) == expected);
    CHECK(r.inverse_closed);
    CHECK(r.product_closed);
    CHECK(std::find(r.R_mu_members.begin(), r.R_mu_members.end(), "e|e") != r.R_mu_members.end());
  }

  TEST_CASE("membership is monotone in tol") {
    ProductWalk pw = *preset_product("t3xZ");
    std::set<std::string> prev;
    for (Real tol : {1e-12L, 1e-6L, 1e-2L, 0.5L}) {
      auto m = member_set(detect_R_mu(pw, 2, 2, tol));
      CHECK(std::includes(m.begin(), m.end(), prev.begin(), prev.end()));
      prev = m;
    }
    WalkSpec f2 = *preset_walk("f2-lazy-uniform");
    std::set<std::string> prev_f;
    for (Real tol : {1e-12L, 1e-6L, 0.1L, 0.9L}) {
      auto m = member_set(detect_R_mu(f2, 2, 2, tol));
      CHECK(std::includes(m.begin(), m.end(), prev_f.begin(), prev_f.end()));
      CHECK(m.count("e") == 1);
      prev_f = m;
    }
  }

  TEST_CASE("reduced tables") {
    // trivial R_mu: unchanged up to the id
    WalkSpec f2 = *preset_walk("f2-lazy-uniform");
    EquivalenceReport trivial = detect_R_mu(f2, 1, 1);
    auto kernel = make_ratio_kernel(f2);
    KernelTable t;
    t.kernel_id = "H";
    BallIndex ball(f2.alphabet(), 1);
    for (std::int64_t i = 0; i < ball.size(); ++i)
      for (std::int64_t j = 0; j < ball.size(); ++j)
        t.entries.push_back({ball.word(i).str(), ball.word(j).str(), -1, kernel->value(ball.word(i), ball.word(j)), 0, true});
    KernelTable same = reduced_kernel_table(trivial, t);
    CHECK(same.entries.size() == t.entries.size());
    CHECK(same.kernel_id == "H (reduced)");

    // product instance: indexed by the tree coordinate; the probe ball must reach the candidates
    // to separate tree words sharing a first letter
    ProductWalk pw = *preset_product("t3xZ");
    EquivalenceReport r = detect_R_mu(pw, 2, 2);
    KernelTable grid = grid_table(pw, 1, 2);
    KernelTable reduced = reduced_kernel_table(r, grid);
    BallIndex t1(pw.first.alphabet(), 2), p1(pw.first.alphabet(), 1), p2(pw.second.alphabet(), 1);
    CHECK(r.classes.size() == static_cast<std::size_t>(t1.size()));
    CHECK(reduced.entries.size() == static_cast<std::size_t>(p1.size() * p2.size() * t1.size()));

    // lattice walk: one class
    EquivalenceReport lattice = detect_R_mu(*preset_walk("z-lazy"), 3, 3);
    CHECK(lattice.classes.size() == 1);
    CHECK(lattice.R_mu_members.size() == lattice.candidates.size());

    EquivalenceReport wrong;
    wrong.tol = 1e-6L;
    wrong.candidates = {"1", "2"};
    wrong.classes = {{0, 1}};
    KernelTable bad;
    bad.entries.push_back({"e", "1", -1, 1.0L, 0, true});
    bad.entries.push_back({"e", "2", -1, 1.5L, 0, true});
    bad.entries.push_back({"e", "3", -1, 2.0L, 0, true});
    CHECK_THROWS_WITH_AS(reduced_kernel_table(wrong, bad), doctest::Contains("classes were wrong"), ValidationError);
    bad.entries[1].value = 1.0L;
    KernelTable ok = reduced_kernel_table(wrong, bad);
    CHECK(ok.entries.size() == 2);
    CHECK(ok.entries[1].y_or_prefix == "3");
  }

  TEST_CASE("members running to infinity shadow the end") {
    ProductWalk pw = *preset_product("t3xZ");
    ProductKernel k(pw);
    EndPrefix plus = EndPrefix::periodic(pw.second.alphabet(), {1}, 30);
    BallIndex p1(pw.first.alphabet(), 2), p2(pw.second.alphabet(), 2);
    for (int m = 1; m <= 4; ++m) {
      Word y2 = plus.vertex(m);
      for (std::int64_t a = 0; a < p1.size(); ++a)
        for (std::int64_t b = 0; b < p2.size(); ++b) {
          ProductElement x{p1.word(a), p2.word(b)};
          Real finite = k.value(x, ProductElement{Word(), y2});
          Real end = k.value(x, ProductPoint{Word(), plus}).value;
          CHECK(std::fabs(finite - end) <= 1e-6L * end);
        }
    }
  }

  TEST_CASE("report JSON") {
    EquivalenceReport r = detect_R_mu(*preset_walk("f2-lazy-uniform"), 1, 1);
    auto j = r.to_json();
    CHECK(j["schema"] == 1);
    CHECK(j["R_mu_members"][0] == "e");
    CHECK(j["classes"].size() == 5);
  }
}
