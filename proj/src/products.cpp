#include "ratlim/products.hpp"

#include "ratlim/report.hpp"

#include <cmath>

namespace ratlim {

ProductWalk ProductWalk::direct_product(WalkSpec a, WalkSpec b) {
  ProductWalk pw{std::move(a), std::move(b), ProductKind::direct, Rational(1, 2), ""};
  return pw;
}

ProductWalk ProductWalk::cartesian_product(WalkSpec a, WalkSpec b, Rational s) {
  if (!(s > 0 && s < 1)) throw ValidationError("cartesian weight s must lie in (0, 1)");
  ProductWalk pw{std::move(a), std::move(b), ProductKind::cartesian, s, ""};
  return pw;
}

std::string ProductWalk::describe() const {
  std::string a = first.label.empty() ? first.alphabet().describe() : first.label;
  std::string b = second.label.empty() ? second.alphabet().describe() : second.label;
  if (kind == ProductKind::direct) return "direct(" + a + ", " + b + ")";
  return "cartesian(" + a + ", " + b + ", s=" + to_string(s) + ")";
}

std::optional<ProductWalk> preset_product(const std::string& name) {
  if (name == "t3xZ") {
    ProductWalk pw = ProductWalk::cartesian_product(*preset_walk("t3-lazy-iso"), *preset_walk("z-lazy"), Rational(1, 2));
    pw.label = name;
    return pw;
  }
  if (name == "t3xt3") {
    ProductWalk pw = ProductWalk::direct_product(*preset_walk("t3-lazy-iso"), *preset_walk("t3-lazy-iso"));
    pw.label = name;
    return pw;
  }
  return std::nullopt;
}

ProductElement parse_product_element(const ProductWalk& pw, const std::string& text) {
  auto bar = text.find('|');
  if (bar == std::string::npos) throw ValidationError("product element must read x1|x2, got '" + text + "'");
  return {parse_word(pw.first.alphabet(), text.substr(0, bar)), parse_word(pw.second.alphabet(), text.substr(bar + 1))};
}

std::string product_element_str(const ProductElement& x) { return x.first.str() + "|" + x.second.str(); }

bool ProductPoint::is_boundary() const {
  return std::holds_alternative<EndPrefix>(first) || std::holds_alternative<EndPrefix>(second);
}

namespace {

std::string coordinate_str(const Coordinate& c) {
  if (const auto* w = std::get_if<Word>(&c)) return w->str();
  return std::get<EndPrefix>(c).str();
}

}  // namespace

std::string ProductPoint::str() const { return coordinate_str(first) + "|" + coordinate_str(second); }

// ---------------------------------------------------------------------------

template <class Scalar>
std::map<ProductElement, Scalar> product_distribution(const ProductWalk& pw, int n) {
  if (n < 0) throw ValidationError("n must be >= 0");
  const Alphabet& a1 = pw.first.alphabet();
  const Alphabet& a2 = pw.second.alphabet();
  std::vector<std::pair<ProductElement, Scalar>> moves;
  if (pw.kind == ProductKind::direct) {
    for (const auto& [g1, p1] : pw.first.steps().steps)
      for (const auto& [g2, p2] : pw.second.steps().steps) moves.push_back({{g1, g2}, from_rational<Scalar>(p1 * p2)});
  } else {
    for (const auto& [g1, p1] : pw.first.steps().steps) moves.push_back({{g1, Word()}, from_rational<Scalar>(pw.s * p1)});
    for (const auto& [g2, p2] : pw.second.steps().steps)
      moves.push_back({{Word(), g2}, from_rational<Scalar>((1 - pw.s) * p2)});
  }
  std::map<ProductElement, Scalar> cur{{{Word(), Word()}, Scalar(1)}};
  for (int k = 0; k < n; ++k) {
    std::map<ProductElement, Scalar> next;
    for (const auto& [x, p] : cur)
      for (const auto& [g, q] : moves) {
        ProductElement y{multiply(a1, x.first, g.first), multiply(a2, x.second, g.second)};
        auto [it, fresh] = next.emplace(std::move(y), p * q);
        if (!fresh) it->second += p * q;
      }
    cur = std::move(next);
  }
  return cur;
}

template <class Scalar>
std::vector<Scalar> product_series(const ProductWalk& pw, const ProductElement& y, int n_max,
                                   const NStepOptions& options) {
  auto s1 = transition_series<Scalar>(pw.first, {y.first}, n_max, options).values[0];
  auto s2 = transition_series<Scalar>(pw.second, {y.second}, n_max, options).values[0];
  std::vector<Scalar> out(static_cast<std::size_t>(n_max) + 1, Scalar(0));
  if (pw.kind == ProductKind::direct) {
    for (std::size_t n = 0; n < out.size(); ++n) out[n] = s1[n] * s2[n];
    return out;
  }
  if constexpr (std::is_same_v<Scalar, Rational>) {
    const Rational s = pw.s, t = 1 - pw.s;
    for (int n = 0; n <= n_max; ++n) {
      Rational acc = 0;
      BigInt binom = 1;
      for (int k = 0; k <= n; ++k) {
        if (k > 0) binom = binom * (n - k + 1) / k;
        Rational w = Rational(binom);
        for (int i = 0; i < k; ++i) w *= s;
        for (int i = 0; i < n - k; ++i) w *= t;
        acc += w * s1[static_cast<std::size_t>(k)] * s2[static_cast<std::size_t>(n - k)];
      }
      out[static_cast<std::size_t>(n)] = acc;
    }
  } else {
    // binomial weights in log space; the terms span hundreds of orders of magnitude at large n
    using std::exp;
    const Scalar ls = Scalar(std::log(to_real(pw.s))), lt = Scalar(std::log(to_real(1 - pw.s)));
    for (int n = 0; n <= n_max; ++n) {
      Scalar acc(0);
      for (int k = 0; k <= n; ++k) {
        Scalar lw = Scalar(std::lgamma(static_cast<Real>(n) + 1) - std::lgamma(static_cast<Real>(k) + 1) -
                           std::lgamma(static_cast<Real>(n - k) + 1)) +
                    Scalar(k) * ls + Scalar(n - k) * lt;
        acc += exp(lw) * s1[static_cast<std::size_t>(k)] * s2[static_cast<std::size_t>(n - k)];
      }
      out[static_cast<std::size_t>(n)] = acc;
    }
  }
  return out;
}

template std::map<ProductElement, Rational> product_distribution<Rational>(const ProductWalk&, int);
template std::map<ProductElement, Real> product_distribution<Real>(const ProductWalk&, int);
template std::vector<Rational> product_series<Rational>(const ProductWalk&, const ProductElement&, int,
                                                        const NStepOptions&);
template std::vector<Real> product_series<Real>(const ProductWalk&, const ProductElement&, int, const NStepOptions&);

// ---------------------------------------------------------------------------

ProductKernel::ProductKernel(const ProductWalk& pw)
    : first_(make_ratio_kernel(pw.first)), second_(make_ratio_kernel(pw.second)) {}

namespace {

KernelValue factor_value(const RatioKernel& k, const Word& x, const Coordinate& y) {
  if (const auto* w = std::get_if<Word>(&y)) {
    KernelValue v;
    v.value = k.value(x, *w);
    v.stabilized = true;
    return v;
  }
  return k.boundary(x, std::get<EndPrefix>(y));
}

}  // namespace

KernelValue ProductKernel::value(const ProductElement& x, const ProductPoint& y) const {
  KernelValue a = factor_value(*first_, x.first, y.first);
  KernelValue b = factor_value(*second_, x.second, y.second);
  KernelValue out;
  out.value = a.value * b.value;
  out.error = a.error * b.value + b.error * a.value;
  out.stabilized = a.stabilized && b.stabilized;
  out.depth = std::max(a.depth, b.depth);
  return out;
}

Real ProductKernel::value(const ProductElement& x, const ProductElement& y) const {
  return first_->value(x.first, y.first) * second_->value(x.second, y.second);
}

KernelValue product_ratio_kernel(const ProductKernel& kernel, const ProductElement& x, const ProductPoint& y) {
  return kernel.value(x, y);
}

CartesianAsymptotics cartesian_asymptotics(const ProductWalk& pw, Real rho1, Real alpha1, Real rho2, Real alpha2) {
  if (pw.kind != ProductKind::cartesian) throw ValidationError("cartesian asymptotics need a Cartesian product");
  const Real s = to_real(pw.s);
  CartesianAsymptotics out;
  out.rho = s * rho1 + (1 - s) * rho2;
  out.theta = s * rho1 / out.rho;
  out.alpha = alpha1 + alpha2;
  out.C = std::pow(out.theta, alpha1) * std::pow(1 - out.theta, alpha2);
  return out;
}

Identification identify_equivalent_boundary(const ProductKernel& kernel, const std::vector<ProductPoint>& candidates,
                                            const std::vector<ProductElement>& probes, Real tol) {
  std::vector<std::vector<Real>> values;
  for (const auto& c : candidates) {
    std::vector<Real> v;
    for (const auto& x : probes) v.push_back(kernel.value(x, c).value);
    values.push_back(std::move(v));
  }
  auto same = [&](std::size_t i, std::size_t j) {
    for (std::size_t p = 0; p < probes.size(); ++p) {
      Real a = values[i][p], b = values[j][p];
      if (std::fabs(a - b) > tol * std::max(std::fabs(a), std::fabs(b))) return false;
    }
    return true;
  };
  Identification out;
  out.tol = tol;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    bool placed = false;
    for (auto& cls : out.classes)
      if (same(static_cast<std::size_t>(cls.front()), i)) {
        cls.push_back(static_cast<int>(i));
        placed = true;
        break;
      }
    if (!placed) out.classes.push_back({static_cast<int>(i)});
  }
  return out;
}

nlohmann::json product_report(const ProductWalk& pw, const CartesianAsymptotics& combined,
                              const std::vector<ProductPoint>& candidates, const Identification& classes) {
  nlohmann::json j;
  j["schema"] = 1;
  j["product"] = pw.describe();
  j["kind"] = pw.kind == ProductKind::direct ? "direct" : "cartesian";
  j["s"] = to_string(pw.s);
  j["factors"] = {walk_spec_to_text(pw.first), walk_spec_to_text(pw.second)};
  j["combined"] = {{"rho", json_real(combined.rho)},
                   {"alpha", json_real(combined.alpha)},
                   {"C", json_real(combined.C)},
                   {"theta", json_real(combined.theta)}};
  j["classes"] = nlohmann::json::array();
  for (const auto& cls : classes.classes) {
    nlohmann::json c = nlohmann::json::array();
    for (int i : cls) c.push_back(candidates[static_cast<std::size_t>(i)].str());
    j["classes"].push_back(c);
  }
  j["tol"] = json_real(classes.tol);
  return j;
}

}  // namespace ratlim
