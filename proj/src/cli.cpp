#include "ratlim/cli.hpp"

#include "ratlim/kernels.hpp"
#include "ratlim/matrix_boundary.hpp"
#include "ratlim/products.hpp"
#include "ratlim/reduced_boundary.hpp"
#include "ratlim/report.hpp"
#include "ratlim/series.hpp"
#include "ratlim/walks.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>

namespace ratlim::cli {

namespace {

struct Options {
  std::string format = "csv";
  int precision = 64;
  double tol = std::numeric_limits<double>::quiet_NaN();
  std::string out_path;
  std::uint64_t seed = 1;

  std::string preset;
  std::string spec_path;
  std::string x;
  std::string y;
  std::string xi;
  std::string window = "500:2000";
  std::string dump;
  std::string first, second, kind = "cartesian", s = "1/2";
  int q = 2;
  int n_max = -1;
  int depth = -1;
  int radius = -1;
  int probe_radius = -1;
  int stride = 0;
  int min_distance = 4;
  int max_distance = 10;
  int samples = 64;
};

Real tol_or(const Options& o, Real fallback) {
  if (std::isnan(o.tol)) return fallback;
  if (!(o.tol > 0)) throw ValidationError("--tol must be > 0");
  return static_cast<Real>(o.tol);
}

void require_long_double(const Options& o, const std::string& name) {
  if (o.precision > 64)
    throw ValidationError(name + " runs in long double; --precision above 64 is available in ratio-converge and llt-fit");
}

WalkSpec resolve_walk(const Options& o, const std::string& fallback) {
  if (!o.spec_path.empty()) {
    if (!o.preset.empty()) throw ValidationError("pass either --preset or --spec, not both");
    return load_walk_spec(o.spec_path);
  }
  const std::string name = o.preset.empty() ? fallback : o.preset;
  if (auto w = preset_walk(name)) return *w;
  std::string known;
  for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
  throw ValidationError("unknown walk preset '" + name + "' (known: " + known + ")");
}

std::optional<ProductWalk> resolve_product(const Options& o) {
  if (!o.first.empty() || !o.second.empty()) {
    auto load = [](const std::string& name) {
      if (auto w = preset_walk(name)) return *w;
      return load_walk_spec(name);
    };
    if (o.first.empty() || o.second.empty()) throw ValidationError("--first and --second go together");
    if (o.kind == "direct") return ProductWalk::direct_product(load(o.first), load(o.second));
    if (o.kind == "cartesian") return ProductWalk::cartesian_product(load(o.first), load(o.second), parse_rational(o.s));
    throw ValidationError("--kind must be direct or cartesian");
  }
  if (o.spec_path.empty() && !o.preset.empty()) return preset_product(o.preset);
  return std::nullopt;
}

std::vector<Letter> default_pattern(const Alphabet& a) {
  if (a.degree() <= 2) return {a.letter(0)};
  Letter first = a.letter(0);
  for (Letter b : a.letters())
    if (b != first && b != a.inverse(first)) return {first, b};
  return {first};
}

EndPrefix resolve_end(const Options& o, const Alphabet& a, int depth) {
  std::vector<Letter> pattern = o.xi.empty() ? default_pattern(a) : parse_word(a, o.xi).letters();
  if (pattern.empty()) throw ValidationError("--xi must be a non-empty cyclically reduced word");
  return EndPrefix::periodic(a, pattern, depth);
}

// "ray:k" names vertex k of the end; anything else is a word.
Word resolve_word(const std::string& text, const Alphabet& a, const EndPrefix* xi) {
  if (text.rfind("ray:", 0) == 0) {
    if (xi == nullptr) throw ValidationError("ray:k needs an end");
    int k = 0;
    try {
      k = std::stoi(text.substr(4));
    } catch (const std::exception&) {
      throw ValidationError("ray:k needs an integer k");
    }
    if (k < 0 || k > xi->depth()) throw ValidationError("ray vertex k out of range");
    return xi->vertex(k);
  }
  return parse_word(a, text);
}

std::vector<Word> words_or_ball(const Options& o, const Alphabet& a, const EndPrefix* xi, int default_radius) {
  if (!o.x.empty()) return {resolve_word(o.x, a, xi)};
  BallIndex ball(a, o.radius < 0 ? default_radius : o.radius);
  std::vector<Word> out;
  for (std::int64_t i = 0; i < ball.size(); ++i) out.push_back(ball.word(i));
  return out;
}

std::string real_str(Real v) { return format_real(v); }

std::string one_line(const std::string& text) {
  std::string out;
  for (char c : text) {
    if (c == '\n') {
      if (!out.empty() && out.back() != ' ') out += "; ";
    } else {
      out += c;
    }
  }
  while (!out.empty() && (out.back() == ' ' || out.back() == ';')) out.pop_back();
  return out;
}

std::string render(const Options& o, const Table& t) {
  if (o.format == "json") return t.to_json().dump(2) + "\n";
  return t.to_csv();
}

void start_meta(Table& t, const std::string& subcommand, const Options& o) {
  t.add_meta("subcommand", subcommand);
  t.add_meta("precision_bits", std::to_string(o.precision));
}

// ---------------------------------------------------------------------------

std::string tree_kernel(const Options& o) {
  require_long_double(o, "tree-kernel");
  if (o.q < 2) throw ValidationError("--q must be >= 2");
  const Alphabet alphabet = Alphabet::tree(o.q);
  const int depth = o.depth < 0 ? 30 : o.depth;
  EndPrefix xi = resolve_end(o, alphabet, depth);
  Table t;
  start_meta(t, "tree-kernel", o);
  t.add_meta("q", std::to_string(o.q));
  t.add_meta("rho", real_str(simple_walk_spectral_radius(o.q)));
  t.add_meta("xi", xi.str());
  t.columns = {"x", "depth", "hor", "value", "error", "stabilized", "closed_form", "rel_error"};
  for (const Word& x : words_or_ball(o, alphabet, &xi, 3)) {
    KernelValue v = ratio_kernel_isotropic_limit(o.q, x, xi);
    int hor = horocycle(x, xi);
    Real closed = std::pow(static_cast<Real>(o.q), -static_cast<Real>(hor) / 2);
    t.add_row({x.str(), std::int64_t(depth), std::int64_t(hor), v.value, v.error, v.stabilized, closed,
               std::fabs(v.value - closed) / closed});
  }
  return render(o, t);
}

std::string free_kernel(const Options& o) {
  require_long_double(o, "free-kernel");
  WalkSpec spec = resolve_walk(o, "f2-lazy-uniform");
  const int depth = o.depth < 0 ? 30 : o.depth;
  EndPrefix xi = resolve_end(o, spec.alphabet(), depth);
  auto kernel = make_ratio_kernel(spec);
  Table t;
  start_meta(t, "free-kernel", o);
  t.add_meta("walk", one_line(walk_spec_to_text(spec)));
  t.add_meta("kernel", kernel->id());
  t.add_meta("xi", xi.str());
  t.columns = {"x", "depth", "value", "error", "stabilized"};
  for (const Word& x : words_or_ball(o, spec.alphabet(), &xi, 2)) {
    KernelValue v = kernel->boundary(x, xi);
    t.add_row({x.str(), std::int64_t(depth), v.value, v.error, v.stabilized});
  }
  return render(o, t);
}

std::string ratio_converge(const Options& o) {
  WalkSpec spec = resolve_walk(o, "z-lazy");
  const Alphabet& a = spec.alphabet();
  const int n_max = o.n_max < 0 ? 1000 : o.n_max;
  if (n_max < 1) throw ValidationError("--n-max must be >= 1");
  Word x = o.x.empty() ? Word(a, {a.letter(0)}) : parse_word(a, o.x);
  Word y = o.y.empty() ? Word() : parse_word(a, o.y);
  const int stride = o.stride > 0 ? o.stride : std::max(1, n_max / 100);
  Table t;
  start_meta(t, "ratio-converge", o);
  t.add_meta("walk", one_line(walk_spec_to_text(spec)));
  t.add_meta("x", x.str());
  t.add_meta("y", y.str());
  t.columns = {"n", "ratio", "bracket"};
  auto keep = [&](int n) { return n % stride == 0 || n == n_max; };
  if (o.precision > 64) {
    Word target = multiply(a, invert(a, x), y);
    auto series = transition_series<HighFloat>(spec, {target, Word()}, n_max);
    const int digits = static_cast<int>(std::ceil(o.precision * std::log10(2.0)));
    std::optional<HighFloat> last;
    for (int n = 0; n <= n_max; ++n) {
      const HighFloat& num = series.values[0][static_cast<std::size_t>(n)];
      const HighFloat& den = series.values[1][static_cast<std::size_t>(n)];
      if (!(den > 0)) continue;
      HighFloat ratio = num / den;
      last = ratio;
      if (!keep(n)) continue;
      const HighFloat& eps = series.pruned[static_cast<std::size_t>(n)];
      HighFloat bracket = (num + eps) / den - num / (den + eps);
      t.add_row({std::int64_t(n), ratio.str(digits), as_long_double(bracket)});
    }
    if (!last) throw ConvergenceError("no step with positive return probability up to n_max");
    t.add_meta("last", last->str(digits));
    return render(o, t);
  }
  RatioSequence seq = ratio_sequence(spec, x, y, n_max);
  for (std::size_t i = 0; i < seq.n.size(); ++i)
    if (keep(seq.n[i])) t.add_row({std::int64_t(seq.n[i]), seq.ratio[i], seq.bracket[i]});
  t.add_meta("last", real_str(seq.last));
  t.add_meta("cauchy_tail", real_str(seq.cauchy_tail));
  for (const auto& w : seq.warnings) t.add_meta("warning", w);
  return render(o, t);
}

// Polynomial exponent of the local limit theorem for the factor walks handled here.
Real local_limit_exponent(const WalkSpec& spec) {
  const Alphabet& a = spec.alphabet();
  if (a.kind() == Alphabet::Kind::free_group && a.rank() == 1) return 0.5L;
  return 1.5L;
}

std::vector<Real> return_series(const WalkSpec& spec, int N, int precision) {
  std::vector<Real> out;
  if (precision > 64) {
    std::vector<HighFloat> s = spec.nearest_neighbour() ? green_series<HighFloat>(spec, Word(), N).c
                                                        : transition_series<HighFloat>(spec, {Word()}, N).values[0];
    for (const auto& v : s) out.push_back(as_long_double(v));
    return out;
  }
  if (spec.nearest_neighbour()) return green_series<Real>(spec, Word(), N).c;
  return transition_series<Real>(spec, {Word()}, N).values[0];
}

void add_fit_row(Table& t, const std::string& label, const LocalLimitFit& f, Real rho_ref, Real alpha_ref) {
  t.add_row({label, std::int64_t(f.window.n_min), std::int64_t(f.window.n_max), f.rho_hat, rho_ref,
             f.has_shifted ? std::fabs(f.rho_hat - f.rho_shifted) : Real(NAN), f.alpha_hat, alpha_ref,
             f.has_shifted ? std::fabs(f.alpha_hat - f.alpha_shifted) : Real(NAN), f.log_constant, f.residual});
}

const std::vector<std::string> kFitColumns = {"series",      "n_min",     "n_max",           "rho_hat",
                                              "rho_reference", "rho_sensitivity", "alpha_hat", "alpha_reference",
                                              "alpha_sensitivity", "log_constant", "residual"};

std::string llt_fit(const Options& o) {
  FitWindow window = parse_window(o.window);
  if (window.n_max - window.n_min + 1 < 8) throw ValidationError("--window must hold at least 8 points");
  const int N = std::max(o.n_max, window.n_max);
  Table t;
  start_meta(t, "llt-fit", o);
  t.columns = kFitColumns;
  if (auto pw = resolve_product(o)) {
    require_long_double(o, "llt-fit on products");
    auto series = product_series<Real>(*pw, {Word(), Word()}, N);
    Real r1 = spectral_radius(pw->first).value, r2 = spectral_radius(pw->second).value;
    Real a1 = local_limit_exponent(pw->first), a2 = local_limit_exponent(pw->second);
    Real rho = pw->kind == ProductKind::direct ? r1 * r2 : cartesian_asymptotics(*pw, r1, a1, r2, a2).rho;
    t.add_meta("walk", pw->describe());
    add_fit_row(t, "p(e,e)", fit_local_limit(series, window), rho, a1 + a2);
    return render(o, t);
  }
  WalkSpec spec = resolve_walk(o, "f2-lazy-uniform");
  SpectralRadius sr = spectral_radius(spec);
  t.add_meta("walk", one_line(walk_spec_to_text(spec)));
  t.add_meta("rho_reference_method", sr.method);
  t.add_meta("engine", spec.nearest_neighbour() ? "series recursion" : "convolution");
  add_fit_row(t, "p(e,e)", fit_local_limit(return_series(spec, N, o.precision), window), sr.value,
              local_limit_exponent(spec));
  return render(o, t);
}

std::string martin_matrix(const Options& o) {
  require_long_double(o, "martin-matrix");
  WalkSpec spec = resolve_walk(o, "f2-lazy-uniform");
  PassageMachinery m(spec);
  const Real tol = tol_or(o, 1e-10L);
  if (!o.dump.empty()) {
    if (o.format != "json") throw ValidationError("--dump emits JSON; pass --format json");
    nlohmann::json j = matrix_dump(m, parse_word(spec.alphabet(), o.dump), m.radius());
    j["schema"] = 1;
    return j.dump(2) + "\n";
  }
  const int max_len = o.x.empty() ? (o.radius < 0 ? 2 : o.radius) : parse_word(spec.alphabet(), o.x).length();
  const int k = (max_len + m.R()) / m.D() + 1;
  const int depth = o.depth < 0 ? (k + 3) * m.D() : o.depth;
  EndPrefix xi = resolve_end(o, spec.alphabet(), depth);
  Table t;
  start_meta(t, "martin-matrix", o);
  t.add_meta("walk", one_line(walk_spec_to_text(spec)));
  t.add_meta("r", real_str(m.radius()));
  t.add_meta("R", std::to_string(m.R()));
  t.add_meta("N", std::to_string(m.N()));
  t.add_meta("D", std::to_string(m.D()));
  t.add_meta("xi", xi.str());
  const bool nn = spec.nearest_neighbour() && !spec.is_isotropic();
  t.columns = {"x", "depth", "value", "invariance_error", "seed_gap", "stabilized"};
  if (nn) t.columns.insert(t.columns.end(), {"closed_form", "closed_form_gap"});
  ContractionResult first;
  bool have_first = false;
  for (const Word& x : words_or_ball(o, spec.alphabet(), &xi, 2)) {
    MatrixKernelValue v = martin_kernel_matrix(m, x, xi, tol);
    if (!have_first) {
      first = v.contraction;
      have_first = true;
    }
    bool stable = v.contraction.contracted && (!v.invariance_checked || v.invariance_error <= 1e-8L * v.value);
    std::vector<Cell> row = {x.str(), std::int64_t(depth), v.value, v.invariance_error, v.contraction.seed_gap, stable};
    if (nn) {
      Real closed = martin_kernel_nn_at_rho(spec, x, xi).value;
      row.push_back(closed);
      row.push_back(std::fabs(v.value - closed));
    }
    t.add_row(std::move(row));
  }
  t.add_meta("contraction_rate", real_str(first.rate));
  t.add_meta("birkhoff", real_str(first.birkhoff));
  return render(o, t);
}

std::string product(const Options& o) {
  require_long_double(o, "product");
  Options named = o;
  if (named.preset.empty() && named.first.empty()) named.preset = "t3xZ";
  auto pw = resolve_product(named);
  if (!pw) throw ValidationError("unknown product preset '" + named.preset + "' (known: t3xZ, t3xt3)");
  FitWindow window = parse_window(o.window);
  const int N = std::max(o.n_max, window.n_max);
  const Real tol = tol_or(o, 1e-7L);

  Real r1 = spectral_radius(pw->first).value, r2 = spectral_radius(pw->second).value;
  Real a1 = local_limit_exponent(pw->first), a2 = local_limit_exponent(pw->second);
  CartesianAsymptotics combined;
  if (pw->kind == ProductKind::cartesian) {
    combined = cartesian_asymptotics(*pw, r1, a1, r2, a2);
  } else {
    combined.rho = r1 * r2;
    combined.alpha = a1 + a2;
  }
  LocalLimitFit fit = fit_local_limit(product_series<Real>(*pw, {Word(), Word()}, N), window);

  // Exact check of the product series against the convolution on the product space.
  const int n_small = std::min(10, N);
  auto series = product_series<Rational>(*pw, {Word(), Word()}, n_small);
  bool identity_exact = true;
  for (int n = 0; n <= n_small; ++n) {
    auto law = product_distribution<Rational>(*pw, n);
    auto it = law.find({Word(), Word()});
    Rational direct = it == law.end() ? Rational(0) : it->second;
    if (direct != series[static_cast<std::size_t>(n)]) identity_exact = false;
  }

  // Boundary points (xi1, v): the second coordinate ranges over a ball of the second factor.
  const Alphabet& a1l = pw->first.alphabet();
  const Alphabet& a2l = pw->second.alphabet();
  const int depth = o.depth < 0 ? 30 : o.depth;
  EndPrefix xi1 = resolve_end(o, a1l, depth);
  const int radius = o.radius < 0 ? 2 : o.radius;
  std::vector<ProductPoint> candidates;
  for (const Word& v : words_or_ball(Options{}, a2l, nullptr, radius)) candidates.push_back({xi1, v});
  std::vector<ProductElement> probes;
  BallIndex b1(a1l, radius), b2(a2l, radius);
  for (std::int64_t i = 0; i < b1.size(); ++i)
    for (std::int64_t j = 0; j < b2.size(); ++j) probes.emplace_back(b1.word(i), b2.word(j));
  ProductKernel kernel(*pw);
  Identification classes = identify_equivalent_boundary(kernel, candidates, probes, tol);

  if (o.format == "json") {
    nlohmann::json j = product_report(*pw, combined, candidates, classes);
    j["measured"] = {{"rho_hat", json_real(fit.rho_hat)},
                     {"alpha_hat", json_real(fit.alpha_hat)},
                     {"window", {fit.window.n_min, fit.window.n_max}},
                     {"rho_sensitivity", json_real(fit.has_shifted ? std::fabs(fit.rho_hat - fit.rho_shifted) : NAN)},
                     {"alpha_sensitivity",
                      json_real(fit.has_shifted ? std::fabs(fit.alpha_hat - fit.alpha_shifted) : NAN)}};
    j["factors_rho"] = {json_real(r1), json_real(r2)};
    j["factors_alpha"] = {json_real(a1), json_real(a2)};
    j["binomial_identity_exact"] = identity_exact;
    j["binomial_identity_n_max"] = n_small;
    return j.dump(2) + "\n";
  }
  Table t;
  start_meta(t, "product", o);
  t.add_meta("walk", pw->describe());
  t.add_meta("theta", real_str(combined.theta));
  t.add_meta("C", real_str(combined.C));
  t.add_meta("boundary_classes", std::to_string(classes.classes.size()) + " of " + std::to_string(candidates.size()));
  t.add_meta("binomial_identity_exact", identity_exact ? "true" : "false");
  t.columns = {"quantity", "measured", "predicted", "gap", "sensitivity"};
  t.add_row({"rho", fit.rho_hat, combined.rho, std::fabs(fit.rho_hat - combined.rho),
             fit.has_shifted ? std::fabs(fit.rho_hat - fit.rho_shifted) : Real(NAN)});
  t.add_row({"alpha", fit.alpha_hat, combined.alpha, std::fabs(fit.alpha_hat - combined.alpha),
             fit.has_shifted ? std::fabs(fit.alpha_hat - fit.alpha_shifted) : Real(NAN)});
  return render(o, t);
}

std::string reduced(const Options& o) {
  require_long_double(o, "reduced");
  const int radius = o.radius < 0 ? 4 : o.radius;
  const int probe = o.probe_radius < 0 ? radius : o.probe_radius;
  const Real tol = tol_or(o, 1e-6L);
  std::optional<ProductWalk> pw = resolve_product(o);
  EquivalenceReport report =
      pw ? detect_R_mu(*pw, radius, probe, tol) : detect_R_mu(resolve_walk(o, "f2-lazy-uniform"), radius, probe, tol);
  if (o.format == "json") {
    nlohmann::json j = report.to_json();
    j["walk"] = pw ? pw->describe() : one_line(walk_spec_to_text(resolve_walk(o, "f2-lazy-uniform")));
    return j.dump(2) + "\n";
  }
  Table t;
  start_meta(t, "reduced", o);
  t.add_meta("statement", report.statement);
  t.add_meta("inverse_closed", report.inverse_closed ? "true" : "false");
  t.add_meta("product_closed", report.product_closed ? "true" : "false");
  t.columns = {"candidate", "deviation", "member", "class"};
  std::vector<std::int64_t> class_of(report.candidates.size());
  for (std::size_t k = 0; k < report.classes.size(); ++k)
    for (int c : report.classes[k]) class_of[static_cast<std::size_t>(c)] = static_cast<std::int64_t>(k);
  for (std::size_t i = 0; i < report.candidates.size(); ++i)
    t.add_row({report.candidates[i], report.deviation[i], report.deviation[i] <= tol, class_of[i]});
  return render(o, t);
}

std::string ancona_check(const Options& o) {
  require_long_double(o, "ancona-check");
  WalkSpec spec = resolve_walk(o, "f2-lazy-uniform");
  AnconaConfig config;
  config.min_distance = o.min_distance;
  config.max_distance = o.max_distance;
  config.samples_per_distance = o.samples;
  config.seed = o.seed;
  if (config.samples_per_distance < 1) throw ValidationError("--samples must be >= 1");
  GreenFunction G;
  Real r = 0;
  std::shared_ptr<PassageMachinery> m;
  if (spec.nearest_neighbour() && !spec.is_isotropic()) {
    r = singularity_radius(spec).r;
    G = nn_green_function(spec, r);
  } else {
    m = std::make_shared<PassageMachinery>(spec);
    r = m->radius();
    G = [m, r](const Word& x, const Word& y) { return m->green({x}, {y}, r)(0, 0); };
  }
  AnconaReport rep = ancona_harnack_check(spec.alphabet(), G, config);
  Table t;
  start_meta(t, "ancona-check", o);
  t.add_meta("walk", one_line(walk_spec_to_text(spec)));
  t.add_meta("z", real_str(r));
  t.add_meta("seed", std::to_string(o.seed));
  t.add_meta("harnack", real_str(rep.harnack));
  t.add_meta("quadruple_decay", real_str(rep.quadruple_decay));
  t.add_meta("stability_spread", real_str(rep.stability_spread));
  t.add_meta("stable", rep.stable ? "true" : "false");
  t.columns = {"kind", "index", "lower", "upper"};
  for (std::size_t i = 0; i < rep.distances.size(); ++i)
    t.add_row({"ancona", std::int64_t(rep.distances[i]), rep.anc_min[i], rep.anc_max[i]});
  for (std::size_t i = 0; i < rep.separations.size(); ++i)
    t.add_row({"quadruple", std::int64_t(rep.separations[i]), rep.quadruple_deviation[i], rep.quadruple_deviation[i]});
  return render(o, t);
}

std::string phi_claim(const Options& o) {
  require_long_double(o, "phi-claim");
  WalkSpec spec = resolve_walk(o, "f2-lazy-uniform");
  const Alphabet& a = spec.alphabet();
  const int depth = o.depth < 0 ? 10 : o.depth;
  EndPrefix xi = resolve_end(o, a, depth);
  Word y = o.y.empty() ? xi.vertex(depth) : parse_word(a, o.y);
  Table t;
  start_meta(t, "phi-claim", o);
  t.add_meta("walk", one_line(walk_spec_to_text(spec)));
  t.add_meta("y", y.str());
  t.columns = {"x", "ratio", "error", "within_5pct"};
  for (const Word& x : words_or_ball(o, a, &xi, 1)) {
    PhiRatio p = phi_ratio_at_radius(spec, x, y);
    t.add_row({x.str(), p.value, p.error, std::fabs(p.value - 1) <= 0.05L});
  }
  return render(o, t);
}

void common_flags(CLI::App* s, Options& o) {
  s->add_option("--format", o.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  s->add_option("--precision", o.precision, "working precision in bits (>= 64)");
  s->add_option("--tol", o.tol, "tolerance (> 0)");
  s->add_option("--out", o.out_path, "write to this file instead of stdout");
}

void walk_flags(CLI::App* s, Options& o) {
  s->add_option("--preset", o.preset, "named walk");
  s->add_option("--spec", o.spec_path, "walk-spec file");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Ratio limits and boundary kernels of random walks on free groups and trees", "ratlim"};
  app.require_subcommand(1);

  auto* tree = app.add_subcommand("tree-kernel", "boundary kernel of the simple walk on T_{q+1}");
  common_flags(tree, o);
  tree->add_option("--q", o.q, "tree branching number");
  tree->add_option("--depth", o.depth, "prefix depth of the end (default 30)");
  tree->add_option("--xi", o.xi, "periodic pattern of the end");
  tree->add_option("--x", o.x, "word, or ray:k for vertex k of the end (default: ball)");
  tree->add_option("--radius", o.radius, "ball radius when --x is absent (default 3)");

  auto* freek = app.add_subcommand("free-kernel", "ratio-limit boundary kernel of a walk");
  common_flags(freek, o);
  walk_flags(freek, o);
  freek->add_option("--depth", o.depth, "prefix depth of the end (default 30)");
  freek->add_option("--xi", o.xi, "periodic pattern of the end");
  freek->add_option("--x", o.x, "word, or ray:k");
  freek->add_option("--radius", o.radius, "ball radius when --x is absent (default 2)");

  auto* ratio = app.add_subcommand("ratio-converge", "p^(n)(x,y) / p^(n)(e,e) as n grows");
  common_flags(ratio, o);
  walk_flags(ratio, o);
  ratio->add_option("--x", o.x, "word x (default: first letter)");
  ratio->add_option("--y", o.y, "word y (default e)");
  ratio->add_option("--n-max", o.n_max, "last step (default 1000)");
  ratio->add_option("--stride", o.stride, "row spacing (default n-max/100)");

  auto* llt = app.add_subcommand("llt-fit", "fit p^(n)(e,e) ~ C rho^n n^-alpha");
  common_flags(llt, o);
  walk_flags(llt, o);
  llt->add_option("--window", o.window, "fit window a:b");
  llt->add_option("--n-max", o.n_max, "series length (default: end of window)");

  auto* matrix = app.add_subcommand("martin-matrix", "Martin kernel at rho from the first-passage matrices");
  common_flags(matrix, o);
  walk_flags(matrix, o);
  matrix->add_option("--depth", o.depth, "prefix depth of the end (default: enough for the invariance check)");
  matrix->add_option("--xi", o.xi, "periodic pattern of the end");
  matrix->add_option("--x", o.x, "word x (default: ball)");
  matrix->add_option("--radius", o.radius, "ball radius when --x is absent (default 2)");
  matrix->add_option("--dump", o.dump, "emit the first-passage matrix of this word as JSON");

  auto* prod = app.add_subcommand("product", "direct and Cartesian products");
  common_flags(prod, o);
  prod->add_option("--preset", o.preset, "t3xZ or t3xt3");
  prod->add_option("--first", o.first, "first factor (preset or spec file)");
  prod->add_option("--second", o.second, "second factor (preset or spec file)");
  prod->add_option("--kind", o.kind, "direct or cartesian");
  prod->add_option("--s", o.s, "Cartesian weight of the first factor");
  prod->add_option("--window", o.window, "fit window a:b");
  prod->add_option("--n-max", o.n_max, "series length (default: end of window)");
  prod->add_option("--depth", o.depth, "prefix depth of the first factor's end");
  prod->add_option("--xi", o.xi, "periodic pattern of the first factor's end");
  prod->add_option("--radius", o.radius, "probe and candidate radius (default 2)");

  auto* red = app.add_subcommand("reduced", "the subgroup R_mu on a finite candidate ball");
  common_flags(red, o);
  walk_flags(red, o);
  red->add_option("--first", o.first, "first product factor");
  red->add_option("--second", o.second, "second product factor");
  red->add_option("--kind", o.kind, "direct or cartesian");
  red->add_option("--s", o.s, "Cartesian weight of the first factor");
  red->add_option("--radius", o.radius, "candidate radius (default 4)");
  red->add_option("--probe-radius", o.probe_radius, "probe radius (default: candidate radius)");

  auto* anc = app.add_subcommand("ancona-check", "measured Harnack and Ancona constants at r");
  common_flags(anc, o);
  walk_flags(anc, o);
  anc->add_option("--seed", o.seed, "sampling seed");
  anc->add_option("--min-distance", o.min_distance, "smallest sampled distance");
  anc->add_option("--max-distance", o.max_distance, "largest sampled distance");
  anc->add_option("--samples", o.samples, "samples per distance");

  auto* phi = app.add_subcommand("phi-claim", "Phi(x,y) / Phi(e,y) at the radius");
  common_flags(phi, o);
  walk_flags(phi, o);
  phi->add_option("--y", o.y, "word y (default: vertex --depth of the end)");
  phi->add_option("--depth", o.depth, "|y| along the end (default 10)");
  phi->add_option("--xi", o.xi, "periodic pattern of the end");
  phi->add_option("--x", o.x, "word x (default: ball)");
  phi->add_option("--radius", o.radius, "ball radius when --x is absent (default 1)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << " (see --help)\n";
    return 2;
  }

  try {
    if (o.precision < 64) throw ValidationError("--precision must be >= 64 bits");
    if (!std::isnan(o.tol) && !(o.tol > 0)) throw ValidationError("--tol must be > 0");
    if (o.precision > 64) set_high_precision_bits(static_cast<unsigned>(o.precision));
    std::string text;
    if (tree->parsed()) text = tree_kernel(o);
    else if (freek->parsed()) text = free_kernel(o);
    else if (ratio->parsed()) text = ratio_converge(o);
    else if (llt->parsed()) text = llt_fit(o);
    else if (matrix->parsed()) text = martin_matrix(o);
    else if (prod->parsed()) text = product(o);
    else if (red->parsed()) text = reduced(o);
    else if (anc->parsed()) text = ancona_check(o);
    else if (phi->parsed()) text = phi_claim(o);
    if (o.out_path.empty()) {
      out << text;
    } else {
      std::ofstream f(o.out_path);
      if (!f) throw ValidationError("cannot write " + o.out_path);
      f << text;
    }
    return 0;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const ConvergenceError& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace ratlim::cli
