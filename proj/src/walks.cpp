#include "ratlim/walks.hpp"

#include "ratlim/convolution.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <unordered_set>

namespace ratlim {

int StepDistribution::range() const {
  int r = 0;
  for (const auto& [g, p] : steps) r = std::max(r, g.length());
  return r;
}

Rational StepDistribution::mass(const Word& g) const {
  auto it = std::lower_bound(steps.begin(), steps.end(), g,
                             [](const auto& entry, const Word& w) { return entry.first < w; });
  if (it != steps.end() && it->first == g) return it->second;
  return Rational(0);
}

bool StepDistribution::nearest_neighbour() const { return range() <= 1; }

bool StepDistribution::symmetric() const {
  for (const auto& [g, p] : steps)
    if (mass(invert(alphabet, g)) != p) return false;
  return true;
}

namespace {

void check_irreducible(const StepDistribution& d) {
  int range = d.range();
  if (range == 0) throw ValidationError("walk is concentrated on the identity (not irreducible)");
  int radius = 3 * range + 1;
  while (radius > range && BallIndex::ball_size(d.alphabet.degree(), radius) > 2'000'000) --radius;
  BallIndex ball(d.alphabet, radius);
  std::vector<char> seen(static_cast<std::size_t>(ball.size()), 0);
  std::deque<std::int64_t> queue{0};
  seen[0] = 1;
  while (!queue.empty()) {
    std::int64_t i = queue.front();
    queue.pop_front();
    for (const auto& [g, p] : d.steps) {
      std::int64_t j = ball.right_multiply(i, g);
      if (j >= 0 && !seen[static_cast<std::size_t>(j)]) {
        seen[static_cast<std::size_t>(j)] = 1;
        queue.push_back(j);
      }
    }
  }
  for (Letter a : d.alphabet.letters())
    if (!seen[static_cast<std::size_t>(ball.index_of(Word::trusted({a})))])
      throw ValidationError("support does not generate the group as a semigroup (letter " + std::to_string(a) +
                            " unreachable)");
}

void normalise_steps(std::vector<std::pair<Word, Rational>>& steps) {
  std::sort(steps.begin(), steps.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  for (std::size_t i = 1; i < steps.size(); ++i)
    if (steps[i].first == steps[i - 1].first)
      throw ValidationError("duplicate step word " + steps[i].first.str());
  Rational total = 0;
  for (const auto& [g, p] : steps) {
    if (p < 0) throw ValidationError("negative probability for " + g.str());
    total += p;
  }
  if (total != 1) throw ValidationError("probabilities sum to " + to_string(total) + ", expected 1");
  steps.erase(std::remove_if(steps.begin(), steps.end(), [](const auto& e) { return e.second == 0; }), steps.end());
}

}  // namespace

WalkSpec WalkSpec::isotropic(int q, std::vector<Rational> a) {
  if (q < 2) throw ValidationError("isotropic walks need q >= 2");
  while (!a.empty() && a.back() == 0) a.pop_back();
  if (a.empty()) throw ValidationError("isotropic profile is empty");
  Rational total = 0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    if (a[d] < 0) throw ValidationError("negative coefficient a_" + std::to_string(d));
    total += a[d];
  }
  if (total != 1) throw ValidationError("coefficients sum to " + to_string(total) + ", expected 1");

  WalkSpec spec;
  spec.mode_ = Mode::isotropic;
  spec.profile_ = IsotropicProfile{q, a};
  spec.steps_.alphabet = Alphabet::tree(q);
  BallIndex ball(spec.steps_.alphabet, static_cast<int>(a.size()) - 1);
  for (std::int64_t i = 0; i < ball.size(); ++i) {
    int d = ball.length(i);
    if (a[static_cast<std::size_t>(d)] == 0) continue;
    Rational sphere(RadialChain::sphere_size(q, d));
    spec.steps_.steps.emplace_back(ball.word(i), a[static_cast<std::size_t>(d)] / sphere);
  }
  normalise_steps(spec.steps_.steps);
  check_irreducible(spec.steps_);
  return spec;
}

WalkSpec WalkSpec::finite(const Alphabet& alphabet, std::vector<std::pair<Word, Rational>> steps) {
  WalkSpec spec;
  spec.mode_ = Mode::finite;
  for (const auto& [g, p] : steps) Word(alphabet, g.letters());
  normalise_steps(steps);
  spec.steps_.alphabet = alphabet;
  spec.steps_.steps = std::move(steps);
  check_irreducible(spec.steps_);
  return spec;
}

const IsotropicProfile& WalkSpec::profile() const {
  if (mode_ != Mode::isotropic) throw ValidationError("radial projection requires isotropy");
  return profile_;
}

bool WalkSpec::aperiodic() const {
  if (steps_.identity_mass() > 0) return true;
  if (mode_ == Mode::isotropic) {
    bool odd = false, even = false;
    for (std::size_t d = 0; d < profile_.a.size(); ++d)
      if (profile_.a[d] > 0) (d % 2 ? odd : even) = true;
    return odd && even;
  }
  return false;
}

namespace {

std::string strip_comment(const std::string& line) {
  auto hash = line.find('#');
  return hash == std::string::npos ? line : line.substr(0, hash);
}

}  // namespace

WalkSpec parse_walk_spec(std::istream& in) {
  std::string line;
  std::string mode;
  int q = 0, rank = 0, involutions = 0;
  std::vector<std::pair<std::string, std::string>> entries;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(strip_comment(line));
    std::string key, value, extra;
    if (!(ls >> key)) continue;
    if (!(ls >> value) || (ls >> extra))
      throw ValidationError("walk spec line " + std::to_string(line_no) + ": expected two fields");
    auto as_int = [&](const std::string& v) {
      try {
        std::size_t used = 0;
        int out = std::stoi(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
      } catch (const std::exception&) {
        throw ValidationError("walk spec line " + std::to_string(line_no) + ": expected integer, got '" + v + "'");
      }
    };
    if (key == "mode") {
      mode = value;
    } else if (key == "q") {
      q = as_int(value);
    } else if (key == "rank") {
      rank = as_int(value);
    } else if (key == "involutions") {
      involutions = as_int(value);
    } else {
      entries.emplace_back(key, value);
    }
  }
  if (mode == "isotropic") {
    if (q < 2) throw ValidationError("walk spec: isotropic mode needs 'q <q>' with q >= 2");
    std::vector<Rational> a;
    for (const auto& [k, v] : entries) {
      int d;
      try {
        std::size_t used = 0;
        d = std::stoi(k, &used);
        if (used != k.size() || d < 0) throw std::invalid_argument(k);
      } catch (const std::exception&) {
        throw ValidationError("walk spec: bad distance '" + k + "'");
      }
      if (static_cast<std::size_t>(d) >= a.size()) a.resize(static_cast<std::size_t>(d) + 1, Rational(0));
      if (a[static_cast<std::size_t>(d)] != 0) throw ValidationError("walk spec: duplicate distance " + k);
      a[static_cast<std::size_t>(d)] = parse_rational(v);
    }
    return WalkSpec::isotropic(q, a);
  }
  if (mode == "finite") {
    if ((rank > 0) == (involutions > 0))
      throw ValidationError("walk spec: finite mode needs exactly one of 'rank <s>' or 'involutions <k>'");
    Alphabet alphabet = rank > 0 ? Alphabet::free_group(rank) : Alphabet::involutions(involutions);
    std::vector<std::pair<Word, Rational>> steps;
    for (const auto& [k, v] : entries) steps.emplace_back(parse_word(alphabet, k), parse_rational(v));
    return WalkSpec::finite(alphabet, steps);
  }
  throw ValidationError("walk spec: first line must be 'mode isotropic' or 'mode finite'");
}

WalkSpec load_walk_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open walk spec '" + path + "'");
  WalkSpec spec = parse_walk_spec(in);
  spec.label = path;
  return spec;
}

std::string walk_spec_to_text(const WalkSpec& spec) {
  std::ostringstream os;
  if (spec.is_isotropic()) {
    const auto& p = spec.profile();
    os << "mode isotropic\nq " << p.q << '\n';
    for (std::size_t d = 0; d < p.a.size(); ++d)
      if (p.a[d] != 0) os << d << ' ' << to_string(p.a[d]) << '\n';
  } else {
    const auto& alphabet = spec.alphabet();
    os << "mode finite\n";
    if (alphabet.kind() == Alphabet::Kind::free_group)
      os << "rank " << alphabet.rank() << '\n';
    else
      os << "involutions " << alphabet.rank() << '\n';
    for (const auto& [g, p] : spec.steps().steps) os << g.str() << ' ' << to_string(p) << '\n';
  }
  return os.str();
}

std::optional<WalkSpec> preset_walk(const std::string& name) {
  if (name == "t3-lazy-iso") {
    WalkSpec s = WalkSpec::isotropic(2, {Rational(1, 2), Rational(1, 2)});
    s.label = name;
    return s;
  }
  if (name == "f2-lazy-uniform" || name == "f2-lazy") {
    Alphabet f2 = Alphabet::free_group(2);
    std::vector<std::pair<Word, Rational>> steps{{Word(), Rational(1, 5)}};
    for (Letter a : f2.letters()) steps.emplace_back(Word(f2, {a}), Rational(1, 5));
    WalkSpec s = WalkSpec::finite(f2, steps);
    s.label = "f2-lazy-uniform";
    return s;
  }
  if (name == "z-lazy") {
    Alphabet z = Alphabet::free_group(1);
    WalkSpec s = WalkSpec::finite(
        z, {{Word(), Rational(1, 2)}, {Word(z, {1}), Rational(1, 4)}, {Word(z, {-1}), Rational(1, 4)}});
    s.label = name;
    return s;
  }
  return std::nullopt;
}

std::vector<std::string> preset_names() { return {"t3-lazy-iso", "f2-lazy-uniform", "z-lazy", "t3xZ", "t3xt3"}; }

// ---------------------------------------------------------------------------

BigInt RadialChain::sphere_size(int q, int k) {
  if (k == 0) return 1;
  BigInt s = q + 1;
  for (int i = 1; i < k; ++i) s *= q;
  return s;
}

BigInt RadialChain::sphere_intersection(int q, int k, int d, int k_next) {
  if (d == 0) return k_next == k ? 1 : 0;
  int twice_up = k + d - k_next;
  if (twice_up < 0 || twice_up % 2) return 0;
  int j = twice_up / 2;  // steps towards the root before turning away
  if (j > std::min(d, k)) return 0;
  auto qpow = [q](int e) {
    BigInt r = 1;
    for (int i = 0; i < e; ++i) r *= q;
    return r;
  };
  if (j == 0) return k == 0 ? BigInt(q + 1) * qpow(d - 1) : qpow(d);
  if (j == d) return 1;
  bool turn_at_root = (k - j) == 0;
  return BigInt(turn_at_root ? q : q - 1) * qpow(d - j - 1);
}

RadialChain::RadialChain(const WalkSpec& spec) {
  const auto& p = spec.profile();
  q_ = p.q;
  range_ = p.range();
  a_ = p.a;
  auto build = [&](int k) {
    std::map<int, Rational> row;
    for (int d = 0; d <= range_; ++d) {
      if (a_[static_cast<std::size_t>(d)] == 0) continue;
      Rational sphere = d == 0 ? Rational(1) : Rational(sphere_size(q_, d));
      for (int kn = std::max(0, k - d); kn <= k + d; ++kn) {
        BigInt c = sphere_intersection(q_, k, d, kn);
        if (c != 0) row[kn] += a_[static_cast<std::size_t>(d)] * Rational(c) / sphere;
      }
    }
    return std::vector<std::pair<int, Rational>>(row.begin(), row.end());
  };
  for (int k = 0; k <= range_; ++k) rows_.push_back(build(k));
  for (const auto& [kn, prob] : build(range_ + 1)) generic_.emplace_back(kn - (range_ + 1), prob);
}

std::vector<std::pair<int, Rational>> RadialChain::row(int k) const {
  if (k < 0) throw ValidationError("negative distance");
  if (k <= range_) return rows_[static_cast<std::size_t>(k)];
  std::vector<std::pair<int, Rational>> out;
  for (const auto& [off, prob] : generic_) out.emplace_back(k + off, prob);
  return out;
}

Rational RadialChain::probability(int k, int k_next) const {
  for (const auto& [kn, prob] : row(k))
    if (kn == k_next) return prob;
  return Rational(0);
}

std::vector<std::pair<int, Rational>> RadialChain::column(int k_next) const {
  std::vector<std::pair<int, Rational>> out;
  for (int k = std::max(0, k_next - range_); k <= k_next + range_; ++k) {
    Rational p = probability(k, k_next);
    if (p != 0) out.emplace_back(k, p);
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

// Largest distance from e at which mass after `k` of `n` steps can still reach a target.
int active_radius(int k, int n, int range, int target_radius) {
  return std::min(k * range, (n - k) * range + target_radius);
}

template <class Scalar>
TransitionSeries<Scalar> radial_series(const WalkSpec& spec, const std::vector<Word>& targets, int n_max,
                                       const NStepOptions& options) {
  RadialChain chain(spec);
  const int R = chain.range();
  int T = 0;
  for (const auto& t : targets) T = std::max(T, t.length());
  int width = 0;
  for (int k = 0; k <= n_max; ++k) width = std::max(width, active_radius(k, n_max, R, T));

  conv::BandTable<Scalar> table;
  const int head = 2 * R + 1;
  for (int j = 0; j < head; ++j) {
    std::vector<std::pair<int, Scalar>> col;
    for (const auto& [k, p] : chain.column(j)) col.emplace_back(k, from_rational<Scalar>(p));
    table.head.push_back(std::move(col));
  }
  for (const auto& [k, p] : chain.column(head + R)) table.offsets.emplace_back(k - (head + R), from_rational<Scalar>(p));

  std::vector<Scalar> sphere;
  for (const auto& t : targets) sphere.push_back(from_rational<Scalar>(Rational(RadialChain::sphere_size(chain.q(), t.length()))));

  TransitionSeries<Scalar> out;
  out.targets = targets;
  out.values.assign(targets.size(), std::vector<Scalar>(static_cast<std::size_t>(n_max) + 1, Scalar(0)));
  out.pruned.assign(static_cast<std::size_t>(n_max) + 1, Scalar(0));
  out.ball_radius = width;
  out.engine = "radial";

  std::vector<Scalar> cur(static_cast<std::size_t>(width) + 1, Scalar(0)), next(cur.size(), Scalar(0));
  cur[0] = Scalar(1);
  std::int64_t active = 1;
  for (int n = 0; n <= n_max; ++n) {
    for (std::size_t t = 0; t < targets.size(); ++t) {
      int d = targets[t].length();
      if (d < active) out.values[t][static_cast<std::size_t>(n)] = cur[static_cast<std::size_t>(d)] / sphere[t];
    }
    if (n == n_max) break;
    std::int64_t next_active = active_radius(n + 1, n_max, R, T) + 1;
    if (options.execution == Execution::parallel)
      conv::band_step_parallel(table, cur.data(), active, next.data(), next_active);
    else
      conv::band_step_serial(table, cur.data(), active, next.data(), next_active);
    std::swap(cur, next);
    active = next_active;
  }
  return out;
}

template <class Scalar>
TransitionSeries<Scalar> ball_series(const WalkSpec& spec, const std::vector<Word>& targets, int n_max,
                                     const NStepOptions& options, bool prune) {
  const auto& dist = spec.steps();
  const Alphabet& alphabet = dist.alphabet;
  const int R = dist.range();
  int T = 0;
  for (const auto& t : targets) T = std::max(T, t.length());
  std::vector<int> need(static_cast<std::size_t>(n_max) + 1);
  int needed = 0;
  for (int k = 0; k <= n_max; ++k) {
    need[static_cast<std::size_t>(k)] = active_radius(k, n_max, R, T);
    needed = std::max(needed, need[static_cast<std::size_t>(k)]);
  }
  int L = needed;
  const std::int64_t budget_states = options.state_budget / std::max<std::int64_t>(1, static_cast<std::int64_t>(dist.steps.size()));
  while (L > T && BallIndex::ball_size(alphabet.degree(), L) > budget_states) --L;
  if (BallIndex::ball_size(alphabet.degree(), L) > budget_states)
    throw ConvergenceError("state budget exceeded: even the target ball of radius " + std::to_string(L) +
                           " does not fit");
  const bool truncated = L < needed;

  BallIndex ball(alphabet, L);
  conv::GatherTable<Scalar> table;
  std::vector<Word> inverse_steps;
  for (const auto& [g, p] : dist.steps) {
    Word ginv = invert(alphabet, g);
    std::vector<std::int64_t> src(static_cast<std::size_t>(ball.size()));
    for (std::int64_t i = 0; i < ball.size(); ++i) src[static_cast<std::size_t>(i)] = ball.right_multiply(i, ginv);
    table.source.push_back(std::move(src));
    table.weight.push_back(from_rational<Scalar>(p));
  }

  // For truncated balls: length |u g| for u near the boundary sphere, to account for escaping mass.
  const std::int64_t shell_start = ball.count_within(L - R);
  std::vector<std::vector<int>> exit_length;
  if (truncated) {
    for (const auto& [g, p] : dist.steps) {
      std::vector<int> len(static_cast<std::size_t>(ball.size() - shell_start));
      for (std::int64_t u = shell_start; u < ball.size(); ++u) {
        // cancellation between the tail of u and the head of g
        int cancel = 0;
        std::int64_t v = u;
        while (cancel < g.length() && v > 0 && alphabet.letter(ball.last_slot(v)) == alphabet.inverse(g[cancel])) {
          v = ball.parent(v);
          ++cancel;
        }
        len[static_cast<std::size_t>(u - shell_start)] = ball.length(u) + g.length() - 2 * cancel;
      }
      exit_length.push_back(std::move(len));
    }
  }

  std::vector<std::int64_t> target_index;
  for (const auto& t : targets) target_index.push_back(ball.index_of(t));

  TransitionSeries<Scalar> out;
  out.targets = targets;
  out.values.assign(targets.size(), std::vector<Scalar>(static_cast<std::size_t>(n_max) + 1, Scalar(0)));
  out.pruned.assign(static_cast<std::size_t>(n_max) + 1, Scalar(0));
  out.ball_radius = L;
  out.engine = truncated ? "ball-truncated" : "ball";

  const Scalar delta = prune ? Scalar(options.prune_threshold) : Scalar(0);
  std::vector<Scalar> cur(static_cast<std::size_t>(ball.size()), Scalar(0)), next(cur.size(), Scalar(0));
  cur[0] = Scalar(1);
  std::int64_t active = 1;
  Scalar eps(0);
  for (int n = 0; n <= n_max; ++n) {
    for (std::size_t t = 0; t < targets.size(); ++t)
      if (target_index[t] >= 0 && target_index[t] < active)
        out.values[t][static_cast<std::size_t>(n)] = cur[static_cast<std::size_t>(target_index[t])];
    out.pruned[static_cast<std::size_t>(n)] = eps;
    if (n == n_max) break;
    const int reach = need[static_cast<std::size_t>(n + 1)];
    if (truncated) {
      for (std::size_t g = 0; g < dist.steps.size(); ++g)
        for (std::int64_t u = shell_start; u < active; ++u) {
          int len = exit_length[g][static_cast<std::size_t>(u - shell_start)];
          if (len > L && len <= reach) eps += table.weight[g] * cur[static_cast<std::size_t>(u)];
        }
    }
    std::int64_t next_active = ball.count_within(std::min(reach, L));
    if (options.execution == Execution::parallel)
      conv::gather_step_parallel(table, cur.data(), active, next.data(), next_active);
    else
      conv::gather_step_serial(table, cur.data(), active, next.data(), next_active);
    if (prune) {
      for (std::int64_t i = 0; i < next_active; ++i) {
        auto& v = next[static_cast<std::size_t>(i)];
        if (v != Scalar(0) && v < delta) {
          eps += v;
          v = Scalar(0);
        }
      }
    }
    std::swap(cur, next);
    active = next_active;
  }
  if (as_long_double(eps) > options.max_pruned)
    throw ConvergenceError("state budget exceeded: truncation at ball radius " + std::to_string(L) + " (needs " +
                           std::to_string(needed) + ") leaves pruned mass " +
                           std::to_string(static_cast<double>(as_long_double(eps))) + " above tolerance");
  return out;
}

}  // namespace

template <class Scalar>
TransitionSeries<Scalar> transition_series(const WalkSpec& spec, const std::vector<Word>& targets, int n_max,
                                           const NStepOptions& options) {
  if (n_max < 0) throw ValidationError("n must be >= 0");
  for (const auto& t : targets) Word(spec.alphabet(), t.letters());
  if (spec.is_isotropic()) return radial_series<Scalar>(spec, targets, n_max, options);
  return ball_series<Scalar>(spec, targets, n_max, options, !std::is_same_v<Scalar, Rational>);
}

template <class Scalar>
std::map<Word, BracketedValue<Scalar>> nstep(const WalkSpec& spec, int n, const std::vector<Word>& targets,
                                             const NStepOptions& options) {
  auto series = transition_series<Scalar>(spec, targets, n, options);
  std::map<Word, BracketedValue<Scalar>> out;
  for (std::size_t t = 0; t < targets.size(); ++t)
    out[targets[t]] = {series.values[t][static_cast<std::size_t>(n)], series.pruned[static_cast<std::size_t>(n)]};
  return out;
}

template <class Scalar>
std::map<Word, Scalar> distribution(const WalkSpec& spec, int n) {
  if (n < 0) throw ValidationError("n must be >= 0");
  const auto& dist = spec.steps();
  const int L = n * dist.range();
  BallIndex ball(dist.alphabet, L);
  std::vector<Scalar> cur(static_cast<std::size_t>(ball.size()), Scalar(0)), next(cur.size(), Scalar(0));
  cur[0] = Scalar(1);
  for (int k = 0; k < n; ++k) {
    std::fill(next.begin(), next.end(), Scalar(0));
    for (std::int64_t i = 0; i < ball.size(); ++i) {
      if (cur[static_cast<std::size_t>(i)] == Scalar(0)) continue;
      for (const auto& [g, p] : dist.steps) {
        std::int64_t j = ball.right_multiply(i, g);
        next[static_cast<std::size_t>(j)] += cur[static_cast<std::size_t>(i)] * from_rational<Scalar>(p);
      }
    }
    std::swap(cur, next);
  }
  std::map<Word, Scalar> out;
  for (std::int64_t i = 0; i < ball.size(); ++i)
    if (cur[static_cast<std::size_t>(i)] != Scalar(0)) out[ball.word(i)] = cur[static_cast<std::size_t>(i)];
  return out;
}

#define RATLIM_INSTANTIATE(S)                                                                                  \
  template TransitionSeries<S> transition_series<S>(const WalkSpec&, const std::vector<Word>&, int,           \
                                                    const NStepOptions&);                                     \
  template std::map<Word, BracketedValue<S>> nstep<S>(const WalkSpec&, int, const std::vector<Word>&,         \
                                                      const NStepOptions&);                                   \
  template std::map<Word, S> distribution<S>(const WalkSpec&, int);

RATLIM_INSTANTIATE(Real)
RATLIM_INSTANTIATE(Rational)
RATLIM_INSTANTIATE(HighFloat)
#undef RATLIM_INSTANTIATE

// ---------------------------------------------------------------------------

RatioSequence ratio_sequence(const WalkSpec& spec, const Word& x, const Word& y, int n_max,
                             const NStepOptions& options) {
  if (n_max < 1) throw ValidationError("n_max must be >= 1");
  const Alphabet& alphabet = spec.alphabet();
  Word target = multiply(alphabet, invert(alphabet, x), y);
  auto series = transition_series<Real>(spec, {target, Word()}, n_max, options);
  RatioSequence out;
  for (int n = 0; n <= n_max; ++n) {
    Real num = series.values[0][static_cast<std::size_t>(n)];
    Real den = series.values[1][static_cast<std::size_t>(n)];
    Real eps = series.pruned[static_cast<std::size_t>(n)];
    if (den <= 0) {
      out.skipped.push_back(n);
      continue;
    }
    out.n.push_back(n);
    out.ratio.push_back(num / den);
    out.bracket.push_back((num + eps) / den - num / (den + eps));
  }
  if (!out.skipped.empty())
    out.warnings.push_back("skipped " + std::to_string(out.skipped.size()) +
                           " steps with p^(n)(e,e) = 0 (first n = " + std::to_string(out.skipped.front()) + ")");
  if (out.ratio.empty()) throw ConvergenceError("no step with positive return probability up to n_max");
  out.last = out.ratio.back();
  int tail_start = n_max - std::max(1, n_max / 10);
  for (std::size_t i = 0; i < out.n.size(); ++i)
    if (out.n[i] >= tail_start) out.cauchy_tail = std::max(out.cauchy_tail, std::fabs(out.ratio[i] - out.last));
  return out;
}

FitWindow parse_window(const std::string& text) {
  auto colon = text.find(':');
  if (colon == std::string::npos) throw ValidationError("window must look like a:b");
  FitWindow w;
  try {
    w.n_min = std::stoi(text.substr(0, colon));
    w.n_max = std::stoi(text.substr(colon + 1));
  } catch (const std::exception&) {
    throw ValidationError("window must look like a:b");
  }
  if (w.n_min < 1 || w.n_max < w.n_min) throw ValidationError("window needs 1 <= a <= b");
  return w;
}

namespace {

struct RawFit {
  Real slope_n, slope_log, intercept, rms;
};

RawFit least_squares(const std::vector<Real>& series, FitWindow w) {
  using Matrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
  const int m = w.n_max - w.n_min + 1;
  // centred and scaled columns keep the design well conditioned
  const Real mid = 0.5L * (w.n_min + w.n_max);
  const Real half = std::max<Real>(1, 0.5L * (w.n_max - w.n_min));
  const Real log_mid = std::log(mid);
  Matrix A(m, 3);
  Vector b(m);
  for (int i = 0; i < m; ++i) {
    int n = w.n_min + i;
    Real v = series[static_cast<std::size_t>(n)];
    if (!(v > 0)) throw ValidationError("fit_local_limit needs positive values; p_" + std::to_string(n) + " = " +
                                        std::to_string(static_cast<double>(v)));
    A(i, 0) = (n - mid) / half;
    A(i, 1) = std::log(static_cast<Real>(n)) - log_mid;
    A(i, 2) = 1;
    b(i) = std::log(v);
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(A);
  qr.setThreshold(1e-14L);
  if (qr.rank() < 3) throw ValidationError("degenerate design matrix in local-limit fit");
  Vector c = qr.solve(b);
  RawFit f;
  f.slope_n = c(0) / half;
  f.slope_log = c(1);
  f.intercept = c(2) - f.slope_n * mid - f.slope_log * log_mid;
  f.rms = std::sqrt((A * c - b).squaredNorm() / m);
  return f;
}

}  // namespace

LocalLimitFit fit_local_limit(const std::vector<Real>& series, FitWindow window) {
  if (window.n_max - window.n_min + 1 < 8) throw ValidationError("fit window must contain at least 8 points");
  if (window.n_max >= static_cast<int>(series.size()))
    throw ValidationError("fit window exceeds the series length " + std::to_string(series.size()));
  RawFit f = least_squares(series, window);
  LocalLimitFit out;
  out.window = window;
  out.rho_hat = std::exp(f.slope_n);
  out.alpha_hat = -f.slope_log;
  out.log_constant = f.intercept;
  out.residual = f.rms;
  FitWindow shifted{2 * window.n_min, window.n_max};
  if (shifted.n_max - shifted.n_min + 1 >= 8) {
    RawFit g = least_squares(series, shifted);
    out.shifted_window = shifted;
    out.rho_shifted = std::exp(g.slope_n);
    out.alpha_shifted = -g.slope_log;
    out.has_shifted = true;
  }
  return out;
}

Real simple_walk_spectral_radius(int q) { return 2 * std::sqrt(static_cast<Real>(q)) / (q + 1); }

Real spherical_transform(const IsotropicProfile& profile, Real t) {
  const Real q = profile.q;
  Real prev = 1, cur = t;  // P_0-hat, P_1-hat
  Real total = to_real(profile.a[0]);
  for (int d = 1; d <= profile.range(); ++d) {
    total += to_real(profile.a[static_cast<std::size_t>(d)]) * cur;
    Real nxt = ((q + 1) * t * cur - prev) / q;
    prev = cur;
    cur = nxt;
  }
  return total;
}

}  // namespace ratlim
