#pragma once

#include "ratlim/geometry.hpp"

#include <istream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ratlim {

struct IsotropicProfile {
  int q = 2;
  std::vector<Rational> a;  // a[d] = P(jump to distance d); finite support
  int range() const { return static_cast<int>(a.size()) - 1; }
};

struct StepDistribution {
  Alphabet alphabet = Alphabet::free_group(2);
  std::vector<std::pair<Word, Rational>> steps;  // shortlex order, positive masses

  int range() const;
  Rational mass(const Word& g) const;
  Rational identity_mass() const { return mass(Word()); }
  // Support inside {e} and the generating letters.
  bool nearest_neighbour() const;
  bool symmetric() const;
};

class WalkSpec {
 public:
  enum class Mode { isotropic, finite };

  static WalkSpec isotropic(int q, std::vector<Rational> a);
  static WalkSpec finite(const Alphabet& alphabet, std::vector<std::pair<Word, Rational>> steps);

  Mode mode() const { return mode_; }
  bool is_isotropic() const { return mode_ == Mode::isotropic; }
  // Throws "radial projection requires isotropy" for finitely supported specs.
  const IsotropicProfile& profile() const;
  // For isotropic specs this is the induced measure mu(x) = a_|x| / |sphere| on the tree's Cayley alphabet.
  const StepDistribution& steps() const { return steps_; }
  const Alphabet& alphabet() const { return steps_.alphabet; }
  int q() const { return steps_.alphabet.q(); }
  int range() const { return steps_.range(); }
  bool nearest_neighbour() const { return steps_.nearest_neighbour(); }
  bool aperiodic() const;
  bool symmetric() const { return steps_.symmetric(); }

  std::string label;

 private:
  WalkSpec() = default;
  Mode mode_ = Mode::finite;
  IsotropicProfile profile_;
  StepDistribution steps_;
};

WalkSpec parse_walk_spec(std::istream& in);
WalkSpec load_walk_spec(const std::string& path);
std::string walk_spec_to_text(const WalkSpec& spec);

// Single-walk presets: t3-lazy-iso, f2-lazy-uniform (alias f2-lazy), z-lazy.
std::optional<WalkSpec> preset_walk(const std::string& name);
std::vector<std::string> preset_names();

// Distance process of an isotropic walk.
class RadialChain {
 public:
  explicit RadialChain(const WalkSpec& spec);

  int q() const { return q_; }
  int range() const { return range_; }
  // Transitions out of distance k as (k', probability), ascending in k'.
  std::vector<std::pair<int, Rational>> row(int k) const;
  Rational probability(int k, int k_next) const;
  // Sources k with p(k, k_next) > 0, for pull-form convolution.
  std::vector<std::pair<int, Rational>> column(int k_next) const;

  // #{y : |y| = k_next, d(x, y) = d} for any x with |x| = k.
  static BigInt sphere_intersection(int q, int k, int d, int k_next);
  static BigInt sphere_size(int q, int k);

 private:
  int q_;
  int range_;
  std::vector<Rational> a_;
  std::vector<std::vector<std::pair<int, Rational>>> rows_;  // k = 0..range
  std::vector<std::pair<int, Rational>> generic_;           // offsets for k > range
};

enum class Execution { serial, parallel };

struct NStepOptions {
  std::int64_t state_budget = 8'000'000;
  Real prune_threshold = 1e-30L;  // ignored in rational mode
  Real max_pruned = 1e-12L;       // largest tolerated bracket width
  Execution execution = Execution::parallel;
};

// Probability with its one-sided bracket [value, value + pruned].
template <class Scalar>
struct BracketedValue {
  Scalar value;
  Scalar pruned;
};

template <class Scalar>
struct TransitionSeries {
  std::vector<Word> targets;
  std::vector<std::vector<Scalar>> values;  // values[t][n] = p^(n)(e, targets[t])
  std::vector<Scalar> pruned;               // bracket width after n steps
  int ball_radius = 0;
  std::string engine;
};

template <class Scalar>
TransitionSeries<Scalar> transition_series(const WalkSpec& spec, const std::vector<Word>& targets, int n_max,
                                           const NStepOptions& options = {});

template <class Scalar>
std::map<Word, BracketedValue<Scalar>> nstep(const WalkSpec& spec, int n, const std::vector<Word>& targets,
                                             const NStepOptions& options = {});

// Full law of X_n started at e (no pruning); for small n only.
template <class Scalar>
std::map<Word, Scalar> distribution(const WalkSpec& spec, int n);

struct RatioSequence {
  std::vector<int> n;
  std::vector<Real> ratio;
  std::vector<Real> bracket;  // upper minus lower ratio bound from pruned mass
  std::vector<int> skipped;
  Real last = 0;
  Real cauchy_tail = 0;  // max |ratio_n - last| over the final tenth of the range
  std::vector<std::string> warnings;
};

RatioSequence ratio_sequence(const WalkSpec& spec, const Word& x, const Word& y, int n_max,
                             const NStepOptions& options = {});

struct FitWindow {
  int n_min = 0;
  int n_max = 0;
};

FitWindow parse_window(const std::string& text);

struct LocalLimitFit {
  Real rho_hat = 0;
  Real alpha_hat = 0;
  Real log_constant = 0;
  FitWindow window;
  Real residual = 0;  // rms of log residuals
  FitWindow shifted_window;
  Real rho_shifted = 0;
  Real alpha_shifted = 0;
  bool has_shifted = false;
};

// Least squares of log p_n on [n, log n, 1]; series[n] is p_n. Zero entries inside the window are rejected.
LocalLimitFit fit_local_limit(const std::vector<Real>& series, FitWindow window);

struct SpectralRadius {
  Real value = 0;
  std::string method;
  std::optional<Real> fit_value;
  Real uncertainty = 0;
};

// Value of the spherical transform P-hat(t) = sum a_d P_d-hat(t).
Real spherical_transform(const IsotropicProfile& profile, Real t);
Real simple_walk_spectral_radius(int q);

SpectralRadius spectral_radius(const WalkSpec& spec);

}  // namespace ratlim
