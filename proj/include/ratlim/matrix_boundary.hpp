#pragma once

#include "ratlim/kernels.hpp"
#include "ratlim/linalg.hpp"
#include "ratlim/walks.hpp"

#include <json.hpp>

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace ratlim {

// Excursion matrices of the walk into the deep part of each cone.
// For a letter a, L_a holds the words starting with a of length 1..R and D_a the longer ones;
// E_a(u, v) sums z^n over paths u -> (inside D_a) -> v with u, v in L_a.
struct ConeSystemSolution {
  Real z = 0;
  std::vector<RealMatrixX> E;  // by alphabet slot
  bool converged = false;
  int iterations = 0;
  Real residual = 0;
  Real jacobian_bound = 1;  // certified upper bound on the Jacobian's spectral radius
};

struct CriticalPoint {
  Real r = 0;  // lower end of the bracket: the cone system still converges there
  Real lo = 0;
  Real hi = 0;
  int bisection_steps = 0;
};

// Finite-range first-passage machinery on a free product alphabet, with the exact cone
// renewal standing in for the infinite part of the tree.
class PassageMachinery {
 public:
  explicit PassageMachinery(const WalkSpec& spec);

  const WalkSpec& spec() const { return spec_; }
  const Alphabet& alphabet() const { return spec_.alphabet(); }
  int R() const { return R_; }
  int N() const { return N_; }
  int D() const { return N_ + 2 * R_ + 1; }
  // B = B_R in shortlex order.
  const std::vector<Word>& ball() const { return ball_; }

  ConeSystemSolution cone_system(Real z) const;
  CriticalPoint critical_point() const;
  Real radius() const { return critical_point().r; }

  // F^A(x, a | z) for x in `sources` (rows) and a in `targets` (columns), A = targets.
  RealMatrixX first_passage(const std::vector<Word>& sources, const std::vector<Word>& targets, Real z) const;
  // G(x, y | z).
  RealMatrixX green(const std::vector<Word>& sources, const std::vector<Word>& targets, Real z) const;

  // fb(x, y | z)_v = F^{yB}(x, yv | z), v in B.
  RealVectorX fb(const Word& x, const Word& y, Real z) const;
  // Fb(w | z)_{u,v} = F^{wB}(u, wv | z), u, v in B (cached per word and z).
  RealMatrixX Fb(const Word& w, Real z) const;
  // gb(u, y | z)_v = G(uv, y | z), v in B.
  RealVectorX gb(const Word& u, const Word& y, Real z) const;

  std::vector<Word> translate(const Word& y) const;

 private:
  ConeSystemSolution solve_cones(Real z, const std::vector<RealMatrixX>* warm) const;

  WalkSpec spec_;
  int R_ = 1;
  int N_ = 1;
  std::vector<Word> ball_;
  struct Cone;
  std::vector<std::shared_ptr<const Cone>> cones_;  // by slot

  mutable std::mutex mutex_;
  mutable std::map<Real, ConeSystemSolution> cone_cache_;
  mutable std::unique_ptr<CriticalPoint> critical_;
  mutable std::map<std::pair<Word, Real>, RealMatrixX> fb_cache_;
};

// Smallest N >= R such that every u' in B is reachable from every u in B inside B_N.
int connectivity_radius(const WalkSpec& spec);

// min { F_{B_N}(u, u' | z) : u, u' in B }, paths confined to B_N.
struct LambdaZ {
  Real value = 0;
  int N = 0;
  Word argmin_from, argmin_to;
};

LambdaZ lambda_z(const PassageMachinery& m, Real z);

struct ColumnPattern {
  bool disposed_in_columns = true;  // every column entirely zero or entirely positive
  int positive_columns = 0;
  Real min_ratio = 1;  // smallest min/max entry ratio over non-zero columns
};

ColumnPattern column_pattern(const RealMatrixX& M);

// Truncated path-sum oracle: u_{n+1} = z P u_n on a state ball with absorption at yB.
struct DPOptions {
  Real tol = 1e-12L;
  int max_steps = 20000;
  std::int64_t state_budget = 4'000'000;
};

struct DPResult {
  RealVectorX fb;
  Real escaped = 0;         // z-weighted mass lost through the outer shell
  Real last_increment = 0;  // absorbed mass in the final step
  int steps = 0;
  int state_radius = 0;
};

DPResult first_passage_to_ball_dp(const WalkSpec& spec, const Word& x, const Word& y, Real z,
                                  const DPOptions& options = {});

// Hilbert projective distance between positive vectors.
Real hilbert_distance(const RealVectorX& a, const RealVectorX& b);
// tanh(diameter / 4) over the positive columns.
Real birkhoff_coefficient(const RealMatrixX& M);

struct ContractionResult {
  RealVectorX limit;          // Proj(M_1 ... M_n s_1), normalised to sum 1
  Real seed_gap = 0;          // Hilbert distance between the two seeds' projections at n
  std::vector<Real> gaps;     // the same after 1..n factors
  std::vector<Real> successive;  // Hilbert distance between consecutive projections of seed 1
  Real rate = 0;              // empirical contraction ratio of the gaps
  Real birkhoff = 0;          // max Birkhoff coefficient over the factors
  bool contracted = false;
};

// Products M_1 ... M_n applied to two seeds; throws "not yet contracted" when the seeds
// still differ by more than tol.
ContractionResult contraction_limit(const std::vector<RealMatrixX>& matrices, const RealVectorX& seed1,
                                    const RealVectorX& seed2, Real tol = 1e-10L);

// Two deterministic positive seeds for a given dimension.
std::pair<RealVectorX, RealVectorX> default_seeds(int dimension, std::uint64_t seed = 7);

struct MatrixKernelValue {
  Real value = 0;
  Real invariance_error = 0;  // |K at k - K at k+2| when depth allows, else 0
  bool invariance_checked = false;
  int k = 0;
  int factors = 0;
  ContractionResult contraction;
};

// Martin kernel at rho from the inner-product quotient with the contracted direction at u_k.
MatrixKernelValue martin_kernel_matrix(const PassageMachinery& m, const Word& x, const EndPrefix& xi,
                                       Real tol = 1e-10L);

// K(., xi | rho) on a ball of words, with one anchor u_k shared by all of them.
class MatrixKernelField {
 public:
  MatrixKernelField(const PassageMachinery& m, const EndPrefix& xi, int max_length, Real tol = 1e-10L);
  Real at(const Word& x) const;
  const ContractionResult& contraction() const { return contraction_; }
  const Word& anchor() const { return anchor_; }

 private:
  const PassageMachinery& m_;
  Word anchor_;
  RealVectorX w_;
  Real norm_ = 1;
  ContractionResult contraction_;
  std::map<Word, Real> values_;
};

// H(x, y) for finite y by two-scale differencing of G near r.
struct TwoScaleRatio {
  Real value = 0;
  Real coarse = 0;  // delta = 1e-6
  Real fine = 0;    // delta = 1e-8
};

TwoScaleRatio ratio_kernel_matrix(const PassageMachinery& m, const Word& x, const Word& y);

std::unique_ptr<RatioKernel> make_matrix_ratio_kernel(const WalkSpec& spec);

nlohmann::json matrix_dump(const PassageMachinery& m, const Word& w, Real z);

}  // namespace ratlim
