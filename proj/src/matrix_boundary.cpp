#include "ratlim/matrix_boundary.hpp"

#include "ratlim/report.hpp"

#include <Eigen/LU>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <unordered_map>

namespace ratlim {

namespace {

using WordIndex = std::unordered_map<Word, int, WordHash>;

std::vector<Word> children(const Alphabet& alphabet, const Word& w) {
  std::vector<Word> out;
  for (Letter b : alphabet.letters()) {
    if (!w.is_identity() && b == alphabet.inverse(w[w.length() - 1])) continue;
    std::vector<Letter> letters = w.letters();
    letters.push_back(b);
    out.push_back(Word::trusted(std::move(letters)));
  }
  return out;
}

Word concat(const Word& a, const Word& b) {
  std::vector<Letter> letters = a.letters();
  letters.insert(letters.end(), b.letters().begin(), b.letters().end());
  return Word::trusted(std::move(letters));
}

Word suffix(const Word& w, int from) {
  return Word::trusted(std::vector<Letter>(w.letters().begin() + from, w.letters().end()));
}

std::vector<std::pair<Word, Real>> real_steps(const WalkSpec& spec) {
  std::vector<std::pair<Word, Real>> out;
  for (const auto& [g, p] : spec.steps().steps) out.emplace_back(g, to_real(p));
  return out;
}

}  // namespace

struct PassageMachinery::Cone {
  std::vector<Word> L, S;
  WordIndex l_index;
  RealMatrixX A, B, P;  // step masses L->S, S->L, S->S
  struct Block {
    int slot;
    std::vector<int> idx;  // position in S of c'.t for t in L_slot
  };
  std::vector<Block> blocks;
};

PassageMachinery::PassageMachinery(const WalkSpec& spec) : spec_(spec), R_(std::max(1, spec.range())) {
  const Alphabet& alphabet = spec_.alphabet();
  if (alphabet.kind() == Alphabet::Kind::free_group && alphabet.rank() < 2)
    throw ValidationError("matrix machinery needs a free group of rank >= 2 or a free product of involutions");
  BallIndex b(alphabet, R_);
  for (std::int64_t i = 0; i < b.size(); ++i) ball_.push_back(b.word(i));
  N_ = connectivity_radius(spec_);

  const int degree = alphabet.degree();
  std::vector<std::shared_ptr<Cone>> cones(static_cast<std::size_t>(degree));
  for (int s = 0; s < degree; ++s) {
    auto cone = std::make_shared<Cone>();
    std::vector<Word> frontier{Word::trusted({alphabet.letter(s)})};
    for (int len = 1; len <= 2 * R_; ++len) {
      std::vector<Word> next;
      for (const Word& w : frontier) {
        (len <= R_ ? cone->L : cone->S).push_back(w);
        for (Word& c : children(alphabet, w)) next.push_back(std::move(c));
      }
      frontier = std::move(next);
    }
    for (std::size_t i = 0; i < cone->L.size(); ++i) cone->l_index.emplace(cone->L[i], static_cast<int>(i));
    cones[static_cast<std::size_t>(s)] = cone;
  }
  const auto steps = real_steps(spec_);
  for (int s = 0; s < degree; ++s) {
    Cone& cone = *cones[static_cast<std::size_t>(s)];
    WordIndex s_index;
    for (std::size_t i = 0; i < cone.S.size(); ++i) s_index.emplace(cone.S[i], static_cast<int>(i));
    const auto nl = static_cast<Eigen::Index>(cone.L.size()), ns = static_cast<Eigen::Index>(cone.S.size());
    cone.A = RealMatrixX::Zero(nl, ns);
    cone.B = RealMatrixX::Zero(ns, nl);
    cone.P = RealMatrixX::Zero(ns, ns);
    for (Eigen::Index i = 0; i < nl; ++i)
      for (const auto& [g, p] : steps)
        if (auto it = s_index.find(multiply(alphabet, cone.L[static_cast<std::size_t>(i)], g)); it != s_index.end())
          cone.A(i, it->second) += p;
    for (Eigen::Index i = 0; i < ns; ++i)
      for (const auto& [g, p] : steps) {
        Word t = multiply(alphabet, cone.S[static_cast<std::size_t>(i)], g);
        if (auto it = s_index.find(t); it != s_index.end()) cone.P(i, it->second) += p;
        if (auto it = cone.l_index.find(t); it != cone.l_index.end()) cone.B(i, it->second) += p;
      }
    std::map<Word, std::size_t> block_of;  // keyed by c'b
    for (std::size_t i = 0; i < cone.S.size(); ++i) {
      const Word& w = cone.S[i];
      Word root = w.prefix(R_ + 1);
      int slot = alphabet.slot(w[R_]);
      auto [it, fresh] = block_of.emplace(root, cone.blocks.size());
      if (fresh) {
        const Cone& sub = *cones[static_cast<std::size_t>(slot)];
        cone.blocks.push_back({slot, std::vector<int>(sub.L.size(), -1)});
      }
      const Cone& sub = *cones[static_cast<std::size_t>(slot)];
      cone.blocks[it->second].idx[static_cast<std::size_t>(sub.l_index.at(suffix(w, R_)))] = static_cast<int>(i);
    }
  }
  for (auto& c : cones) cones_.push_back(c);
}

ConeSystemSolution PassageMachinery::cone_system(Real z) const {
  {
    std::lock_guard<std::mutex> lock(mutex_);
    if (auto it = cone_cache_.find(z); it != cone_cache_.end()) return it->second;
  }
  ConeSystemSolution s = solve_cones(z, nullptr);
  std::lock_guard<std::mutex> lock(mutex_);
  cone_cache_.emplace(z, s);
  return s;
}

ConeSystemSolution PassageMachinery::solve_cones(Real z, const std::vector<RealMatrixX>* warm) const {
  if (z < 0) throw ValidationError("z must be >= 0");
  const std::size_t degree = cones_.size();
  std::vector<Eigen::Index> offset(degree + 1, 0);
  for (std::size_t a = 0; a < degree; ++a) {
    auto l = static_cast<Eigen::Index>(cones_[a]->L.size());
    offset[a + 1] = offset[a] + l * l;
  }
  const Eigen::Index n = offset[degree];
  auto unpack = [&](const RealVectorX& x) {
    std::vector<RealMatrixX> E(degree);
    for (std::size_t a = 0; a < degree; ++a) {
      auto l = static_cast<Eigen::Index>(cones_[a]->L.size());
      E[a] = RealMatrixX(l, l);
      for (Eigen::Index i = 0; i < l; ++i)
        for (Eigen::Index j = 0; j < l; ++j) E[a](i, j) = x(offset[a] + i * l + j);
    }
    return E;
  };
  // One evaluation of the map and its Jacobian; false when I - Q is not a nonsingular M-matrix.
  auto evaluate = [&](const RealVectorX& x, RealVectorX& phi, RealMatrixX& J) {
    std::vector<RealMatrixX> E = unpack(x);
    phi = RealVectorX::Zero(n);
    J = RealMatrixX::Zero(n, n);
    for (std::size_t a = 0; a < degree; ++a) {
      const Cone& c = *cones_[a];
      RealMatrixX Q = z * c.P;
      for (const auto& blk : c.blocks) {
        const RealMatrixX& Eb = E[static_cast<std::size_t>(blk.slot)];
        for (std::size_t d = 0; d < blk.idx.size(); ++d)
          for (std::size_t e = 0; e < blk.idx.size(); ++e)
            Q(blk.idx[d], blk.idx[e]) += Eb(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(e));
      }
      const auto ns = Q.rows();
      Eigen::PartialPivLU<RealMatrixX> lu(RealMatrixX::Identity(ns, ns) - Q);
      RealMatrixX Y = lu.inverse();
      for (Eigen::Index i = 0; i < Y.size(); ++i)
        if (!std::isfinite(Y.data()[i]) || Y.data()[i] < -1e-9L) return false;
      RealMatrixX U = z * c.A * Y;
      RealMatrixX V = Y * (z * c.B);
      RealMatrixX Ea = U * (z * c.B);
      auto l = static_cast<Eigen::Index>(c.L.size());
      for (Eigen::Index i = 0; i < l; ++i)
        for (Eigen::Index o = 0; o < l; ++o) phi(offset[a] + i * l + o) = Ea(i, o);
      for (const auto& blk : c.blocks) {
        auto b = static_cast<std::size_t>(blk.slot);
        auto lb = static_cast<Eigen::Index>(blk.idx.size());
        for (Eigen::Index i = 0; i < l; ++i)
          for (Eigen::Index o = 0; o < l; ++o)
            for (Eigen::Index d = 0; d < lb; ++d)
              for (Eigen::Index e = 0; e < lb; ++e)
                J(offset[a] + i * l + o, offset[b] + d * lb + e) +=
                    U(i, blk.idx[static_cast<std::size_t>(d)]) * V(blk.idx[static_cast<std::size_t>(e)], o);
      }
    }
    return true;
  };

  ConeSystemSolution out;
  out.z = z;
  RealVectorX x = RealVectorX::Zero(n);
  if (warm) {
    for (std::size_t a = 0; a < degree; ++a) {
      auto l = static_cast<Eigen::Index>(cones_[a]->L.size());
      for (Eigen::Index i = 0; i < l; ++i)
        for (Eigen::Index j = 0; j < l; ++j) x(offset[a] + i * l + j) = (*warm)[a](i, j);
    }
  }
  const Real tiny = 16 * std::numeric_limits<Real>::epsilon();
  Real last_step = std::numeric_limits<Real>::infinity();
  RealVectorX phi;
  RealMatrixX J;
  for (int it = 0; it < 4000; ++it) {
    if (!evaluate(x, phi, J)) {
      out.iterations = it;
      return out;
    }
    SubunitCertificate cert = certify_subunit_radius(J);
    if (!cert.certified) {
      out.iterations = it;
      return out;
    }
    RealVectorX delta = (RealMatrixX::Identity(n, n) - J).fullPivLu().solve(phi - x);
    x += delta;
    Real step = delta.cwiseAbs().maxCoeff();
    Real scale = std::max<Real>(1, x.cwiseAbs().maxCoeff());
    if (!x.allFinite() || scale > 1e12L) {
      out.iterations = it;
      return out;
    }
    // same stopping rule as the nearest-neighbour system: rounding level, or a stalled step near criticality
    if (step <= tiny * scale || (step <= 1e-9L * scale && step >= 0.5L * last_step)) {
      out.iterations = it + 1;
      if (!evaluate(x, phi, J)) return out;
      SubunitCertificate final_cert = certify_subunit_radius(J);
      out.converged = final_cert.certified;
      out.jacobian_bound = final_cert.certified ? final_cert.bound : 1;
      out.residual = (phi - x).cwiseAbs().maxCoeff();
      out.E = unpack(x);
      return out;
    }
    last_step = step;
  }
  out.iterations = 4000;
  return out;
}

CriticalPoint PassageMachinery::critical_point() const {
  {
    std::lock_guard<std::mutex> lock(mutex_);
    if (critical_) return *critical_;
  }
  CriticalPoint cp;
  ConeSystemSolution lo_sol = solve_cones(0, nullptr);
  Real lo = 0, hi = 2;
  while (true) {
    ConeSystemSolution s = solve_cones(hi, &lo_sol.E);
    if (!s.converged) break;
    if (hi >= 1024) throw ConvergenceError("cone system converges on (0, 1024]; no critical point found");
    lo = hi;
    lo_sol = s;
    hi *= 2;
  }
  while (true) {
    Real mid = lo + (hi - lo) / 2;
    if (mid <= lo || mid >= hi) break;
    ConeSystemSolution s = solve_cones(mid, &lo_sol.E);
    if (s.converged) {
      lo = mid;
      lo_sol = s;
    } else {
      hi = mid;
    }
    ++cp.bisection_steps;
  }
  if (hi - lo > 1e-12L) throw ConvergenceError("cone-system critical bracket wider than 1e-12");
  cp.r = cp.lo = lo;
  cp.hi = hi;
  std::lock_guard<std::mutex> lock(mutex_);
  cone_cache_.emplace(lo, lo_sol);
  critical_ = std::make_unique<CriticalPoint>(cp);
  return cp;
}

// ---------------------------------------------------------------------------
// Finite regions: the R-neighbourhood of the rooted hull of some anchors, plus one depth-R
// layer into every hanging cone; excursions below the layers enter through the cone matrices.

namespace {

struct Region {
  std::vector<Word> words;
  WordIndex index;
  Eigen::SparseMatrix<Real> Q;
};

}  // namespace

static Region build_region(const PassageMachinery& m, const std::vector<Word>& anchors, Real z,
                           const std::vector<RealMatrixX>& E,
                           const std::vector<std::vector<Word>>& layer_words) {
  const Alphabet& alphabet = m.alphabet();
  std::set<Word> hull{Word()};
  for (const Word& a : anchors)
    for (int k = 0; k <= a.length(); ++k) hull.insert(a.prefix(k));
  std::set<Word> omega;
  for (const Word& h : hull)
    for (const Word& g : m.ball()) omega.insert(multiply(alphabet, h, g));
  Region region;
  auto add = [&](const Word& w) {
    region.index.emplace(w, static_cast<int>(region.words.size()));
    region.words.push_back(w);
  };
  for (const Word& w : omega) add(w);
  struct Layer {
    int slot;
    int first;
  };
  std::vector<Layer> layers;
  for (const Word& w : omega)
    for (const Word& c : children(alphabet, w)) {
      if (omega.count(c)) continue;
      int slot = alphabet.slot(c[c.length() - 1]);
      layers.push_back({slot, static_cast<int>(region.words.size())});
      for (const Word& t : layer_words[static_cast<std::size_t>(slot)]) add(concat(w, t));
    }
  std::vector<Eigen::Triplet<Real>> trips;
  for (std::size_t i = 0; i < region.words.size(); ++i)
    for (const auto& [g, p] : m.spec().steps().steps) {
      auto it = region.index.find(multiply(alphabet, region.words[i], g));
      if (it != region.index.end()) trips.emplace_back(static_cast<int>(i), it->second, z * to_real(p));
    }
  for (const Layer& layer : layers) {
    const RealMatrixX& Eb = E[static_cast<std::size_t>(layer.slot)];
    for (Eigen::Index d = 0; d < Eb.rows(); ++d)
      for (Eigen::Index e = 0; e < Eb.cols(); ++e)
        if (Eb(d, e) != 0)
          trips.emplace_back(layer.first + static_cast<int>(d), layer.first + static_cast<int>(e), Eb(d, e));
  }
  const auto n = static_cast<Eigen::Index>(region.words.size());
  region.Q.resize(n, n);
  region.Q.setFromTriplets(trips.begin(), trips.end());
  return region;
}

std::vector<Word> PassageMachinery::translate(const Word& y) const {
  std::vector<Word> out;
  for (const Word& v : ball_) out.push_back(multiply(alphabet(), y, v));
  return out;
}

RealMatrixX PassageMachinery::first_passage(const std::vector<Word>& sources, const std::vector<Word>& targets,
                                            Real z) const {
  ConeSystemSolution cs = cone_system(z);
  if (!cs.converged) throw ConvergenceError("cone system does not converge at z (beyond the critical point?)");
  std::vector<std::vector<Word>> layer_words;
  for (const auto& c : cones_) layer_words.push_back(c->L);
  std::vector<Word> anchors = sources;
  anchors.insert(anchors.end(), targets.begin(), targets.end());
  Region region = build_region(*this, anchors, z, cs.E, layer_words);
  const auto n = static_cast<Eigen::Index>(region.words.size());
  std::vector<int> target_pos(static_cast<std::size_t>(n), -1);
  for (std::size_t j = 0; j < targets.size(); ++j) target_pos[static_cast<std::size_t>(region.index.at(targets[j]))] = static_cast<int>(j);
  std::vector<int> free_pos(static_cast<std::size_t>(n), -1);
  int nf = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    if (target_pos[static_cast<std::size_t>(i)] < 0) free_pos[static_cast<std::size_t>(i)] = nf++;
  std::vector<Eigen::Triplet<Real>> a_trips;
  RealMatrixX rhs = RealMatrixX::Zero(nf, static_cast<Eigen::Index>(targets.size()));
  for (Eigen::Index i = 0; i < nf; ++i) a_trips.emplace_back(static_cast<int>(i), static_cast<int>(i), 1);
  for (Eigen::Index k = 0; k < region.Q.outerSize(); ++k)
    for (Eigen::SparseMatrix<Real>::InnerIterator it(region.Q, k); it; ++it) {
      int fi = free_pos[static_cast<std::size_t>(it.row())];
      if (fi < 0) continue;
      int tj = target_pos[static_cast<std::size_t>(it.col())];
      if (tj >= 0)
        rhs(fi, tj) += it.value();
      else
        a_trips.emplace_back(fi, free_pos[static_cast<std::size_t>(it.col())], -it.value());
    }
  Eigen::SparseMatrix<Real> A(nf, nf);
  A.setFromTriplets(a_trips.begin(), a_trips.end());
  Eigen::SparseLU<Eigen::SparseMatrix<Real>> lu;
  lu.compute(A);
  if (lu.info() != Eigen::Success) throw ConvergenceError("restricted passage system is singular");
  RealMatrixX X = lu.solve(rhs);
  RealMatrixX out = RealMatrixX::Zero(static_cast<Eigen::Index>(sources.size()), static_cast<Eigen::Index>(targets.size()));
  for (std::size_t i = 0; i < sources.size(); ++i) {
    int pos = region.index.at(sources[i]);
    if (int tj = target_pos[static_cast<std::size_t>(pos)]; tj >= 0)
      out(static_cast<Eigen::Index>(i), tj) = 1;
    else
      out.row(static_cast<Eigen::Index>(i)) = X.row(free_pos[static_cast<std::size_t>(pos)]);
  }
  return out;
}

RealMatrixX PassageMachinery::green(const std::vector<Word>& sources, const std::vector<Word>& targets, Real z) const {
  ConeSystemSolution cs = cone_system(z);
  if (!cs.converged) throw ConvergenceError("cone system does not converge at z (beyond the critical point?)");
  std::vector<std::vector<Word>> layer_words;
  for (const auto& c : cones_) layer_words.push_back(c->L);
  std::vector<Word> anchors = sources;
  anchors.insert(anchors.end(), targets.begin(), targets.end());
  Region region = build_region(*this, anchors, z, cs.E, layer_words);
  const auto n = static_cast<Eigen::Index>(region.words.size());
  Eigen::SparseMatrix<Real> I(n, n);
  I.setIdentity();
  Eigen::SparseMatrix<Real> A = I - region.Q;
  Eigen::SparseLU<Eigen::SparseMatrix<Real>> lu;
  lu.compute(A);
  if (lu.info() != Eigen::Success) throw ConvergenceError("region Green system is singular");
  RealMatrixX rhs = RealMatrixX::Zero(n, static_cast<Eigen::Index>(targets.size()));
  for (std::size_t j = 0; j < targets.size(); ++j) rhs(region.index.at(targets[j]), static_cast<Eigen::Index>(j)) = 1;
  RealMatrixX X = lu.solve(rhs);
  RealMatrixX out(static_cast<Eigen::Index>(sources.size()), static_cast<Eigen::Index>(targets.size()));
  for (std::size_t i = 0; i < sources.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = X.row(region.index.at(sources[i]));
  return out;
}

RealVectorX PassageMachinery::fb(const Word& x, const Word& y, Real z) const {
  return first_passage({x}, translate(y), z).row(0).transpose();
}

RealMatrixX PassageMachinery::Fb(const Word& w, Real z) const {
  {
    std::lock_guard<std::mutex> lock(mutex_);
    if (auto it = fb_cache_.find({w, z}); it != fb_cache_.end()) return it->second;
  }
  RealMatrixX M = first_passage(ball_, translate(w), z);
  std::lock_guard<std::mutex> lock(mutex_);
  fb_cache_.emplace(std::make_pair(w, z), M);
  return M;
}

RealVectorX PassageMachinery::gb(const Word& u, const Word& y, Real z) const {
  return green(translate(u), {y}, z).col(0);
}

// ---------------------------------------------------------------------------

int connectivity_radius(const WalkSpec& spec) {
  const Alphabet& alphabet = spec.alphabet();
  const int R = std::max(1, spec.range());
  for (int N = R; N <= R + 8; ++N) {
    BallIndex ball(alphabet, N);
    const std::int64_t nb = ball.count_within(R);
    bool ok = true;
    for (std::int64_t u = 0; u < nb && ok; ++u) {
      std::vector<char> seen(static_cast<std::size_t>(ball.size()), 0);
      std::vector<std::int64_t> queue{u};
      seen[static_cast<std::size_t>(u)] = 1;
      for (std::size_t h = 0; h < queue.size(); ++h)
        for (const auto& [g, p] : spec.steps().steps) {
          std::int64_t t = ball.index_of(multiply(alphabet, ball.word(queue[h]), g));
          if (t >= 0 && !seen[static_cast<std::size_t>(t)]) {
            seen[static_cast<std::size_t>(t)] = 1;
            queue.push_back(t);
          }
        }
      for (std::int64_t v = 0; v < nb; ++v) ok = ok && seen[static_cast<std::size_t>(v)];
    }
    if (ok) return N;
  }
  throw ValidationError("B_R is not connected inside B_N for N <= R + 8; increase N");
}

LambdaZ lambda_z(const PassageMachinery& m, Real z) {
  const Alphabet& alphabet = m.alphabet();
  BallIndex ball(alphabet, m.N());
  const auto n = static_cast<Eigen::Index>(ball.size());
  RealMatrixX P = RealMatrixX::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (const auto& [g, p] : m.spec().steps().steps) {
      std::int64_t t = ball.index_of(multiply(alphabet, ball.word(i), g));
      if (t >= 0) P(i, static_cast<Eigen::Index>(t)) += z * to_real(p);
    }
  const auto nb = static_cast<Eigen::Index>(m.ball().size());
  LambdaZ out;
  out.N = m.N();
  out.value = std::numeric_limits<Real>::infinity();
  for (Eigen::Index target = 0; target < nb; ++target) {
    // h(u) = F_{B_N}(u, target): h = z P h off the target, h(target) = 1
    RealMatrixX A = RealMatrixX::Identity(n, n) - P;
    RealVectorX rhs = RealVectorX::Zero(n);
    A.row(target).setZero();
    A(target, target) = 1;
    rhs(target) = 1;
    RealVectorX h = A.partialPivLu().solve(rhs);
    for (Eigen::Index u = 0; u < nb; ++u)
      if (h(u) < out.value) {
        out.value = h(u);
        out.argmin_from = ball.word(u);
        out.argmin_to = ball.word(target);
      }
  }
  if (!(out.value > 0)) throw ValidationError("F_{B_N} vanishes between points of B; increase N");
  return out;
}

ColumnPattern column_pattern(const RealMatrixX& M) {
  ColumnPattern out;
  const Real scale = M.cwiseAbs().maxCoeff();
  const Real zero = 1e-15L * scale;
  for (Eigen::Index j = 0; j < M.cols(); ++j) {
    int positive = 0;
    Real lo = std::numeric_limits<Real>::infinity(), hi = 0;
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
      if (M(i, j) < -zero) out.disposed_in_columns = false;
      if (M(i, j) > zero) ++positive;
      lo = std::min(lo, M(i, j));
      hi = std::max(hi, M(i, j));
    }
    if (positive == 0) continue;
    if (positive != M.rows()) out.disposed_in_columns = false;
    ++out.positive_columns;
    out.min_ratio = std::min(out.min_ratio, lo / hi);
  }
  return out;
}

DPResult first_passage_to_ball_dp(const WalkSpec& spec, const Word& x, const Word& y, Real z,
                                  const DPOptions& options) {
  const Alphabet& alphabet = spec.alphabet();
  const int R = std::max(1, spec.range());
  BallIndex b(alphabet, R);
  std::vector<Word> B;
  for (std::int64_t i = 0; i < b.size(); ++i) B.push_back(multiply(alphabet, y, b.word(i)));
  for (std::size_t v = 0; v < B.size(); ++v)
    if (B[v] == x) {
      DPResult out;
      out.fb = RealVectorX::Zero(static_cast<Eigen::Index>(B.size()));
      out.fb(static_cast<Eigen::Index>(v)) = 1;
      return out;
    }
  const auto steps = real_steps(spec);
  // a ball of radius 3D is out of reach on free groups, so start just outside yB and grow by R
  int L = std::max(x.length(), y.length() + R) + 2 * R;
  std::string last_failure = "state ball of radius " + std::to_string(L) + " exceeds the state budget";
  while (BallIndex::ball_size(alphabet.degree(), L) <= options.state_budget) {
    BallIndex ball(alphabet, L);
    const auto n = static_cast<std::size_t>(ball.size());
    std::vector<std::int64_t> table(n * steps.size());
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < steps.size(); ++k)
        table[i * steps.size() + k] = ball.right_multiply(static_cast<std::int64_t>(i), steps[k].first);
    std::vector<int> absorb(n, -1);
    for (std::size_t v = 0; v < B.size(); ++v) absorb[static_cast<std::size_t>(ball.index_of(B[v]))] = static_cast<int>(v);
    std::vector<Real> cur(n, 0), next(n, 0);
    cur[static_cast<std::size_t>(ball.index_of(x))] = 1;
    DPResult out;
    out.fb = RealVectorX::Zero(static_cast<Eigen::Index>(B.size()));
    out.state_radius = L;
    int quiet = 0;
    for (int step = 1; step <= options.max_steps; ++step) {
      std::fill(next.begin(), next.end(), 0);
      Real inc = 0, alive = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (cur[i] == 0) continue;
        for (std::size_t k = 0; k < steps.size(); ++k) {
          Real mass = z * steps[k].second * cur[i];
          std::int64_t t = table[i * steps.size() + k];
          if (t < 0) {
            out.escaped += mass;
          } else if (int v = absorb[static_cast<std::size_t>(t)]; v >= 0) {
            out.fb(v) += mass;
            inc += mass;
          } else {
            next[static_cast<std::size_t>(t)] += mass;
          }
        }
      }
      std::swap(cur, next);
      for (Real c : cur) alive += c;
      out.steps = step;
      out.last_increment = inc;
      Real total = out.fb.sum();
      quiet = (total > 0 && inc < options.tol * total) ? quiet + 1 : 0;
      if (quiet >= 3 && alive < options.tol * std::max<Real>(total, 1)) return out;
      if (alive == 0) return out;
    }
    last_failure = "state radius " + std::to_string(L) + ": last increment " +
                   std::to_string(static_cast<double>(out.last_increment)) + ", escaped mass " +
                   std::to_string(static_cast<double>(out.escaped));
    L += R;
  }
  throw ConvergenceError("first-passage DP budget exhausted (" + last_failure + ")");
}

// ---------------------------------------------------------------------------

Real hilbert_distance(const RealVectorX& a, const RealVectorX& b) {
  Real hi = -std::numeric_limits<Real>::infinity(), lo = std::numeric_limits<Real>::infinity();
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (!(a(i) > 0) || !(b(i) > 0)) throw ValidationError("Hilbert distance needs positive vectors");
    Real l = std::log(a(i) / b(i));
    hi = std::max(hi, l);
    lo = std::min(lo, l);
  }
  return hi - lo;
}

Real birkhoff_coefficient(const RealMatrixX& M) {
  const Real zero = 1e-15L * M.cwiseAbs().maxCoeff();
  std::vector<Eigen::Index> cols;
  for (Eigen::Index j = 0; j < M.cols(); ++j)
    if (M.col(j).minCoeff() > zero) cols.push_back(j);
  Real diameter = 0;
  for (Eigen::Index k : cols)
    for (Eigen::Index l : cols) {
      Real hi = -std::numeric_limits<Real>::infinity(), lo = std::numeric_limits<Real>::infinity();
      for (Eigen::Index i = 0; i < M.rows(); ++i) {
        Real v = std::log(M(i, k) / M(i, l));
        hi = std::max(hi, v);
        lo = std::min(lo, v);
      }
      diameter = std::max(diameter, hi - lo);
    }
  return std::tanh(diameter / 4);
}

std::pair<RealVectorX, RealVectorX> default_seeds(int dimension, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  RealVectorX a = RealVectorX::Ones(dimension), b(dimension);
  for (int i = 0; i < dimension; ++i) b(i) = u(rng);
  return {a, b};
}

ContractionResult contraction_limit(const std::vector<RealMatrixX>& matrices, const RealVectorX& seed1,
                                    const RealVectorX& seed2, Real tol) {
  if (matrices.empty()) throw ValidationError("contraction needs at least one matrix");
  ContractionResult out;
  RealMatrixX left = RealMatrixX::Identity(matrices[0].rows(), matrices[0].rows());
  RealVectorX prev;
  for (const RealMatrixX& M : matrices) {
    left = left * M;
    left /= left.cwiseAbs().maxCoeff();
    out.birkhoff = std::max(out.birkhoff, birkhoff_coefficient(M));
    RealVectorX p1 = left * seed1, p2 = left * seed2;
    p1 /= p1.sum();
    p2 /= p2.sum();
    out.gaps.push_back(hilbert_distance(p1, p2));
    if (prev.size()) out.successive.push_back(hilbert_distance(p1, prev));
    prev = p1;
  }
  out.limit = prev;
  out.seed_gap = out.gaps.back();
  out.rate = 0;
  bool measured = false;
  for (std::size_t i = 1; i < out.gaps.size(); ++i)
    if (out.gaps[i - 1] > 1e-13L) {
      out.rate = std::max(out.rate, out.gaps[i] / out.gaps[i - 1]);
      measured = true;
    }
  if (!measured) out.rate = out.birkhoff;
  out.contracted = out.seed_gap <= tol;
  if (!out.contracted)
    throw ConvergenceError("not yet contracted: seeds differ by " + format_real(out.seed_gap) +
                           " after " + std::to_string(matrices.size()) + " factors; use a deeper prefix");
  return out;
}

// ---------------------------------------------------------------------------

namespace {

int first_anchor(const PassageMachinery& m, int max_length) { return (max_length + m.R()) / m.D() + 1; }

std::vector<RealMatrixX> factors_after(const PassageMachinery& m, const EndPrefix& xi, int k, Real z) {
  const int D = m.D();
  const int n = xi.depth() / D;
  std::vector<RealMatrixX> out;
  for (int j = k + 1; j <= n; ++j) {
    Word w = Word::trusted(std::vector<Letter>(xi.word().letters().begin() + (j - 1) * D,
                                               xi.word().letters().begin() + j * D));
    out.push_back(m.Fb(w, z));
  }
  return out;
}

ContractionResult direction_at(const PassageMachinery& m, const EndPrefix& xi, int k, Real z, Real tol) {
  auto mats = factors_after(m, xi, k, z);
  if (mats.empty())
    throw ValidationError("insufficient depth: prefix of depth " + std::to_string(xi.depth()) +
                          " supplies no factor after u_" + std::to_string(k) + " (D = " + std::to_string(m.D()) + ")");
  auto [s1, s2] = default_seeds(static_cast<int>(m.ball().size()));
  return contraction_limit(mats, s1, s2, tol);
}

}  // namespace

MatrixKernelValue martin_kernel_matrix(const PassageMachinery& m, const Word& x, const EndPrefix& xi, Real tol) {
  const Real z = m.radius();
  MatrixKernelValue out;
  out.k = first_anchor(m, x.length());
  auto value_at = [&](int k, ContractionResult& c) {
    c = direction_at(m, xi, k, z, tol);
    Word u = xi.vertex(k * m.D());
    RealMatrixX f = m.first_passage({x, Word()}, m.translate(u), z);
    return (f.row(0) * c.limit)(0) / (f.row(1) * c.limit)(0);
  };
  out.value = value_at(out.k, out.contraction);
  out.factors = static_cast<int>(out.contraction.gaps.size());
  if (xi.depth() / m.D() >= out.k + 3) {
    ContractionResult later;
    out.invariance_error = std::fabs(value_at(out.k + 2, later) - out.value);
    out.invariance_checked = true;
  }
  return out;
}

MatrixKernelField::MatrixKernelField(const PassageMachinery& m, const EndPrefix& xi, int max_length, Real tol)
    : m_(m) {
  const Real z = m.radius();
  int k = first_anchor(m, max_length);
  contraction_ = direction_at(m, xi, k, z, tol);
  anchor_ = xi.vertex(k * m.D());
  w_ = contraction_.limit;
  BallIndex ball(m.alphabet(), max_length);
  std::vector<Word> sources;
  for (std::int64_t i = 0; i < ball.size(); ++i) sources.push_back(ball.word(i));
  RealMatrixX f = m.first_passage(sources, m.translate(anchor_), z);
  RealVectorX v = f * w_;
  norm_ = v(0);
  for (std::size_t i = 0; i < sources.size(); ++i) values_.emplace(sources[i], v(static_cast<Eigen::Index>(i)) / norm_);
}

Real MatrixKernelField::at(const Word& x) const {
  if (auto it = values_.find(x); it != values_.end()) return it->second;
  if (x.length() + m_.R() >= anchor_.length())
    throw ValidationError("word " + x.str() + " too long for the kernel field anchor");
  RealVectorX f = m_.fb(x, anchor_, m_.radius());
  return f.dot(w_) / norm_;
}

TwoScaleRatio ratio_kernel_matrix(const PassageMachinery& m, const Word& x, const Word& y) {
  const Real r = m.radius();
  auto g = [&](Real z) -> RealVectorX { return m.green({x, Word()}, {y}, z).col(0); };
  RealVectorX at_r = g(r), coarse = g(r * (1 - 1e-6L)), fine = g(r * (1 - 1e-8L));
  TwoScaleRatio out;
  out.coarse = (at_r(0) - coarse(0)) / (at_r(1) - coarse(1));
  out.fine = (at_r(0) - fine(0)) / (at_r(1) - fine(1));
  out.value = (10 * out.fine - out.coarse) / 9;
  return out;
}

namespace {

class MatrixRatioKernel : public RatioKernel {
 public:
  explicit MatrixRatioKernel(const WalkSpec& spec) : m_(std::make_shared<PassageMachinery>(spec)) {}
  const Alphabet& alphabet() const override { return m_->alphabet(); }
  std::string id() const override { return "H(matrix machinery, R=" + std::to_string(m_->R()) + ")"; }
  Real value(const Word& x, const Word& y) const override { return ratio_kernel_matrix(*m_, x, y).value; }
  KernelValue boundary(const Word& x, const EndPrefix& xi) const override {
    MatrixKernelValue mk = martin_kernel_matrix(*m_, x, xi);
    KernelValue v;
    v.value = mk.value;
    v.depth = xi.depth();
    v.error = mk.invariance_error;
    v.stabilized = mk.contraction.contracted && (!mk.invariance_checked || mk.invariance_error <= 1e-8L * mk.value);
    return v;
  }

 private:
  std::shared_ptr<PassageMachinery> m_;
};

}  // namespace

std::unique_ptr<RatioKernel> make_matrix_ratio_kernel(const WalkSpec& spec) {
  return std::make_unique<MatrixRatioKernel>(spec);
}

nlohmann::json matrix_dump(const PassageMachinery& m, const Word& w, Real z) {
  nlohmann::json j;
  j["schema"] = 1;
  j["w"] = w.str();
  j["z"] = json_real(z);
  j["B"] = nlohmann::json::array();
  for (const Word& b : m.ball()) j["B"].push_back(b.str());
  RealMatrixX M = m.Fb(w, z);
  j["Fb"] = nlohmann::json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index k = 0; k < M.cols(); ++k) row.push_back(json_real(M(i, k)));
    j["Fb"].push_back(row);
  }
  return j;
}

}  // namespace ratlim
