#include "ratlim/reduced_boundary.hpp"

#include "ratlim/report.hpp"

#include <cmath>
#include <functional>
#include <map>
#include <sstream>

namespace ratlim {

namespace {

struct GroupView {
  std::vector<std::string> labels;
  int identity = 0;
  std::function<int(int)> inverse;        // -1 when outside the candidate set
  std::function<int(int, int)> multiply;  // -1 when outside the candidate set
};

// H(p, c) for probe p and candidate c.
using Grid = std::function<Real(int, int)>;

EquivalenceReport detect(const GroupView& group, int n_probes, const Grid& H, int candidate_radius, int probe_radius,
                         Real tol) {
  const int n = static_cast<int>(group.labels.size());
  std::vector<std::vector<Real>> cols(static_cast<std::size_t>(n), std::vector<Real>(static_cast<std::size_t>(n_probes)));
#pragma omp parallel for schedule(dynamic)
  for (int c = 0; c < n; ++c)
    for (int p = 0; p < n_probes; ++p) cols[static_cast<std::size_t>(c)][static_cast<std::size_t>(p)] = H(p, c);
  auto gap = [&](int a, int b) {
    Real worst = 0;
    for (int p = 0; p < n_probes; ++p) {
      Real u = cols[static_cast<std::size_t>(a)][static_cast<std::size_t>(p)];
      Real v = cols[static_cast<std::size_t>(b)][static_cast<std::size_t>(p)];
      worst = std::max(worst, std::fabs(u - v) / std::fabs(v));
    }
    return worst;
  };
  EquivalenceReport out;
  out.probe_radius = probe_radius;
  out.candidate_radius = candidate_radius;
  out.tol = tol;
  out.candidates = group.labels;
  for (int c = 0; c < n; ++c) {
    Real d = gap(c, group.identity);
    out.deviation.push_back(d);
    if (d <= tol) {
      out.members.push_back(c);
      out.R_mu_members.push_back(group.labels[static_cast<std::size_t>(c)]);
    }
  }
  for (int c = 0; c < n; ++c) {
    bool placed = false;
    for (auto& cls : out.classes)
      if (gap(c, cls.front()) <= tol) {
        cls.push_back(c);
        placed = true;
        break;
      }
    if (!placed) out.classes.push_back({c});
  }
  std::vector<char> member(static_cast<std::size_t>(n), 0);
  for (int c : out.members) member[static_cast<std::size_t>(c)] = 1;
  for (int a : out.members) {
    int inv = group.inverse(a);
    if (inv >= 0 && !member[static_cast<std::size_t>(inv)]) out.inverse_closed = false;
    for (int b : out.members) {
      int ab = group.multiply(a, b);
      if (ab >= 0 && !member[static_cast<std::size_t>(ab)]) out.product_closed = false;
    }
  }
  std::ostringstream os;
  os << out.members.size() << " of " << n << " candidates within radius " << candidate_radius
     << " agree with e on all probes of radius " << probe_radius << " at tolerance " << static_cast<double>(tol);
  if (out.members.size() == 1) os << "; no non-trivial member at this resolution";
  out.statement = os.str();
  return out;
}

std::vector<Word> ball_words(const Alphabet& alphabet, int radius) {
  BallIndex ball(alphabet, radius);
  std::vector<Word> out;
  for (std::int64_t i = 0; i < ball.size(); ++i) out.push_back(ball.word(i));
  return out;
}

}  // namespace

EquivalenceReport detect_R_mu(const WalkSpec& spec, int candidate_radius, int probe_radius, Real tol) {
  if (candidate_radius < 0 || probe_radius < 0 || !(tol > 0)) throw ValidationError("radii must be >= 0 and tol > 0");
  const Alphabet& alphabet = spec.alphabet();
  auto kernel = make_ratio_kernel(spec);
  std::vector<Word> cands = ball_words(alphabet, candidate_radius);
  std::vector<Word> probes = ball_words(alphabet, probe_radius);
  std::map<Word, int> index;
  GroupView g;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    index.emplace(cands[i], static_cast<int>(i));
    g.labels.push_back(cands[i].str());
  }
  auto find = [&](const Word& w) {
    auto it = index.find(w);
    return it == index.end() ? -1 : it->second;
  };
  g.inverse = [&](int i) { return find(invert(alphabet, cands[static_cast<std::size_t>(i)])); };
  g.multiply = [&](int i, int j) {
    return find(ratlim::multiply(alphabet, cands[static_cast<std::size_t>(i)], cands[static_cast<std::size_t>(j)]));
  };
  return detect(g, static_cast<int>(probes.size()),
                [&](int p, int c) {
                  return kernel->value(probes[static_cast<std::size_t>(p)], cands[static_cast<std::size_t>(c)]);
                },
                candidate_radius, probe_radius, tol);
}

EquivalenceReport detect_R_mu(const ProductWalk& pw, int candidate_radius, int probe_radius, Real tol) {
  if (candidate_radius < 0 || probe_radius < 0 || !(tol > 0)) throw ValidationError("radii must be >= 0 and tol > 0");
  const Alphabet& a1 = pw.first.alphabet();
  const Alphabet& a2 = pw.second.alphabet();
  ProductKernel kernel(pw);
  std::vector<ProductElement> cands, probes;
  for (const Word& u : ball_words(a1, candidate_radius))
    for (const Word& v : ball_words(a2, candidate_radius)) cands.emplace_back(u, v);
  for (const Word& u : ball_words(a1, probe_radius))
    for (const Word& v : ball_words(a2, probe_radius)) probes.emplace_back(u, v);
  std::map<ProductElement, int> index;
  GroupView g;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    index.emplace(cands[i], static_cast<int>(i));
    g.labels.push_back(product_element_str(cands[i]));
  }
  auto find = [&](const ProductElement& w) {
    auto it = index.find(w);
    return it == index.end() ? -1 : it->second;
  };
  g.inverse = [&](int i) {
    const auto& c = cands[static_cast<std::size_t>(i)];
    return find({invert(a1, c.first), invert(a2, c.second)});
  };
  g.multiply = [&](int i, int j) {
    const auto& x = cands[static_cast<std::size_t>(i)];
    const auto& y = cands[static_cast<std::size_t>(j)];
    return find({ratlim::multiply(a1, x.first, y.first), ratlim::multiply(a2, x.second, y.second)});
  };
  return detect(g, static_cast<int>(probes.size()),
                [&](int p, int c) {
                  return kernel.value(probes[static_cast<std::size_t>(p)], cands[static_cast<std::size_t>(c)]);
                },
                candidate_radius, probe_radius, tol);
}

KernelTable reduced_kernel_table(const EquivalenceReport& report, const KernelTable& table) {
  std::map<std::string, int> class_of;
  for (std::size_t k = 0; k < report.classes.size(); ++k)
    for (int c : report.classes[k]) class_of[report.candidates[static_cast<std::size_t>(c)]] = static_cast<int>(k);
  KernelTable out;
  out.kernel_id = table.kernel_id + " (reduced)";
  std::map<std::pair<std::string, int>, std::size_t> row_of;
  for (const auto& e : table.entries) {
    auto it = class_of.find(e.y_or_prefix);
    if (it == class_of.end()) {
      out.entries.push_back(e);
      continue;
    }
    auto key = std::make_pair(e.x, it->second);
    if (auto r = row_of.find(key); r != row_of.end()) {
      const KernelEntry& rep = out.entries[r->second];
      if (std::fabs(rep.value - e.value) > report.tol * std::fabs(rep.value))
        throw ValidationError("within-class disagreement at x = " + e.x + " between " + rep.y_or_prefix + " and " +
                              e.y_or_prefix + "; the classes were wrong");
      continue;
    }
    KernelEntry rep = e;
    rep.y_or_prefix = report.candidates[static_cast<std::size_t>(report.classes[static_cast<std::size_t>(it->second)].front())];
    row_of.emplace(key, out.entries.size());
    out.entries.push_back(rep);
  }
  return out;
}

nlohmann::json EquivalenceReport::to_json() const {
  nlohmann::json j;
  j["schema"] = 1;
  j["probe_radius"] = probe_radius;
  j["candidate_radius"] = candidate_radius;
  j["tol"] = json_real(tol);
  j["statement"] = statement;
  j["R_mu_members"] = R_mu_members;
  j["inverse_closed"] = inverse_closed;
  j["product_closed"] = product_closed;
  j["classes"] = nlohmann::json::array();
  for (const auto& cls : classes) {
    nlohmann::json c = nlohmann::json::array();
    for (int i : cls) c.push_back(candidates[static_cast<std::size_t>(i)]);
    j["classes"].push_back(c);
  }
  j["deviation"] = nlohmann::json::object();
  for (std::size_t i = 0; i < candidates.size(); ++i) j["deviation"][candidates[i]] = json_real(deviation[i]);
  return j;
}

}  // namespace ratlim
