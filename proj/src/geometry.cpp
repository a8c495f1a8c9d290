#include "ratlim/geometry.hpp"

#include <algorithm>
#include <sstream>

namespace ratlim {

Alphabet::Alphabet(Kind kind, int rank) : kind_(kind), rank_(rank) {
  if (kind == Kind::free_group) {
    for (int i = 1; i <= rank; ++i) {
      letters_.push_back(i);
      letters_.push_back(-i);
    }
  } else {
    for (int i = 1; i <= rank; ++i) letters_.push_back(i);
  }
}

Alphabet Alphabet::free_group(int rank) {
  if (rank < 1) throw ValidationError("free group rank must be >= 1");
  return Alphabet(Kind::free_group, rank);
}

Alphabet Alphabet::involutions(int count) {
  if (count < 2) throw ValidationError("need at least 2 involutions");
  return Alphabet(Kind::involutions, count);
}

Alphabet Alphabet::tree(int q) {
  if (q < 1) throw ValidationError("tree parameter q must be >= 1");
  int degree = q + 1;
  if (degree % 2 == 0) return free_group(degree / 2);
  return involutions(degree);
}

bool Alphabet::contains(Letter a) const {
  if (kind_ == Kind::free_group) return a != 0 && a >= -rank_ && a <= rank_;
  return a >= 1 && a <= rank_;
}

int Alphabet::slot(Letter a) const {
  if (!contains(a)) throw ValidationError("letter " + std::to_string(a) + " not in " + describe());
  if (kind_ == Kind::free_group) return 2 * (std::abs(a) - 1) + (a < 0 ? 1 : 0);
  return a - 1;
}

std::string Alphabet::describe() const {
  if (kind_ == Kind::free_group) return "F_" + std::to_string(rank_);
  return "involutions(" + std::to_string(rank_) + ")";
}

Word::Word(const Alphabet& alphabet, std::vector<Letter> letters) : letters_(std::move(letters)) {
  for (std::size_t i = 0; i < letters_.size(); ++i) {
    if (!alphabet.contains(letters_[i]))
      throw ValidationError("letter " + std::to_string(letters_[i]) + " not in " + alphabet.describe());
    if (i > 0 && letters_[i] == alphabet.inverse(letters_[i - 1]))
      throw ValidationError("word " + str() + " is not freely reduced");
  }
}

Word Word::prefix(int n) const {
  n = std::clamp(n, 0, length());
  return trusted(std::vector<Letter>(letters_.begin(), letters_.begin() + n));
}

std::string Word::str() const {
  if (letters_.empty()) return "e";
  std::ostringstream os;
  for (std::size_t i = 0; i < letters_.size(); ++i) {
    if (i) os << ',';
    os << letters_[i];
  }
  return os.str();
}

std::size_t WordHash::operator()(const Word& w) const {
  std::size_t h = 1469598103934665603ull;
  for (Letter a : w.letters()) {
    h ^= static_cast<std::size_t>(a + 1024);
    h *= 1099511628211ull;
  }
  return h;
}

Word parse_word(const Alphabet& alphabet, const std::string& text) {
  std::string t;
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) t += c;
  if (t.empty() || t == "e") return Word();
  std::vector<Letter> letters;
  std::stringstream ss(t);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      int a = std::stoi(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      letters.push_back(a);
    } catch (const std::exception&) {
      throw ValidationError("malformed word '" + text + "'");
    }
  }
  return Word(alphabet, std::move(letters));
}

Word multiply(const Alphabet& alphabet, const Word& x, const Word& y) {
  const auto& a = x.letters();
  const auto& b = y.letters();
  std::size_t cancel = 0;
  while (cancel < a.size() && cancel < b.size() &&
         b[cancel] == alphabet.inverse(a[a.size() - 1 - cancel]))
    ++cancel;
  std::vector<Letter> out(a.begin(), a.end() - static_cast<std::ptrdiff_t>(cancel));
  out.insert(out.end(), b.begin() + static_cast<std::ptrdiff_t>(cancel), b.end());
  return Word::trusted(std::move(out));
}

Word invert(const Alphabet& alphabet, const Word& x) {
  std::vector<Letter> out(x.letters().rbegin(), x.letters().rend());
  for (auto& a : out) a = alphabet.inverse(a);
  return Word::trusted(std::move(out));
}

int common_prefix_length(const Word& x, const Word& y) {
  int n = std::min(x.length(), y.length());
  int i = 0;
  while (i < n && x[i] == y[i]) ++i;
  return i;
}

int distance(const Word& x, const Word& y) {
  return x.length() + y.length() - 2 * common_prefix_length(x, y);
}

EndPrefix EndPrefix::periodic(const Alphabet& alphabet, const std::vector<Letter>& pattern, int depth) {
  if (pattern.empty()) throw ValidationError("ray pattern must be non-empty");
  if (depth < 0) throw ValidationError("ray depth must be >= 0");
  if (pattern.size() > 1 || alphabet.kind() == Alphabet::Kind::involutions) {
    if (pattern.front() == alphabet.inverse(pattern.back()))
      throw ValidationError("ray pattern is not cyclically reduced");
  }
  std::vector<Letter> letters;
  letters.reserve(static_cast<std::size_t>(depth));
  for (int i = 0; i < depth; ++i) letters.push_back(pattern[static_cast<std::size_t>(i) % pattern.size()]);
  return EndPrefix(Word(alphabet, std::move(letters)));
}

Word EndPrefix::vertex(int n) const {
  if (n > depth()) throw ValidationError("prefix too short to resolve confluent");
  return prefix_.prefix(n);
}

EndPrefix EndPrefix::truncated(int d) const { return EndPrefix(prefix_.prefix(d)); }

Word confluent(const Word& v, const Word& w) {
  if (v == w) throw ValidationError("confluent undefined for v = w");
  return v.prefix(common_prefix_length(v, w));
}

Word confluent(const Word& v, const EndPrefix& xi) {
  int m = common_prefix_length(v, xi.word());
  if (m == xi.depth() && v.length() > m) throw ValidationError("prefix too short to resolve confluent");
  return v.prefix(m);
}

Word confluent(const EndPrefix& xi, const Word& v) { return confluent(v, xi); }

Word confluent(const EndPrefix& xi, const EndPrefix& eta) {
  int m = common_prefix_length(xi.word(), eta.word());
  if (m == std::min(xi.depth(), eta.depth())) throw ValidationError("prefix too short to resolve confluent");
  return xi.word().prefix(m);
}

namespace {

Rational q_power_inverse(int q, int k) {
  BigInt den = 1;
  for (int i = 0; i < k; ++i) den *= q;
  return Rational(BigInt(1), den);
}

}  // namespace

Rational ultrametric(const Alphabet& alphabet, const Word& v, const Word& w) {
  if (v == w) return Rational(0);
  return q_power_inverse(alphabet.q(), common_prefix_length(v, w));
}

Rational ultrametric(const Alphabet& alphabet, const EndPrefix& v, const EndPrefix& w) {
  return q_power_inverse(alphabet.q(), confluent(v, w).length());
}

int horocycle(const Word& x, const EndPrefix& xi, int depth) {
  if (depth > xi.depth()) throw ValidationError("prefix too short to resolve confluent");
  EndPrefix cut = xi.truncated(depth);
  int m = confluent(x, cut).length();
  return (x.length() - m) - m;
}

int horocycle(const Word& x, const EndPrefix& xi) { return horocycle(x, xi, xi.depth()); }

GeodesicSegment geodesic(const Alphabet& alphabet, const Word& x, const Word& y) {
  (void)alphabet;
  GeodesicSegment g{x, y, {}};
  int m = common_prefix_length(x, y);
  for (int k = x.length(); k >= m; --k) g.vertices.push_back(x.prefix(k));
  for (int k = m + 1; k <= y.length(); ++k) g.vertices.push_back(y.prefix(k));
  return g;
}

std::int64_t BallIndex::ball_size(int degree, int radius) {
  std::int64_t total = 1, sphere = degree;
  for (int k = 1; k <= radius; ++k) {
    total += sphere;
    if (total > kBallCap) return kBallCap + 1;
    sphere *= (degree - 1);
  }
  return total;
}

BallIndex::BallIndex(const Alphabet& alphabet, int radius) : alphabet_(alphabet), radius_(radius) {
  if (radius < 0) throw ValidationError("ball radius must be >= 0");
  const int deg = alphabet.degree();
  const std::int64_t n = ball_size(deg, radius);
  if (n > kBallCap) throw ValidationError("ball of radius " + std::to_string(radius) + " too large");
  length_.reserve(static_cast<std::size_t>(n));
  parent_.reserve(static_cast<std::size_t>(n));
  last_slot_.reserve(static_cast<std::size_t>(n));
  child_.assign(static_cast<std::size_t>(n * deg), -1);
  length_.push_back(0);
  parent_.push_back(-1);
  last_slot_.push_back(-1);
  std::int64_t begin = 0, end = 1;
  for (int k = 1; k <= radius; ++k) {
    for (std::int64_t i = begin; i < end; ++i) {
      int ls = last_slot_[static_cast<std::size_t>(i)];
      for (int s = 0; s < deg; ++s) {
        Letter a = alphabet.letter(s);
        if (ls >= 0 && a == alphabet.inverse(alphabet.letter(ls))) continue;
        std::int64_t j = static_cast<std::int64_t>(length_.size());
        length_.push_back(k);
        parent_.push_back(i);
        last_slot_.push_back(s);
        child_[static_cast<std::size_t>(i * deg + s)] = j;
        child_[static_cast<std::size_t>(j * deg + alphabet.slot(alphabet.inverse(a)))] = i;
      }
    }
    begin = end;
    end = static_cast<std::int64_t>(length_.size());
  }
}

std::int64_t BallIndex::count_within(int r) const {
  if (r < 0) return 0;
  return ball_size(alphabet_.degree(), std::min(r, radius_));
}

std::int64_t BallIndex::step(std::int64_t i, int slot) const {
  return child_[static_cast<std::size_t>(i * alphabet_.degree() + slot)];
}

std::int64_t BallIndex::right_multiply(std::int64_t i, const Word& g) const {
  for (Letter a : g.letters()) {
    if (i < 0) return -1;
    i = step(i, alphabet_.slot(a));
  }
  return i;
}

std::int64_t BallIndex::index_of(const Word& w) const {
  if (w.length() > radius_) return -1;
  return right_multiply(0, w);
}

Word BallIndex::word(std::int64_t i) const {
  std::vector<Letter> letters(static_cast<std::size_t>(length(i)));
  for (std::int64_t k = length(i) - 1; k >= 0; --k) {
    letters[static_cast<std::size_t>(k)] = alphabet_.letter(last_slot(i));
    i = parent(i);
  }
  return Word::trusted(std::move(letters));
}

}  // namespace ratlim
