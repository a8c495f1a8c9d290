#pragma once

#include "ratlim/numeric.hpp"

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace ratlim {

using Letter = int;

// Generating letters of a free product realising a regular tree as a Cayley graph.
// free_group(s): letters ±1..±s with a^-1 = -a. involutions(k): letters 1..k, each self-inverse.
class Alphabet {
 public:
  enum class Kind { free_group, involutions };

  static Alphabet free_group(int rank);
  static Alphabet involutions(int count);
  // Cayley realisation of T_{q+1}: F_{(q+1)/2} for even degree, q+1 involutions otherwise.
  static Alphabet tree(int q);

  Kind kind() const { return kind_; }
  int degree() const { return static_cast<int>(letters_.size()); }
  int q() const { return degree() - 1; }
  int rank() const { return rank_; }
  const std::vector<Letter>& letters() const { return letters_; }
  bool contains(Letter a) const;
  Letter inverse(Letter a) const { return kind_ == Kind::free_group ? -a : a; }
  // Dense index 0..degree-1.
  int slot(Letter a) const;
  Letter letter(int slot) const { return letters_[static_cast<std::size_t>(slot)]; }

  bool operator==(const Alphabet& o) const { return kind_ == o.kind_ && rank_ == o.rank_; }
  std::string describe() const;

 private:
  Alphabet(Kind kind, int rank);
  Kind kind_;
  int rank_;
  std::vector<Letter> letters_;
};

// A freely reduced word; the empty word is the identity e.
class Word {
 public:
  Word() = default;
  // Validates letters against the alphabet and the no-backtracking rule.
  Word(const Alphabet& alphabet, std::vector<Letter> letters);
  static Word trusted(std::vector<Letter> letters) {
    Word w;
    w.letters_ = std::move(letters);
    return w;
  }

  int length() const { return static_cast<int>(letters_.size()); }
  bool is_identity() const { return letters_.empty(); }
  const std::vector<Letter>& letters() const { return letters_; }
  Letter operator[](int i) const { return letters_[static_cast<std::size_t>(i)]; }
  Word prefix(int n) const;
  std::string str() const;

  auto operator<=>(const Word& o) const {
    if (auto c = length() <=> o.length(); c != 0) return c;
    return letters_ <=> o.letters_;
  }
  bool operator==(const Word& o) const = default;

 private:
  std::vector<Letter> letters_;
};

struct WordHash {
  std::size_t operator()(const Word& w) const;
};

// "e" or comma-separated signed letters, e.g. "1,-2".
Word parse_word(const Alphabet& alphabet, const std::string& text);

Word multiply(const Alphabet& alphabet, const Word& x, const Word& y);
Word invert(const Alphabet& alphabet, const Word& x);
int common_prefix_length(const Word& x, const Word& y);
int distance(const Word& x, const Word& y);

// Finite prefix of an infinite reduced word (an end of the tree).
class EndPrefix {
 public:
  EndPrefix() = default;
  explicit EndPrefix(Word prefix) : prefix_(std::move(prefix)) {}
  // Repeats `pattern` (which must be cyclically reduced) to the requested depth.
  static EndPrefix periodic(const Alphabet& alphabet, const std::vector<Letter>& pattern, int depth);

  int depth() const { return prefix_.length(); }
  const Word& word() const { return prefix_; }
  // Vertex x_n of the ray, n <= depth.
  Word vertex(int n) const;
  EndPrefix truncated(int depth) const;
  std::string str() const { return prefix_.str() + "..."; }

 private:
  Word prefix_;
};

Word confluent(const Word& v, const Word& w);
Word confluent(const Word& v, const EndPrefix& xi);
Word confluent(const EndPrefix& xi, const Word& v);
Word confluent(const EndPrefix& xi, const EndPrefix& eta);

Rational ultrametric(const Alphabet& alphabet, const Word& v, const Word& w);
Rational ultrametric(const Alphabet& alphabet, const EndPrefix& v, const EndPrefix& w);

// hor(x, xi) = d(x, x^xi) - |x^xi|, evaluated on the prefix of xi truncated to `depth`.
int horocycle(const Word& x, const EndPrefix& xi, int depth);
int horocycle(const Word& x, const EndPrefix& xi);

struct GeodesicSegment {
  Word from;
  Word to;
  std::vector<Word> vertices;
  int length() const { return static_cast<int>(vertices.size()) - 1; }
};

GeodesicSegment geodesic(const Alphabet& alphabet, const Word& x, const Word& y);

// Enumeration of all words of length <= radius in shortlex-by-sphere order with
// parent/child tables; the index of the identity is 0.
class BallIndex {
 public:
  BallIndex(const Alphabet& alphabet, int radius);

  const Alphabet& alphabet() const { return alphabet_; }
  int radius() const { return radius_; }
  std::int64_t size() const { return static_cast<std::int64_t>(length_.size()); }
  // Number of words of length <= r.
  std::int64_t count_within(int r) const;
  int length(std::int64_t i) const { return length_[static_cast<std::size_t>(i)]; }
  std::int64_t parent(std::int64_t i) const { return parent_[static_cast<std::size_t>(i)]; }
  int last_slot(std::int64_t i) const { return last_slot_[static_cast<std::size_t>(i)]; }
  // Index of word(i)·letter(slot), or -1 if outside the ball.
  std::int64_t step(std::int64_t i, int slot) const;
  // Index of word(i)·g, or -1 if the product (or an intermediate stage) leaves the ball.
  std::int64_t right_multiply(std::int64_t i, const Word& g) const;
  std::int64_t index_of(const Word& w) const;
  Word word(std::int64_t i) const;

  // Saturates just above kBallCap for balls too large to index.
  static std::int64_t ball_size(int degree, int radius);
  static constexpr std::int64_t kBallCap = std::int64_t{1} << 40;

 private:
  Alphabet alphabet_;
  int radius_;
  std::vector<int> length_;
  std::vector<std::int64_t> parent_;
  std::vector<int> last_slot_;
  std::vector<std::int64_t> child_;  // degree entries per vertex, -1 when absent
};

}  // namespace ratlim
