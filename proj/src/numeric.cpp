#include "ratlim/numeric.hpp"

#include <algorithm>
#include <cctype>

namespace ratlim {

namespace {

BigInt parse_integer(const std::string& s) {
  if (s.empty()) throw ValidationError("empty number");
  std::size_t start = (s[0] == '-' || s[0] == '+') ? 1 : 0;
  if (start == s.size()) throw ValidationError("malformed number '" + s + "'");
  for (std::size_t i = start; i < s.size(); ++i)
    if (!std::isdigit(static_cast<unsigned char>(s[i])))
      throw ValidationError("malformed number '" + s + "'");
  return BigInt(s[0] == '+' ? s.substr(1) : s);
}

}  // namespace

Rational parse_rational(const std::string& raw) {
  std::string text;
  for (char c : raw)
    if (!std::isspace(static_cast<unsigned char>(c))) text += c;
  if (text.empty()) throw ValidationError("empty number");

  if (auto slash = text.find('/'); slash != std::string::npos) {
    BigInt num = parse_integer(text.substr(0, slash));
    BigInt den = parse_integer(text.substr(slash + 1));
    if (den == 0) throw ValidationError("zero denominator in '" + raw + "'");
    return Rational(num, den);
  }

  // Decimal, optionally with exponent; converted exactly.
  std::string mantissa = text;
  long exponent = 0;
  if (auto e = text.find_first_of("eE"); e != std::string::npos) {
    mantissa = text.substr(0, e);
    try {
      exponent = std::stol(text.substr(e + 1));
    } catch (const std::exception&) {
      throw ValidationError("malformed number '" + raw + "'");
    }
  }
  bool negative = false;
  if (!mantissa.empty() && (mantissa[0] == '-' || mantissa[0] == '+')) {
    negative = mantissa[0] == '-';
    mantissa = mantissa.substr(1);
  }
  std::string digits;
  long frac = 0;
  bool seen_point = false;
  for (char c : mantissa) {
    if (c == '.') {
      if (seen_point) throw ValidationError("malformed number '" + raw + "'");
      seen_point = true;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      digits += c;
      if (seen_point) ++frac;
    } else {
      throw ValidationError("malformed number '" + raw + "'");
    }
  }
  if (digits.empty()) throw ValidationError("malformed number '" + raw + "'");
  BigInt num(digits);
  if (negative) num = -num;
  long shift = exponent - frac;
  BigInt ten_pow = 1;
  for (long i = 0; i < std::labs(shift); ++i) ten_pow *= 10;
  return shift >= 0 ? Rational(num * ten_pow) : Rational(num, ten_pow);
}

std::string to_string(const Rational& value) { return value.str(); }

Real to_real(const Rational& value) {
  boost::multiprecision::mpfr_float_50 x(value);
  return x.convert_to<long double>();
}

Extrapolation extrapolate_limit(const std::vector<Real>& h, const std::vector<Real>& v) {
  if (h.size() != v.size() || h.empty())
    throw ValidationError("extrapolate_limit needs matching non-empty samples");
  std::size_t n = h.size();
  // tableau[i] after pass m holds the degree-m interpolant through points i..i+m at 0
  std::vector<Real> t = v;
  Real finer = v.back();  // lower-order estimate from the last n-1 samples
  for (std::size_t m = 1; m < n; ++m) {
    if (m + 1 == n) finer = t[1];
    for (std::size_t i = 0; i + m < n; ++i) {
      Real denom = h[i] - h[i + m];
      if (denom == 0) throw ValidationError("extrapolate_limit needs distinct abscissae");
      t[i] = (-h[i + m] * t[i] + h[i] * t[i + 1]) / denom;
    }
  }
  Extrapolation out;
  out.value = t[0];
  out.error = n > 1 ? std::fabs(t[0] - finer) : std::numeric_limits<Real>::infinity();
  return out;
}

unsigned set_high_precision_bits(unsigned bits) {
  unsigned digits10 = static_cast<unsigned>(std::ceil(bits * 0.30103)) + 1;
  unsigned old = HighFloat::default_precision();
  HighFloat::default_precision(digits10);
  return old;
}

}  // namespace ratlim
