#pragma once

#include <boost/multiprecision/gmp.hpp>
#include <boost/multiprecision/mpfr.hpp>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace ratlim {

using Real = long double;
using Rational = boost::multiprecision::mpq_rational;
using BigInt = boost::multiprecision::mpz_int;
using HighFloat = boost::multiprecision::mpfr_float;

// Bad input: malformed spec, violated precondition. CLI exit code 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Iteration or truncation failed to reach the requested accuracy. CLI exit code 3.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Rational parse_rational(const std::string& text);
std::string to_string(const Rational& value);
Real to_real(const Rational& value);

template <class Scalar>
Scalar from_rational(const Rational& value) {
  if constexpr (std::is_same_v<Scalar, Rational>) {
    return value;
  } else if constexpr (std::is_floating_point_v<Scalar>) {
    return to_real(value);
  } else {
    return Scalar(value);
  }
}

template <class Scalar>
long double as_long_double(const Scalar& v) {
  if constexpr (std::is_floating_point_v<Scalar>) {
    return static_cast<long double>(v);
  } else if constexpr (std::is_same_v<Scalar, Rational>) {
    return to_real(v);
  } else {
    return v.template convert_to<long double>();
  }
}

struct Extrapolation {
  Real value = 0;
  Real error = 0;  // gap between the two highest-order estimates
};

// Neville extrapolation of samples (h_i, v_i) to h = 0.
Extrapolation extrapolate_limit(const std::vector<Real>& h, const std::vector<Real>& v);

// Sets the working precision of mpfr_float in bits; returns the previous value.
unsigned set_high_precision_bits(unsigned bits);

}  // namespace ratlim
