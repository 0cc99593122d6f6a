#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cctype>
#include <string>

#include "smoothconn/errors.hpp"

namespace smoothconn {

// Exact coefficients at the symbolic layer; evaluation projects to double.
using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

inline double to_double(const Rational& r) { return r.convert_to<double>(); }

inline std::string to_string(const Rational& r) { return r.str(); }

// Accepts "3", "-7/4", "0.125", "+2.5" (decimals converted exactly).
inline Rational parse_rational(const std::string& text) {
  std::size_t i = 0, n = text.size();
  while (i < n && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
  bool negative = false;
  if (i < n && (text[i] == '+' || text[i] == '-')) {
    negative = text[i] == '-';
    ++i;
  }
  // Digit-by-digit accumulation avoids string-format pitfalls (leading
  // zeros are not accepted by the bigint constructor).
  auto read_digits = [&](BigInt& out, std::size_t& count) {
    while (i < n && std::isdigit(static_cast<unsigned char>(text[i]))) {
      out = out * 10 + (text[i] - '0');
      ++i;
      ++count;
    }
  };
  BigInt ipart = 0;
  std::size_t idigits = 0;
  read_digits(ipart, idigits);
  Rational value;
  if (i < n && text[i] == '/') {
    ++i;
    BigInt den = 0;
    std::size_t ddigits = 0;
    read_digits(den, ddigits);
    if (idigits == 0 || ddigits == 0) throw ParseError("malformed rational '" + text + "'", i);
    if (den == 0) throw ParseError("zero denominator in '" + text + "'", i);
    value = Rational(ipart, den);
  } else if (i < n && text[i] == '.') {
    ++i;
    BigInt fpart = 0;
    std::size_t fdigits = 0;
    read_digits(fpart, fdigits);
    if (idigits == 0 && fdigits == 0) throw ParseError("malformed number '" + text + "'", i);
    BigInt scale = 1;
    for (std::size_t k = 0; k < fdigits; ++k) scale *= 10;
    value = Rational(ipart * scale + fpart, scale);
  } else {
    if (idigits == 0) throw ParseError("malformed number '" + text + "'", i);
    value = Rational(ipart);
  }
  while (i < n && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
  if (i != n) throw ParseError("trailing characters in number '" + text + "'", i);
  return negative ? Rational(-value) : value;
}

}  // namespace smoothconn
