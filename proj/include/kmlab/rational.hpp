#pragma once

// Exact rational arithmetic used everywhere in the library.
//
// All measure values, interval endpoints and linear-arithmetic coefficients are
// GMP rationals; nothing in the library ever touches floating point.  The
// printed form is "p/q" (or "n" for integers), which is also the CLI contract.

#include <gmpxx.h>

#include <optional>
#include <stdexcept>
#include <string>

namespace kmlab {

using Rat = mpq_class;
using Int = mpz_class;

// Canonicalized rational from a (numerator, denominator) pair.
inline Rat rat(long num, long den = 1) {
  if (den == 0) throw std::invalid_argument("rat: zero denominator");
  Rat r(num, den);
  r.canonicalize();
  return r;
}

// Renders as "p/q", or just "p" when the denominator is 1.
inline std::string rat_str(const Rat& r) { return r.get_str(); }

// Parses "p", "p/q" or "-p/q"; returns nullopt on malformed input.
inline std::optional<Rat> parse_rat(const std::string& text) {
  if (text.empty()) return std::nullopt;
  std::size_t i = (text[0] == '-' || text[0] == '+') ? 1 : 0;
  bool seen_digit = false, seen_slash = false, digits_after_slash = false;
  for (; i < text.size(); ++i) {
    char c = text[i];
    if (c >= '0' && c <= '9') {
      seen_digit = true;
      if (seen_slash) digits_after_slash = true;
    } else if (c == '/' && !seen_slash && seen_digit) {
      seen_slash = true;
    } else {
      return std::nullopt;
    }
  }
  if (!seen_digit || (seen_slash && !digits_after_slash)) return std::nullopt;
  Rat r;
  if (r.set_str(text, 10) != 0) return std::nullopt;
  if (r.get_den() == 0) return std::nullopt;
  r.canonicalize();
  return r;
}

// r^n for n >= 0.
inline Rat rat_pow(const Rat& r, unsigned long n) {
  Rat acc = 1, base = r;
  while (n) {
    if (n & 1) acc *= base;
    base *= base;
    n >>= 1;
  }
  return acc;
}

// 2^-k as an exact rational.
inline Rat pow2_inv(unsigned long k) { return rat_pow(rat(1, 2), k); }

// Binomial coefficient C(n, k) as an exact integer.
inline Int binom(unsigned long n, unsigned long k) {
  if (k > n) return 0;
  Int out;
  mpz_bin_uiui(out.get_mpz_t(), n, k);
  return out;
}

inline Rat rat_abs(const Rat& r) { return r < 0 ? Rat(-r) : r; }

}  // namespace kmlab
