#ifndef BVLAB_RATIONAL_HPP
#define BVLAB_RATIONAL_HPP

#include <gmpxx.h>

#include <algorithm>
#include <cctype>
#include <string>

#include "bvlab/errors.hpp"

namespace bvlab {

using Rational = mpq_class;

/** \brief Parse "p/q", "p" or "-p/q"; the result is canonical. */
inline Rational parse_rational(std::string s)
{
  s.erase(std::remove_if(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); }),
          s.end());
  if (s.empty()) throw InputError("empty rational literal");
  if (s[0] == '+') s.erase(0, 1);
  Rational q;
  if (q.set_str(s, 10) != 0) throw InputError("bad rational literal '" + s + "'");
  if (s.find('/') != std::string::npos && q.get_den() == 0)
    throw InputError("zero denominator in '" + s + "'");
  q.canonicalize();
  return q;
}

inline std::string to_string(const Rational& q) { return q.get_str(); }

inline Rational factorial(unsigned n)
{
  mpz_class f;
  mpz_fac_ui(f.get_mpz_t(), n);
  return Rational(f);
}

}  // namespace bvlab

#endif  // BVLAB_RATIONAL_HPP
