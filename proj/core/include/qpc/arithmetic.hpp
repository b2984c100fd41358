#ifndef QPC_ARITHMETIC_HPP
#define QPC_ARITHMETIC_HPP

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/cpp_int.hpp>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace qpc {

// Working precision for frequency arithmetic.  Double-precision alpha
// corrupts continued-fraction quotients once denominators pass ~1e8, so the
// expansion runs at kFrequencyPrecisionBits (configurable at build time).
inline constexpr unsigned kFrequencyPrecisionBits = 256;

using BigInt = boost::multiprecision::cpp_int;
using BigFloat = boost::multiprecision::number<
    boost::multiprecision::backends::cpp_bin_float<
        kFrequencyPrecisionBits,
        boost::multiprecision::backends::digit_base_2>>;

struct Rational {
  std::int64_t p = 0;
  std::int64_t q = 1;  // q > 0, gcd(|p|, q) = 1

  static Rational reduced(std::int64_t p, std::int64_t q);
  double value() const { return static_cast<double>(p) / q; }
};

// A frequency is either an exact rational or a high-precision real parsed
// from a decimal string / named constant ("golden", "sqrt2m1", "e").
class Frequency {
 public:
  static Frequency rational(std::int64_t p, std::int64_t q);
  static Frequency real(const BigFloat& alpha);
  // accepts "p/q", a decimal string, or a named constant
  static Frequency parse(const std::string& spec);

  bool is_rational() const { return rat_.has_value(); }
  Rational rat() const;
  const BigFloat& value() const { return value_; }
  double approx() const { return static_cast<double>(value_); }
  const std::string& source() const { return source_; }

 private:
  std::optional<Rational> rat_;
  BigFloat value_ = 0;
  std::string source_;
};

struct Convergent {
  BigInt p, q;
};

struct CFExpansion {
  std::vector<BigInt> a;                 // partial quotients, a[0] may be <= 0
  std::vector<Convergent> convergents;   // one per quotient
  BigFloat alpha = 0;
  // quotient exceeded 1e15 before n_terms were produced; a and convergents
  // hold the trustworthy prefix
  bool precision_exhausted = false;
  // the expansion terminated because alpha is (numerically) rational
  bool terminated = false;
};

CFExpansion expand(const BigFloat& alpha, int n_terms);
CFExpansion expand(const Frequency& alpha, int n_terms);

// max_n ln(q_{n+1}) / q_n over the available prefix: a finite-sample lower
// proxy for the exponential-Liouville limsup.  A finite prefix can never
// decide the limit; treat this as a diagnostic, not a classification.
double beta_estimate(const CFExpansion& cf);

// Convergents with |alpha - p/q| < exp(-delta' q), decided in high
// precision with a one-ulp enclosure of alpha.
std::vector<Convergent> liouville_approximants(const CFExpansion& cf,
                                               double delta_prime);

// |alpha - p/q| at working precision.
BigFloat rational_gap(const BigFloat& alpha, const BigInt& p, const BigInt& q);

}  // namespace qpc

#endif  // QPC_ARITHMETIC_HPP
