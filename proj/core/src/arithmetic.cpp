#include "qpc/arithmetic.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "qpc/errors.hpp"

namespace qpc {

namespace mp = boost::multiprecision;

Rational Rational::reduced(std::int64_t p, std::int64_t q) {
  if (q == 0) throw DomainError("rational with zero denominator");
  if (q < 0) {
    p = -p;
    q = -q;
  }
  const std::int64_t g = std::gcd(p < 0 ? -p : p, q);
  return Rational{g ? p / g : p, g ? q / g : q};
}

Frequency Frequency::rational(std::int64_t p, std::int64_t q) {
  Frequency f;
  f.rat_ = Rational::reduced(p, q);
  f.value_ = BigFloat(f.rat_->p) / BigFloat(f.rat_->q);
  f.source_ = std::to_string(f.rat_->p) + "/" + std::to_string(f.rat_->q);
  return f;
}

Frequency Frequency::real(const BigFloat& alpha) {
  Frequency f;
  f.value_ = alpha;
  f.source_ = alpha.str();
  return f;
}

Frequency Frequency::parse(const std::string& spec) {
  if (spec == "golden") {
    Frequency f;
    f.value_ = (sqrt(BigFloat(5)) - 1) / 2;
    f.source_ = spec;
    return f;
  }
  if (spec == "sqrt2m1") {
    Frequency f;
    f.value_ = sqrt(BigFloat(2)) - 1;
    f.source_ = spec;
    return f;
  }
  const auto slash = spec.find('/');
  if (slash != std::string::npos) {
    const std::int64_t p = std::stoll(spec.substr(0, slash));
    const std::int64_t q = std::stoll(spec.substr(slash + 1));
    return rational(p, q);
  }
  Frequency f;
  try {
    f.value_ = BigFloat(spec);
  } catch (const std::exception&) {
    throw DomainError("cannot parse frequency '" + spec + "'");
  }
  f.source_ = spec;
  return f;
}

Rational Frequency::rat() const {
  if (!rat_) throw DomainError("frequency is not an exact rational");
  return *rat_;
}

CFExpansion expand(const BigFloat& alpha, int n_terms) {
  if (n_terms < 1) throw DomainError("n_terms must be >= 1");
  CFExpansion cf;
  cf.alpha = alpha;

  const BigInt quotient_cap = BigInt(1000000000000000LL);  // 1e15
  BigFloat x = alpha;
  // p_{-1} = 1, p_{-2} = 0 and q_{-1} = 0, q_{-2} = 1
  BigInt p_prev2 = 0, p_prev1 = 1, q_prev2 = 1, q_prev1 = 0;

  for (int n = 0; n < n_terms; ++n) {
    const BigFloat fl = floor(x);
    BigInt an = fl.convert_to<BigInt>();
    if (n > 0 && an < 1) an = 1;  // guard against rounding at exact integers
    if (n > 0 && an > quotient_cap) {
      cf.precision_exhausted = true;
      break;
    }
    const BigInt p = an * p_prev1 + p_prev2;
    const BigInt q = an * q_prev1 + q_prev2;
    cf.a.push_back(an);
    cf.convergents.push_back(Convergent{p, q});
    p_prev2 = p_prev1;
    p_prev1 = p;
    q_prev2 = q_prev1;
    q_prev1 = q;

    const BigFloat frac = x - BigFloat(an);
    // numerically rational: expansion terminates
    if (frac <= BigFloat(0) ||
        frac < ldexp(BigFloat(1),
                     -static_cast<int>(kFrequencyPrecisionBits) + 8)) {
      cf.terminated = true;
      break;
    }
    x = 1 / frac;
  }
  return cf;
}

CFExpansion expand(const Frequency& alpha, int n_terms) {
  if (!alpha.is_rational()) return expand(alpha.value(), n_terms);
  // Exact integer Euclid for rational input; terminates with p/q itself.
  if (n_terms < 1) throw DomainError("n_terms must be >= 1");
  const Rational r = alpha.rat();
  CFExpansion cf;
  cf.alpha = alpha.value();
  BigInt num = r.p, den = r.q;
  BigInt p_prev2 = 0, p_prev1 = 1, q_prev2 = 1, q_prev1 = 0;
  for (int n = 0; n < n_terms; ++n) {
    BigInt an = num / den;
    if (num < 0 && num % den != 0) --an;  // floor division
    const BigInt p = an * p_prev1 + p_prev2;
    const BigInt q = an * q_prev1 + q_prev2;
    cf.a.push_back(an);
    cf.convergents.push_back(Convergent{p, q});
    p_prev2 = p_prev1;
    p_prev1 = p;
    q_prev2 = q_prev1;
    q_prev1 = q;
    const BigInt rem = num - an * den;
    if (rem == 0) {
      cf.terminated = true;
      break;
    }
    num = den;
    den = rem;
  }
  return cf;
}

double beta_estimate(const CFExpansion& cf) {
  if (cf.convergents.size() < 2)
    throw DomainError("beta_estimate needs at least 2 convergents");
  double best = 0.0;
  for (std::size_t n = 0; n + 1 < cf.convergents.size(); ++n) {
    const double lq_next =
        static_cast<double>(log(BigFloat(cf.convergents[n + 1].q)));
    const double qn = static_cast<double>(BigFloat(cf.convergents[n].q));
    best = std::max(best, lq_next / qn);
  }
  return best;
}

BigFloat rational_gap(const BigFloat& alpha, const BigInt& p, const BigInt& q) {
  const BigFloat gap = alpha - BigFloat(p) / BigFloat(q);
  return abs(gap);
}

std::vector<Convergent> liouville_approximants(const CFExpansion& cf,
                                               double delta_prime) {
  if (delta_prime <= 0.0) throw DomainError("delta_prime must be positive");
  std::vector<Convergent> out;
  // enclosure slack: alpha is known to one working-precision ulp
  const BigFloat ulp =
      ldexp(BigFloat(1), -static_cast<int>(kFrequencyPrecisionBits) + 4);
  for (const Convergent& c : cf.convergents) {
    const BigFloat gap = rational_gap(cf.alpha, c.p, c.q) + ulp;
    const BigFloat bound = exp(-BigFloat(delta_prime) * BigFloat(c.q));
    if (gap < bound) out.push_back(c);
  }
  return out;
}

}  // namespace qpc
