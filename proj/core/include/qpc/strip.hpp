#ifndef QPC_STRIP_HPP
#define QPC_STRIP_HPP

#include <complex>
#include <functional>
#include <utility>
#include <vector>

#include "qpc/fourier.hpp"

namespace qpc {

enum class Parity { Periodic, Antiperiodic };

struct NormBracket {
  double lower = 0.0;
  double upper = 0.0;
};

// Truncated Fourier series
//
//   f(z) = sum_{k=-N..N} c_k exp(2 pi i (k + off) z),   off = 0 or 1/2,
//
// representing a 1-periodic (off = 0) or 1-antiperiodic (off = 1/2) function
// analytic on the strip {|Im z| < half_width}.  Values are immutable after
// construction; every operation returns a fresh object, so instances can be
// shared freely across threads.
class StripFunction {
 public:
  // Zero function of order 1.
  explicit StripFunction(double half_width = 1.0,
                         Parity parity = Parity::Periodic);

  // coeffs.size() must be odd (= 2N+1), ordered k = -N..N.
  StripFunction(std::vector<cdouble> coeffs, double half_width,
                Parity parity = Parity::Periodic);

  static StripFunction constant(cdouble c, double half_width);
  // c * exp(2 pi i k z)
  static StripFunction harmonic(int k, cdouble c, double half_width);
  // amp * cos(2 pi z), real-on-real
  static StripFunction cosine(double amp, double half_width);

  // Interpolates M equispaced samples f(j/M) of a periodic function; the
  // returned order is M/2 (frequencies centered), then tail-compressed at
  // relative tolerance tol (0 keeps everything).
  static StripFunction from_real_samples(const std::vector<cdouble>& samples,
                                         double half_width, double tol = 0.0);

  int order() const { return n_; }
  double half_width() const { return half_width_; }
  Parity parity() const { return parity_; }
  double freq_offset() const {
    return parity_ == Parity::Antiperiodic ? 0.5 : 0.0;
  }
  bool is_zero() const;

  cdouble coeff(int k) const;  // zero outside the stored window
  const std::vector<cdouble>& coeffs() const { return c_; }

  StripFunction with_half_width(double hw) const;

  // Pointwise evaluation by direct summation; DomainError outside the strip.
  cdouble eval(cdouble z) const;
  // Values on the horizontal grid z_j = j/m + i*im_part, j = 0..m-1.
  std::vector<cdouble> eval_grid(int m, double im_part = 0.0) const;

  double max_abs_coeff() const;

  // Weighted coefficient sum: an upper bound for sup |f| on {|Im z| < eps}.
  double upper_norm(double eps) const;
  // lower = sampled sup on the lines Im z = +-eps*(1-1e-9); the true sup of
  // |f| on the strip lies in [lower, upper].
  NormBracket strip_norm(double eps, int grid_oversample = 16) const;
  double sup_on_line(double im_part, int grid_oversample = 16) const;

  StripFunction operator+(const StripFunction& o) const;
  StripFunction operator-(const StripFunction& o) const;
  StripFunction operator*(const StripFunction& o) const;  // convolution
  StripFunction operator*(cdouble s) const;
  StripFunction operator-() const;
  friend StripFunction operator*(cdouble s, const StripFunction& f) {
    return f * s;
  }

  // f(z + alpha); exact on the truncated representation.
  StripFunction shifted(double alpha) const;
  // Keeps exactly the frequencies in q.Z (periodic functions only).
  StripFunction q_projection(int q) const;
  StripFunction q_complement(int q) const;
  // Multiplies by exp(2 pi i (half_steps/2) z); flips parity when odd.
  StripFunction frequency_shift(int half_steps) const;
  // z -> conj(f(conj z)); fixes real-on-real functions.
  StripFunction conj_reflect() const;
  StripFunction derivative() const;
  // sup_{|Im z|<eps} |f'| via the weighted coefficient sum.
  double derivative_upper_norm(double eps) const;

  // Drops outer coefficients whose weighted tail (at strip height eps_ref)
  // stays below tol * max(|f| scale); never shrinks below order 1.
  StripFunction compressed(double eps_ref, double tol) const;

  // max_k |c_k - conj(c_{mirror(k)})|: zero iff real-valued on the real line
  // (for antiperiodic functions the mirror of k is -k-1).
  double real_defect() const;
  bool is_real_on_real(double tol = 1e-9) const { return real_defect() <= tol; }
  // Averages f with its conjugate reflection.
  StripFunction real_part_symmetrized() const;

 private:
  void check_strip(double im) const;

  std::vector<cdouble> c_;  // size 2n_+1, index k -> c_[k + n_]
  int n_ = 1;
  double half_width_ = 1.0;
  Parity parity_ = Parity::Periodic;
};

// Samples f on an equispaced real grid (fine enough for op's output order),
// applies op pointwise, and re-expands.  extra_order pads the output window
// beyond f's order; tol compresses the result at strip height 0.
StripFunction transform_on_grid(const StripFunction& f,
                                const std::function<cdouble(cdouble)>& op,
                                int extra_order, double tol = 1e-14,
                                int oversample = 8);

// Winding number d of mu on R/Z plus the analytic log:
//   mu = exp(2 pi i (d z + phi)),  Im log mu(0) in [0, 2 pi).
// Throws ZeroOnStrip when the sampled modulus dips below floor.
struct LogBranch {
  int winding = 0;
  StripFunction phi;
};
LogBranch log_branch(const StripFunction& mu, double floor = 1e-12,
                     int oversample = 16);

// Lagrange-interpolation smallness propagation: tail is the upper strip norm
// at eps1 of f minus its [-floor(q/2), q-1-floor(q/2)] frequency window;
// lagrange = sum_{k=0..q-1} |f(z0 + k/q)|.  sup of f on the line Im z = Im z0
// is bounded by tail + lagrange.
struct InterpolationBound {
  double tail = 0.0;
  double lagrange = 0.0;
};
InterpolationBound interpolation_bound(const StripFunction& f, int q,
                                       cdouble z0, double eps0, double eps1);

}  // namespace qpc

#endif  // QPC_STRIP_HPP
