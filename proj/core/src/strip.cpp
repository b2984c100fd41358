#include "qpc/strip.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "qpc/errors.hpp"

namespace qpc {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kBoundaryShave = 1e-9;

int mirror_index(int k, Parity parity) {
  return parity == Parity::Antiperiodic ? -k - 1 : -k;
}
}  // namespace

StripFunction::StripFunction(double half_width, Parity parity)
    : c_(3, cdouble(0.0, 0.0)), n_(1), half_width_(half_width),
      parity_(parity) {
  if (half_width <= 0.0) throw DomainError("half_width must be positive");
}

StripFunction::StripFunction(std::vector<cdouble> coeffs, double half_width,
                             Parity parity)
    : c_(std::move(coeffs)), half_width_(half_width), parity_(parity) {
  if (half_width <= 0.0) throw DomainError("half_width must be positive");
  if (c_.empty() || c_.size() % 2 == 0)
    throw DomainError("coefficient window must have odd size 2N+1");
  n_ = static_cast<int>(c_.size() / 2);
  if (n_ < 1) {
    c_.insert(c_.begin(), cdouble(0.0, 0.0));
    c_.push_back(cdouble(0.0, 0.0));
    n_ = 1;
  }
}

StripFunction StripFunction::constant(cdouble c, double half_width) {
  StripFunction f(half_width);
  f.c_[1] = c;
  return f;
}

StripFunction StripFunction::harmonic(int k, cdouble c, double half_width) {
  const int n = std::max(1, std::abs(k));
  std::vector<cdouble> coeffs(2 * n + 1, cdouble(0.0, 0.0));
  coeffs[k + n] = c;
  return StripFunction(std::move(coeffs), half_width);
}

StripFunction StripFunction::cosine(double amp, double half_width) {
  std::vector<cdouble> coeffs(3, cdouble(0.0, 0.0));
  coeffs[0] = coeffs[2] = cdouble(0.5 * amp, 0.0);
  return StripFunction(std::move(coeffs), half_width);
}

StripFunction StripFunction::from_real_samples(
    const std::vector<cdouble>& samples, double half_width, double tol) {
  const int m = static_cast<int>(samples.size());
  if (m < 3) throw DomainError("need at least 3 samples");
  std::vector<cdouble> hat = dft_forward(samples);
  const double scale = 1.0 / m;
  const int n = (m - 1) / 2;
  std::vector<cdouble> coeffs(2 * n + 1, cdouble(0.0, 0.0));
  for (int k = -n; k <= n; ++k) {
    const int idx = k >= 0 ? k : k + m;
    coeffs[k + n] = hat[idx] * scale;
  }
  StripFunction f(std::move(coeffs), half_width);
  if (tol > 0.0) f = f.compressed(0.0, tol);
  return f;
}

bool StripFunction::is_zero() const {
  for (const cdouble& c : c_)
    if (c != cdouble(0.0, 0.0)) return false;
  return true;
}

cdouble StripFunction::coeff(int k) const {
  if (k < -n_ || k > n_) return cdouble(0.0, 0.0);
  return c_[k + n_];
}

StripFunction StripFunction::with_half_width(double hw) const {
  StripFunction f = *this;
  if (hw <= 0.0) throw DomainError("half_width must be positive");
  f.half_width_ = hw;
  return f;
}

void StripFunction::check_strip(double im) const {
  if (std::abs(im) >= half_width_)
    throw DomainError("evaluation point outside the analyticity strip");
}

cdouble StripFunction::eval(cdouble z) const {
  check_strip(z.imag());
  const double off = freq_offset();
  cdouble sum(0.0, 0.0);
  for (int k = -n_; k <= n_; ++k) {
    const cdouble& ck = c_[k + n_];
    if (ck == cdouble(0.0, 0.0)) continue;
    const cdouble expo = cdouble(0.0, kTwoPi * (k + off)) * z;
    sum += ck * std::exp(expo);
  }
  return sum;
}

std::vector<cdouble> StripFunction::eval_grid(int m, double im_part) const {
  check_strip(im_part);
  const double off = freq_offset();
  if (m >= 2 * n_ + 1) {
    // Place damped coefficients in DFT bins and inverse-transform.
    std::vector<cdouble> bins(m, cdouble(0.0, 0.0));
    for (int k = -n_; k <= n_; ++k) {
      const cdouble dk = c_[k + n_] * std::exp(-kTwoPi * (k + off) * im_part);
      const int idx = ((k % m) + m) % m;
      bins[idx] += dk;
    }
    std::vector<cdouble> vals = dft_inverse(bins);
    for (int j = 0; j < m; ++j) {
      vals[j] *= static_cast<double>(m);
      if (parity_ == Parity::Antiperiodic) {
        // remaining phase of the half-integer offset (its damping is
        // already inside d_k)
        const double x = static_cast<double>(j) / m;
        vals[j] *= std::exp(cdouble(0.0, std::numbers::pi * x));
      }
    }
    return vals;
  }
  std::vector<cdouble> vals(m);
  for (int j = 0; j < m; ++j)
    vals[j] = eval(cdouble(static_cast<double>(j) / m, im_part));
  return vals;
}

double StripFunction::max_abs_coeff() const {
  double m = 0.0;
  for (const cdouble& c : c_) m = std::max(m, std::abs(c));
  return m;
}

double StripFunction::upper_norm(double eps) const {
  if (eps < 0.0) throw DomainError("eps must be nonnegative");
  const double off = freq_offset();
  double sum = 0.0;
  for (int k = -n_; k <= n_; ++k)
    sum += std::abs(c_[k + n_]) * std::exp(kTwoPi * eps * std::abs(k + off));
  return sum;
}

double StripFunction::sup_on_line(double im_part, int grid_oversample) const {
  const int m = std::max(8, grid_oversample * (n_ + 1));
  std::vector<cdouble> vals = eval_grid(m, im_part);
  double mx = 0.0;
  for (const cdouble& v : vals) mx = std::max(mx, std::abs(v));
  return mx;
}

NormBracket StripFunction::strip_norm(double eps, int grid_oversample) const {
  if (eps <= 0.0 || eps > half_width_)
    throw DomainError("strip_norm: need 0 < eps <= half_width");
  const double line = eps * (1.0 - kBoundaryShave);
  NormBracket nb;
  nb.lower = std::max(sup_on_line(line, grid_oversample),
                      sup_on_line(-line, grid_oversample));
  // Refined certified upper: by the maximum principle the sup lives on the
  // boundary lines; a fine grid max plus the between-samples Taylor error
  // (f' = 0 at the max, so h^2/8 |f''|) plus the boundary shave covers it.
  const int fine = 4 * grid_oversample;
  const double grid_max = std::max(sup_on_line(line, fine),
                                   sup_on_line(-line, fine));
  const double h = 1.0 / std::max(8, fine * (n_ + 1));
  const double d2 = derivative().derivative_upper_norm(eps);
  const double d1 = derivative_upper_norm(eps);
  const double refined =
      grid_max + h * h / 8.0 * d2 + kBoundaryShave * eps * d1;
  nb.upper = std::min(upper_norm(eps), refined);
  return nb;
}

StripFunction StripFunction::operator+(const StripFunction& o) const {
  if (parity_ != o.parity_)
    throw DomainError("parity mismatch in StripFunction addition");
  const int n = std::max(n_, o.n_);
  std::vector<cdouble> coeffs(2 * n + 1, cdouble(0.0, 0.0));
  for (int k = -n; k <= n; ++k) coeffs[k + n] = coeff(k) + o.coeff(k);
  return StripFunction(std::move(coeffs), std::min(half_width_, o.half_width_),
                       parity_);
}

StripFunction StripFunction::operator-(const StripFunction& o) const {
  return *this + (o * cdouble(-1.0, 0.0));
}

StripFunction StripFunction::operator*(const StripFunction& o) const {
  const bool anti_a = parity_ == Parity::Antiperiodic;
  const bool anti_b = o.parity_ == Parity::Antiperiodic;
  const Parity out_parity =
      (anti_a != anti_b) ? Parity::Antiperiodic : Parity::Periodic;
  // offsets add: 1/2 + 1/2 = 1 shifts the integer index by one.
  const int carry = (anti_a && anti_b) ? 1 : 0;
  std::vector<cdouble> conv = convolve(c_, o.c_);
  // conv index m corresponds to i + j = m - n_ - o.n_, output index i+j+carry.
  const int n_out = n_ + o.n_ + std::abs(carry);
  std::vector<cdouble> coeffs(2 * n_out + 1, cdouble(0.0, 0.0));
  for (int m = 0; m < static_cast<int>(conv.size()); ++m) {
    const int k = m - n_ - o.n_ + carry;
    coeffs[k + n_out] = conv[m];
  }
  return StripFunction(std::move(coeffs), std::min(half_width_, o.half_width_),
                       out_parity);
}

StripFunction StripFunction::operator*(cdouble s) const {
  StripFunction f = *this;
  for (cdouble& c : f.c_) c *= s;
  return f;
}

StripFunction StripFunction::operator-() const {
  return *this * cdouble(-1.0, 0.0);
}

StripFunction StripFunction::shifted(double alpha) const {
  StripFunction f = *this;
  const double off = freq_offset();
  for (int k = -n_; k <= n_; ++k)
    f.c_[k + n_] *= std::exp(cdouble(0.0, kTwoPi * (k + off) * alpha));
  return f;
}

StripFunction StripFunction::q_projection(int q) const {
  if (parity_ != Parity::Periodic)
    throw DomainError("q_projection requires a periodic function");
  if (q < 1) throw DomainError("q must be >= 1");
  StripFunction f = *this;
  for (int k = -n_; k <= n_; ++k)
    if (k % q != 0) f.c_[k + n_] = cdouble(0.0, 0.0);
  return f;
}

StripFunction StripFunction::q_complement(int q) const {
  return *this - q_projection(q);
}

StripFunction StripFunction::frequency_shift(int half_steps) const {
  const bool flip = (half_steps % 2) != 0;
  const bool anti = parity_ == Parity::Antiperiodic;
  // new frequency = (k + off) + half_steps/2 = k' + off'
  //   same parity:  k' = k + half_steps/2
  //   parity flip:  off 0 -> 1/2: k' = k + (half_steps-1)/2
  //                 off 1/2 -> 0: k' = k + (half_steps+1)/2
  int shift;
  Parity out_parity;
  if (!flip) {
    shift = half_steps / 2;
    out_parity = parity_;
  } else if (!anti) {
    shift = (half_steps - 1) / 2;  // exact: half_steps-1 is even
    out_parity = Parity::Antiperiodic;
  } else {
    shift = (half_steps + 1) / 2;
    out_parity = Parity::Periodic;
  }
  const int lo = -n_ + shift;
  const int hi = n_ + shift;
  const int n_out = std::max({1, std::abs(lo), std::abs(hi)});
  std::vector<cdouble> coeffs(2 * n_out + 1, cdouble(0.0, 0.0));
  for (int k = -n_; k <= n_; ++k) coeffs[k + shift + n_out] = c_[k + n_];
  return StripFunction(std::move(coeffs), half_width_, out_parity);
}

StripFunction StripFunction::conj_reflect() const {
  const int extra = parity_ == Parity::Antiperiodic ? 1 : 0;
  const int n_out = n_ + extra;
  std::vector<cdouble> coeffs(2 * n_out + 1, cdouble(0.0, 0.0));
  for (int k = -n_; k <= n_; ++k) {
    const int km = mirror_index(k, parity_);
    coeffs[km + n_out] = std::conj(c_[k + n_]);
  }
  return StripFunction(std::move(coeffs), half_width_, parity_);
}

StripFunction StripFunction::derivative() const {
  StripFunction f = *this;
  const double off = freq_offset();
  for (int k = -n_; k <= n_; ++k)
    f.c_[k + n_] *= cdouble(0.0, kTwoPi * (k + off));
  return f;
}

double StripFunction::derivative_upper_norm(double eps) const {
  const double off = freq_offset();
  double sum = 0.0;
  for (int k = -n_; k <= n_; ++k)
    sum += kTwoPi * std::abs(k + off) * std::abs(c_[k + n_]) *
           std::exp(kTwoPi * eps * std::abs(k + off));
  return sum;
}

StripFunction StripFunction::compressed(double eps_ref, double tol) const {
  if (tol <= 0.0) return *this;
  // Per-coefficient floor relative to the largest weighted coefficient.
  // Sampling and convolution leave a flat dust floor across the whole
  // window; a cumulative-tail criterion would keep it, and the strip
  // weights then amplify the dust into the reported norms.
  const double off = freq_offset();
  auto weighted = [&](int k) {
    return std::abs(c_[k + n_]) * std::exp(kTwoPi * eps_ref * std::abs(k + off));
  };
  double ref = 0.0;
  for (int k = -n_; k <= n_; ++k) ref = std::max(ref, weighted(k));
  const double floor = tol * std::max(ref, 1e-300);
  int n_keep = 1;
  for (int k = n_; k >= 1; --k) {
    if (weighted(k) > floor || weighted(-k) > floor) {
      n_keep = k;
      break;
    }
  }
  if (n_keep >= n_) return *this;
  std::vector<cdouble> coeffs(c_.begin() + (n_ - n_keep),
                              c_.begin() + (n_ + n_keep + 1));
  return StripFunction(std::move(coeffs), half_width_, parity_);
}

double StripFunction::real_defect() const {
  double mx = 0.0;
  const int lo = parity_ == Parity::Antiperiodic ? -n_ - 1 : -n_;
  for (int k = lo; k <= n_; ++k) {
    const cdouble diff = coeff(k) - std::conj(coeff(mirror_index(k, parity_)));
    mx = std::max(mx, std::abs(diff));
  }
  return mx;
}

StripFunction StripFunction::real_part_symmetrized() const {
  return (*this + conj_reflect()) * cdouble(0.5, 0.0);
}

StripFunction transform_on_grid(const StripFunction& f,
                                const std::function<cdouble(cdouble)>& op,
                                int extra_order, double tol, int oversample) {
  if (f.parity() != Parity::Periodic)
    throw DomainError("transform_on_grid requires a periodic function");
  const int n_target = f.order() + std::max(0, extra_order);
  int m = 4;
  while (m < oversample * (n_target + 1)) m <<= 1;
  std::vector<cdouble> vals = f.eval_grid(m, 0.0);
  for (cdouble& v : vals) v = op(v);
  return StripFunction::from_real_samples(vals, f.half_width(), tol);
}

LogBranch log_branch(const StripFunction& mu, double floor, int oversample) {
  if (mu.parity() != Parity::Periodic)
    throw DomainError("log_branch requires a periodic function");
  int m = 8;
  while (m < oversample * (mu.order() + 1)) m <<= 1;

  // Guard against zeros in the strip: the modulus must stay above floor on a
  // few horizontal lines (a zero inside would drag one of them down).
  const double hw = mu.half_width();
  const double edge = hw * (1.0 - kBoundaryShave);
  for (double line : {0.0, 0.5 * hw, -0.5 * hw, edge, -edge}) {
    std::vector<cdouble> vals = mu.eval_grid(m, line);
    for (const cdouble& v : vals) {
      if (std::abs(v) <= floor)
        throw ZeroOnStrip("log_branch: |mu| dips to " +
                          std::to_string(std::abs(v)));
    }
  }

  std::vector<cdouble> vals = mu.eval_grid(m, 0.0);
  std::vector<double> arg(m + 1);
  arg[0] = std::arg(vals[0]);
  if (arg[0] < 0.0) arg[0] += kTwoPi;  // pin Im log mu(0) to [0, 2 pi)
  for (int j = 1; j <= m; ++j) {
    const cdouble prev = vals[(j - 1) % m];
    const cdouble cur = vals[j % m];
    double inc = std::arg(cur / prev);
    arg[j] = arg[j - 1] + inc;
  }
  const double total = arg[m] - arg[0];
  const int d = static_cast<int>(std::lround(total / kTwoPi));

  std::vector<cdouble> phi_vals(m);
  for (int j = 0; j < m; ++j) {
    const double x = static_cast<double>(j) / m;
    const double im_log = arg[j] - kTwoPi * d * x;
    const double re_log = std::log(std::abs(vals[j]));
    // phi = log(mu)/(2 pi i) - d x
    phi_vals[j] = cdouble(im_log / kTwoPi, -re_log / kTwoPi);
  }
  LogBranch out;
  out.winding = d;
  out.phi = StripFunction::from_real_samples(phi_vals, mu.half_width(), 1e-15);
  return out;
}

InterpolationBound interpolation_bound(const StripFunction& f, int q,
                                       cdouble z0, double eps0, double eps1) {
  if (q < 1) throw DomainError("q must be >= 1");
  if (!(std::abs(z0.imag()) < eps1 && eps1 < eps0 && eps0 <= f.half_width()))
    throw DomainError("interpolation_bound: need |Im z0| < eps1 < eps0 <= hw");
  const int lo = -(q / 2);
  const int hi = q - 1 - q / 2;
  const int n = f.order();
  std::vector<cdouble> tail_coeffs(2 * n + 1, cdouble(0.0, 0.0));
  for (int k = -n; k <= n; ++k)
    if (k < lo || k > hi) tail_coeffs[k + n] = f.coeff(k);
  StripFunction tail_fn(std::move(tail_coeffs), f.half_width(), f.parity());

  InterpolationBound out;
  out.tail = tail_fn.upper_norm(eps1);
  for (int k = 0; k < q; ++k)
    out.lagrange += std::abs(f.eval(z0 + cdouble(static_cast<double>(k) / q, 0.0)));
  return out;
}

}  // namespace qpc
