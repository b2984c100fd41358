#include "qpc/corona.hpp"
#include <cstdlib>
#include <cstdio>

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "qpc/errors.hpp"

namespace qpc {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kShave = 1e-9;
constexpr double kWeightExpCap = 280.0;  // keeps strip weights finite

using Eigen::VectorXcd;

// ---------------------------------------------------------------------------
// Weighted least squares on coefficient space, via LSQR with FFT matvecs.
//
// Unknowns are the coefficient windows of functions x_i (one per fixed
// factor a_i); the forward map is m -> sum_i (a_i * x_i)(m) with rows scaled
// by the strip weight e^{2 pi eps |m|} and columns scaled by its inverse, so
// the matrix entries stay O(|a| e^{2 pi eps |j|}) and never overflow.
// Tikhonov rows damp the scaled unknowns.
// ---------------------------------------------------------------------------

double strip_weight(double eps, double freq) {
  return std::exp(std::min(kTwoPi * eps * std::abs(freq), kWeightExpCap));
}

struct ProductLs {
  std::vector<std::vector<cdouble>> a;  // centered windows, orders n_i
  std::vector<int> n_a;
  int n_unknown = 0;
  int carry = 0;          // 1 when factors and unknowns are antiperiodic
  double off_u = 0.0;     // unknown frequency offset
  int m_out = 0;          // output window [-m_out, m_out]
  double eps = 0.0;
  double damping = 0.0;
  std::vector<double> col_scale;  // Jacobi equilibration (right precond.)

  int cols() const {
    return static_cast<int>(a.size()) * (2 * n_unknown + 1);
  }
  int main_rows() const { return 2 * m_out + 1; }
  int rows() const { return main_rows() + cols(); }

  // Column norms of the weighted operator; equilibrating them keeps LSQR's
  // effective condition number tied to the data, not to the weight range.
  void equilibrate() {
    col_scale.assign(cols(), 1.0);
    const int nu = n_unknown;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const int ni = n_a[i];
      for (int k = -nu; k <= nu; ++k) {
        double s2 = 0.0;
        for (int j = -ni; j <= ni; ++j) {
          const int m = j + k + carry;
          if (m < -m_out || m > m_out) continue;
          const double e = std::abs(a[i][j + ni]) * strip_weight(eps, m) /
                           strip_weight(eps, k + off_u);
          s2 += e * e;
        }
        s2 += damping * damping;
        col_scale[static_cast<int>(i) * (2 * nu + 1) + k + nu] =
            std::max(std::sqrt(s2), 1e-300);
      }
    }
  }

  // y = A D^{-1} x
  void apply(const VectorXcd& x, VectorXcd& y) const {
    y.setZero(rows());
    const int nu = n_unknown;
    for (std::size_t i = 0; i < a.size(); ++i) {
      std::vector<cdouble> xi(2 * nu + 1);
      for (int k = -nu; k <= nu; ++k) {
        const int col = static_cast<int>(i) * (2 * nu + 1) + k + nu;
        xi[k + nu] =
            x[col] / (strip_weight(eps, k + off_u) * col_scale[col]);
      }
      std::vector<cdouble> conv = convolve(a[i], xi);
      const int ni = n_a[i];
      for (int t = 0; t < static_cast<int>(conv.size()); ++t) {
        const int m = t - ni - nu + carry;
        if (m >= -m_out && m <= m_out) y[m + m_out] += conv[t];
      }
    }
    for (int m = -m_out; m <= m_out; ++m) y[m + m_out] *= strip_weight(eps, m);
    for (int j = 0; j < cols(); ++j)
      y[main_rows() + j] = damping * x[j] / col_scale[j];
  }

  // x = D^{-H} A^H y
  void apply_adjoint(const VectorXcd& y, VectorXcd& x) const {
    x.setZero(cols());
    const int nu = n_unknown;
    std::vector<cdouble> yw(2 * m_out + 1);
    for (int m = -m_out; m <= m_out; ++m)
      yw[m + m_out] = y[m + m_out] * strip_weight(eps, m);
    for (std::size_t i = 0; i < a.size(); ++i) {
      const int ni = n_a[i];
      std::vector<cdouble> rev(2 * ni + 1);
      for (int s = 0; s <= 2 * ni; ++s) rev[s] = std::conj(a[i][2 * ni - s]);
      std::vector<cdouble> corr = convolve(rev, yw);
      for (int k = -nu; k <= nu; ++k) {
        const int idx = k + carry + m_out + ni;
        cdouble v = (idx >= 0 && idx < static_cast<int>(corr.size()))
                        ? corr[idx]
                        : cdouble(0.0, 0.0);
        const int col = static_cast<int>(i) * (2 * nu + 1) + k + nu;
        x[col] = v / strip_weight(eps, k + off_u) +
                 damping * y[main_rows() + col];
        x[col] /= col_scale[col];
      }
    }
  }
};

// Paige-Saunders LSQR for min ||A x - b||; complex, damping folded into A.
// Stops on residual convergence or on the normal-equation residual ||A' r||
// (the relevant test when the system is inconsistent).
VectorXcd lsqr(const ProductLs& op, const VectorXcd& b, int itmax,
               double rtol) {
  VectorXcd x = VectorXcd::Zero(op.cols());
  VectorXcd u = b;
  double beta = u.norm();
  if (beta == 0.0) return x;
  u /= beta;
  VectorXcd v(op.cols());
  op.apply_adjoint(u, v);
  double alpha = v.norm();
  if (alpha == 0.0) return x;
  v /= alpha;
  VectorXcd w = v;
  double phibar = beta, rhobar = alpha;
  double norm_a2 = 0.0;
  VectorXcd tmp_r(op.rows()), tmp_c(op.cols());
  for (int it = 0; it < itmax; ++it) {
    op.apply(v, tmp_r);
    u = tmp_r - alpha * u;
    beta = u.norm();
    if (beta > 0.0) u /= beta;
    op.apply_adjoint(u, tmp_c);
    v = tmp_c - beta * v;
    norm_a2 += alpha * alpha + beta * beta;
    alpha = v.norm();
    if (alpha > 0.0) v /= alpha;
    const double rho = std::hypot(rhobar, beta);
    const double c = rhobar / rho;
    const double s = beta / rho;
    const double theta = s * alpha;
    rhobar = -c * alpha;
    const double phi = c * phibar;
    phibar = s * phibar;
    x += (phi / rho) * w;
    w = v - (theta / rho) * w;
    if (std::getenv("QPC_DEBUG_LSQR") && it % 200 == 0)
      std::fprintf(stderr, "    lsqr it=%d phibar=%.3e arnorm=%.3e\n", it,
                   phibar, phibar * alpha * std::abs(c));
    if (phibar <= rtol * b.norm()) break;
    const double arnorm = phibar * alpha * std::abs(c);
    if (arnorm <= 1e-13 * std::sqrt(norm_a2) * phibar) break;
    if (alpha == 0.0 || beta == 0.0) break;
  }
  return x;
}

struct LsSolution {
  std::vector<StripFunction> x;
};

LsSolution solve_product_ls(const std::vector<StripFunction>& a,
                            const StripFunction& rhs, int n_unknown,
                            double eps, double damping, int itmax) {
  ProductLs op;
  op.n_unknown = n_unknown;
  op.eps = eps;
  double scale = 0.0;
  for (const StripFunction& f : a) scale = std::max(scale, f.upper_norm(eps));
  op.damping = std::max(damping, 1e-10 * scale);
  const Parity par = a.front().parity();
  op.carry = par == Parity::Antiperiodic ? 1 : 0;
  op.off_u = par == Parity::Antiperiodic ? 0.5 : 0.0;
  int m_out = rhs.order();
  for (const StripFunction& f : a) {
    if (f.parity() != par) throw DomainError("mixed parity in LS solve");
    op.a.push_back(f.coeffs());
    op.n_a.push_back(f.order());
    m_out = std::max(m_out, f.order() + n_unknown + op.carry);
  }
  if (rhs.parity() != Parity::Periodic)
    throw DomainError("LS right-hand side must be periodic");
  op.m_out = m_out;
  op.equilibrate();

  VectorXcd b = VectorXcd::Zero(op.rows());
  for (int m = -rhs.order(); m <= rhs.order(); ++m)
    b[m + m_out] = rhs.coeff(m) * strip_weight(eps, m);

  if (std::getenv("QPC_DEBUG_LSQR")) {
    // adjoint consistency probe: <A x, y> == <x, A' y>
    VectorXcd xt = VectorXcd::Random(op.cols());
    VectorXcd yt = VectorXcd::Random(op.rows());
    VectorXcd ax(op.rows()), aty(op.cols());
    op.apply(xt, ax);
    op.apply_adjoint(yt, aty);
    const cdouble d1 = yt.dot(ax);   // <y, Ax> (conjugates y)
    const cdouble d2 = aty.dot(xt);  // <A'y, x>
    std::fprintf(stderr, "    adjoint probe: %.6e (rel)\n",
                 std::abs(d1 - std::conj(d2)) /
                     std::max(1e-300, std::abs(d1)));
  }
  // LSQR regardless of size: the strip weighting makes these systems badly
  // conditioned, and Krylov iterations regularize where dense QR rank
  // decisions turn erratic.
  VectorXcd x = lsqr(op, b, itmax, 1e-14);
  if (std::getenv("QPC_DEBUG_LS")) {
    VectorXcd r(op.rows());
    op.apply(x, r);
    r -= b;
    std::fprintf(stderr,
                 "  ls: cols=%d |x|=%.3e |r|2=%.3e |b|=%.3e damping=%.3e\n",
                 op.cols(), x.norm(), r.norm(), b.norm(), op.damping);
  }

  LsSolution out;
  const double hw = a.front().half_width();
  for (std::size_t i = 0; i < a.size(); ++i) {
    std::vector<cdouble> coeffs(2 * n_unknown + 1);
    for (int k = -n_unknown; k <= n_unknown; ++k) {
      const int col = static_cast<int>(i) * (2 * n_unknown + 1) + k + n_unknown;
      coeffs[k + n_unknown] =
          x[col] / (strip_weight(eps, k + op.off_u) * op.col_scale[col]);
    }
    out.x.emplace_back(std::move(coeffs), hw, par);
  }
  return out;
}

double sampled_sup(const StripFunction& f, double eps, int oversample) {
  const double line = eps * (1.0 - kShave);
  double s = f.sup_on_line(0.0, oversample);
  s = std::max(s, f.sup_on_line(line, oversample));
  s = std::max(s, f.sup_on_line(-line, oversample));
  return s;
}

// ---------------------------------------------------------------------------
// Zero location
// ---------------------------------------------------------------------------

struct TrimmedPoly {
  std::vector<cdouble> p;  // p[j] multiplies w^j
  int klo = 0;             // f = w^{klo} * poly(w) on the effective window
};

TrimmedPoly trim_to_poly(const StripFunction& f) {
  const int n = f.order();
  const double floor = 1e-15 * std::max(f.max_abs_coeff(), 1e-300);
  int klo = -n, khi = n;
  while (klo <= khi && std::abs(f.coeff(klo)) <= floor) ++klo;
  while (khi >= klo && std::abs(f.coeff(khi)) <= floor) --khi;
  TrimmedPoly t;
  if (klo > khi) return t;  // numerically zero
  t.klo = klo;
  for (int k = klo; k <= khi; ++k) t.p.push_back(f.coeff(k));
  return t;
}

std::vector<cdouble> companion_roots(std::vector<cdouble> p) {
  const int d = static_cast<int>(p.size()) - 1;
  // Balance by the radial substitution w = s w~ to flatten the coefficients.
  double s = 1.0;
  const double a0 = std::abs(p.front());
  const double ad = std::abs(p.back());
  if (a0 > 0.0 && ad > 0.0) s = std::pow(a0 / ad, 1.0 / d);
  s = std::clamp(s, 1e-6, 1e6);
  double scale = 1.0;
  double mx = 0.0;
  for (int j = 0; j <= d; ++j) {
    p[j] *= scale;
    scale *= s;
    mx = std::max(mx, std::abs(p[j]));
  }
  for (cdouble& c : p) c /= mx;

  Eigen::MatrixXcd comp = Eigen::MatrixXcd::Zero(d, d);
  for (int j = 0; j < d - 1; ++j) comp(j + 1, j) = 1.0;
  for (int j = 0; j < d; ++j) comp(j, d - 1) = -p[j] / p[d];
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(comp, false);
  std::vector<cdouble> roots(d);
  for (int j = 0; j < d; ++j) roots[j] = es.eigenvalues()[j] * s;
  return roots;
}

cdouble to_z(cdouble w) {
  // z = (1/2 pi i) Log w, Re z in [0,1)
  double re = std::arg(w) / kTwoPi;
  if (re < 0.0) re += 1.0;
  const double im = -std::log(std::abs(w)) / kTwoPi;
  return {re, im};
}

bool newton_polish(const StripFunction& f, const StripFunction& df, cdouble& z,
                   double band) {
  for (int it = 0; it < 40; ++it) {
    const cdouble fv = f.eval(z);
    const cdouble dv = df.eval(z);
    if (std::abs(dv) == 0.0) return false;
    const cdouble step = fv / dv;
    z -= step;
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
    if (std::abs(z.imag()) > band) return false;
    if (std::abs(step) < 1e-14) break;
  }
  double re = std::fmod(z.real(), 1.0);
  if (re < 0.0) re += 1.0;
  z = {re, z.imag()};
  return true;
}

// Tracked argument increase of f along the line Im z = y, x: 0 -> 1,
// bisecting whenever a step turns more than pi/2.
double winding_on_line(const StripFunction& f, double y, int m) {
  double total = 0.0;
  std::function<double(double, double, cdouble, cdouble, int)> segment =
      [&](double x0, double x1, cdouble f0, cdouble f1, int depth) -> double {
    const double inc = std::arg(f1 / f0);
    if (std::abs(inc) < 1.5 || depth > 28) return inc;
    const double xm = 0.5 * (x0 + x1);
    const cdouble fm = f.eval(cdouble(xm, y));
    return segment(x0, xm, f0, fm, depth + 1) +
           segment(xm, x1, fm, f1, depth + 1);
  };
  std::vector<cdouble> vals = f.eval_grid(m, y);
  for (int j = 0; j < m; ++j) {
    const double x0 = static_cast<double>(j) / m;
    const double x1 = static_cast<double>(j + 1) / m;
    const cdouble f0 = vals[j];
    const cdouble f1 = vals[(j + 1) % m];
    if (std::abs(f0) == 0.0 || std::abs(f1) == 0.0)
      throw ZeroLocationFailure("winding: zero on contour");
    total += segment(x0, x1, f0, f1, 0);
  }
  return total / kTwoPi;
}

double torus_dist(cdouble z1, cdouble z2) {
  double dre = std::abs(z1.real() - z2.real());
  dre = std::min(dre, 1.0 - dre);
  return std::hypot(dre, z1.imag() - z2.imag());
}

}  // namespace

std::vector<cdouble> strip_zeros(const StripFunction& f, double eps,
                                 const CoronaOptions& opt) {
  if (eps <= 0.0 || eps > f.half_width())
    throw DomainError("strip_zeros: need 0 < eps <= half_width");
  TrimmedPoly t = trim_to_poly(f);
  if (t.p.empty()) throw ZeroLocationFailure("strip_zeros on a zero function");
  const int d = static_cast<int>(t.p.size()) - 1;
  const StripFunction df = f.derivative();
  const double band = eps * (1.0 + 1e-6);

  std::vector<cdouble> seeds;
  if (d == 0) {
    // monomial times a constant: no zeros away from w = 0
  } else if (d <= opt.companion_max_degree) {
    const double halo = std::exp(kTwoPi * eps) * 1.05;
    for (cdouble w : companion_roots(t.p)) {
      const double r = std::abs(w);
      if (r < 1.0 / halo || r > halo || r == 0.0) continue;
      seeds.push_back(to_z(w));
    }
  } else {
    // Annulus scan: local minima of |f| along horizontal lines seed Newton.
    const int m = std::max(64, 8 * (f.order() + 1));
    for (int li = -6; li <= 6; ++li) {
      const double y = eps * (1.0 - 1e-3) * li / 6.0;
      std::vector<cdouble> vals = f.eval_grid(m, y);
      double line_max = 0.0;
      for (const cdouble& v : vals) line_max = std::max(line_max, std::abs(v));
      for (int j = 0; j < m; ++j) {
        const double prev = std::abs(vals[(j + m - 1) % m]);
        const double cur = std::abs(vals[j]);
        const double next = std::abs(vals[(j + 1) % m]);
        if (cur <= prev && cur <= next && cur < 0.25 * line_max)
          seeds.push_back(cdouble(static_cast<double>(j) / m, y));
      }
    }
  }

  std::vector<cdouble> roots;
  const double zero_scale = std::max(f.upper_norm(eps), 1e-300);
  const double dedupe_tol = 1e-9;  // same root reached from several seeds
  for (cdouble z : seeds) {
    if (!newton_polish(f, df, z, band)) continue;
    if (std::abs(z.imag()) >= eps * (1.0 - kShave)) continue;
    if (std::abs(f.eval(z)) > opt.zero_residual_tol * zero_scale) continue;
    bool dup = false;
    for (const cdouble& r : roots) {
      if (torus_dist(r, z) < dedupe_tol) {
        dup = true;
        break;
      }
    }
    if (!dup) roots.push_back(z);
  }

  // Multiplicity guard: distinct roots closer than cluster_tol signal a
  // (near-)multiple zero, which the construction cannot divide out.
  for (std::size_t i = 0; i < roots.size(); ++i)
    for (std::size_t j = i + 1; j < roots.size(); ++j)
      if (torus_dist(roots[i], roots[j]) < opt.cluster_tol)
        throw ZeroLocationFailure("zero cluster tighter than the guard");

  // Argument-principle certification: zeros inside the band equal the edge
  // winding difference.  Retry with slightly different shaves before failing.
  const int mw = std::max(128, opt.grid_oversample * (f.order() + 1));
  bool certified = false;
  for (double shave : {1e-9, 3.7e-6, 1.1e-4}) {
    const double yl = eps * (1.0 - shave);
    try {
      const double wb = winding_on_line(f, -yl, mw);
      const double wt = winding_on_line(f, yl, mw);
      const long count = std::lround(wb - wt);
      long inside = 0;
      for (const cdouble& r : roots)
        if (std::abs(r.imag()) < yl) ++inside;
      if (count == inside) {
        certified = true;
        break;
      }
    } catch (const ZeroLocationFailure&) {
      continue;  // zero hugging this contour; try the next shave
    }
  }
  if (!certified)
    throw ZeroLocationFailure(
        "argument-principle count does not match located zeros");

  std::sort(roots.begin(), roots.end(), [](cdouble a_, cdouble b_) {
    return a_.real() != b_.real() ? a_.real() < b_.real()
                                  : a_.imag() < b_.imag();
  });
  return roots;
}

// ---------------------------------------------------------------------------
// analytic_divide / bezout_solve
// ---------------------------------------------------------------------------

StripFunction analytic_divide(const StripFunction& num,
                              const StripFunction& den, double eps, double tol,
                              const CoronaOptions& opt) {
  if (num.parity() != Parity::Periodic || den.parity() != Parity::Periodic)
    throw DomainError("analytic_divide expects periodic operands");
  const double scale = std::max(sampled_sup(num, eps, 8), 1e-300);
  int n_h = std::max(den.order(), num.order());
  StripFunction best(num.half_width());
  double best_resid = std::numeric_limits<double>::infinity();
  while (true) {
    LsSolution sol = solve_product_ls({den}, num, n_h, eps,
                                      opt.tikhonov * scale, 2500);
    const StripFunction& h = sol.x.front();
    const StripFunction resid_fn = den * h - num;
    const double resid = sampled_sup(resid_fn, eps, 8);
    const double prev_best = best_resid;
    if (resid < best_resid) {
      best = h;
      best_resid = resid;
    }
    if (best_resid <= tol * scale) break;
    // a doubling that buys < 2x is a structural obstruction, not truncation
    if (2 * n_h > opt.divide_max_order || resid > 0.9 * prev_best)
      throw IllConditioned(
          "analytic_divide: residual " + std::to_string(best_resid / scale) +
          " above tolerance at order " + std::to_string(n_h));
    n_h *= 2;
  }
  return best.compressed(0.0, 1e-15);
}

std::vector<StripFunction> bezout_solve(const std::vector<StripFunction>& a,
                                        double delta, double eps,
                                        const CoronaOptions& opt) {
  if (a.empty()) throw DomainError("bezout_solve needs at least one function");
  if (delta <= 0.0 || delta > 1.0)
    throw DomainError("bezout_solve: delta must lie in (0, 1]");
  double hw = a.front().half_width();
  const Parity par = a.front().parity();
  for (const StripFunction& f : a) {
    hw = std::min(hw, f.half_width());
    if (f.parity() != par)
      throw DomainError("bezout_solve inputs must share parity");
  }
  if (eps >= hw) throw DomainError("bezout_solve: eps must sit inside the strip");

  bool real_sym = true;
  for (const StripFunction& f : a)
    real_sym = real_sym && f.is_real_on_real(1e-9 * std::max(1.0, f.max_abs_coeff()));

  const StripFunction one = StripFunction::constant(1.0, hw);
  const double budget =
      opt.bezout_budget_C / (delta * delta) * (1.0 + std::abs(std::log(delta)));

  int n_u = opt.bezout_min_order;
  double best_resid = std::numeric_limits<double>::infinity();
  std::vector<StripFunction> best;
  while (true) {
    LsSolution sol = solve_product_ls(a, one, n_u, eps, opt.tikhonov, 2500);
    std::vector<StripFunction> cand = sol.x;
    if (real_sym)
      for (StripFunction& f : cand) f = f.real_part_symmetrized();
    StripFunction resid_fn = -one;
    for (std::size_t i = 0; i < a.size(); ++i) resid_fn = resid_fn + a[i] * cand[i];
    const double resid = sampled_sup(resid_fn, eps, 8);
    if (std::getenv("QPC_DEBUG_LS"))
      std::fprintf(stderr, "bezout n_u=%d resid=%.3e\n", n_u, resid);
    const double prev_best = best_resid;
    if (resid < best_resid) {
      best_resid = resid;
      best = std::move(cand);
    }
    if (best_resid <= opt.residual_tol) break;
    // stagnation across a doubling means a genuine obstruction (common
    // zeros), not a truncation shortfall
    if (2 * n_u > opt.bezout_max_order || resid > 0.9 * prev_best)
      throw IllConditioned("bezout residual " + std::to_string(best_resid) +
                           " cannot reach tolerance at the order budget");
    n_u *= 2;
  }

  // Norm budget from the corona bound, with the conservative (1 + |ln d|).
  const double line = eps * (1.0 - kShave);
  double sup_sq = 0.0;
  const int n_max = [&] {
    int n = 0;
    for (const StripFunction& f : best) n = std::max(n, f.order());
    return n;
  }();
  const int grid = std::max(64, 8 * (n_max + 1));
  for (double y : {0.0, line, -line}) {
    std::vector<std::vector<cdouble>> vals;
    vals.reserve(best.size());
    for (const StripFunction& f : best) vals.push_back(f.eval_grid(grid, y));
    for (int j = 0; j < grid; ++j) {
      double s = 0.0;
      for (const auto& v : vals) s += std::norm(v[j]);
      sup_sq = std::max(sup_sq, s);
    }
  }
  if (std::sqrt(sup_sq) > budget)
    throw IllConditioned("bezout solution norm " +
                         std::to_string(std::sqrt(sup_sq)) +
                         " exceeds the C delta^-2 (1+|ln delta|) budget");
  for (StripFunction& f : best) f = f.compressed(0.0, 1e-15);
  return best;
}

// ---------------------------------------------------------------------------
// zero_determinant
// ---------------------------------------------------------------------------

ZeroDetResult zero_determinant(const MatrixFunction& P0, double delta,
                               double eps0, const CoronaOptions& opt) {
  if (eps0 >= P0.half_width())
    throw DomainError("zero_determinant: eps0 must sit inside the strip");
  const double sup = P0.sampled_sup_norm(eps0, 8);
  if (sup > 1.0 + 1e-6)
    throw PreconditionFailed("zero_determinant: ||P0|| > 1 (normalize first)");
  // The (ln d / d^2)^2 shape degenerates as delta -> 1; capping delta keeps
  // the smallness test meaningful for well-conditioned inputs (where a
  // large determinant must still be rejected).
  const double dtilde = std::clamp(delta, 1e-12, 0.75);
  const double det_norm = P0.det().upper_norm(eps0);
  const double shape = std::pow(std::log(dtilde) / (dtilde * dtilde), 2.0);
  const double rho = det_norm * shape;
  if (rho > opt.rho_max)
    throw PreconditionFailed(
        "zero_determinant: rho = " + std::to_string(rho) +
        " above the smallness threshold " + std::to_string(opt.rho_max));

  ZeroDetResult out;
  MatrixFunction P = P0;
  // det(P - K t) = t^2 det K + t (1 - mixed) exactly, where t = det P and
  // mixed is the Bezout combination; carrying the determinant through this
  // identity avoids the O(1) cancellation of re-deriving it from entries,
  // so the trajectory stays meaningful far below machine noise.
  StripFunction det_fn = P0.det().compressed(0.0, 1e-15);
  double dnorm = det_norm;
  out.det_trajectory.push_back(dnorm);
  for (int it = 0; it < opt.det_max_iters; ++it) {
    if (dnorm < opt.det_target) break;
    // Mixed-term Bezout: a0*dK + d0*aK - b0*cK - c0*bK = 1.
    std::vector<StripFunction> sol =
        bezout_solve({P.a, P.d, -P.b, -P.c}, delta, eps0, opt);
    MatrixFunction K(sol[1], sol[3], sol[2], sol[0]);
    const StripFunction mixed_defect =
        (P.a * K.d + P.d * K.a - P.b * K.c - P.c * K.b -
         StripFunction::constant(1.0, P.a.half_width()))
            .compressed(0.0, 1e-15);
    P = (P - K * det_fn).compressed(0.0, 1e-15);
    det_fn = (det_fn * det_fn * K.det() - det_fn * mixed_defect)
                 .compressed(0.0, 1e-15);
    const double next = det_fn.upper_norm(eps0);
    if (next >= dnorm)
      throw NoConvergence("zero_determinant: det norm failed to contract (" +
                          std::to_string(dnorm) + " -> " +
                          std::to_string(next) + ")");
    dnorm = next;
    out.det_trajectory.push_back(dnorm);
  }
  if (dnorm >= opt.det_target)
    throw NoConvergence("zero_determinant: det norm " + std::to_string(dnorm) +
                        " above target after " +
                        std::to_string(opt.det_max_iters) + " iterations");
  out.P = P;
  return out;
}

// ---------------------------------------------------------------------------
// kernel_vector
// ---------------------------------------------------------------------------

namespace {

KernelSolution finish_kernel(const MatrixFunction& P, Vec2Function u,
                             double delta, double eps,
                             const CoronaOptions& opt,
                             std::vector<cdouble> zeros, cdouble kappa) {
  // Normalize to sampled sup 1 on the target strip.
  const double line = eps * (1.0 - kShave);
  double sup = 0.0;
  double mn = std::numeric_limits<double>::infinity();
  for (double y : {0.0, 0.5 * line, -0.5 * line, line, -line}) {
    sup = std::max(sup, u.sup_norm_on_line(y, opt.grid_oversample));
    mn = std::min(mn, u.min_norm_on_line(y, opt.grid_oversample));
  }
  if (sup <= 0.0) throw ResidualTooLarge("kernel_vector: zero solution");
  const double inv = 1.0 / sup;
  u = u * cdouble(inv, 0.0);

  KernelSolution ks;
  ks.u = {u.x.compressed(0.0, 1e-15), u.y.compressed(0.0, 1e-15)};
  ks.norm_ceil = 1.0;
  ks.norm_floor = mn * inv * (1.0 - 1e-12);
  ks.zeros_used = std::move(zeros);
  ks.kappa = kappa;

  // Residual sup ||P u|| on the sampled strip, relative to ||P|| <= 1.
  Vec2Function r = P * ks.u;
  double resid = 0.0;
  for (double y : {0.0, line, -line})
    resid = std::max(resid, r.sup_norm_on_line(y, opt.grid_oversample));
  ks.residual = resid;
  if (resid > opt.residual_tol)
    throw ResidualTooLarge("kernel residual " + std::to_string(resid) +
                           " above tolerance");
  const double floor_model = opt.floor_c * std::pow(delta, opt.floor_C);
  if (ks.norm_floor < floor_model)
    throw ResidualTooLarge("kernel norm floor " +
                           std::to_string(ks.norm_floor) +
                           " below the delta-power model " +
                           std::to_string(floor_model));
  return ks;
}

}  // namespace

KernelSolution kernel_vector(const MatrixFunction& P, double delta,
                             double eps0, double eps,
                             const CoronaOptions& opt) {
  if (!(eps < eps0 && eps0 <= P.half_width()))
    throw DomainError("kernel_vector: need eps < eps0 <= half_width");
  const double hw = P.half_width();
  const double scale = std::max({P.a.upper_norm(eps0), P.b.upper_norm(eps0),
                                 P.c.upper_norm(eps0), P.d.upper_norm(eps0),
                                 1e-300});
  const double vanish = opt.vanish_tol * scale;
  const bool a0 = P.a.upper_norm(eps0) <= vanish;
  const bool b0 = P.b.upper_norm(eps0) <= vanish;
  const bool c0 = P.c.upper_norm(eps0) <= vanish;
  const bool d0 = P.d.upper_norm(eps0) <= vanish;

  const StripFunction one = StripFunction::constant(1.0, hw);
  const StripFunction zer = StripFunction::constant(0.0, hw);

  // Vanishing rows/columns admit closed-form kernels.
  if (a0 && c0) return finish_kernel(P, {one, zer}, delta, eps, opt, {}, 0.0);
  if (b0 && d0) return finish_kernel(P, {zer, one}, delta, eps, opt, {}, 0.0);
  if (c0 && d0)
    return finish_kernel(P, {-P.b, P.a}, delta, eps, opt, {}, 0.0);
  if (a0 && b0)
    return finish_kernel(P, {-P.d, P.c}, delta, eps, opt, {}, 0.0);

  // General case: phi = a/b after the kappa shift P <- P [[1,-kbar],[-k,1]].
  // The zero divisor covers the midpoint strip (eps + eps0)/2, so the
  // quotient's remaining singularities sit at least (eps0 - eps)/2 above the
  // target strip and the division converges at a ladder-controlled rate.
  const double eps_cover = 0.5 * (eps + eps0);
  const int bgrid = std::max(64, opt.grid_oversample * (P.order() + 1));
  const double line = eps_cover * (1.0 - kShave);
  std::vector<cdouble> phi_vals;
  for (double y : {line, -line}) {
    std::vector<cdouble> va = P.a.eval_grid(bgrid, y);
    std::vector<cdouble> vb = P.b.eval_grid(bgrid, y);
    for (int j = 0; j < bgrid; ++j) {
      if (std::abs(va[j]) < 1e-12 * scale && std::abs(vb[j]) < 1e-12 * scale)
        continue;  // common zero hugging the boundary constrains nothing
      phi_vals.push_back(va[j] / vb[j]);
    }
  }

  struct Candidate {
    cdouble kappa;
    double dist;
  };
  std::vector<Candidate> cands;
  for (int mi = 0; mi < opt.kappa_moduli; ++mi) {
    const double r = 0.5 + 0.24 * mi / std::max(1, opt.kappa_moduli - 1);
    for (int ai = 0; ai < opt.kappa_args; ++ai) {
      const double th = kTwoPi * ai / opt.kappa_args;
      const cdouble kappa = std::polar(r, th);
      double dist = std::numeric_limits<double>::infinity();
      for (const cdouble& pv : phi_vals)
        dist = std::min(dist, std::abs(pv - kappa));
      cands.push_back({kappa, dist});
    }
  }
  std::stable_sort(cands.begin(), cands.end(),
                   [](const Candidate& x, const Candidate& y) {
                     return x.dist > y.dist;
                   });

  const double dist_floor = opt.kappa_dist_floor * delta;
  std::string last_failure = "no kappa candidate admissible";
  for (const Candidate& cand : cands) {
    if (cand.dist < dist_floor) break;
    const cdouble kappa = cand.kappa;
    // P' = P [[1, -conj(kappa)], [-kappa, 1]]
    const cdouble mk = -kappa;
    const cdouble mkc = -std::conj(kappa);
    MatrixFunction Ps(P.a + P.b * mk, P.a * mkc + P.b, P.c + P.d * mk,
                      P.c * mkc + P.d);
    std::vector<cdouble> zeros;
    try {
      zeros = strip_zeros(Ps.a, eps_cover, opt);
    } catch (const ZeroLocationFailure& e) {
      last_failure = e.what();
      continue;
    }

    // Drop common zeros of the first row (there phi is regular, not zero)
    // and enforce the simple-zero derivative floor |g'| / |b|.
    const StripFunction da = Ps.a.derivative();
    std::vector<cdouble> phi_zeros;
    bool ok = true;
    for (const cdouble& z : zeros) {
      const double bz = std::abs(Ps.b.eval(z));
      if (bz < 1e-6 * scale) continue;  // common zero of the row
      const double dphi = std::abs(da.eval(z)) / bz;
      if (dphi < opt.deriv_floor) {
        ok = false;
        last_failure = "derivative floor failed at a zero of phi";
        break;
      }
      phi_zeros.push_back(z);
    }
    if (!ok) continue;

    // p(z) = prod_s (e^{2 pi i z} - e^{2 pi i theta_s})
    std::vector<cdouble> pc{1.0};
    for (const cdouble& z : phi_zeros) {
      const cdouble ws = std::exp(cdouble(0.0, kTwoPi) * z);
      std::vector<cdouble> next(pc.size() + 1, cdouble(0.0, 0.0));
      for (std::size_t j = 0; j < pc.size(); ++j) {
        next[j + 1] += pc[j];
        next[j] -= pc[j] * ws;
      }
      pc = std::move(next);
    }
    const int np = std::max<int>(1, static_cast<int>(phi_zeros.size()));
    std::vector<cdouble> pw(2 * np + 1, cdouble(0.0, 0.0));
    for (std::size_t j = 0; j < pc.size(); ++j) pw[j + np] = pc[j];
    const StripFunction p(std::move(pw), hw);

    // u2 = p b / a: the numerator shares every in-strip zero of a.
    StripFunction u2;
    try {
      u2 = analytic_divide(p * Ps.b, Ps.a, eps, opt.residual_tol * 1e-2, opt);
    } catch (const IllConditioned& e) {
      last_failure = e.what();
      continue;
    }
    // undo the shift: u = S u', u' = (-u2, p), S = [[1,-kbar],[-kappa,1]]
    const Vec2Function u{-u2 + p * mkc, u2 * kappa + p};
    try {
      return finish_kernel(P, u, delta, eps, opt, phi_zeros, kappa);
    } catch (const ResidualTooLarge& e) {
      last_failure = e.what();
      continue;
    }
  }
  throw ZeroLocationFailure("kernel_vector: " + last_failure);
}

// ---------------------------------------------------------------------------
// real_symmetrize
// ---------------------------------------------------------------------------

Vec2Function real_symmetrize(const Vec2Function& w, double delta, double eps,
                             const CoronaOptions& opt) {
  (void)delta;
  (void)eps;
  const double hw = w.half_width();
  const bool anti_in = w.parity() == Parity::Antiperiodic;
  const int n = std::max(w.x.order(), w.y.order());
  int m = 8;
  while (m < opt.grid_oversample * (n + 2)) m <<= 1;

  // True pointwise values (eval_grid carries the half-integer factor).
  std::vector<cdouble> va = w.x.eval_grid(m, 0.0);
  std::vector<cdouble> vb = w.y.eval_grid(m, 0.0);

  // Parallel-to-a-real-vector test: Im(a conj(b)) must vanish on R.
  for (int j = 0; j < m; ++j) {
    const double cross = std::abs(std::imag(va[j] * std::conj(vb[j])));
    const double nrm2 = std::norm(va[j]) + std::norm(vb[j]);
    if (cross > opt.sym_tol * nrm2)
      throw NotRealDirection("w is not parallel to a real direction at x=" +
                             std::to_string(static_cast<double>(j) / m));
  }

  // phi = a / conj_reflect(a) = b / conj_reflect(b) on R reduces to
  // r / conj(r) = e^{2 i arg r}; use the larger component pointwise.  phi is
  // 1-periodic for either input parity.
  std::vector<double> psi(m + 1);  // tracked argument of phi
  auto phi_at = [&](int j) -> cdouble {
    const cdouble r = std::abs(va[j]) >= std::abs(vb[j]) ? va[j] : vb[j];
    return r / std::conj(r);
  };
  psi[0] = std::arg(phi_at(0));  // principal branch at x = 0
  for (int j = 1; j <= m; ++j) {
    const cdouble prev = phi_at((j - 1) % m);
    const cdouble cur = phi_at(j % m);
    psi[j] = psi[j - 1] + std::arg(cur / prev);
  }
  const int d = static_cast<int>(std::lround((psi[m] - psi[0]) / kTwoPi));
  // w~(x+1) = (-1)^{d + anti_in} w~(x): an odd total flips the parity.
  const bool anti_out = ((d % 2) != 0) != anti_in;

  // w~ = phi^{-1/2} w sampled on R; the stored coefficients describe the
  // periodic part g with f = e^{i pi x} g for antiperiodic output.
  std::vector<cdouble> ga(m), gb(m);
  for (int j = 0; j < m; ++j) {
    const double x = static_cast<double>(j) / m;
    cdouble factor = std::exp(cdouble(0.0, -0.5 * psi[j]));
    if (anti_out) factor *= std::exp(cdouble(0.0, -std::numbers::pi * x));
    ga[j] = factor * va[j];
    gb[j] = factor * vb[j];
  }
  StripFunction sx = StripFunction::from_real_samples(ga, hw, 1e-15);
  StripFunction sy = StripFunction::from_real_samples(gb, hw, 1e-15);
  if (anti_out) {
    sx = StripFunction(sx.coeffs(), hw, Parity::Antiperiodic);
    sy = StripFunction(sy.coeffs(), hw, Parity::Antiperiodic);
  }
  Vec2Function out{sx, sy};
  // the construction leaves only rounding dust in the imaginary parts
  out = {out.x.real_part_symmetrized(), out.y.real_part_symmetrized()};
  return out;
}

MatrixFunction complete_to_unimodular(const Vec2Function& u, double delta,
                                      double eps, const CoronaOptions& opt) {
  std::vector<StripFunction> sol = bezout_solve({u.x, -u.y}, delta, eps, opt);
  // u1 * y2 - u2 * y1 = 1 with y2 = sol[0], y1 = sol[1]
  return MatrixFunction(u.x, sol[1], u.y, sol[0]);
}

}  // namespace qpc
