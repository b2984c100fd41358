#include "qpc/matrix_fn.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "qpc/errors.hpp"

namespace qpc {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kBoundaryShave = 1e-9;
}  // namespace

Vec2Function::Vec2Function(StripFunction x_, StripFunction y_)
    : x(std::move(x_)), y(std::move(y_)) {
  if (x.parity() != y.parity())
    throw DomainError("Vec2Function components must share parity");
}

Eigen::Vector2cd Vec2Function::eval(cdouble z) const {
  return Eigen::Vector2cd(x.eval(z), y.eval(z));
}

Vec2Function Vec2Function::shifted(double alpha) const {
  return {x.shifted(alpha), y.shifted(alpha)};
}

Vec2Function Vec2Function::conj_reflect() const {
  return {x.conj_reflect(), y.conj_reflect()};
}

Vec2Function Vec2Function::operator*(const StripFunction& s) const {
  return {x * s, y * s};
}

Vec2Function Vec2Function::operator*(cdouble s) const {
  return {x * s, y * s};
}

Vec2Function Vec2Function::operator+(const Vec2Function& o) const {
  return {x + o.x, y + o.y};
}

Vec2Function Vec2Function::operator-(const Vec2Function& o) const {
  return {x - o.x, y - o.y};
}

Vec2Function Vec2Function::compressed(double eps_ref, double tol) const {
  return {x.compressed(eps_ref, tol), y.compressed(eps_ref, tol)};
}

double Vec2Function::sup_norm_on_line(double im_part,
                                      int grid_oversample) const {
  const int n = std::max(x.order(), y.order());
  const int m = std::max(8, grid_oversample * (n + 1));
  std::vector<cdouble> vx = x.eval_grid(m, im_part);
  std::vector<cdouble> vy = y.eval_grid(m, im_part);
  double mx = 0.0;
  for (int j = 0; j < m; ++j)
    mx = std::max(mx, std::hypot(std::abs(vx[j]), std::abs(vy[j])));
  return mx;
}

double Vec2Function::min_norm_on_line(double im_part,
                                      int grid_oversample) const {
  const int n = std::max(x.order(), y.order());
  const int m = std::max(8, grid_oversample * (n + 1));
  std::vector<cdouble> vx = x.eval_grid(m, im_part);
  std::vector<cdouble> vy = y.eval_grid(m, im_part);
  double mn = std::numeric_limits<double>::infinity();
  for (int j = 0; j < m; ++j)
    mn = std::min(mn, std::hypot(std::abs(vx[j]), std::abs(vy[j])));
  return mn;
}

double Vec2Function::upper_norm(double eps) const {
  return std::hypot(x.upper_norm(eps), y.upper_norm(eps));
}

double Vec2Function::real_defect() const {
  return std::max(x.real_defect(), y.real_defect());
}

MatrixFunction::MatrixFunction(StripFunction a_, StripFunction b_,
                               StripFunction c_, StripFunction d_)
    : a(std::move(a_)), b(std::move(b_)), c(std::move(c_)), d(std::move(d_)) {
  if (a.parity() != b.parity() || a.parity() != c.parity() ||
      a.parity() != d.parity())
    throw DomainError("MatrixFunction entries must share parity");
}

MatrixFunction MatrixFunction::identity(double half_width) {
  return {StripFunction::constant(1.0, half_width),
          StripFunction::constant(0.0, half_width),
          StripFunction::constant(0.0, half_width),
          StripFunction::constant(1.0, half_width)};
}

MatrixFunction MatrixFunction::constant(const Eigen::Matrix2cd& m,
                                        double half_width) {
  return {StripFunction::constant(m(0, 0), half_width),
          StripFunction::constant(m(0, 1), half_width),
          StripFunction::constant(m(1, 0), half_width),
          StripFunction::constant(m(1, 1), half_width)};
}

MatrixFunction MatrixFunction::rotation(double theta, double half_width) {
  const double co = std::cos(kTwoPi * theta);
  const double si = std::sin(kTwoPi * theta);
  Eigen::Matrix2cd m;
  m << co, -si, si, co;
  return constant(m, half_width);
}

MatrixFunction MatrixFunction::rotation(const StripFunction& theta) {
  // cos/sin of an analytic angle via exp(+-2 pi i theta) on a grid.
  const StripFunction ep = transform_on_grid(
      theta, [](cdouble t) { return std::exp(cdouble(0.0, kTwoPi) * t); }, 48,
      1e-15);
  const StripFunction em = transform_on_grid(
      theta, [](cdouble t) { return std::exp(cdouble(0.0, -kTwoPi) * t); }, 48,
      1e-15);
  const StripFunction co = (ep + em) * cdouble(0.5, 0.0);
  const StripFunction si = (ep - em) * cdouble(0.0, -0.5);
  return {co, -si, si, co};
}

int MatrixFunction::order() const {
  return std::max({a.order(), b.order(), c.order(), d.order()});
}

Eigen::Matrix2cd MatrixFunction::eval(cdouble z) const {
  Eigen::Matrix2cd m;
  m << a.eval(z), b.eval(z), c.eval(z), d.eval(z);
  return m;
}

MatrixFunction MatrixFunction::operator*(const MatrixFunction& o) const {
  return {a * o.a + b * o.c, a * o.b + b * o.d, c * o.a + d * o.c,
          c * o.b + d * o.d};
}

Vec2Function MatrixFunction::operator*(const Vec2Function& v) const {
  return {a * v.x + b * v.y, c * v.x + d * v.y};
}

MatrixFunction MatrixFunction::operator+(const MatrixFunction& o) const {
  return {a + o.a, b + o.b, c + o.c, d + o.d};
}

MatrixFunction MatrixFunction::operator-(const MatrixFunction& o) const {
  return {a - o.a, b - o.b, c - o.c, d - o.d};
}

MatrixFunction MatrixFunction::operator*(cdouble s) const {
  return {a * s, b * s, c * s, d * s};
}

MatrixFunction MatrixFunction::operator*(const StripFunction& s) const {
  return {a * s, b * s, c * s, d * s};
}

StripFunction MatrixFunction::det() const { return a * d - b * c; }

StripFunction MatrixFunction::trace() const { return a + d; }

MatrixFunction MatrixFunction::adjugate() const { return {d, -b, -c, a}; }

MatrixFunction MatrixFunction::shifted(double alpha) const {
  return {a.shifted(alpha), b.shifted(alpha), c.shifted(alpha),
          d.shifted(alpha)};
}

MatrixFunction MatrixFunction::conj_reflect() const {
  return {a.conj_reflect(), b.conj_reflect(), c.conj_reflect(),
          d.conj_reflect()};
}

MatrixFunction MatrixFunction::transposed() const { return {a, c, b, d}; }

MatrixFunction MatrixFunction::compressed(double eps_ref, double tol) const {
  return {a.compressed(eps_ref, tol), b.compressed(eps_ref, tol),
          c.compressed(eps_ref, tol), d.compressed(eps_ref, tol)};
}

MatrixFunction MatrixFunction::with_half_width(double hw) const {
  return {a.with_half_width(hw), b.with_half_width(hw), c.with_half_width(hw),
          d.with_half_width(hw)};
}

Vec2Function MatrixFunction::column(int j) const {
  return j == 0 ? Vec2Function{a, c} : Vec2Function{b, d};
}

Vec2Function MatrixFunction::row(int i) const {
  return i == 0 ? Vec2Function{a, b} : Vec2Function{c, d};
}

double MatrixFunction::upper_norm(double eps) const {
  const double ua = a.upper_norm(eps);
  const double ub = b.upper_norm(eps);
  const double uc = c.upper_norm(eps);
  const double ud = d.upper_norm(eps);
  return std::sqrt(ua * ua + ub * ub + uc * uc + ud * ud);
}

double op_norm(const Eigen::Matrix2cd& m) {
  // Closed-form largest singular value of a 2x2 matrix.
  const double f2 = m.squaredNorm();
  const double dd = std::abs(m.determinant());
  const double disc = std::max(0.0, f2 * f2 - 4.0 * dd * dd);
  return std::sqrt(0.5 * (f2 + std::sqrt(disc)));
}

namespace {

template <typename Reduce>
double scan_norm(const MatrixFunction& m, double eps, int grid_oversample,
                 double init, Reduce reduce) {
  const int n = m.order();
  const int grid = std::max(8, grid_oversample * (n + 1));
  double acc = init;
  const double line = eps * (1.0 - kBoundaryShave);
  for (double y : {0.0, line, -line}) {
    std::vector<cdouble> va = m.a.eval_grid(grid, y);
    std::vector<cdouble> vb = m.b.eval_grid(grid, y);
    std::vector<cdouble> vc = m.c.eval_grid(grid, y);
    std::vector<cdouble> vd = m.d.eval_grid(grid, y);
    for (int j = 0; j < grid; ++j) {
      Eigen::Matrix2cd mm;
      mm << va[j], vb[j], vc[j], vd[j];
      acc = reduce(acc, op_norm(mm));
    }
  }
  return acc;
}

}  // namespace

double MatrixFunction::sampled_sup_norm(double eps, int grid_oversample) const {
  return scan_norm(*this, eps, grid_oversample, 0.0,
                   [](double a_, double b_) { return std::max(a_, b_); });
}

double MatrixFunction::certified_sup_norm(double eps,
                                          int grid_oversample) const {
  const double l1 = upper_norm(eps);
  const int fine = 4 * grid_oversample;
  const double grid_max = sampled_sup_norm(eps, fine);
  const double d1 =
      std::sqrt(std::pow(a.derivative_upper_norm(eps), 2.0) +
                std::pow(b.derivative_upper_norm(eps), 2.0) +
                std::pow(c.derivative_upper_norm(eps), 2.0) +
                std::pow(d.derivative_upper_norm(eps), 2.0));
  const double h = 1.0 / std::max(8, fine * (order() + 1));
  const double refined = grid_max + 0.5 * h * d1 + kBoundaryShave * eps * d1;
  return std::min(l1, refined);
}

double MatrixFunction::sampled_min_norm(double eps, int grid_oversample) const {
  return scan_norm(*this, eps, grid_oversample,
                   std::numeric_limits<double>::infinity(),
                   [](double a_, double b_) { return std::min(a_, b_); });
}

double MatrixFunction::max_abs_coeff() const {
  return std::max({a.max_abs_coeff(), b.max_abs_coeff(), c.max_abs_coeff(),
                   d.max_abs_coeff()});
}

double MatrixFunction::real_defect() const {
  return std::max({a.real_defect(), b.real_defect(), c.real_defect(),
                   d.real_defect()});
}

double MatrixFunction::sl2_defect(int m) const {
  const StripFunction dt = det();
  std::vector<cdouble> vals = dt.eval_grid(std::max(m, 2 * dt.order() + 1));
  double mx = 0.0;
  for (const cdouble& v : vals)
    mx = std::max(mx, std::abs(v - cdouble(1.0, 0.0)));
  return mx;
}

}  // namespace qpc
