#ifndef QPC_MATRIX_FN_HPP
#define QPC_MATRIX_FN_HPP

#include <Eigen/Core>

#include "qpc/strip.hpp"

namespace qpc {

// Analytic 2-vector (u, v) with a shared strip and parity.
struct Vec2Function {
  StripFunction x, y;

  Vec2Function() = default;
  Vec2Function(StripFunction x_, StripFunction y_);

  double half_width() const { return x.half_width(); }
  Parity parity() const { return x.parity(); }

  Eigen::Vector2cd eval(cdouble z) const;
  Vec2Function shifted(double alpha) const;
  Vec2Function conj_reflect() const;
  Vec2Function operator*(const StripFunction& s) const;
  Vec2Function operator*(cdouble s) const;
  Vec2Function operator+(const Vec2Function& o) const;
  Vec2Function operator-(const Vec2Function& o) const;
  Vec2Function compressed(double eps_ref, double tol) const;

  // sup of the Euclidean norm on the line Im z = im_part.
  double sup_norm_on_line(double im_part, int grid_oversample = 16) const;
  double min_norm_on_line(double im_part, int grid_oversample = 16) const;
  // Certified bound: hypot of the entrywise weighted coefficient sums.
  double upper_norm(double eps) const;
  double real_defect() const;
};

// 2x2 matrix [[a, b], [c, d]] of StripFunctions sharing strip and parity.
struct MatrixFunction {
  StripFunction a, b, c, d;

  MatrixFunction() = default;
  MatrixFunction(StripFunction a_, StripFunction b_, StripFunction c_,
                 StripFunction d_);

  static MatrixFunction identity(double half_width);
  static MatrixFunction constant(const Eigen::Matrix2cd& m, double half_width);
  // R_theta for constant angle theta (in turns, i.e. R_theta rotates by
  // 2 pi theta).
  static MatrixFunction rotation(double theta, double half_width);
  // R_{theta(z)} with analytic angle; entries via exp(+-2 pi i theta).
  static MatrixFunction rotation(const StripFunction& theta);

  double half_width() const { return a.half_width(); }
  Parity parity() const { return a.parity(); }
  int order() const;

  Eigen::Matrix2cd eval(cdouble z) const;
  MatrixFunction operator*(const MatrixFunction& o) const;
  Vec2Function operator*(const Vec2Function& v) const;
  MatrixFunction operator+(const MatrixFunction& o) const;
  MatrixFunction operator-(const MatrixFunction& o) const;
  MatrixFunction operator*(cdouble s) const;
  MatrixFunction operator*(const StripFunction& s) const;

  StripFunction det() const;
  StripFunction trace() const;
  // [[d, -b], [-c, a]]; equals the inverse when det == 1.
  MatrixFunction adjugate() const;
  MatrixFunction shifted(double alpha) const;
  MatrixFunction conj_reflect() const;
  MatrixFunction transposed() const;
  MatrixFunction compressed(double eps_ref, double tol) const;
  MatrixFunction with_half_width(double hw) const;

  Vec2Function column(int j) const;
  Vec2Function row(int i) const;

  // Frobenius bound assembled from entrywise weighted coefficient sums;
  // dominates sup of the operator norm on {|Im z| < eps}.
  double upper_norm(double eps) const;
  // Tighter certified bound: fine-grid max of the pointwise operator norm
  // on the boundary lines plus a Lipschitz correction, capped by the
  // coefficient-sum bound.  Exact (up to the correction) for constants,
  // where the Frobenius route overshoots by sqrt(2).
  double certified_sup_norm(double eps, int grid_oversample = 16) const;
  // Largest/smallest pointwise operator norm found on the sampled lines
  // Im z in {0, +-eps'}; lower bounds for the true strip extrema.
  double sampled_sup_norm(double eps, int grid_oversample = 16) const;
  double sampled_min_norm(double eps, int grid_oversample = 16) const;
  double max_abs_coeff() const;

  double real_defect() const;
  bool is_real_symmetric(double tol = 1e-9) const {
    return real_defect() <= tol;
  }
  // Largest |det - 1| sampled on an m-point real grid.
  double sl2_defect(int m = 256) const;
};

// Pointwise operator 2-norm of a complex 2x2 matrix.
double op_norm(const Eigen::Matrix2cd& m);

}  // namespace qpc

#endif  // QPC_MATRIX_FN_HPP
