#ifndef QPC_CORONA_HPP
#define QPC_CORONA_HPP

#include <optional>
#include <vector>

#include "qpc/matrix_fn.hpp"

namespace qpc {

struct CoronaOptions {
  double residual_tol = 1e-8;   // Bezout identity / kernel residual target
  double det_target = 1e-12;    // zero_determinant stopping sup norm
  int det_max_iters = 8;
  double rho_max = 0.1;         // smallness threshold for the det iteration
  double bezout_budget_C = 1e3; // output-norm budget C * delta^-2 (1+|ln d|)
  double tikhonov = 1e-10;
  int bezout_min_order = 48;
  int bezout_max_order = 768;
  int divide_max_order = 4096;
  double vanish_tol = 1e-10;    // identically-vanishing entry threshold
  double cluster_tol = 1e-6;    // zero multiplicity guard
  int kappa_moduli = 4;         // |kappa| sampled over {0.5..0.74}
  int kappa_args = 16;
  double kappa_dist_floor = 1e-3;  // times delta
  double deriv_floor = 1e-8;
  int companion_max_degree = 900;
  int grid_oversample = 16;
  double floor_c = 1e-4;        // floor_model(delta) = floor_c * delta^floor_C
  double floor_C = 4.0;
  double zero_residual_tol = 1e-7;
  double sym_tol = 1e-6;        // parallel-to-real sampled tolerance
};

// Zeros of f inside {|Im z| < eps}, as points z with Re z in [0,1).
// Located through the polynomial in w = exp(2 pi i z) (companion matrix for
// moderate degrees, annulus grid + Newton beyond), Newton-polished, then
// certified against an argument-principle count along the strip edges.
// Clusters tighter than cluster_tol trip ZeroLocationFailure.
std::vector<cdouble> strip_zeros(const StripFunction& f, double eps,
                                 const CoronaOptions& opt = {});

// Least-squares solve of num = den * h in coefficient space, weighted for
// the eps-strip; returns h of adaptively grown order with
// ||den*h - num||_eps below tol * scale(num).  The denominator may vanish
// inside the strip provided num shares those zeros.
StripFunction analytic_divide(const StripFunction& num,
                              const StripFunction& den, double eps, double tol,
                              const CoronaOptions& opt = {});

// Bezout identity: returns a~ with sum a_i a~_i = 1, sup residual below
// opt.residual_tol on the eps-strip, output norms within the
// C * delta^-2 (1 + |ln delta|) budget.  Real-symmetric inputs produce
// real-symmetric outputs (conjugate-reflection averaging).
std::vector<StripFunction> bezout_solve(const std::vector<StripFunction>& a,
                                        double delta, double eps,
                                        const CoronaOptions& opt = {});

struct ZeroDetResult {
  MatrixFunction P;
  std::vector<double> det_trajectory;  // upper norms, first entry = input
};

// Quadratic determinant-zeroing iteration P <- P - K det P with K a Bezout
// solution of the mixed-term identity; det P_{n+1} = (det P_n)^2 det K holds
// exactly, so the trajectory contracts quadratically until det_target.
ZeroDetResult zero_determinant(const MatrixFunction& P0, double delta,
                               double eps0, const CoronaOptions& opt = {});

struct KernelSolution {
  Vec2Function u;            // P u = 0, sup ||u|| <= 1 on the target strip
  double norm_floor = 0.0;   // sampled min of ||u|| on the target strip
  double norm_ceil = 1.0;
  std::vector<cdouble> zeros_used;
  cdouble kappa = 0.0;
  double residual = 0.0;     // sup ||P u|| on the sampled strip grid
};

// Constructive kernel of an analytic rank-one 2x2 matrix (det P == 0 to
// det_target, delta <= ||P|| <= 1 sampled on the eps0 strip): vanishing
// rows/columns take the closed-form shortcuts, otherwise the kappa-shifted
// meromorphic ratio phi = a/b supplies the zero divisor p and u ~ (-u2, u1).
KernelSolution kernel_vector(const MatrixFunction& P, double delta,
                             double eps0, double eps,
                             const CoronaOptions& opt = {});

// Strips the unimodular phase from a vector parallel to a real direction on
// the real line (w~ = phi^{-1/2} w); output is real-on-real, possibly
// antiperiodic when the phase winds an odd number of half-turns.
Vec2Function real_symmetrize(const Vec2Function& w, double delta, double eps,
                             const CoronaOptions& opt = {});

// Completes u to det == 1 via a Bezout solve for the second column.
MatrixFunction complete_to_unimodular(const Vec2Function& u, double delta,
                                      double eps, const CoronaOptions& opt = {});

}  // namespace qpc

#endif  // QPC_CORONA_HPP
