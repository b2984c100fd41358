#ifndef QPC_REDUCER_HPP
#define QPC_REDUCER_HPP

#include <json.hpp>
#include <optional>

#include "qpc/cocycle.hpp"
#include "qpc/corona.hpp"

namespace qpc {

// The paper-side constants (strip ladder, delta/C family) become plain
// configuration with desk-scale defaults; the pipeline reports margin ratios
// in the diagnostics instead of enforcing asymptotic smallness.
struct ReductionConfig {
  // eps0 > eps1 > eps2 > eps, all strictly inside the map's strip
  std::vector<double> strip_ladder;

  double delta1 = 0.0;        // growth rate from the cond test (filled in)
  double delta1q_max = 50.0;  // admission budget for delta1 * q
  double delta3 = 0.005;      // trace-concentration rate threshold
  double C0 = 2.0;            // case-split constant
  double C1 = 2.0;            // near-identity propagation constant
  double C3 = 20.0;           // intertwining hypothesis constant
  double C4 = 0.05;           // fallback growth constant
  double C5 = 2.0;            // fallback conjugacy-norm constant
  int q_min = 5;

  double det_target = 1e-12;
  double residual_tol = 1e-8;
  double trunc_tol = 1e-13;
  double lambda_tail_tol = 1e-11;  // truncation of the eigenvalue function
  int grid_oversample = 16;
  int x0_scan = 64;
  double bezout_budget_C = 1e3;
  double floor_c = 1e-4;
  double floor_C = 4.0;
  double b_floor = 1e-8;  // relative collapse floor for det Btilde

  static ReductionConfig defaults_for(double eps0);
  CoronaOptions corona() const;
  // delta1*q with a unit floor; keeps the e^{-C...} thresholds meaningful
  // for exactly-bounded cocycles where delta1 vanishes.
  double d1q_eff(int q) const;
};

enum class ReductionCase { Elliptic, Hyperbolic, ParabolicDft, WrFallback };

std::string reduction_case_name(ReductionCase c);

struct ReductionResult {
  ReductionCase kind = ReductionCase::Elliptic;
  MatrixFunction B;      // PSL(2,R)-valued: real-on-real, det == 1,
  MatrixFunction B_inv;  // possibly antiperiodic entries
  StripFunction theta;   // rotation angle; gamma = e^{2 pi i theta} when
                         // the target is diagonal
  Eigen::Matrix2d target = Eigen::Matrix2d::Identity();  // constant R_* or D
  double residual = 0.0;  // upper bound on ||B(.+p/q) A B^{-1} - target||_eps
  double eps = 0.0;       // strip of the bound
  double B_norm = 0.0;
  double delta_target = 0.0;  // -ln(residual) / q
  nlohmann::json diagnostics;
};

// Dispatching front door; requires an exact rational frequency with
// q >= cfg.q_min and the cond budget delta1 * q <= cfg.delta1q_max.
ReductionResult reduce(const Cocycle& c, ReductionConfig cfg);

// A(z) u(z) = mu(z) u(z + p/q) by pointwise least squares on a real grid.
struct MultiplierFit {
  StripFunction mu;
  double residual = 0.0;  // sup ||A u - mu u(.+p/q)|| on the sampled strip
};
MultiplierFit extract_multiplier(const MatrixFunction& A,
                                 const Vec2Function& u, const Rational& pq,
                                 double mu_half_width, int oversample = 16);

// mu = e^{2 pi i theta} e^{2 pi i psi(.+p/q)} / e^{2 pi i psi} with theta
// 1/q-periodic: psi_k = phi_k / (e^{2 pi i k p/q} - 1) off q.Z, theta the
// q.Z part of phi.  The identity phi = theta + psi(.+p/q) - psi is exact on
// the truncated data.
std::pair<StripFunction, StripFunction> factor_multiplier(
    const StripFunction& mu, const Rational& pq, const ReductionConfig& cfg);

// Lemma-WR route: near-intertwined W with small determinant produces a
// conjugacy to a constant diagonal.  R is the approximate intertwining
// rotation; pass std::nullopt when W commutes with the cocycle exactly
// (the A_q -+ id case), where the hypothesis is checked as commutation.
ReductionResult wr_fallback(const Cocycle& c, const MatrixFunction& W,
                            std::optional<Eigen::Matrix2d> R,
                            ReductionConfig cfg);

// Certified bound for ||B(.+alpha) A B^{-1} - target||_{eps'} assembled from
// the rational residual plus the frequency-shift term
// ||A|| ||B|| |alpha - p/q| ||dB||_{eps'}.
double transfer_to_irrational(const ReductionResult& r, const Cocycle& c,
                              const BigFloat& alpha, const Rational& pq,
                              double eps_prime);

}  // namespace qpc

#endif  // QPC_REDUCER_HPP
