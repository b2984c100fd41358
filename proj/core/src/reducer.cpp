#include "qpc/reducer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "qpc/errors.hpp"

namespace qpc {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kShave = 1e-9;
using json = nlohmann::json;

Eigen::Matrix2d rotation_matrix(double turns) {
  const double co = std::cos(kTwoPi * turns);
  const double si = std::sin(kTwoPi * turns);
  Eigen::Matrix2d m;
  m << co, -si, si, co;
  return m;
}

StripFunction exp_2pii(const StripFunction& psi, double trunc_tol) {
  const int extra = std::max(64, 2 * psi.order());
  return transform_on_grid(
      psi, [](cdouble v) { return std::exp(cdouble(0.0, kTwoPi) * v); }, extra,
      trunc_tol);
}

// 1/sqrt(f) for f nonvanishing on R with continuously tracked branch,
// pinned to the principal square root at x = 0.
StripFunction inv_sqrt_tracked(const StripFunction& f, double trunc_tol) {
  const int n = f.order();
  int m = 8;
  while (m < 16 * (n + 1) + 256) m <<= 1;
  std::vector<cdouble> vals = f.eval_grid(m, 0.0);
  std::vector<double> arg(m);
  arg[0] = std::arg(vals[0]);
  for (int j = 1; j < m; ++j)
    arg[j] = arg[j - 1] + std::arg(vals[j] / vals[j - 1]);
  std::vector<cdouble> out(m);
  for (int j = 0; j < m; ++j) {
    const double r = std::abs(vals[j]);
    if (r == 0.0) throw ZeroOnStrip("inv_sqrt of a vanishing function");
    out[j] = std::polar(1.0 / std::sqrt(r), -0.5 * arg[j]);
  }
  // An odd winding would leave a genuinely antiperiodic square root; the
  // callers only take square roots of near-constant positive functions.
  const double total = arg[m - 1] - arg[0] + std::arg(vals[0] / vals[m - 1]);
  if (std::lround(total / kTwoPi) % 2 != 0)
    throw ZeroOnStrip("inv_sqrt: odd winding");
  return StripFunction::from_real_samples(out, f.half_width(), trunc_tol);
}

double grid_target_residual(const MatrixFunction& B, const MatrixFunction& A,
                            const MatrixFunction& B_inv, double pq,
                            const Eigen::Matrix2d& target, int grid) {
  double sup = 0.0;
  for (int j = 0; j < grid; ++j) {
    const double x = static_cast<double>(j) / grid;
    const Eigen::Matrix2cd m = B.eval(cdouble(x + pq, 0.0)) *
                               A.eval(cdouble(x, 0.0)) *
                               B_inv.eval(cdouble(x, 0.0));
    sup = std::max(sup, op_norm(m - target.cast<cdouble>()));
  }
  return sup;
}

}  // namespace

ReductionConfig ReductionConfig::defaults_for(double eps0) {
  ReductionConfig cfg;
  cfg.strip_ladder = {eps0, 0.8 * eps0, 0.6 * eps0, 0.4 * eps0};
  return cfg;
}

CoronaOptions ReductionConfig::corona() const {
  CoronaOptions opt;
  opt.residual_tol = residual_tol;
  opt.det_target = det_target;
  opt.bezout_budget_C = bezout_budget_C;
  opt.grid_oversample = grid_oversample;
  opt.floor_c = floor_c;
  opt.floor_C = floor_C;
  return opt;
}

double ReductionConfig::d1q_eff(int q) const {
  return std::max(delta1 * q, 1.0);
}

std::string reduction_case_name(ReductionCase c) {
  switch (c) {
    case ReductionCase::Elliptic: return "elliptic";
    case ReductionCase::Hyperbolic: return "hyperbolic";
    case ReductionCase::ParabolicDft: return "parabolic_dft";
    case ReductionCase::WrFallback: return "wr_fallback";
  }
  return "unknown";
}

MultiplierFit extract_multiplier(const MatrixFunction& A,
                                 const Vec2Function& u, const Rational& pq,
                                 double mu_half_width, int oversample) {
  const double shift = pq.value();
  const Vec2Function v = A * u;
  const Vec2Function w = u.shifted(shift);
  const int n = std::max({v.x.order(), v.y.order(), 8});
  int m = 8;
  while (m < oversample * (n + 1)) m <<= 1;
  const std::vector<cdouble> vx = v.x.eval_grid(m, 0.0);
  const std::vector<cdouble> vy = v.y.eval_grid(m, 0.0);
  const std::vector<cdouble> wx = w.x.eval_grid(m, 0.0);
  const std::vector<cdouble> wy = w.y.eval_grid(m, 0.0);
  std::vector<cdouble> mu_vals(m);
  for (int j = 0; j < m; ++j) {
    const double den = std::norm(wx[j]) + std::norm(wy[j]);
    if (den <= 0.0)
      throw ZeroOnStrip("extract_multiplier: u vanishes on the real line");
    mu_vals[j] = (std::conj(wx[j]) * vx[j] + std::conj(wy[j]) * vy[j]) / den;
  }
  MultiplierFit fit;
  fit.mu = StripFunction::from_real_samples(mu_vals, mu_half_width, 1e-15);

  const Vec2Function resid = v - w * fit.mu;
  const double line = mu_half_width * (1.0 - kShave);
  double sup = 0.0;
  for (double y : {0.0, line, -line})
    sup = std::max(sup, resid.sup_norm_on_line(y, 8));
  fit.residual = sup;
  return fit;
}

std::pair<StripFunction, StripFunction> factor_multiplier(
    const StripFunction& mu, const Rational& pq, const ReductionConfig& cfg) {
  const int q = static_cast<int>(pq.q);
  LogBranch lb = log_branch(mu);
  if (lb.winding != 0)
    throw WindingNonzero("factor_multiplier: winding " +
                         std::to_string(lb.winding) +
                         " (the multiplier of an eigendirection must not wind)");
  const StripFunction& phi = lb.phi;
  const StripFunction theta = phi.q_projection(q);

  const int n = phi.order();
  std::vector<cdouble> psi_c(2 * n + 1, cdouble(0.0, 0.0));
  for (int k = -n; k <= n; ++k) {
    if (k == 0 || k % q == 0) continue;
    const cdouble div =
        std::exp(cdouble(0.0, kTwoPi * k * pq.value())) - cdouble(1.0, 0.0);
    if (std::abs(div) < 1e-14)
      throw SmallDivisorOverflow("divisor e^{2 pi i k p/q} - 1 below 1e-14 "
                                 "at k=" + std::to_string(k));
    psi_c[k + n] = phi.coeff(k) / div;
  }
  StripFunction psi(std::move(psi_c), mu.half_width());
  psi = psi.compressed(0.0, 1e-16);
  (void)cfg;
  return {psi, theta};
}

namespace {

struct ReduceContext {
  const Cocycle* c = nullptr;
  ReductionConfig cfg;
  Rational pq;
  int q = 0;
  const std::vector<MatrixFunction>* prefix = nullptr;
  StripFunction t;
  double t0 = 0.0;
  json diag;
};

// Eigenvalue function of the trace: lambda + 1/lambda = t with the elliptic
// branch |lambda| = 1 on R (t real, |t| < 2) or the hyperbolic real branch
// |lambda| > 1 (|t| > 2).
std::pair<StripFunction, StripFunction> trace_eigenvalues(
    const StripFunction& t, bool elliptic, double hw_out, double tail_tol) {
  const int extra = std::max(64, 3 * t.order());
  int m = 8;
  while (m < 8 * (t.order() + extra + 1)) m <<= 1;
  std::vector<cdouble> tv = t.eval_grid(m, 0.0);
  std::vector<cdouble> lam(m), lam_inv(m);
  for (int j = 0; j < m; ++j) {
    const cdouble tj = tv[j];
    if (elliptic) {
      const cdouble root = std::sqrt(cdouble(4.0, 0.0) - tj * tj);
      lam[j] = 0.5 * (tj + cdouble(0.0, 1.0) * root);
      lam_inv[j] = 0.5 * (tj - cdouble(0.0, 1.0) * root);
    } else {
      const double sign = tj.real() >= 0.0 ? 1.0 : -1.0;
      if (std::abs(tj) > 1e8) {
        // sqrt(t^2-4) ~ |t| (1 - 2/t^2): avoids overflow in t^2
        lam[j] = tj - 1.0 / tj;
        lam_inv[j] = 1.0 / lam[j];
      } else {
        const cdouble root = sign * std::sqrt(tj * tj - cdouble(4.0, 0.0));
        lam[j] = 0.5 * (tj + root);
        lam_inv[j] = 0.5 * (tj - root);
      }
    }
  }
  const double hw = hw_out;
  StripFunction l1 = StripFunction::from_real_samples(lam, hw, tail_tol);
  StripFunction l2 = StripFunction::from_real_samples(lam_inv, hw, tail_tol);
  return {l1, l2};
}

MatrixFunction subtract_scalar(const MatrixFunction& m,
                               const StripFunction& s) {
  const double hw = std::min(m.half_width(), s.half_width());
  return {(m.a - s).with_half_width(hw), m.b.with_half_width(hw),
          m.c.with_half_width(hw), (m.d - s).with_half_width(hw)};
}

struct KernelRun {
  KernelSolution ks;
  double delta = 0.0;
  std::vector<double> det_trajectory;
};

// Normalize P to sampled sup 1, polish det to zero, solve the kernel.
KernelRun kernel_of(const MatrixFunction& P_raw, double eps_cert,
                    double eps_target, const CoronaOptions& opt) {
  const double s = P_raw.sampled_sup_norm(eps_cert, 8) * (1.0 + 1e-9);
  if (s <= 0.0) throw PreconditionFailed("kernel_of: zero matrix");
  MatrixFunction P = P_raw * cdouble(1.0 / s, 0.0);
  KernelRun run;
  run.delta = P.sampled_min_norm(eps_cert, 8);
  ZeroDetResult zd = zero_determinant(P, run.delta, eps_cert, opt);
  run.det_trajectory = zd.det_trajectory;
  run.ks = kernel_vector(zd.P, run.delta, eps_cert, eps_target, opt);
  return run;
}

ReductionResult finish_result(ReduceContext& ctx, ReductionCase kind,
                              MatrixFunction B, MatrixFunction B_inv,
                              StripFunction theta,
                              const std::vector<Eigen::Matrix2d>& targets,
                              double eps) {
  const MatrixFunction& A = ctx.c->map;
  const double pqv = ctx.pq.value();
  MatrixFunction M = B.shifted(pqv) * A * B_inv;
  M = M.compressed(0.0, 1e-15);

  // Convention-proof target selection: measure every candidate on a real
  // grid and keep the closest.
  double best = std::numeric_limits<double>::infinity();
  Eigen::Matrix2d target = targets.front();
  for (const Eigen::Matrix2d& cand : targets) {
    const double r = grid_target_residual(B, A, B_inv, pqv, cand, 128);
    if (r < best) {
      best = r;
      target = cand;
    }
  }

  ReductionResult out;
  out.kind = kind;
  out.B = B;
  out.B_inv = B_inv;
  out.theta = std::move(theta);
  out.target = target;
  out.eps = eps;
  const MatrixFunction resid_fn =
      M - MatrixFunction::constant(target.cast<cdouble>(), M.half_width());
  out.residual = resid_fn.certified_sup_norm(eps);
  out.B_norm = B.sampled_sup_norm(eps, 8);
  out.delta_target = out.residual > 0.0
                         ? -std::log(out.residual) / ctx.q
                         : std::numeric_limits<double>::infinity();
  out.diagnostics = std::move(ctx.diag);
  out.diagnostics["case"] = reduction_case_name(kind);
  out.diagnostics["grid_residual"] = best;
  out.diagnostics["det_B_defect"] = B.sl2_defect(256);
  out.diagnostics["B_real_defect"] = B.real_defect();

  // Certified-bound consistency: the sampled conjugacy error never exceeds
  // the reported residual.
  const double g512 = grid_target_residual(B, A, B_inv, pqv, target, 512);
  out.diagnostics["residual_grid_512"] = g512;
  if (g512 > out.residual * (1.0 + 1e-9) + 1e-13)
    throw ResidualTooLarge(
        "reported residual is not an upper bound for the sampled error");

  // Trace invariance: tr of the q-step iterate of the reduced cocycle
  // matches tr A_q pointwise (conjugacy preserves the periodic trace).
  {
    double worst = 0.0;
    const int grid = 128;
    for (int j = 0; j < grid; ++j) {
      const double x = static_cast<double>(j) / grid;
      Eigen::Matrix2cd acc = Eigen::Matrix2cd::Identity();
      for (int k = 0; k < ctx.q; ++k) {
        const double xs = x + k * pqv;
        acc = B.eval(cdouble(xs + pqv, 0.0)) * A.eval(cdouble(xs, 0.0)) *
              B_inv.eval(cdouble(xs, 0.0)) * acc;
      }
      const cdouble tr_reduced = acc.trace();
      const cdouble tr_orig = ctx.t.eval(cdouble(x, 0.0));
      worst = std::max(worst, std::abs(tr_reduced - tr_orig));
    }
    out.diagnostics["trace_invariance_defect"] = worst;
  }
  return out;
}

ReductionResult elliptic_path(ReduceContext& ctx) {
  const ReductionConfig& cfg = ctx.cfg;
  const double e0 = cfg.strip_ladder[0];
  const double e1 = cfg.strip_ladder[1];
  const double e2 = cfg.strip_ladder[2];
  const double ee = cfg.strip_ladder[3];
  const MatrixFunction& Aq = (*ctx.prefix)[ctx.q];
  const MatrixFunction& A = ctx.c->map;

  // |t| must stay inside (-2, 2) on R for the unimodular branch.
  const double t_sup_real = ctx.t.sup_on_line(0.0, cfg.grid_oversample);
  if (t_sup_real >= 2.0)
    throw TraceNotConcentrated("elliptic dispatch but |t| reaches " +
                               std::to_string(t_sup_real) + " on R");

  auto [lambda, lambda_inv] =
      trace_eigenvalues(ctx.t, true, 0.5 * (e0 + e1), cfg.lambda_tail_tol);
  ctx.diag["lambda_order"] = lambda.order();

  KernelRun run = kernel_of(subtract_scalar(Aq, lambda), e1, e2, cfg.corona());
  ctx.diag["det_trajectory"] = run.det_trajectory;
  ctx.diag["kernel_delta"] = run.delta;
  ctx.diag["kernel_floor"] = run.ks.norm_floor;

  MultiplierFit fit =
      extract_multiplier(A, run.ks.u, ctx.pq, 0.5 * (e2 + ee));
  ctx.diag["mu_fit_residual"] = fit.residual;

  auto [psi, theta] = factor_multiplier(fit.mu, ctx.pq, cfg);
  ctx.diag["psi_norm"] = psi.upper_norm(ee);

  const StripFunction phase = exp_2pii(psi, cfg.trunc_tol);
  Vec2Function v{(run.ks.u.x * phase).compressed(0.0, 1e-15),
                 (run.ks.u.y * phase).compressed(0.0, 1e-15)};
  Vec2Function vstar = v.conj_reflect();
  const Vec2Function c1 = v + vstar;
  Vec2Function c2 = (v - vstar) * cdouble(0.0, -1.0);

  MatrixFunction Btilde(c1.x, c2.x, c1.y, c2.y);
  StripFunction b = Btilde.det().compressed(0.0, 1e-15);
  double b0 = b.coeff(0).real();
  if (b0 < 0.0) {
    // change theta to -theta and v to conj(v(conj z)): flips the sign of b
    c2 = c2 * cdouble(-1.0, 0.0);
    Btilde = MatrixFunction(c1.x, c2.x, c1.y, c2.y);
    b = -b;
    b0 = -b0;
    theta = -theta;
  }
  const double b_sup = b.sup_on_line(0.0, cfg.grid_oversample);
  double b_min = std::numeric_limits<double>::infinity();
  {
    std::vector<cdouble> bv = b.eval_grid(
        std::max(256, cfg.grid_oversample * (b.order() + 1)), 0.0);
    for (const cdouble& vv : bv) b_min = std::min(b_min, vv.real());
  }
  ctx.diag["b_mean"] = b0;
  ctx.diag["b_min_real"] = b_min;
  ctx.diag["b_offq_energy"] = (b - b.q_projection(ctx.q)).upper_norm(ee);
  if (!(b_min > cfg.b_floor * b_sup))
    throw DeterminantCollapse(
        "det Btilde dips to " + std::to_string(b_min) +
        " (eigenvector near-degeneracy; trace margin too thin)");

  const StripFunction ib = inv_sqrt_tracked(b, cfg.trunc_tol);
  const MatrixFunction B_inv = (Btilde * ib).compressed(0.0, 1e-15);
  const MatrixFunction B = B_inv.adjugate();

  // Pin theta's sign to the conjugated map: the column conventions only
  // determine it up to R_theta vs R_{-theta}.
  double th0 = theta.coeff(0).real();
  {
    const double plus = grid_target_residual(B, A, B_inv, ctx.pq.value(),
                                             rotation_matrix(th0), 64);
    const double minus = grid_target_residual(B, A, B_inv, ctx.pq.value(),
                                              rotation_matrix(-th0), 64);
    if (minus < plus) {
      theta = -theta;
      th0 = -th0;
    }
  }
  ctx.diag["theta_mean"] = th0;
  ctx.diag["theta_offq_energy"] =
      (theta - theta.q_projection(ctx.q)).upper_norm(ee);
  return finish_result(ctx, ReductionCase::Elliptic, B, B_inv, theta,
                       {rotation_matrix(th0)}, ee);
}

ReductionResult hyperbolic_path(ReduceContext& ctx) {
  const ReductionConfig& cfg = ctx.cfg;
  const double e0 = cfg.strip_ladder[0];
  const double e1 = cfg.strip_ladder[1];
  const double e2 = cfg.strip_ladder[2];
  const double ee = cfg.strip_ladder[3];
  const MatrixFunction& Aq = (*ctx.prefix)[ctx.q];
  const MatrixFunction& A = ctx.c->map;

  double t_min_real = std::numeric_limits<double>::infinity();
  {
    std::vector<cdouble> tv = ctx.t.eval_grid(
        std::max(256, cfg.grid_oversample * (ctx.t.order() + 1)), 0.0);
    for (const cdouble& vv : tv) t_min_real = std::min(t_min_real, std::abs(vv));
  }
  if (t_min_real <= 2.0)
    throw TraceNotConcentrated("hyperbolic dispatch but |t| dips to " +
                               std::to_string(t_min_real) + " on R");

  auto [lambda, lambda_inv] =
      trace_eigenvalues(ctx.t, false, 0.5 * (e0 + e1), cfg.lambda_tail_tol);

  const CoronaOptions copt = cfg.corona();
  KernelRun run_u = kernel_of(subtract_scalar(Aq, lambda), e1, e2, copt);
  KernelRun run_v = kernel_of(subtract_scalar(Aq, lambda_inv), e1, e2, copt);
  ctx.diag["det_trajectory"] = run_u.det_trajectory;
  ctx.diag["det_trajectory_second"] = run_v.det_trajectory;

  Vec2Function v = real_symmetrize(run_u.ks.u, run_u.ks.norm_floor, e2, copt);
  Vec2Function vp = real_symmetrize(run_v.ks.u, run_v.ks.norm_floor, e2, copt);
  if (v.parity() != vp.parity())
    throw ParityMismatch(
        "eigendirections returned different parities; contradicts the "
        "determinant sign argument");

  // Rescale each direction by e^{2 pi i psi} to make the multiplier the
  // 1/q-periodic gamma.
  MultiplierFit fit_u = extract_multiplier(A, v, ctx.pq, 0.5 * (e2 + ee));
  auto [psi_u, theta_u] = factor_multiplier(fit_u.mu, ctx.pq, cfg);
  const StripFunction phase_u = exp_2pii(psi_u, cfg.trunc_tol);
  v = Vec2Function{(v.x * phase_u).real_part_symmetrized().compressed(0.0, 1e-15),
                   (v.y * phase_u).real_part_symmetrized().compressed(0.0, 1e-15)};

  MultiplierFit fit_v = extract_multiplier(A, vp, ctx.pq, 0.5 * (e2 + ee));
  auto [psi_v, theta_v] = factor_multiplier(fit_v.mu, ctx.pq, cfg);
  const StripFunction phase_v = exp_2pii(psi_v, cfg.trunc_tol);
  vp = Vec2Function{(vp.x * phase_v).real_part_symmetrized().compressed(0.0, 1e-15),
                    (vp.y * phase_v).real_part_symmetrized().compressed(0.0, 1e-15)};
  ctx.diag["theta_sum_defect"] = (theta_u + theta_v).upper_norm(ee);

  const StripFunction gamma = exp_2pii(theta_u, cfg.trunc_tol);
  // gamma^q recovers the eigenvalue branch; record the sampled defect.
  {
    double worst = 0.0;
    const int grid = 128;
    for (int j = 0; j < grid; ++j) {
      const cdouble x(static_cast<double>(j) / grid, 0.0);
      cdouble gq(1.0, 0.0);
      for (int k = 0; k < ctx.q; ++k)
        gq *= gamma.eval(x + cdouble(k * ctx.pq.value(), 0.0));
      const cdouble lam = lambda.eval(x);
      worst = std::max(worst, std::abs(gq - lam) / std::max(1.0, std::abs(lam)));
    }
    ctx.diag["gamma_q_defect"] = worst;
  }

  MatrixFunction Btilde(v.x, vp.x, v.y, vp.y);
  StripFunction b = Btilde.det().compressed(0.0, 1e-15);
  const double b_sup = b.sup_on_line(0.0, cfg.grid_oversample);
  double b_min_abs = std::numeric_limits<double>::infinity();
  {
    std::vector<cdouble> bv = b.eval_grid(
        std::max(256, cfg.grid_oversample * (b.order() + 1)), 0.0);
    for (const cdouble& vv : bv) b_min_abs = std::min(b_min_abs, std::abs(vv));
  }
  ctx.diag["b_mean"] = b.coeff(0).real();
  ctx.diag["angle_floor"] = b_min_abs;
  if (!(b_min_abs > cfg.b_floor * b_sup))
    throw DeterminantCollapse("eigendirections nearly collinear, det dips to " +
                              std::to_string(b_min_abs));

  // B^{-1} has columns v and v'/b, so det B^{-1} = 1 exactly.
  const StripFunction binv = transform_on_grid(
      b, [](cdouble z) { return 1.0 / z; }, std::max(64, 2 * b.order()),
      cfg.trunc_tol);
  const MatrixFunction B_inv =
      MatrixFunction(v.x, (vp.x * binv).compressed(0.0, 1e-15), v.y,
                     (vp.y * binv).compressed(0.0, 1e-15));
  const MatrixFunction B = B_inv.adjugate();

  double g0 = gamma.coeff(0).real();
  StripFunction theta_out = theta_u;
  {
    Eigen::Matrix2d d1 = Eigen::Matrix2d::Zero(), d2 = Eigen::Matrix2d::Zero();
    d1(0, 0) = g0;
    d1(1, 1) = 1.0 / g0;
    d2(0, 0) = 1.0 / g0;
    d2(1, 1) = g0;
    const double plus =
        grid_target_residual(B, A, B_inv, ctx.pq.value(), d1, 64);
    const double minus =
        grid_target_residual(B, A, B_inv, ctx.pq.value(), d2, 64);
    if (minus < plus) {
      theta_out = -theta_u;
      g0 = 1.0 / g0;
    }
  }
  ctx.diag["gamma_mean"] = g0;
  Eigen::Matrix2d dtarget = Eigen::Matrix2d::Zero();
  dtarget(0, 0) = g0;
  dtarget(1, 1) = 1.0 / g0;
  return finish_result(ctx, ReductionCase::Hyperbolic, B, B_inv, theta_out,
                       {dtarget}, ee);
}

ReductionResult parabolic_path(ReduceContext& ctx) {
  const ReductionConfig& cfg = ctx.cfg;
  const double e1 = cfg.strip_ladder[1];
  const double ee = cfg.strip_ladder[3];
  const MatrixFunction& Aq = (*ctx.prefix)[ctx.q];
  const MatrixFunction& A = ctx.c->map;
  const double d1q = cfg.d1q_eff(ctx.q);
  const int q = ctx.q;

  // Which sign brings A_q near +-id?
  const MatrixFunction Wp = Aq - MatrixFunction::identity(Aq.half_width());
  const MatrixFunction Wm = Aq + MatrixFunction::identity(Aq.half_width());
  const double up = Wp.upper_norm(e1);
  const double um = Wm.upper_norm(e1);
  const int sign = up <= um ? 1 : -1;
  const MatrixFunction& W0 = sign > 0 ? Wp : Wm;
  const int l = sign > 0 ? 0 : 1;
  const double w0_upper = sign > 0 ? up : um;
  ctx.diag["near_id_sign"] = sign;
  ctx.diag["aq_id_upper"] = w0_upper;

  const double thr_aq = std::exp(-cfg.C0 * d1q);
  const double thr_lower = std::exp(-cfg.C1 * cfg.C0 * d1q);
  const double w0_min = W0.sampled_min_norm(e1, 8);
  ctx.diag["aq_id_sampled_min"] = w0_min;
  ctx.diag["near_id_threshold"] = thr_aq;
  ctx.diag["pointwise_lower_threshold"] = thr_lower;

  bool near_id;
  if (w0_upper <= thr_aq) {
    near_id = true;
  } else if (w0_min >= thr_lower) {
    near_id = false;
  } else {
    // Gray zone: propagate the pointwise minimum through the q-orbit with
    // the Lagrange-interpolation bound; smallness everywhere on that line
    // supports the near-identity reading.
    cdouble zmin(0.0, 0.0);
    double best = std::numeric_limits<double>::infinity();
    const int grid = 128;
    for (double y : {0.0, 0.7 * e1, -0.7 * e1}) {
      for (int j = 0; j < grid; ++j) {
        const cdouble z(static_cast<double>(j) / grid, y);
        const double n = op_norm(W0.eval(z));
        if (n < best) {
          best = n;
          zmin = z;
        }
      }
    }
    double propagated = 0.0;
    for (const StripFunction* f : {&W0.a, &W0.b, &W0.c, &W0.d}) {
      const InterpolationBound ib = interpolation_bound(
          *f, q, zmin, std::min(0.99 * f->half_width(), cfg.strip_ladder[0]),
          e1);
      propagated = std::max(propagated, ib.tail + ib.lagrange);
    }
    ctx.diag["interpolation_propagated_sup"] = propagated;
    near_id = propagated <= 10.0 * thr_aq;
  }
  ctx.diag["near_id"] = near_id;

  if (!near_id) return wr_fallback(*ctx.c, W0, std::nullopt, cfg);

  // DFT family W_k = sum_s R_{ks/q} R_{ls/2q} A_s.
  std::vector<MatrixFunction> wk;
  wk.reserve(q);
  for (int k = 0; k < q; ++k) {
    MatrixFunction acc =
        MatrixFunction::constant(Eigen::Matrix2cd::Zero(), Aq.half_width());
    for (int s = 0; s < q; ++s) {
      const double angle = (2.0 * k + l) * s / (2.0 * q);
      const Eigen::Matrix2cd r = rotation_matrix(angle).cast<cdouble>();
      acc = acc + MatrixFunction::constant(r, Aq.half_width()) * (*ctx.prefix)[s];
    }
    wk.push_back(acc.compressed(0.0, 1e-15));
  }

  // Parseval spot check at x = 0 over a deterministic fan of unit vectors.
  {
    double worst = 0.0;
    for (int yi = 0; yi < 8; ++yi) {
      const double ang = std::numbers::pi * yi / 8.0;
      const Eigen::Vector2cd y(std::cos(ang), std::sin(ang));
      double lhs = 0.0, rhs = 0.0;
      for (int k = 0; k < q; ++k)
        lhs += (wk[k].eval(cdouble(0.0, 0.0)) * y).squaredNorm();
      for (int s = 0; s < q; ++s)
        rhs += ((*ctx.prefix)[s].eval(cdouble(0.0, 0.0)) * y).squaredNorm();
      rhs *= q;
      worst = std::max(worst, std::abs(lhs - rhs) / std::max(1.0, rhs));
    }
    ctx.diag["parseval_err"] = worst;
  }

  // Pick (x0, k0) maximizing ||W_k(x0)||; deterministic lexicographic ties.
  int k0 = 0;
  double best_norm = -1.0;
  for (int xi = 0; xi < cfg.x0_scan; ++xi) {
    const double x = static_cast<double>(xi) / cfg.x0_scan;
    for (int k = 0; k < q; ++k) {
      const double n = op_norm(wk[k].eval(cdouble(x, 0.0)));
      if (n > best_norm + 1e-15) {
        best_norm = n;
        k0 = k;
      }
    }
  }
  ctx.diag["k0"] = k0;
  ctx.diag["W_x0_norm_sq"] = best_norm * best_norm;
  ctx.diag["parseval_guarantee"] = best_norm * best_norm >= q;

  const MatrixFunction& W = wk[k0];
  const double rot_turns = -(2.0 * k0 + l) / (2.0 * q);

  // Exact algebraic identity (Wk): W(z+p/q) A(z) = R(W(z) +- A_q(z) - id).
  {
    const MatrixFunction lhs = W.shifted(ctx.pq.value()) * A;
    const MatrixFunction bracket =
        W + (Aq * cdouble(sign, 0.0)) -
        MatrixFunction::identity(Aq.half_width());
    const MatrixFunction rhs =
        MatrixFunction::constant(rotation_matrix(rot_turns).cast<cdouble>(),
                                 Aq.half_width()) *
        bracket;
    ctx.diag["wk_identity_defect"] =
        (lhs - rhs).upper_norm(ee) / std::max(1.0, W.upper_norm(ee));
  }

  // Lower-bound propagation for ||W||: interpolation bound at the sampled
  // minimum must not allow exponential smallness.
  const double w_min = W.sampled_min_norm(e1, 8);
  ctx.diag["W_sampled_min"] = w_min;

  StripFunction w = W.det().compressed(0.0, 1e-15);
  const StripFunction w_per = w.q_projection(q);
  ctx.diag["w_offq_energy"] = (w - w_per).upper_norm(ee);
  const double w0 = w.coeff(0).real();
  ctx.diag["w_mean"] = w0;
  const double w_sup = w.sup_on_line(0.0, 8);
  const double thr_w = std::exp(-std::sqrt(cfg.C0) * d1q);

  if (!(std::abs(w0) >= thr_w && std::abs(w0) >= 1e-10 * std::max(1.0, w_sup))) {
    ctx.diag["w_mean_below_threshold"] = true;
    return wr_fallback(*ctx.c, W, rotation_matrix(rot_turns), cfg);
  }

  MatrixFunction B(StripFunction(Aq.half_width()), StripFunction(Aq.half_width()),
                   StripFunction(Aq.half_width()), StripFunction(Aq.half_width()));
  if (w0 > 0.0) {
    const StripFunction iw = inv_sqrt_tracked(w, cfg.trunc_tol);
    B = (W * iw).compressed(0.0, 1e-15);
  } else {
    const StripFunction iw = inv_sqrt_tracked(-w, cfg.trunc_tol);
    Eigen::Matrix2cd flip;
    flip << 1.0, 0.0, 0.0, -1.0;
    B = (MatrixFunction::constant(flip, Aq.half_width()) * (W * iw))
            .compressed(0.0, 1e-15);
  }
  const MatrixFunction B_inv = B.adjugate();
  const StripFunction theta =
      StripFunction::constant(rot_turns, B.half_width());
  return finish_result(ctx, ReductionCase::ParabolicDft, B, B_inv, theta,
                       {rotation_matrix(rot_turns), rotation_matrix(-rot_turns)},
                       ee);
}

}  // namespace

ReductionResult wr_fallback(const Cocycle& c, const MatrixFunction& W,
                            std::optional<Eigen::Matrix2d> R,
                            ReductionConfig cfg) {
  if (!c.alpha.is_rational())
    throw DomainError("wr_fallback requires a rational frequency");
  const Rational pq = c.alpha.rat();
  const int q = static_cast<int>(pq.q);
  const double e1 = cfg.strip_ladder[1];
  const double e2 = cfg.strip_ladder[2];
  const double ee = cfg.strip_ladder[3];
  const double d1q = cfg.d1q_eff(q);
  const MatrixFunction& A = c.map;

  ReduceContext ctx;
  ctx.c = &c;
  ctx.cfg = cfg;
  ctx.pq = pq;
  ctx.q = q;
  std::vector<MatrixFunction> prefix = iterate_prefix(c, q);
  ctx.prefix = &prefix;
  ctx.t = prefix[q].trace().compressed(0.0, 1e-15);

  // Lemma hypotheses, sampled: intertwining, pointwise lower bound, small
  // determinant.  Margins always reported; hard failure names the culprits.
  const double thr_int = std::exp(-cfg.C3 * cfg.C4 * d1q);
  const double thr_low = std::exp(-cfg.C4 * d1q) * 1e-6;
  const double thr_det = std::exp(-cfg.C3 * cfg.C4 * d1q);
  const double w_scale = std::max(1.0, W.sampled_sup_norm(e1, 8));

  double intertwine;
  if (R.has_value()) {
    const MatrixFunction resid =
        W.shifted(pq.value()) * A -
        MatrixFunction::constant(R->cast<cdouble>(), W.half_width()) * W;
    intertwine = resid.upper_norm(e1) / w_scale;
  } else {
    // W commutes with the cocycle exactly (the A_q -+ id case).
    const MatrixFunction resid = W.shifted(pq.value()) * A - A * W;
    intertwine = resid.upper_norm(e1) / w_scale;
  }
  const double w_min = W.sampled_min_norm(e1, 8) / w_scale;
  const double det_norm = W.det().upper_norm(e1) / (w_scale * w_scale);
  ctx.diag["wr_intertwine"] = intertwine;
  ctx.diag["wr_min_norm"] = w_min;
  ctx.diag["wr_det_norm"] = det_norm;
  ctx.diag["wr_thresholds"] = {thr_int, thr_low, thr_det};

  std::string failed;
  if (intertwine > thr_int) failed += "intertwining ";
  if (w_min < thr_low) failed += "lower-bound ";
  if (det_norm > thr_det) failed += "determinant ";
  if (!failed.empty()) {
    HypothesisFailed e("wr_fallback hypotheses failed: " + failed);
    e.with_margin("intertwine", intertwine)
        .with_margin("intertwine_threshold", thr_int)
        .with_margin("min_norm", w_min)
        .with_margin("min_norm_threshold", thr_low)
        .with_margin("det_norm", det_norm)
        .with_margin("det_threshold", thr_det);
    throw e;
  }

  const CoronaOptions copt = cfg.corona();
  KernelRun run = kernel_of(W, e1, e2, copt);
  ctx.diag["det_trajectory"] = run.det_trajectory;
  Vec2Function u = real_symmetrize(run.ks.u, run.ks.norm_floor, e2, copt);

  // A u must be near-parallel to u(.+p/q).
  MultiplierFit fit = extract_multiplier(A, u, pq, 0.5 * (e2 + ee));
  ctx.diag["parallel_residual"] = fit.residual;
  const double thr_par = std::max(std::sqrt(thr_int), 1e-6);
  if (fit.residual > thr_par)
    throw HypothesisFailed("A u is not parallel to u(.+p/q): residual " +
                           std::to_string(fit.residual));

  double u_floor = std::numeric_limits<double>::infinity();
  for (double y : {0.0, 0.5 * e2, -0.5 * e2})
    u_floor = std::min(u_floor, u.min_norm_on_line(y, 8));
  MatrixFunction Btilde = complete_to_unimodular(
      u, std::clamp(u_floor, 1e-8, 1.0), e2, copt);

  MatrixFunction M1 =
      (Btilde.shifted(pq.value()).adjugate() * A * Btilde).compressed(0.0, 1e-15);

  auto [psi, theta] = factor_multiplier(fit.mu, pq, cfg);
  const StripFunction gm = exp_2pii(-psi, cfg.trunc_tol);
  const StripFunction gp = exp_2pii(psi, cfg.trunc_tol);
  const StripFunction zero(W.half_width());
  const MatrixFunction D(gm, zero, zero, gp);
  const MatrixFunction Dinv(gp, zero, zero, gm);

  MatrixFunction B2 = (D * Btilde.adjugate()).compressed(0.0, 1e-15);
  MatrixFunction M2 =
      (D.shifted(pq.value()) * M1 * Dinv).compressed(0.0, 1e-15);

  const double s2 = M2.b.upper_norm(ee);
  const double s3 = M2.c.upper_norm(ee);
  ctx.diag["s2_norm"] = s2;
  ctx.diag["s3_norm"] = s3;
  const double d_const = std::exp(10.0 * cfg.C4 * d1q) * (1.0 + s2);
  ctx.diag["d_rescale"] = d_const;
  Eigen::Matrix2cd dm;
  dm << 1.0 / d_const, 0.0, 0.0, d_const;
  const MatrixFunction Dc =
      MatrixFunction::constant(dm, B2.half_width());
  const MatrixFunction B3 = (Dc * B2).compressed(0.0, 1e-15);
  const MatrixFunction B3_inv = B3.adjugate();

  const cdouble g0 = std::exp(cdouble(0.0, kTwoPi) * theta.coeff(0));
  const double g0r = g0.real();
  Eigen::Matrix2d t1 = Eigen::Matrix2d::Zero(), t2 = Eigen::Matrix2d::Zero();
  t1(0, 0) = g0r;
  t1(1, 1) = 1.0 / g0r;
  t2(0, 0) = 1.0 / g0r;
  t2(1, 1) = g0r;
  return finish_result(ctx, ReductionCase::WrFallback, B3, B3_inv, theta,
                       {t1, t2}, ee);
}

ReductionResult reduce(const Cocycle& c, ReductionConfig cfg) {
  if (!c.alpha.is_rational())
    throw DomainError("reduce requires an exact rational frequency");
  const Rational pq = c.alpha.rat();
  const int q = static_cast<int>(pq.q);
  if (q < cfg.q_min)
    throw PreconditionFailed("q = " + std::to_string(q) + " below q_min = " +
                             std::to_string(cfg.q_min));
  if (cfg.strip_ladder.size() != 4)
    throw DomainError("strip_ladder must list eps0 > eps1 > eps2 > eps");
  for (std::size_t i = 0; i + 1 < cfg.strip_ladder.size(); ++i)
    if (cfg.strip_ladder[i] <= cfg.strip_ladder[i + 1] ||
        cfg.strip_ladder[i + 1] <= 0.0)
      throw DomainError("strip_ladder must be strictly decreasing, positive");
  if (cfg.strip_ladder[0] >= c.map.half_width())
    throw DomainError("eps0 must sit strictly inside the map's strip");

  ReduceContext ctx;
  ctx.c = &c;
  ctx.pq = pq;
  ctx.q = q;

  // Admission: condition (cond) within the delta1 budget.
  std::vector<MatrixFunction> prefix = iterate_prefix(c, q);
  ctx.prefix = &prefix;
  const double eps0 = cfg.strip_ladder[0];
  std::vector<double> log_norms;
  log_norms.reserve(q + 1);
  for (int k = 0; k <= q; ++k)
    log_norms.push_back(std::log(prefix[k].certified_sup_norm(eps0)));
  const double delta1 =
      std::max(0.0, *std::max_element(log_norms.begin(), log_norms.end()) / q);
  cfg.delta1 = delta1;
  ctx.cfg = cfg;
  ctx.diag["delta1"] = delta1;
  ctx.diag["delta1_q"] = delta1 * q;
  ctx.diag["cond_profile"] = log_norms;
  if (delta1 * q > cfg.delta1q_max)
    throw CondFailed("delta1 * q = " + std::to_string(delta1 * q) +
                     " exceeds the budget " + std::to_string(cfg.delta1q_max));

  // Trace concentration (the 1/q-periodicity of t forces it).
  const double e_prime = cfg.strip_ladder[2];
  ctx.t = prefix[q].trace().compressed(0.0, 1e-15);
  const cdouble t0c = ctx.t.coeff(0);
  ctx.t0 = t0c.real();
  const double conc =
      (ctx.t - StripFunction::constant(t0c, ctx.t.half_width()))
          .upper_norm(e_prime);
  const double conc_threshold = std::exp(-cfg.delta3 * q);
  ctx.diag["t_mean"] = ctx.t0;
  ctx.diag["t_concentration"] = conc;
  ctx.diag["t_concentration_threshold"] = conc_threshold;
  if (conc > conc_threshold)
    throw TraceNotConcentrated(
        "||t - t_mean|| = " + std::to_string(conc) + " above e^{-delta3 q} = " +
        std::to_string(conc_threshold) +
        " (q too small or delta1 too large)");

  // Case split on the trace mean.
  const double margin = std::abs(2.0 - std::abs(ctx.t0));
  const double thr = std::exp(-cfg.C0 * cfg.C0 * cfg.d1q_eff(q));
  ctx.diag["case_margin"] = margin;
  ctx.diag["case_threshold"] = thr;
  if (std::abs(ctx.t0) < 2.0 && margin >= thr) return elliptic_path(ctx);
  if (std::abs(ctx.t0) > 2.0 && margin >= thr) return hyperbolic_path(ctx);
  return parabolic_path(ctx);
}

double transfer_to_irrational(const ReductionResult& r, const Cocycle& c,
                              const BigFloat& alpha, const Rational& pq,
                              double eps_prime) {
  if (eps_prime >= r.eps)
    throw DomainError("transfer_to_irrational: need eps' < the bound's strip");
  const double dB = std::sqrt(
      std::pow(r.B.a.derivative_upper_norm(eps_prime), 2.0) +
      std::pow(r.B.b.derivative_upper_norm(eps_prime), 2.0) +
      std::pow(r.B.c.derivative_upper_norm(eps_prime), 2.0) +
      std::pow(r.B.d.derivative_upper_norm(eps_prime), 2.0));
  const double gap = static_cast<double>(
      rational_gap(alpha, BigInt(pq.p), BigInt(pq.q)));
  const double nA = c.map.upper_norm(r.eps);
  const double nB = r.B.upper_norm(r.eps);
  return r.residual + nA * nB * gap * dB;
}

}  // namespace qpc
