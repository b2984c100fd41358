#include "qpc/cocycle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "qpc/errors.hpp"

namespace qpc {

namespace {
constexpr double kCoeffOverflow = 1e300;
constexpr double kPi = std::numbers::pi;
}  // namespace

Cocycle::Cocycle(Frequency alpha_, MatrixFunction map_, double sl2_tol)
    : alpha(std::move(alpha_)), map(std::move(map_)) {
  const double defect = map.sl2_defect();
  if (defect > sl2_tol * std::max(1.0, map.max_abs_coeff()))
    throw DomainError("cocycle map is not SL(2,R) on the real line, defect " +
                      std::to_string(defect));
}

Cocycle schrodinger(const StripFunction& v, double E, const Frequency& alpha) {
  if (!v.is_real_on_real(1e-9 * std::max(1.0, v.max_abs_coeff())))
    throw DomainError("potential must be real on the real line");
  const double hw = v.half_width();
  const StripFunction e_minus_v = StripFunction::constant(E, hw) - v;
  return Cocycle(alpha,
                 MatrixFunction(e_minus_v, StripFunction::constant(-1.0, hw),
                                StripFunction::constant(1.0, hw),
                                StripFunction::constant(0.0, hw)));
}

Cocycle almost_mathieu(double lambda, double E, const Frequency& alpha,
                       double half_width) {
  return schrodinger(StripFunction::cosine(2.0 * lambda, half_width), E,
                     alpha);
}

std::vector<MatrixFunction> iterate_prefix(const Cocycle& c, int k) {
  if (k < 0) throw DomainError("iterate: k must be >= 0");
  const double alpha = c.alpha.approx();
  std::vector<MatrixFunction> out;
  out.reserve(k + 1);
  out.push_back(MatrixFunction::identity(c.map.half_width()));
  for (int j = 1; j <= k; ++j) {
    MatrixFunction next = c.map.shifted((j - 1) * alpha) * out.back();
    next = next.compressed(0.0, 1e-15);  // drop convolution dust
    if (next.max_abs_coeff() > kCoeffOverflow)
      throw OverflowError(
          "iterate: coefficient magnitude exceeded 1e300 at k=" +
          std::to_string(j) + " (uniform growth; use the log-scaled path)");
    out.push_back(std::move(next));
  }
  return out;
}

MatrixFunction iterate(const Cocycle& c, int k) {
  return iterate_prefix(c, k).back();
}

double lyapunov(const Cocycle& c, double eps, long n, int grid) {
  if (n < 1) throw DomainError("lyapunov: n must be >= 1");
  if (grid < 1) throw DomainError("lyapunov: grid must be >= 1");
  const double alpha = c.alpha.approx();
  double acc = 0.0;
  // Fixed summation order for reproducibility.
  for (int g = 0; g < grid; ++g) {
    const double x0 = static_cast<double>(g) / grid;
    Eigen::Matrix2cd m = Eigen::Matrix2cd::Identity();
    double log_scale = 0.0;
    for (long j = 0; j < n; ++j) {
      const cdouble z(x0 + j * alpha, eps);
      m = c.map.eval(z) * m;
      const double s = m.norm();  // Frobenius renormalization
      if (s > 1e100 || s < 1e-100) {
        m /= s;
        log_scale += std::log(s);
      }
    }
    acc += (log_scale + std::log(op_norm(m))) / n;
  }
  return acc / grid;
}

CondReport cond_test(const Cocycle& c, double eps0) {
  if (!c.alpha.is_rational())
    throw DomainError("cond_test requires an exact rational frequency");
  const Rational pq = c.alpha.rat();
  const int q = static_cast<int>(pq.q);
  const std::vector<MatrixFunction> prefix = iterate_prefix(c, q);
  CondReport rep;
  rep.log_norms.reserve(q + 1);
  for (int k = 0; k <= q; ++k)
    rep.log_norms.push_back(std::log(prefix[k].certified_sup_norm(eps0)));
  rep.delta1 =
      *std::max_element(rep.log_norms.begin(), rep.log_norms.end()) / q;
  rep.delta1 = std::max(rep.delta1, 0.0);
  return rep;
}

std::optional<long> subcritical_witness(const Cocycle& c, double eps0,
                                        double delta, long n_max, int grid) {
  if (delta <= 0.0) throw DomainError("delta must be positive");
  const double alpha = c.alpha.approx();
  const double line = eps0 * (1.0 - 1e-9);
  // running_max[k] = max over the sampled strip of ln ||A_k||; build all k
  // incrementally per grid point, on both boundary lines.
  std::vector<double> log_sup(n_max + 1, 0.0);
  for (double y : {line, -line}) {
    for (int g = 0; g < grid; ++g) {
      const double x0 = static_cast<double>(g) / grid;
      Eigen::Matrix2cd m = Eigen::Matrix2cd::Identity();
      double log_scale = 0.0;
      for (long k = 1; k <= n_max; ++k) {
        m = c.map.eval(cdouble(x0 + (k - 1) * alpha, y)) * m;
        const double s = m.norm();
        if (s > 1e100) {
          m /= s;
          log_scale += std::log(s);
        }
        log_sup[k] = std::max(log_sup[k], log_scale + std::log(op_norm(m)));
      }
    }
  }
  double running = 0.0;
  for (long n = 1; n <= n_max; ++n) {
    running = std::max(running, log_sup[n]);
    if (running <= delta * n) return n;
  }
  return std::nullopt;
}

std::string regime_name(Regime r) {
  switch (r) {
    case Regime::UH: return "UH";
    case Regime::Supercritical: return "supercritical";
    case Regime::Subcritical: return "subcritical";
    case Regime::Critical: return "critical";
    case Regime::Undetermined: return "undetermined";
  }
  return "undetermined";
}

namespace {

// Projective action of a real 2x2 matrix on direction angles in [0, pi).
double project_angle(const Eigen::Matrix2d& m, double phi) {
  const Eigen::Vector2d v(std::cos(phi), std::sin(phi));
  const Eigen::Vector2d w = m * v;
  double psi = std::atan2(w.y(), w.x());
  if (psi < 0.0) psi += kPi;
  if (psi >= kPi) psi -= kPi;
  return psi;
}

// Strict invariance of the projective interval [center-h, center+h] under
// all sampled n-step transfer matrices.  Sound up to grid resolution: a
// cone strictly contracted everywhere certifies uniform hyperbolicity.
bool cone_invariant(const std::vector<Eigen::Matrix2d>& blocks, double center,
                    double h) {
  const double margin = 0.05 * h;
  for (const Eigen::Matrix2d& m : blocks) {
    // Mobius maps are monotone on the projective circle: checking the
    // endpoints plus the midpoint orientation suffices.
    double lo = project_angle(m, center - h);
    double hi = project_angle(m, center + h);
    double mid = project_angle(m, center);
    auto dist = [&](double x) {
      double dd = x - center;
      while (dd > kPi / 2) dd -= kPi;
      while (dd < -kPi / 2) dd += kPi;
      return dd;
    };
    const double dlo = dist(lo), dhi = dist(hi), dmid = dist(mid);
    const double inner = h - margin;
    if (std::abs(dlo) > inner || std::abs(dhi) > inner ||
        std::abs(dmid) > inner)
      return false;
  }
  return true;
}

}  // namespace

RegimeReport classify(const Cocycle& c, const std::vector<double>& eps_grid,
                      const ClassifyOptions& opt) {
  RegimeReport rep;
  rep.n_used = opt.n;
  rep.L0 = lyapunov(c, 0.0, opt.n, opt.grid);
  for (double e : eps_grid)
    rep.profile.emplace_back(e, lyapunov(c, e, opt.n, opt.grid));

  // Cone certificate scan: constant cones over a deterministic grid of
  // centers/widths, at increasing block depth.
  const double alpha = c.alpha.approx();
  for (int depth : opt.cone_depths) {
    std::vector<Eigen::Matrix2d> blocks;
    blocks.reserve(opt.cone_grid);
    bool overflow = false;
    for (int g = 0; g < opt.cone_grid && !overflow; ++g) {
      const double x0 = static_cast<double>(g) / opt.cone_grid;
      Eigen::Matrix2cd m = Eigen::Matrix2cd::Identity();
      for (int j = 0; j < depth; ++j)
        m = c.map.eval(cdouble(x0 + j * alpha, 0.0)) * m;
      if (!m.allFinite()) {
        overflow = true;
        break;
      }
      blocks.push_back(m.real());
    }
    if (overflow) continue;
    bool found = false;
    for (int ci = 0; ci < 32 && !found; ++ci) {
      const double center = kPi * ci / 32.0;
      for (double h : {kPi / 4, kPi / 8, kPi / 16}) {
        if (cone_invariant(blocks, center, h)) {
          rep.uh_verdict = true;
          rep.certificate = "cone(center=" + std::to_string(center) +
                            ",half_width=" + std::to_string(h) +
                            ",depth=" + std::to_string(depth) + ")";
          found = true;
          break;
        }
      }
    }
    if (rep.uh_verdict) break;
  }

  if (rep.uh_verdict) {
    rep.classification = Regime::UH;
    return rep;
  }
  if (rep.L0 > opt.positivity_threshold) {
    rep.classification = Regime::Supercritical;
    return rep;
  }
  double max_profile = rep.L0;
  for (const auto& [e, l] : rep.profile) max_profile = std::max(max_profile, l);
  if (!rep.profile.empty() && max_profile < opt.positivity_threshold) {
    rep.classification = Regime::Subcritical;
    return rep;
  }
  rep.classification =
      rep.profile.empty() ? Regime::Undetermined : Regime::Critical;
  return rep;
}

}  // namespace qpc
