#ifndef QPC_COCYCLE_HPP
#define QPC_COCYCLE_HPP

#include <optional>
#include <string>
#include <vector>

#include "qpc/arithmetic.hpp"
#include "qpc/matrix_fn.hpp"

namespace qpc {

// One-frequency cocycle (alpha, A): (x, w) -> (x + alpha, A(x) w).
struct Cocycle {
  Frequency alpha;
  MatrixFunction map;  // real-symmetric, det == 1 on R to tolerance

  Cocycle(Frequency alpha_, MatrixFunction map_, double sl2_tol = 1e-10);
};

// Schrodinger cocycle [[E - v(x), -1], [1, 0]].
Cocycle schrodinger(const StripFunction& v, double E, const Frequency& alpha);
// v = 2 lambda cos(2 pi x)
Cocycle almost_mathieu(double lambda, double E, const Frequency& alpha,
                       double half_width);

// A_k as Fourier data: A(x + (k-1) alpha) ... A(x).  Coefficient-space
// products keep A_k an analytic object (the reducer needs it); magnitudes
// above 1e300 abort with OverflowError, in which case use the pointwise
// log-scaled path (lyapunov) instead.
MatrixFunction iterate(const Cocycle& c, int k);
// A_0 .. A_k in one pass.
std::vector<MatrixFunction> iterate_prefix(const Cocycle& c, int k);

// (1/n) * grid average over Im z = eps of ln ||A_n(z)||, via sequentially
// renormalized pointwise products; never forms A_n's Fourier data.
double lyapunov(const Cocycle& c, double eps, long n, int grid = 64);

// Condition (cond) data: delta1 = (1/q) max_{0<=k<=q} ln ||A_k||_{eps0}
// (upper strip norms), plus the per-k profile.
struct CondReport {
  double delta1 = 0.0;
  std::vector<double> log_norms;  // index k = 0..q
};
CondReport cond_test(const Cocycle& c, double eps0);

// Smallest n <= n_max with max_{0<=k<=n} ln(sup ||A_k|| on the eps0 strip)
// <= delta * n, if any.  Sup norms are sampled pointwise on strip lines.
std::optional<long> subcritical_witness(const Cocycle& c, double eps0,
                                        double delta, long n_max,
                                        int grid = 64);

enum class Regime { UH, Supercritical, Subcritical, Critical, Undetermined };

std::string regime_name(Regime r);

struct RegimeReport {
  double L0 = 0.0;
  std::vector<std::pair<double, double>> profile;  // (eps, L(eps))
  bool uh_verdict = false;
  std::string certificate;  // cone parameters when uh_verdict holds
  Regime classification = Regime::Undetermined;
  long n_used = 0;
};

struct ClassifyOptions {
  long n = 10000;
  int grid = 64;
  double positivity_threshold = 1e-3;  // L0 above this counts as positive
  int cone_grid = 256;
  std::vector<int> cone_depths = {1, 2, 4, 8, 16};
};

RegimeReport classify(const Cocycle& c, const std::vector<double>& eps_grid,
                      const ClassifyOptions& opt = {});

}  // namespace qpc

#endif  // QPC_COCYCLE_HPP
