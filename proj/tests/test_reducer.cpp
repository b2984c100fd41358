#include <doctest.h>

#include <Eigen/LU>

#include <cmath>
#include <numbers>
#include <random>

#include "qpc/errors.hpp"
#include "qpc/reducer.hpp"

using namespace qpc;

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;

Eigen::Matrix2d diag2(double a, double d) {
  Eigen::Matrix2d m = Eigen::Matrix2d::Zero();
  m(0, 0) = a;
  m(1, 1) = d;
  return m;
}

StripFunction rand_real_trig(std::mt19937& rng, int order, double hw,
                             double scale) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<cdouble> c(2 * order + 1);
  for (cdouble& v : c) v = scale * cdouble(u(rng), u(rng));
  return StripFunction(std::move(c), hw).real_part_symmetrized();
}
}  // namespace

TEST_CASE("factor_multiplier: constants, coboundaries, composite") {
  const Rational pq{3, 7};
  ReductionConfig cfg = ReductionConfig::defaults_for(0.05);
  SUBCASE("unimodular constant") {
    const StripFunction mu =
        StripFunction::constant(std::polar(1.0, std::numbers::pi / 3.0), 0.1);
    const auto [psi, theta] = factor_multiplier(mu, pq, cfg);
    CHECK(psi.upper_norm(0.05) < 1e-12);
    CHECK(std::abs(theta.coeff(0) - cdouble(1.0 / 6.0, 0.0)) < 1e-12);
  }
  SUBCASE("pure coboundary recovers g modulo constants") {
    std::mt19937 rng(51);
    StripFunction g = rand_real_trig(rng, 5, 0.1, 0.05);
    // strip frequencies in qZ so the planted g is identifiable
    g = g.q_complement(7);
    const StripFunction arg = g.shifted(pq.value()) - g;
    const StripFunction mu = transform_on_grid(
        arg, [](cdouble v) { return std::exp(cdouble(0.0, kTwoPi) * v); }, 64,
        1e-16);
    const auto [psi, theta] = factor_multiplier(mu, pq, cfg);
    CHECK(theta.upper_norm(0.04) < 1e-9);
    for (int k = -5; k <= 5; ++k) {
      if (k == 0) continue;
      CHECK(std::abs(psi.coeff(k) - g.coeff(k)) < 1e-9);
    }
  }
  SUBCASE("composite recovers the 1/q-periodic part and the coboundary") {
    std::mt19937 rng(52);
    StripFunction g = rand_real_trig(rng, 5, 0.1, 0.04).q_complement(7);
    const StripFunction theta_star =
        StripFunction::harmonic(7, 0.01, 0.1) +
        StripFunction::harmonic(-7, 0.01, 0.1) +
        StripFunction::constant(0.23, 0.1);
    const StripFunction arg = theta_star + g.shifted(pq.value()) - g;
    const StripFunction mu = transform_on_grid(
        arg, [](cdouble v) { return std::exp(cdouble(0.0, kTwoPi) * v); }, 64,
        1e-16);
    const auto [psi, theta] = factor_multiplier(mu, pq, cfg);
    for (int k = -7; k <= 7; ++k) {
      CHECK(std::abs(theta.coeff(k) - theta_star.coeff(k)) < 1e-9);
      if (k != 0 && k % 7 != 0)
        CHECK(std::abs(psi.coeff(k) - g.coeff(k)) < 1e-9);
    }
  }
  SUBCASE("exactness identity is coefficient-exact") {
    std::mt19937 rng(53);
    for (int trial = 0; trial < 5; ++trial) {
      const StripFunction phi = rand_real_trig(rng, 8, 0.1, 0.1);
      const StripFunction mu = transform_on_grid(
          phi, [](cdouble v) { return std::exp(cdouble(0.0, kTwoPi) * v); },
          64, 1e-16);
      const auto [psi, theta] = factor_multiplier(mu, pq, cfg);
      const LogBranch lb = log_branch(mu);
      const StripFunction defect =
          lb.phi - theta - psi.shifted(pq.value()) + psi;
      CHECK(defect.upper_norm(0.0) < 1e-10);
    }
  }
  SUBCASE("winding is rejected") {
    const StripFunction mu = StripFunction::harmonic(1, 1.0, 0.1);
    CHECK_THROWS_AS((void)factor_multiplier(mu, pq, cfg), WindingNonzero);
  }
}

TEST_CASE("reduce: constant rotation is elliptic with identity conjugacy") {
  const Frequency alpha = Frequency::rational(3, 7);
  const Cocycle c(alpha, MatrixFunction::rotation(0.17, 0.1));
  ReductionConfig cfg = ReductionConfig::defaults_for(0.05);
  const ReductionResult r = reduce(c, cfg);
  CHECK(r.kind == ReductionCase::Elliptic);
  CHECK(r.residual < 1e-10);
  // B within 1e-8 of a constant
  const Eigen::Matrix2cd b0 = r.B.eval(cdouble(0.0, 0.0));
  for (int j = 0; j < 64; ++j) {
    const cdouble z(static_cast<double>(j) / 64, 0.0);
    CHECK((r.B.eval(z) - b0).norm() < 1e-8);
  }
  // theta is the rotation angle up to sign
  CHECK(std::abs(std::abs(r.theta.coeff(0).real()) - 0.17) < 1e-9);
  CHECK(r.B.sl2_defect() < 1e-8);
  CHECK(r.diagnostics.at("trace_invariance_defect").get<double>() < 1e-8);
}

TEST_CASE("reduce: constant hyperbolic recovers the diagonal") {
  const Frequency alpha = Frequency::rational(3, 7);
  const double h = 0.3;
  const Cocycle c(alpha, MatrixFunction::constant(
                             diag2(std::exp(h), std::exp(-h)).cast<cdouble>(),
                             0.1));
  ReductionConfig cfg = ReductionConfig::defaults_for(0.05);
  const ReductionResult r = reduce(c, cfg);
  CHECK(r.kind == ReductionCase::Hyperbolic);
  CHECK(r.residual < 1e-8);
  // gamma == e^{h} up to the ordering of the diagonal
  const double g = std::exp(
      kTwoPi * std::abs(r.theta.coeff(0).imag()));
  const double gmean = std::max(std::abs(r.target(0, 0)), std::abs(r.target(1, 1)));
  CHECK(gmean == doctest::Approx(std::exp(h)).epsilon(1e-8));
  CHECK(g == doctest::Approx(std::exp(h)).epsilon(1e-8));
  CHECK(r.diagnostics.at("gamma_q_defect").get<double>() < 1e-6);
}

TEST_CASE("reduce: constant conjugated elliptic recovers a rotation") {
  const Frequency alpha = Frequency::rational(3, 7);
  Eigen::Matrix2d m;
  m << 1.2, 0.3, 0.1, (1.0 + 0.3 * 0.1) / 1.2;  // det 1
  const Eigen::Matrix2d rot = [&] {
    const double a = kTwoPi * 0.17;
    Eigen::Matrix2d r_;
    r_ << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
    return r_;
  }();
  const Eigen::Matrix2d a_mat = m * rot * m.inverse();
  const Cocycle c(alpha, MatrixFunction::constant(a_mat.cast<cdouble>(), 0.1));
  ReductionConfig cfg = ReductionConfig::defaults_for(0.05);
  const ReductionResult r = reduce(c, cfg);
  CHECK(r.kind == ReductionCase::Elliptic);
  CHECK(r.residual < 1e-9);
}

TEST_CASE("reduce: analytic near-rotation cocycle, eigenrelation verified") {
  const Frequency alpha = Frequency::rational(3, 7);
  const StripFunction theta = StripFunction::constant(0.17, 0.1) +
                              StripFunction::cosine(0.01, 0.1);
  const Cocycle c(alpha, MatrixFunction::rotation(theta));
  ReductionConfig cfg = ReductionConfig::defaults_for(0.05);
  const ReductionResult r = reduce(c, cfg);
  CHECK(r.kind == ReductionCase::Elliptic);
  // conjugated map equals R_{theta(x)} pointwise
  const MatrixFunction rot_theta = MatrixFunction::rotation(r.theta);
  for (int j = 0; j < 64; ++j) {
    const cdouble z(static_cast<double>(j) / 64, 0.0);
    const Eigen::Matrix2cd mz = r.B.eval(z + cdouble(alpha.approx(), 0.0)) *
                                c.map.eval(z) * r.B_inv.eval(z);
    CHECK((mz - rot_theta.eval(z)).norm() < 1e-8);
  }
  // theta is 1/q-periodic to tolerance tied to the residual
  const double offq =
      (r.theta - r.theta.q_projection(7)).upper_norm(r.eps);
  CHECK(offq <= 10.0 * r.residual + 1e-12);
}

TEST_CASE("reduce: rational rotation hits the parabolic DFT branch") {
  SUBCASE("A_q = id exactly (l = 0)") {
    const Frequency alpha = Frequency::rational(2, 7);
    const Cocycle c(alpha, MatrixFunction::rotation(3.0 / 7.0, 0.1));
    ReductionConfig cfg = ReductionConfig::defaults_for(0.05);
    const ReductionResult r = reduce(c, cfg);
    CHECK(r.kind == ReductionCase::ParabolicDft);
    CHECK(r.residual < 1e-9);
    CHECK(r.diagnostics.at("parseval_err").get<double>() < 1e-9);
    CHECK(r.diagnostics.at("wk_identity_defect").get<double>() < 1e-9);
    // the constant target is the rotation itself
    CHECK((r.target - MatrixFunction::rotation(3.0 / 7.0, 0.1)
                          .eval(cdouble(0.0, 0.0))
                          .real())
              .norm() < 1e-9);
  }
  SUBCASE("A_q = -id exactly (l = 1), recovered angle matches m mod q") {
    const int q = 7, mrot = 2;
    const Frequency alpha = Frequency::rational(3, q);
    const double angle = (2.0 * mrot + 1.0) / (2.0 * q);
    const Cocycle c(alpha, MatrixFunction::rotation(angle, 0.1));
    ReductionConfig cfg = ReductionConfig::defaults_for(0.05);
    const ReductionResult r = reduce(c, cfg);
    CHECK(r.kind == ReductionCase::ParabolicDft);
    CHECK(r.residual < 1e-9);
    const double got = std::atan2(r.target(1, 0), r.target(0, 0)) / kTwoPi;
    const double want = angle;
    const double diff = std::abs(got - want);
    const double diff_mod =
        std::min({diff, std::abs(diff - 1.0), std::abs(diff + 1.0)});
    CHECK(diff_mod < 1e-9);
  }
}

TEST_CASE("wr_fallback: synthetic intertwiner and hypothesis failure") {
  SUBCASE("W built from a known invariant direction") {
    const Frequency alpha = Frequency::rational(3, 7);
    const double h = 0.001;
    const Cocycle c(alpha, MatrixFunction::constant(
                               diag2(std::exp(h), std::exp(-h)).cast<cdouble>(),
                               0.1));
    // W = [[0, v1], [0, v2]] kills u = (1,0) exactly and commutes with A
    // up to O(h); det W == 0 exactly.
    const MatrixFunction W(StripFunction::constant(0.0, 0.1),
                           StripFunction::constant(0.7, 0.1),
                           StripFunction::constant(0.0, 0.1),
                           StripFunction::constant(0.4, 0.1));
    ReductionConfig cfg = ReductionConfig::defaults_for(0.05);
    Eigen::Matrix2d id = Eigen::Matrix2d::Identity();
    const ReductionResult r = wr_fallback(c, W, id, cfg);
    CHECK(r.kind == ReductionCase::WrFallback);
    // recovered direction: first column of B^{-1}-side is u = (1, 0)
    const Eigen::Matrix2cd binv = r.B_inv.eval(cdouble(0.3, 0.0));
    const cdouble cross = binv(1, 0) * 1.0 - binv(0, 0) * 0.0;
    CHECK(std::abs(cross) / binv.col(0).norm() < 1e-8);
    CHECK(r.residual < 0.05);
  }
  SUBCASE("W = id with A far from a rotation fails hypotheses") {
    const Frequency alpha = Frequency::rational(3, 7);
    const Cocycle c = almost_mathieu(0.8, 1.3, alpha, 0.1);
    ReductionConfig cfg = ReductionConfig::defaults_for(0.05);
    const MatrixFunction W = MatrixFunction::identity(0.1);
    Eigen::Matrix2d id = Eigen::Matrix2d::Identity();
    CHECK_THROWS_AS((void)wr_fallback(c, W, id, cfg), HypothesisFailed);
  }
}

TEST_CASE("reduce: almost Mathieu smoke test at q = 21") {
  const Frequency alpha = Frequency::rational(13, 21);
  const Cocycle c = almost_mathieu(0.5, 0.0, alpha, 0.1);
  ReductionConfig cfg = ReductionConfig::defaults_for(0.05);
  const ReductionResult r = reduce(c, cfg);
  CHECK(r.residual < 0.5);
  CHECK(r.residual > 0.0);
  CHECK(r.B.sl2_defect() < 1e-8);
  CHECK(r.diagnostics.at("trace_invariance_defect").get<double>() < 1e-8);
  CHECK(r.diagnostics.at("residual_grid_512").get<double>() <= r.residual);
}

TEST_CASE("cond budget failure surfaces as CondFailed") {
  const Frequency alpha = Frequency::rational(34, 55);
  const Cocycle c = almost_mathieu(3.0, 0.0, alpha, 0.1);
  ReductionConfig cfg = ReductionConfig::defaults_for(0.05);
  CHECK_THROWS_AS((void)reduce(c, cfg), CondFailed);
}

TEST_CASE("q below q_min is rejected") {
  const Frequency alpha = Frequency::rational(1, 3);
  const Cocycle c(alpha, MatrixFunction::rotation(0.17, 0.1));
  ReductionConfig cfg = ReductionConfig::defaults_for(0.05);
  CHECK_THROWS_AS((void)reduce(c, cfg), PreconditionFailed);
}

TEST_CASE("transfer_to_irrational: trivial cases and the shift term") {
  const Frequency alpha = Frequency::rational(3, 7);
  const Cocycle c(alpha, MatrixFunction::rotation(0.17, 0.1));
  ReductionConfig cfg = ReductionConfig::defaults_for(0.05);
  const ReductionResult r = reduce(c, cfg);
  SUBCASE("alpha = p/q gives back the rational residual") {
    const double bound = transfer_to_irrational(
        r, c, BigFloat(3) / 7, Rational{3, 7}, 0.5 * r.eps);
    CHECK(bound == doctest::Approx(r.residual).epsilon(1e-12));
  }
  SUBCASE("constant B contributes no derivative term") {
    // B from the constant-rotation reduction is constant to 1e-8; the bound
    // only grows by |alpha - p/q| ||A|| ||B|| ||dB||, which is ~1e-8 here.
    const BigFloat a = BigFloat(3) / 7 + BigFloat(1) / 100000;
    const double bound =
        transfer_to_irrational(r, c, a, Rational{3, 7}, 0.5 * r.eps);
    CHECK(bound >= r.residual);
    CHECK(bound <= r.residual + 1e-10);
  }
}
