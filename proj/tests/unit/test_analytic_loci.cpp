#include "hilltop/analytic_loci.hpp"

#include <gtest/gtest.h>

#include <complex>
#include <random>

namespace hilltop {
namespace {

constexpr double kAlpha = 3.1;
constexpr double kBetaMixed = -1.3;
constexpr double kBetaMutual = 1.3;

TEST(TraceZeroPoint, BautinAtGammaZero) {
  const auto h = trace_zero_point(Params{kAlpha, kBetaMixed, 0.0, 0.0});
  EXPECT_EQ(h.kind, TraceZeroKind::hopf);
  ASSERT_TRUE(h.ell1.has_value());
  EXPECT_EQ(*h.ell1, 0.0);
  EXPECT_EQ(h.criticality(), Criticality::degenerate);
  EXPECT_NEAR(h.omega, 2.0 * std::sqrt(4.03 * 3.24), 1e-12);
  EXPECT_NEAR(h.omega, 7.22695, 1e-5);
  EXPECT_NEAR(h.eigen_frequency, std::sqrt(4.0 * 4.03), 1e-12);
}

TEST(TraceZeroPoint, MutualisticIsNeutralSaddle) {
  for (double g : {-5.0, -1.0, 0.0, 0.5, 3.0}) {
    EXPECT_EQ(trace_zero_point(Params{kAlpha, kBetaMutual, g, 0.0}).kind,
              TraceZeroKind::neutral_saddle);
  }
}

TEST(TraceZeroPoint, TakensBogdanovBoundary) {
  const auto [gm, gp] = takens_bogdanov_gammas(kAlpha, kBetaMixed);
  for (double g : {gm, gp}) {
    const auto h = trace_zero_point(Params{kAlpha, kBetaMixed, g, 0.0});
    EXPECT_EQ(h.kind, TraceZeroKind::takens_bogdanov);
    EXPECT_EQ(h.omega, 0.0);
    EXPECT_FALSE(h.ell1.has_value());
  }
  EXPECT_NEAR(gp, 3.613474, 1e-6);
}

TEST(TraceZeroPoint, SingularAtPole) {
  EXPECT_THROW(trace_zero_point(Params{1.0, -1.0, 0.5, 0.0}), Error);
}

TEST(TraceZeroPoint, CriticalityFollowsGammaSign) {
  EXPECT_EQ(trace_zero_point(Params{kAlpha, kBetaMixed, 1.0, 0.0}).criticality(),
            Criticality::supercritical);
  EXPECT_EQ(trace_zero_point(Params{kAlpha, kBetaMixed, -1.0, 0.0}).criticality(),
            Criticality::subcritical);
}

// Independent first Lyapunov coefficient for planar fields with quadratic
// nonlinearity B(u, v) = (2 u1 v1, 2 u2 v2), normalised by <p, q> = 1.
double lyapunov_oracle(double a, double b, double g) {
  using C = std::complex<double>;
  using CV = Eigen::Vector2cd;
  const double x = -g / (a + b);
  Mat2 A;
  A << 2 * x, 2 * a, 2 * b, -2 * x;
  const double w = std::sqrt(A.determinant());
  const C I(0.0, 1.0);
  CV q(2 * a, I * w - 2 * x);
  CV p(2 * b, -I * w - 2 * x);  // A^T p = -i w p
  p /= std::conj(p.dot(q));     // makes p^H q = 1
  auto B = [](const CV& u, const CV& v) { return CV(2.0 * u(0) * v(0), 2.0 * u(1) * v(1)); };
  const Eigen::Matrix2cd Ac = A.cast<C>();
  const CV r1 = Ac.fullPivLu().solve(B(q, q.conjugate()));
  const CV r2 = (2.0 * I * w * Eigen::Matrix2cd::Identity() - Ac).fullPivLu().solve(B(q, q));
  const C val = -2.0 * p.dot(B(q, r1)) + p.dot(B(q.conjugate(), r2));
  return val.real() / (2.0 * w);
}

TEST(TraceZeroPoint, Ell1SignMatchesIndependentNormalForm) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  int checked = 0;
  while (checked < 100) {
    // normalised quadrant alpha > |beta| > 0 > beta
    const double a = 0.5 + 3.0 * ud(rng);
    const double b = -a * (0.05 + 0.9 * ud(rng));
    const auto [gm, gp] = takens_bogdanov_gammas(a, b);
    const double g = gm + (gp - gm) * (0.02 + 0.96 * ud(rng));
    if (std::abs(g) < 1e-3) continue;
    const auto h = trace_zero_point(Params{a, b, g, 0.0});
    ASSERT_EQ(h.kind, TraceZeroKind::hopf);
    EXPECT_EQ(*h.ell1 < 0.0, lyapunov_oracle(a, b, g) < 0.0);
    EXPECT_EQ(std::signbit(*h.ell1), std::signbit(b * g));
    ++checked;
  }
}

TEST(TakensBogdanov, Values) {
  const auto [gm, gp] = takens_bogdanov_gammas(2.0, -0.5);
  EXPECT_NEAR(gm, -1.5, 1e-14);
  EXPECT_NEAR(gp, 1.5, 1e-14);
  const auto [hm, hp] = takens_bogdanov_gammas(1.0, -1.0);
  EXPECT_EQ(hm, 0.0);
  EXPECT_EQ(hp, 0.0);
  EXPECT_THROW(takens_bogdanov_gammas(3.1, 1.3), Error);
  EXPECT_THROW(takens_bogdanov_gammas(3.1, 0.0), Error);
}

TEST(TakensBogdanov, DoubleZeroAtEquilibrium) {
  for (auto [a, b] : {std::pair{3.1, -1.3}, std::pair{2.0, -0.5}}) {
    const auto [gm, gp] = takens_bogdanov_gammas(a, b);
    for (double g : {gm, gp}) {
      const Params p{a, b, g, 0.0};
      const State s(-g / (a + b), g / (a + b));
      const Mat2 j = eval_jacobian(s, p);
      EXPECT_LE(eval_field(s, p).norm(), 1e-12);
      EXPECT_LE(std::abs(j.trace()) + std::abs(j.determinant()), 1e-10);
    }
  }
}

// Oracle: the cusp is the common critical point of lambda(x) and gamma(x) on
// the saddle-node locus. Locate it by bisection on lambda'(x) alone and check
// gamma'(x) vanishes there too.
double locus_dlambda(double a, double b, double x) {
  return x + b - a * a * b / (x * x) - a * a * b * b / (x * x * x);
}
double locus_dgamma(double a, double b, double x) {
  return x - b - a * a * b / (x * x) + a * a * b * b / (x * x * x);
}

double critical_point_oracle(double a, double b, double lo, double hi) {
  // lambda'(x) = (x^3 - a^2 b)(x + b)/x^3 ; bracket the root with fixed sign change.
  double flo = locus_dlambda(a, b, lo);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = locus_dlambda(a, b, mid);
    if ((fm < 0) == (flo < 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

TEST(CuspPoint, MatchesCriticalPointOracle) {
  {
    const auto c = cusp_point(3.1, 1.3);
    const double x = critical_point_oracle(3.1, 1.3, 1.0, 3.0);
    EXPECT_NEAR(locus_dgamma(3.1, 1.3, x), 0.0, 1e-9);
    const auto pt = saddle_node_point(3.1, 1.3, x);
    EXPECT_NEAR(c.lambda, pt.lambda, 1e-6);
    EXPECT_NEAR(c.gamma, pt.gamma, 1e-6);
    EXPECT_NEAR(c.lambda, 12.600817783, 1e-8);
    EXPECT_NEAR(c.gamma, 3.551409412, 1e-8);
  }
  {
    // mixed case: the cusp sits on the x < 0 branch
    const auto c = cusp_point(3.1, -1.3);
    const double x = critical_point_oracle(3.1, -1.3, -3.0, -0.5);
    EXPECT_NEAR(locus_dgamma(3.1, -1.3, x), 0.0, 1e-9);
    const auto pt = saddle_node_point(3.1, -1.3, x);
    EXPECT_NEAR(c.lambda, pt.lambda, 1e-6);
    EXPECT_NEAR(c.gamma, pt.gamma, 1e-6);
    EXPECT_NEAR(c.x, x, 1e-9);
  }
}

TEST(CuspPoint, SymmetricAndUnitCases) {
  EXPECT_EQ(cusp_point(2.0, 2.0).gamma, 0.0);
  const auto c = cusp_point(1.0, 1.0);
  EXPECT_DOUBLE_EQ(c.lambda, 3.0);
  EXPECT_DOUBLE_EQ(c.gamma, 0.0);
  EXPECT_THROW(cusp_point(0.0, 1.0), Error);
}

void expect_on_saddle_node_surface(double a, double b, const SNLocusPoint& pt, double tol) {
  const Params p = Params::from_lambda(a, b, pt.gamma, pt.lambda);
  const State f = eval_field_lambda(pt.state(), a, b, pt.gamma, pt.lambda);
  EXPECT_LE(f.norm(), tol * std::max(1.0, std::abs(pt.lambda)));
  EXPECT_LE(std::abs(eval_jacobian(pt.state(), p).determinant()),
            tol * std::max(1.0, std::abs(pt.x * pt.y)));
}

TEST(SaddleNodeLocus, Examples) {
  const double xs[] = {1.0};
  const auto pts = saddle_node_locus(3.1, 1.3, xs);
  ASSERT_EQ(pts.size(), 1u);
  EXPECT_NEAR(pts[0].lambda, 22.41345, 1e-5);
  EXPECT_NEAR(pts[0].gamma, 3.57255, 1e-5);
  EXPECT_NEAR(pts[0].y, 4.03, 1e-14);
  expect_on_saddle_node_surface(3.1, 1.3, pts[0], 1e-12);

  const auto unit = saddle_node_point(1.0, 1.0, 1.0);
  EXPECT_DOUBLE_EQ(unit.lambda, 3.0);
  EXPECT_DOUBLE_EQ(unit.gamma, 0.0);
  EXPECT_DOUBLE_EQ(unit.y, 1.0);

  const auto mixed = saddle_node_point(3.1, -1.3, -1.0);
  EXPECT_NEAR(mixed.y, 4.03, 1e-14);
  expect_on_saddle_node_surface(3.1, -1.3, mixed, 1e-10);

  EXPECT_THROW(saddle_node_point(3.1, 1.3, 0.0), Error);
}

TEST(SaddleNodeLocus, ResidualProperty) {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> ud(-4.0, 4.0);
  for (int trial = 0; trial < 500; ++trial) {
    const double a = ud(rng);
    const double b = ud(rng);
    const double x = ud(rng);
    if (std::abs(x) < 0.2 || std::abs(a * b) < 1e-2) continue;
    expect_on_saddle_node_surface(a, b, saddle_node_point(a, b, x), 1e-10);
  }
}

TEST(SaddleNodeLocus, PointsAtGammaRecoverParametrisation) {
  for (double x : {-3.0, -1.0, -0.4, 0.6, 2.0}) {
    const auto pt = saddle_node_point(3.1, -1.3, x);
    const auto hits = saddle_node_points_at_gamma(3.1, -1.3, pt.gamma);
    bool found = false;
    for (const auto& h : hits) {
      if (std::abs(h.x - x) < 1e-8) {
        found = true;
        EXPECT_NEAR(h.lambda, pt.lambda, 1e-7 * std::max(1.0, std::abs(pt.lambda)));
      }
    }
    EXPECT_TRUE(found) << "x = " << x;
  }
}

TEST(AnalyticProperties, RandomMixedSamples) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> ud(-4.0, 4.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int inside = 0;
  int outside = 0;
  while (inside + outside < 400) {
    const double a = ud(rng);
    const double b = ud(rng);
    if (a * b >= 0.0 || std::abs(a + b) <= 0.1) continue;
    const auto [gm, gp] = takens_bogdanov_gammas(a, b);
    const bool in = (inside + outside) % 2 == 0;
    const double width = gp - gm;
    const double g = in ? gm + width * (0.01 + 0.98 * unit(rng))
                        : (unit(rng) < 0.5 ? gm - width * (0.01 + unit(rng))
                                           : gp + width * (0.01 + unit(rng)));
    const Params p{a, b, g, 0.0};
    const State s(-g / (a + b), g / (a + b));
    const Mat2 j = eval_jacobian(s, p);
    EXPECT_LE(std::abs(j.trace()), 1e-12);
    EXPECT_LE(eval_field(s, p).norm(), 1e-10 * std::max(1.0, s.squaredNorm()));
    const auto h = trace_zero_point(p);
    if (in) {
      EXPECT_GT(j.determinant(), 0.0);
      EXPECT_EQ(h.kind, TraceZeroKind::hopf);
      ++inside;
    } else {
      EXPECT_LT(j.determinant(), 0.0);
      EXPECT_EQ(h.kind, TraceZeroKind::neutral_saddle);
      ++outside;
    }
  }
}

}  // namespace
}  // namespace hilltop
