#include "hilltop/codim2.hpp"

#include <gtest/gtest.h>

#include <map>
#include <numbers>
#include <random>

namespace hilltop {
namespace {

constexpr double kAlpha = 3.1;
constexpr double kBeta = -1.3;

// Residual of every block by name.
std::map<std::string, VectorXd> block_residuals(const ComposedProblem& prob, const VectorXd& z) {
  std::map<std::string, VectorXd> out;
  for (const auto& b : prob.blocks()) {
    VectorXd r(b->size());
    b->residual(z, std::span<double>(r.data(), r.size()));
    out[b->name()] = r;
  }
  return out;
}

// Straight segment from a to b; only its end points matter to the algebraic blocks.
OrbitSegment straight(const State& a, const State& b, int intervals = 6, double T = 40.0) {
  return OrbitSegment::sample(OrbitSegment::uniform_mesh(intervals), 4, T,
                              [&](double t) { return t == 1.0 ? b : State(a + t * (b - a)); });
}

// Transversally stable saddle-node state on the locus with the given x.
struct SnCase {
  SNLocusPoint pt;
  Params p;
  Mat2 j;
};

std::optional<SnCase> sn_case(double x) {
  SnCase c;
  c.pt = saddle_node_point(kAlpha, kBeta, x);
  c.p = c.pt.params(kAlpha, kBeta);
  c.j = eval_jacobian(c.pt.state(), c.p);
  if (!(c.j.trace() < 0.0)) return std::nullopt;
  return c;
}

// Random x on the locus away from the pole, with a stable saddle node.
SnCase random_case(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> mag(0.3, 4.0);
  std::bernoulli_distribution sign(0.5);
  for (;;) {
    const double x = sign(rng) ? mag(rng) : -mag(rng);
    if (auto c = sn_case(x)) return *c;
  }
}

TEST(NcSnicSystem, CountsBeforeFreezing) {
  NcSnicProblem prob(kAlpha, OrbitSegment::uniform_mesh(7), 4);
  EXPECT_EQ(prob.reduced_counts().equations, 9);
  EXPECT_EQ(prob.reduced_counts().unknowns, 12);
  EXPECT_EQ(dimension_deficit(prob, {"beta", "gamma"}), 1);
  EXPECT_EQ(dimension_deficit(prob, {"beta", "T"}), 1);
  EXPECT_EQ(dimension_deficit(prob, {"s_plus", "T"}), 1);
}

TEST(SniceroclinicSystem, CountsBeforeFreezing) {
  SniceroclinicProblem prob(kAlpha, OrbitSegment::uniform_mesh(7), 4);
  EXPECT_EQ(prob.reduced_counts().equations, 12);
  EXPECT_EQ(prob.reduced_counts().unknowns, 14);
  EXPECT_EQ(dimension_deficit(prob, {"beta"}), 1);
  EXPECT_EQ(dimension_deficit(prob, {"T"}), 1);
}

TEST(NcSnicSystem, SyntheticPointIsExactForAlgebraicBlocks) {
  std::mt19937_64 rng(20241);
  std::uniform_real_distribution<double> s(1e-4, 1e-2);
  NcSnicProblem prob(kAlpha, OrbitSegment::uniform_mesh(6), 4);
  for (int trial = 0; trial < 200; ++trial) {
    const SnCase c = random_case(rng);
    const State usn = c.pt.state();
    const double s_minus = trial == 0 ? 1e-3 : s(rng);
    const double s_plus = trial == 0 ? -1e-3 : -s(rng);
    // Orientation is fixed by u_- itself, so any unit null vector works.
    const Vec2 v = detail::kernel_direction(c.j);
    const State um = usn + s_minus * v;
    const auto cv = center_vectors(c.j, usn, um);
    const State up = usn + s_plus * cv.w / cv.w.squaredNorm();
    const VectorXd z = prob.pack(straight(um, up), usn, c.p, s_minus, s_plus);
    const auto r = block_residuals(prob, z);
    const double scale = std::max(1.0, usn.norm());
    EXPECT_LE(r.at("equilibrium").cwiseAbs().maxCoeff(), 1e-12 * scale * scale) << usn.transpose();
    EXPECT_LE(r.at("saddle_node").cwiseAbs().maxCoeff(), 1e-12 * scale * scale);
    EXPECT_LE(r.at("departure").cwiseAbs().maxCoeff(), 1e-12 * scale);
    EXPECT_LE(r.at("return").cwiseAbs().maxCoeff(), 1e-12 * scale);
    EXPECT_LT(prob.sn_trace(z), 0.0);
    EXPECT_LE(prob.locus_gap(z), 1e-9 * scale * scale);
  }
}

TEST(NcSnicSystem, ZeroGapsPinTheEnds) {
  const SnCase c = *sn_case(1.2);
  const State usn = c.pt.state();
  NcSnicProblem prob(kAlpha, OrbitSegment::uniform_mesh(6), 4);
  const auto cv = center_vectors(c.j, usn, usn + detail::kernel_direction(c.j));
  // s_- = 0 leaves u_- = u_sn as the only zero of the departure block along v_c.
  const State far = usn + 0.01 * cv.v;
  VectorXd z = prob.pack(straight(far, usn + Vec2(0.3, 0.1)), usn, c.p, 0.0, 0.0);
  auto r = block_residuals(prob, z);
  EXPECT_NEAR(r.at("departure").norm(), 0.01, 1e-14);
  // With u_- = u_sn the orientation reference is void.
  z = prob.pack(straight(usn, usn + Vec2(0.3, 0.1)), usn, c.p, 0.0, 0.0);
  try {
    block_residuals(prob, z);
    ADD_FAILURE() << "expected an orientation error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ambiguous_orientation);
  }
  // s_+ = 0 holds exactly when u_+ - u_sn is orthogonal to w_c.
  const Vec2 tangent(-cv.w.y(), cv.w.x());
  z = prob.pack(straight(far, usn + 0.05 * tangent), usn, c.p, 0.01, 0.0);
  EXPECT_LE(block_residuals(prob, z).at("return").cwiseAbs().maxCoeff(), 1e-15);
}

// Saddle and node at the saddle-node parameters other than the saddle node.
std::optional<State> equilibrium_with(const Params& p, const State& skip, bool saddle) {
  for (const auto& e : find_equilibria(p)) {
    if ((e.state - skip).norm() < 1e-4) continue;
    const double det = e.jacobian.determinant();
    if (saddle ? det < 0.0 : det > 1e-6) return e.state;
  }
  return std::nullopt;
}

TEST(SniceroclinicSystem, SyntheticPointIsExactForAlgebraicBlocks) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> s(1e-4, 1e-2);
  SniceroclinicProblem prob(kAlpha, OrbitSegment::uniform_mesh(6), 4);
  int checked = 0;
  for (int trial = 0; trial < 400 && checked < 200; ++trial) {
    const SnCase c = random_case(rng);
    const State usn = c.pt.state();
    const auto usa = equilibrium_with(c.p, usn, true);
    if (!usa) continue;
    const double s_minus = checked == 0 ? 1e-3 : s(rng);
    const double s_plus = checked == 0 ? 1e-3 : s(rng);
    const State um = usn + s_minus * detail::kernel_direction(c.j);
    const Mat2 js = eval_jacobian(*usa, c.p);
    const StableEigen st = stable_eigen(js, *usa, *usa + Vec2(1.0, 0.3));
    const State up = *usa + s_plus * st.v;
    const VectorXd z = prob.pack(straight(um, up), usn, *usa, c.p, s_minus, s_plus);
    const auto r = block_residuals(prob, z);
    const double scale = std::max({1.0, usn.norm(), usa->norm()});
    EXPECT_LE(r.at("equilibrium_minus").cwiseAbs().maxCoeff(), 1e-12 * scale * scale);
    EXPECT_LE(r.at("equilibrium_plus").cwiseAbs().maxCoeff(), 1e-12 * scale * scale);
    EXPECT_LE(r.at("saddle_node").cwiseAbs().maxCoeff(), 1e-12 * scale * scale);
    EXPECT_LE(r.at("departure").cwiseAbs().maxCoeff(), 1e-12 * scale);
    EXPECT_LE(r.at("arrival").cwiseAbs().maxCoeff(), 1e-12 * scale);
    EXPECT_NEAR(prob.distance(z), s_minus + s_plus, 1e-15);
    EXPECT_FALSE(prob.admissibility(z).has_value());
    ++checked;
  }
  EXPECT_EQ(checked, 200);
}

TEST(SniceroclinicSystem, EndEquilibriumMustBeASaddle) {
  SniceroclinicProblem prob(kAlpha, OrbitSegment::uniform_mesh(6), 4);
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const SnCase c = random_case(rng);
    const State usn = c.pt.state();
    const auto node = equilibrium_with(c.p, usn, false);
    if (!node) continue;
    const State um = usn + 1e-3 * detail::kernel_direction(c.j);
    const VectorXd z = prob.pack(straight(um, *node + Vec2(1e-3, 0.0)), usn, *node, c.p, 1e-3, 1e-3);
    try {
      block_residuals(prob, z);
      ADD_FAILURE() << "expected a wrong-type error";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::wrong_equilibrium_type);
    }
    EXPECT_TRUE(prob.admissibility(z).has_value());
    return;
  }
  FAIL() << "no case with a non-saddle partner";
}

TEST(SniceroclinicSystem, ZeroGapPinsTheEndAndKeepsOrientation) {
  std::mt19937_64 rng(9);
  SniceroclinicProblem prob(kAlpha, OrbitSegment::uniform_mesh(6), 4);
  for (;;) {
    const SnCase c = random_case(rng);
    const State usn = c.pt.state();
    const auto usa = equilibrium_with(c.p, usn, true);
    if (!usa) continue;
    const State um = usn + 1e-3 * detail::kernel_direction(c.j);
    const StableEigen st = stable_eigen(eval_jacobian(*usa, c.p), *usa, *usa + Vec2(1.0, 0.3));
    // s_+ = 0: the arrival block is u_sa - u_+.
    const VectorXd off = prob.pack(straight(um, *usa + Vec2(2e-3, -1e-3)), usn, *usa, c.p, 1e-3, 0.0);
    EXPECT_NEAR(block_residuals(prob, off).at("arrival").norm(), Vec2(2e-3, -1e-3).norm(), 1e-15);
    // Without an accepted point, u_+ = u_sa has no orientation.
    const VectorXd on = prob.pack(straight(um, *usa), usn, *usa, c.p, 1e-3, 0.0);
    EXPECT_THROW(block_residuals(prob, on), Error);
    // After accepting a point on the +v_s side, the tie keeps that side.
    prob.accept(prob.pack(straight(um, *usa + 1e-3 * st.v), usn, *usa, c.p, 1e-3, 1e-3));
    EXPECT_LE(block_residuals(prob, on).at("arrival").norm(), 1e-14);
    const VectorXd tiny = prob.pack(straight(um, *usa + 1e-17 * st.v), usn, *usa, c.p, 1e-3, 1e-17);
    EXPECT_LE(block_residuals(prob, tiny).at("arrival").norm(), 1e-14);
    const VectorXd flipped =
        prob.pack(straight(um, *usa - 1e-3 * st.v), usn, *usa, c.p, 1e-3, 1e-3);
    EXPECT_LE(block_residuals(prob, flipped).at("arrival").norm(), 1e-15);
    return;
  }
}

TEST(SegmentPhase, SlopeFormVanishesAtTheReferenceAndVerbatimDoesNot) {
  const SnCase c = *sn_case(1.2);
  const State usn = c.pt.state();
  const State um = usn + 0.02 * detail::kernel_direction(c.j);
  const OrbitSegment seg = OrbitSegment::sample(
      OrbitSegment::uniform_mesh(12), 4, 30.0,
      [&](double t) { return State(um + Vec2(std::sin(3.0 * t), 1.0 - std::cos(2.0 * t))); });
  for (SegmentPhase form : {SegmentPhase::reference, SegmentPhase::reference_slope}) {
    NcSnicProblem prob(kAlpha, seg.mesh(), 4, form);
    const VectorXd z = prob.pack(seg, usn, c.p, 0.02, 0.0);
    prob.accept(z);
    const double at_ref = block_residuals(prob, z).at("phase")(0);
    if (form == SegmentPhase::reference_slope) {
      EXPECT_NEAR(at_ref, 0.0, 1e-13);
      // A shift along the orbit moves the condition at first order.
      const OrbitSegment shifted = OrbitSegment::sample(seg.mesh(), 4, 30.0, [&](double t) {
        return State(um + Vec2(std::sin(3.0 * t + 3e-4), 1.0 - std::cos(2.0 * t + 2e-4)));
      });
      EXPECT_GT(std::abs(block_residuals(prob, prob.pack(shifted, usn, c.p, 0.02, 0.0)).at("phase")(0)),
                1e-5);
    } else {
      EXPECT_GT(std::abs(at_ref), 0.1) << to_string(form);
    }
  }
}

TEST(SegmentPhase, AnalyticJacobianMatchesDifferences) {
  const SnCase c = *sn_case(-1.7);
  const State usn = c.pt.state();
  const State um = usn + 0.02 * detail::kernel_direction(c.j);
  const OrbitSegment seg = OrbitSegment::sample(
      OrbitSegment::uniform_mesh(5), 4, 10.0,
      [&](double t) { return State(um + Vec2(t * t, std::sin(4.0 * t))); });
  for (SegmentPhase form : {SegmentPhase::reference, SegmentPhase::reference_slope}) {
    NcSnicProblem prob(kAlpha, seg.mesh(), 4, form);
    VectorXd z = prob.pack(seg, usn, c.p, 0.02, 0.0);
    prob.accept(z);
    z.head(2 * static_cast<Index>(seg.node_count())) *= 1.01;
    const Block* phase = nullptr;
    for (const auto& b : prob.blocks()) {
      if (b->name() == "phase") phase = b.get();
    }
    ASSERT_NE(phase, nullptr);
    Triplets t;
    phase->jacobian(z, 0, t);
    VectorXd analytic = VectorXd::Zero(z.size());
    for (const auto& e : t) analytic(e.col()) += e.value();
    for (Index k = 0; k < z.size(); ++k) {
      VectorXd zp = z, zm = z;
      zp(k) += 1e-6;
      zm(k) -= 1e-6;
      std::array<double, 1> rp{}, rm{};
      phase->residual(zp, rp);
      phase->residual(zm, rm);
      EXPECT_NEAR(analytic(k), (rp[0] - rm[0]) / 2e-6, 1e-6) << "column " << k;
    }
  }
}

TEST(Seeds, PeriodicArcFollowsTheOrbit) {
  // Circle as a periodic orbit; an arc of a quarter turn starting at phase 0.1.
  const double two_pi = 2.0 * std::numbers::pi;
  const OrbitSegment po = OrbitSegment::sample(
      OrbitSegment::uniform_mesh(40), 4, 8.0,
      [&](double t) { return State(std::cos(two_pi * t), std::sin(two_pi * t)); });
  const OrbitSegment arc = periodic_arc(po, 0.9, 1.15, 10, 4);
  EXPECT_NEAR(arc.period(), 2.0, 1e-12);
  for (double t : {0.0, 0.37, 1.0}) {
    const double ph = two_pi * (0.9 + 0.25 * t);
    EXPECT_LE((arc.eval(t) - State(std::cos(ph), std::sin(ph))).norm(), 1e-6);
  }
  // A profile on the circle never comes back within 0.5 of the far point.
  const auto d = detail::distance_profile(po, State(-3.0, 0.0), 100);
  EXPECT_EQ(detail::argmin(d), 50);
  EXPECT_THROW(detail::walk_until(d, 50, 1, 10.0), Error);
  EXPECT_EQ(detail::walk_until(d, 50, 1, 2.5), 65);
}

}  // namespace
}  // namespace hilltop
