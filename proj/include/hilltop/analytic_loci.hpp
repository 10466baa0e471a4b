#pragma once

// Closed-form bifurcation loci of the normal form: trace-zero (Hopf / neutral
// saddle) curve, Takens-Bogdanov and cusp points, and the saddle-node surface
// parametrised by the x coordinate of the saddle-node equilibrium.

#include "hilltop/normal_form.hpp"
#include "hilltop/polynomial.hpp"

#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace hilltop {

enum class TraceZeroKind { hopf, neutral_saddle, takens_bogdanov };

inline const char* to_string(TraceZeroKind k) {
  switch (k) {
    case TraceZeroKind::hopf: return "hopf";
    case TraceZeroKind::neutral_saddle: return "neutral_saddle";
    case TraceZeroKind::takens_bogdanov: return "takens_bogdanov";
  }
  return "unknown";
}

enum class Criticality { supercritical, subcritical, degenerate };

/// The trace-zero equilibrium at mu = 0.
struct HopfInfo {
  double x_eq = 0.0;  // the equilibrium is (x_eq, -x_eq)
  /// 2 sqrt(-gamma^2 - alpha beta (alpha+beta)^2), the frequency scale used in
  /// ell1. Equals (alpha+beta) * eigen_frequency; zero unless kind == hopf.
  double omega = 0.0;
  /// Imaginary part of the critical eigenvalues, sqrt(det J). Zero unless hopf.
  double eigen_frequency = 0.0;
  std::optional<double> ell1;  // 4 beta gamma / omega^3, only for kind == hopf
  TraceZeroKind kind = TraceZeroKind::neutral_saddle;
  double discriminant = 0.0;  // -gamma^2 - alpha beta (alpha+beta)^2

  State equilibrium() const { return State(x_eq, -x_eq); }

  /// ell1 < 0 is supercritical. Only meaningful for kind == hopf.
  Criticality criticality(double tol = 1e-14) const {
    if (!ell1 || std::abs(*ell1) <= tol) return Criticality::degenerate;
    return *ell1 < 0.0 ? Criticality::supercritical : Criticality::subcritical;
  }
};

/// Relative tolerance used to call the discriminant zero (Takens-Bogdanov).
inline constexpr double kTakensBogdanovTolerance = 1e-12;

inline HopfInfo trace_zero_point(const Params& p) {
  const double s = p.alpha + p.beta;
  if (s * s <= kPoleTolerance) {
    throw Error(ErrorCode::singular_parametrization, "trace-zero equilibrium at alpha + beta = 0");
  }
  HopfInfo h;
  h.x_eq = -p.gamma / s;
  const double bound = -p.alpha * p.beta * s * s;
  h.discriminant = bound - p.gamma * p.gamma;
  const double scale = std::max({1.0, std::abs(bound), p.gamma * p.gamma});
  if (std::abs(h.discriminant) <= kTakensBogdanovTolerance * scale) {
    h.kind = TraceZeroKind::takens_bogdanov;
  } else if (h.discriminant > 0.0) {
    h.kind = TraceZeroKind::hopf;
    h.omega = 2.0 * std::sqrt(h.discriminant);
    h.eigen_frequency = 2.0 * std::sqrt(h.discriminant) / std::abs(s);
    h.ell1 = 4.0 * p.beta * p.gamma / (h.omega * h.omega * h.omega);
  } else {
    h.kind = TraceZeroKind::neutral_saddle;
  }
  return h;
}

/// (gamma_TB-, gamma_TB+) = -/+ sqrt(-alpha beta) (alpha + beta), ordered so that
/// first <= second.
inline std::pair<double, double> takens_bogdanov_gammas(double alpha, double beta) {
  if (alpha * beta >= 0.0) {
    throw Error(ErrorCode::no_takens_bogdanov, "Takens-Bogdanov points need alpha*beta < 0");
  }
  const double g = std::sqrt(-alpha * beta) * (alpha + beta);
  return {std::min(-g, g), std::max(-g, g)};
}

struct CuspPoint {
  double lambda = 0.0;
  double gamma = 0.0;
  double x = 0.0;  // saddle-node coordinate of the cusp, cbrt(alpha^2 beta)
};

inline CuspPoint cusp_point(double alpha, double beta) {
  if (alpha * beta == 0.0) {
    throw Error(ErrorCode::degenerate_coupling, "cusp locus needs alpha*beta != 0");
  }
  // a = alpha^(2/3), b = beta^(2/3), always taken as nonnegative real.
  const double a = std::cbrt(alpha * alpha);
  const double b = std::cbrt(beta * beta);
  return {1.5 * a * b * (a + b), 1.5 * a * b * (a - b), std::cbrt(alpha * alpha * beta)};
}

struct SNLocusPoint {
  double x = 0.0;
  double y = 0.0;
  double lambda = 0.0;
  double gamma = 0.0;

  State state() const { return State(x, y); }
  /// Canonical parameters of this point for the given couplings.
  Params params(double alpha, double beta) const {
    return Params::from_lambda(alpha, beta, gamma, lambda);
  }
};

inline SNLocusPoint saddle_node_point(double alpha, double beta, double x) {
  if (x == 0.0) throw Error(ErrorCode::pole, "saddle-node locus has a pole at x = 0");
  const double a2b = alpha * alpha * beta;
  const double a2b2 = a2b * beta;
  SNLocusPoint pt;
  pt.x = x;
  pt.y = alpha * beta / x;
  pt.lambda = 0.5 * x * x + beta * x + a2b / x + a2b2 / (2.0 * x * x);
  pt.gamma = 0.5 * x * x - beta * x + a2b / x - a2b2 / (2.0 * x * x);
  return pt;
}

inline std::vector<SNLocusPoint> saddle_node_locus(double alpha, double beta,
                                                   std::span<const double> x_values) {
  std::vector<SNLocusPoint> out;
  out.reserve(x_values.size());
  for (double x : x_values) out.push_back(saddle_node_point(alpha, beta, x));
  return out;
}

/// All saddle-node points of the locus at a prescribed gamma: real roots of
///   x^4/2 - beta x^3 - gamma x^2 + alpha^2 beta x - alpha^2 beta^2 / 2 = 0,
/// Newton-polished on the scalar equation gamma(x) = gamma.
inline std::vector<SNLocusPoint> saddle_node_points_at_gamma(double alpha, double beta,
                                                             double gamma) {
  const double a2b = alpha * alpha * beta;
  const std::array<double, 5> c{0.5, -beta, -gamma, a2b, -0.5 * a2b * beta};
  std::vector<SNLocusPoint> out;
  for (double x : polynomial_real_roots(c, 1e-5)) {
    if (x == 0.0) continue;
    for (int it = 0; it < 50; ++it) {
      const double g = saddle_node_point(alpha, beta, x).gamma - gamma;
      const double dg = x - beta - a2b / (x * x) + a2b * beta / (x * x * x);
      if (dg == 0.0) break;
      const double dx = g / dg;
      x -= dx;
      if (std::abs(dx) <= 1e-15 * std::max(1.0, std::abs(x))) break;
    }
    const auto pt = saddle_node_point(alpha, beta, x);
    if (std::abs(pt.gamma - gamma) > 1e-9 * std::max(1.0, std::abs(gamma))) continue;
    bool duplicate = false;
    for (const auto& q : out) duplicate = duplicate || std::abs(q.x - x) < 1e-9;
    if (!duplicate) out.push_back(pt);
  }
  return out;
}

}  // namespace hilltop
