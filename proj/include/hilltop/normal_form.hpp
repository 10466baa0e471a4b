#pragma once

// The truncated coupled saddle-node normal form
//
//   x' = x^2 - lambda - gamma + 2 alpha y
//   y' = y^2 - lambda + gamma + 2 beta x
//
// written in the shifted parameter mu = lambda - lambda_tr0(gamma, alpha, beta).

#include "hilltop/core.hpp"

#include <cmath>

namespace hilltop {

/// Denominator (alpha + beta)^2 below this is treated as a pole of lambda_tr0.
inline constexpr double kPoleTolerance = 1e-14;

/// Canonical unfolding parameters. lambda is derived, see Params::lambda().
struct Params {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  double mu = 0.0;

  double lambda() const;

  /// Builds canonical parameters from the lambda form.
  static Params from_lambda(double alpha, double beta, double gamma, double lambda);
};

inline double lambda_tr0(double gamma, double alpha, double beta) {
  const double s = alpha + beta;
  if (s * s <= kPoleTolerance) {
    throw Error(ErrorCode::singular_parametrization,
                "lambda_tr0 has a pole at alpha + beta = 0; use the lambda form");
  }
  return gamma * (gamma + alpha * alpha - beta * beta) / (s * s);
}

inline double lambda_tr0(const Params& p) { return lambda_tr0(p.gamma, p.alpha, p.beta); }

inline double Params::lambda() const { return mu + lambda_tr0(*this); }

inline Params Params::from_lambda(double alpha, double beta, double gamma, double lambda) {
  Params p{alpha, beta, gamma, 0.0};
  p.mu = lambda - lambda_tr0(p);
  return p;
}

/// Vector field in the mu form.
inline State eval_field(const State& s, const Params& p) {
  const double shift = p.mu + lambda_tr0(p);
  return State(s.x() * s.x() - shift - p.gamma + 2.0 * p.alpha * s.y(),
               s.y() * s.y() - shift + p.gamma + 2.0 * p.beta * s.x());
}

/// Vector field in the lambda form; valid also at alpha + beta = 0.
inline State eval_field_lambda(const State& s, double alpha, double beta, double gamma,
                               double lambda) {
  return State(s.x() * s.x() - lambda - gamma + 2.0 * alpha * s.y(),
               s.y() * s.y() - lambda + gamma + 2.0 * beta * s.x());
}

inline Mat2 eval_jacobian(const State& s, const Params& p) {
  Mat2 j;
  j << 2.0 * s.x(), 2.0 * p.alpha, 2.0 * p.beta, 2.0 * s.y();
  return j;
}

/// Partial derivatives of the field with respect to (mu, beta, gamma), in that
/// column order. alpha is held fixed by every continuation problem.
inline Eigen::Matrix<double, 2, 3> eval_param_jacobian(const State& s, const Params& p) {
  const double a = p.alpha;
  const double b = p.beta;
  const double g = p.gamma;
  const double sum = a + b;
  if (sum * sum <= kPoleTolerance) {
    throw Error(ErrorCode::singular_parametrization, "parameter derivatives at alpha + beta = 0");
  }
  const double s2 = sum * sum;
  const double dl_dg = (2.0 * g + a * a - b * b) / s2;
  const double dl_db = -2.0 * b * g / s2 - 2.0 * g * (g + a * a - b * b) / (s2 * sum);
  Eigen::Matrix<double, 2, 3> d;
  d << -1.0, -dl_db, -dl_dg - 1.0,
       -1.0, -dl_db + 2.0 * s.x(), -dl_dg + 1.0;
  return d;
}

enum class Symmetry { negate, swap };

struct SymmetryImage {
  State state;
  Params params;
  int time_direction = 1;
};

/// negate: (alpha, beta, x, y, t) -> (-alpha, -beta, -x, -y, -t)
/// swap:   (alpha, beta, x, y, gamma) -> (beta, alpha, y, x, -gamma)
/// Both leave mu (and lambda) unchanged and are involutions.
inline SymmetryImage apply_symmetry(Symmetry which, const State& s, const Params& p,
                                    int time_direction = 1) {
  SymmetryImage out{s, p, time_direction};
  switch (which) {
    case Symmetry::negate:
      out.state = -s;
      out.params.alpha = -p.alpha;
      out.params.beta = -p.beta;
      out.time_direction = -time_direction;
      break;
    case Symmetry::swap:
      out.state = State(s.y(), s.x());
      out.params.alpha = p.beta;
      out.params.beta = p.alpha;
      out.params.gamma = -p.gamma;
      break;
  }
  return out;
}

enum class CouplingCase { mutualistic, mixed, degenerate };

inline const char* to_string(CouplingCase c) {
  switch (c) {
    case CouplingCase::mutualistic: return "mutualistic";
    case CouplingCase::mixed: return "mixed";
    case CouplingCase::degenerate: return "degenerate";
  }
  return "unknown";
}

/// Case tag plus advisory degeneracy flags. Flags never make an operation fail.
struct CaseReport {
  CouplingCase kind = CouplingCase::degenerate;
  bool skew_product = false;        // alpha*beta == 0
  bool reversing_symmetry = false;  // alpha == -beta, gamma == 0
  bool xy_symmetry = false;         // alpha == beta, gamma == 0

  bool any_flag() const { return skew_product || reversing_symmetry || xy_symmetry; }
};

inline CaseReport classify_case(const Params& p, double tol = 1e-12) {
  CaseReport r;
  const double ab = p.alpha * p.beta;
  const double scale = std::max({1.0, std::abs(p.alpha), std::abs(p.beta)});
  if (std::abs(ab) <= tol * scale * scale) {
    r.kind = CouplingCase::degenerate;
    r.skew_product = true;
  } else {
    r.kind = ab > 0.0 ? CouplingCase::mutualistic : CouplingCase::mixed;
  }
  const bool gamma_zero = std::abs(p.gamma) <= tol * scale * scale;
  r.reversing_symmetry = gamma_zero && std::abs(p.alpha + p.beta) <= tol * scale;
  r.xy_symmetry = gamma_zero && std::abs(p.alpha - p.beta) <= tol * scale;
  return r;
}

}  // namespace hilltop
