#pragma once

// Equilibria of the normal form: all real solutions via a quartic in x,
// planar linear classification, and oriented null/eigenvectors.

#include "hilltop/normal_form.hpp"
#include "hilltop/polynomial.hpp"

#include <algorithm>
#include <array>
#include <complex>
#include <optional>
#include <vector>

namespace hilltop {

enum class EquilibriumType {
  stable_node,
  unstable_node,
  stable_focus,
  unstable_focus,
  saddle,
  saddle_node,
  nonhyperbolic_other,
};

inline const char* to_string(EquilibriumType t) {
  switch (t) {
    case EquilibriumType::stable_node: return "stable_node";
    case EquilibriumType::unstable_node: return "unstable_node";
    case EquilibriumType::stable_focus: return "stable_focus";
    case EquilibriumType::unstable_focus: return "unstable_focus";
    case EquilibriumType::saddle: return "saddle";
    case EquilibriumType::saddle_node: return "saddle_node";
    case EquilibriumType::nonhyperbolic_other: return "nonhyperbolic_other";
  }
  return "unknown";
}

inline bool is_stable(EquilibriumType t) {
  return t == EquilibriumType::stable_node || t == EquilibriumType::stable_focus;
}

struct EquilibriumInfo {
  State state = State::Zero();
  Mat2 jacobian = Mat2::Zero();
  std::array<std::complex<double>, 2> eigenvalues{};
  EquilibriumType type = EquilibriumType::nonhyperbolic_other;
  double residual = 0.0;
};

/// Classification tolerance, relative to the Frobenius norm of J.
inline constexpr double kClassifyTolerance = 1e-8;

inline EquilibriumType classify(const Mat2& j, double tol = kClassifyTolerance) {
  const double scale = std::max(j.norm(), 1e-300);
  const double tr = j.trace();
  const double det = j.determinant();
  if (std::abs(det) <= tol * scale * scale) {
    return std::abs(tr) > tol * scale ? EquilibriumType::saddle_node
                                      : EquilibriumType::nonhyperbolic_other;
  }
  if (det < 0.0) return EquilibriumType::saddle;
  if (std::abs(tr) <= tol * scale) return EquilibriumType::nonhyperbolic_other;
  const bool stable = tr < 0.0;
  if (tr * tr - 4.0 * det >= 0.0) {
    return stable ? EquilibriumType::stable_node : EquilibriumType::unstable_node;
  }
  return stable ? EquilibriumType::stable_focus : EquilibriumType::unstable_focus;
}

inline EquilibriumType classify(const EquilibriumInfo& eq, double tol = kClassifyTolerance) {
  return classify(eq.jacobian, tol);
}

inline std::array<std::complex<double>, 2> eigenvalues(const Mat2& j) {
  const double tr = j.trace();
  const double det = j.determinant();
  const std::complex<double> root = std::sqrt(std::complex<double>(tr * tr - 4.0 * det, 0.0));
  return {0.5 * (tr - root), 0.5 * (tr + root)};
}

inline EquilibriumInfo make_equilibrium(const State& s, const Params& p,
                                        double tol = kClassifyTolerance) {
  EquilibriumInfo e;
  e.state = s;
  e.jacobian = eval_jacobian(s, p);
  e.eigenvalues = eigenvalues(e.jacobian);
  e.type = classify(e.jacobian, tol);
  e.residual = eval_field(s, p).norm();
  return e;
}

/// Newton iteration on the full planar system. Returns the polished state and
/// whether the residual reached `tol`.
inline std::pair<State, bool> polish_equilibrium(State s, const Params& p, double tol = 1e-12,
                                                 int max_iter = 100) {
  for (int it = 0; it < max_iter; ++it) {
    const State f = eval_field(s, p);
    if (f.norm() <= tol) return {s, true};
    const Mat2 j = eval_jacobian(s, p);
    const double det = j.determinant();
    if (det == 0.0) break;
    s -= j.inverse() * f;
    if (!s.allFinite()) break;
  }
  return {s, eval_field(s, p).norm() <= tol};
}

/// All real equilibria, sorted by x. Eliminates y = (lambda + gamma - x^2)/(2 alpha)
/// and solves the quartic
///   x^4 - 2c x^2 + 8 alpha^2 beta x + c^2 + 4 alpha^2 (gamma - lambda) = 0,  c = lambda + gamma.
inline std::vector<EquilibriumInfo> find_equilibria(const Params& p) {
  if (p.alpha == 0.0) {
    throw Error(ErrorCode::degenerate_coupling, "alpha = 0: y-dynamics is a skew product");
  }
  const double lam = p.lambda();
  const double c = lam + p.gamma;
  const double a2 = p.alpha * p.alpha;
  const std::array<double, 5> coeff{1.0, 0.0, -2.0 * c, 8.0 * a2 * p.beta,
                                    c * c + 4.0 * a2 * (p.gamma - lam)};
  std::vector<State> found;
  for (double x : polynomial_real_roots(coeff, 1e-5)) {
    const State guess(x, (c - x * x) / (2.0 * p.alpha));
    auto [s, ok] = polish_equilibrium(guess, p);
    if (!ok) continue;
    found.push_back(s);
  }
  std::sort(found.begin(), found.end(), [](const State& a, const State& b) { return a.x() < b.x(); });

  // Coincident roots (a double root at a fold) are reported once.
  std::vector<EquilibriumInfo> out;
  for (const State& s : found) {
    if (!out.empty() && (out.back().state - s).norm() < 1e-8) {
      auto& last = out.back();
      if (std::abs(last.jacobian.determinant()) <= 1e-8) last.type = EquilibriumType::saddle_node;
      continue;
    }
    out.push_back(make_equilibrium(s, p));
  }
  return out;
}

/// Oriented right/left null vectors of a saddle-node Jacobian: J v = 0, |v| = 1,
/// v.(u_dev - u) > 0, J^T w = 0, w.v = 1.
struct CenterVectors {
  Vec2 v = Vec2::Zero();
  Vec2 w = Vec2::Zero();
};

/// Oriented unit eigenvector for the negative eigenvalue of a saddle.
struct StableEigen {
  Vec2 v = Vec2::Zero();
  double lambda = 0.0;
};

namespace detail {

// Unit vector orthogonal to the larger of two rows of a (near) rank-one matrix.
inline Vec2 kernel_direction(const Mat2& m) {
  const Vec2 r0 = m.row(0).transpose();
  const Vec2 r1 = m.row(1).transpose();
  const Vec2 r = r0.squaredNorm() >= r1.squaredNorm() ? r0 : r1;
  if (r.squaredNorm() == 0.0) return Vec2(1.0, 0.0);
  return Vec2(-r.y(), r.x()).normalized();
}

inline Vec2 orient(Vec2 v, const State& u, const State& u_dev) {
  const double side = v.dot(u_dev - u);
  if (side == 0.0 || !std::isfinite(side)) {
    throw Error(ErrorCode::ambiguous_orientation, "v.(u_dev - u) = 0");
  }
  return side > 0.0 ? v : Vec2(-v);
}

}  // namespace detail

inline CenterVectors center_vectors(const Mat2& j, const State& u, const State& u_dev) {
  CenterVectors c;
  c.v = detail::orient(detail::kernel_direction(j), u, u_dev);
  const Vec2 w = detail::kernel_direction(j.transpose());
  const double wv = w.dot(c.v);
  if (wv == 0.0) {
    throw Error(ErrorCode::numerical_failure, "left and right null vectors are orthogonal");
  }
  c.w = w / wv;
  return c;
}

inline StableEigen stable_eigen(const Mat2& j, const State& u, const State& u_dev) {
  const double tr = j.trace();
  const double det = j.determinant();
  if (det >= 0.0) {
    throw Error(ErrorCode::wrong_equilibrium_type, "stable eigenvector requested for a non-saddle");
  }
  StableEigen s;
  s.lambda = 0.5 * (tr - std::sqrt(tr * tr - 4.0 * det));
  s.v = detail::orient(detail::kernel_direction(j - s.lambda * Mat2::Identity()), u, u_dev);
  return s;
}

struct NullEigenData {
  std::optional<Vec2> v_c;
  std::optional<Vec2> w_c;
  std::optional<Vec2> v_s;
  std::optional<double> lambda_s;
};

/// Populates the center vectors when J is singular within `tol` (relative to
/// |J|^2) and the stable eigenvector when the equilibrium is a saddle.
inline NullEigenData null_eigen_data(const EquilibriumInfo& eq, const State& u_dev,
                                     double tol = kClassifyTolerance) {
  NullEigenData out;
  const Mat2& j = eq.jacobian;
  const double det = j.determinant();
  const double scale = std::max(j.squaredNorm(), 1e-300);
  if (std::abs(det) <= tol * scale) {
    const auto c = center_vectors(j, eq.state, u_dev);
    out.v_c = c.v;
    out.w_c = c.w;
  } else if (det < 0.0) {
    const auto s = stable_eigen(j, eq.state, u_dev);
    out.v_s = s.v;
    out.lambda_s = s.lambda;
  }
  return out;
}

}  // namespace hilltop
