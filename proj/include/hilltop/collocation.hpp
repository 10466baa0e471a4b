#pragma once

// Piecewise-polynomial collocation of planar orbit segments
//   u'(t) = T f(u(t), p),  t in [0, 1].
// Each mesh interval carries m + 1 equispaced base points (shared at interval
// ends), and the ODE is enforced at the m Gauss-Legendre nodes.

#include "hilltop/normal_form.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

namespace hilltop {

/// Reference-interval data for degree-m collocation.
struct CollocationScheme {
  int m = 0;
  Eigen::VectorXd base;      // m + 1 equispaced points on [0, 1]
  Eigen::VectorXd gauss;     // m Gauss-Legendre nodes on [0, 1]
  Eigen::VectorXd weights;   // matching quadrature weights (sum 1)
  Eigen::MatrixXd value;     // value(i, k) = L_k(gauss_i)
  Eigen::MatrixXd slope;     // slope(i, k) = L_k'(gauss_i)

  explicit CollocationScheme(int degree = 4) : m(degree) {
    if (m < 2) throw Error(ErrorCode::bad_input, "collocation degree must be >= 2");
    base.resize(m + 1);
    for (int k = 0; k <= m; ++k) base(k) = static_cast<double>(k) / m;
    // Golub-Welsch on the Legendre Jacobi matrix.
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(m, m);
    for (int k = 1; k < m; ++k) {
      const double b = k / std::sqrt(4.0 * k * k - 1.0);
      jac(k, k - 1) = b;
      jac(k - 1, k) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jac);
    gauss = (es.eigenvalues().array() + 1.0) / 2.0;
    weights = es.eigenvectors().row(0).transpose().array().square();
    value.resize(m, m + 1);
    slope.resize(m, m + 1);
    for (int i = 0; i < m; ++i) {
      for (int k = 0; k <= m; ++k) {
        value(i, k) = lagrange(k, gauss(i));
        slope(i, k) = lagrange_slope(k, gauss(i));
      }
    }
  }

  double lagrange(int k, double tau) const {
    double v = 1.0;
    for (int l = 0; l <= m; ++l) {
      if (l != k) v *= (tau - base(l)) / (base(k) - base(l));
    }
    return v;
  }

  double lagrange_slope(int k, double tau) const {
    double s = 0.0;
    for (int l = 0; l <= m; ++l) {
      if (l == k) continue;
      double term = 1.0 / (base(k) - base(l));
      for (int q = 0; q <= m; ++q) {
        if (q != k && q != l) term *= (tau - base(q)) / (base(k) - base(q));
      }
      s += term;
    }
    return s;
  }
};

/// A discretized orbit segment on [0, 1]. Node (j, k) of interval j sits at
/// mesh[j] + base[k] * h_j and is stored at index j * m + k.
class OrbitSegment {
 public:
  OrbitSegment() = default;
  OrbitSegment(std::vector<double> mesh, int m, std::vector<State> nodes, double T)
      : mesh_(std::move(mesh)), m_(m), nodes_(std::move(nodes)), T_(T) {
    if (mesh_.size() < 2 || mesh_.front() != 0.0 || mesh_.back() != 1.0) {
      throw Error(ErrorCode::bad_input, "mesh must partition [0, 1]");
    }
    for (std::size_t j = 1; j < mesh_.size(); ++j) {
      if (!(mesh_[j] > mesh_[j - 1])) throw Error(ErrorCode::bad_input, "mesh not increasing");
    }
    if (m_ < 2) throw Error(ErrorCode::bad_input, "collocation degree must be >= 2");
    if (nodes_.size() != node_count()) throw Error(ErrorCode::bad_input, "node count mismatch");
  }

  static std::vector<double> uniform_mesh(int intervals) {
    std::vector<double> mesh(intervals + 1);
    for (int j = 0; j <= intervals; ++j) mesh[j] = static_cast<double>(j) / intervals;
    mesh.back() = 1.0;
    return mesh;
  }

  /// Samples `fn` at the base points of `mesh`.
  static OrbitSegment sample(std::vector<double> mesh, int m, double T,
                             const std::function<State(double)>& fn) {
    const int n = static_cast<int>(mesh.size()) - 1;
    std::vector<State> nodes(static_cast<std::size_t>(n) * m + 1);
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < m; ++k) {
        nodes[j * m + k] = fn(mesh[j] + (mesh[j + 1] - mesh[j]) * k / m);
      }
    }
    nodes.back() = fn(1.0);
    return OrbitSegment(std::move(mesh), m, std::move(nodes), T);
  }

  static OrbitSegment constant(int intervals, int m, double T, const State& s) {
    return sample(uniform_mesh(intervals), m, T, [&](double) { return s; });
  }

  int intervals() const { return static_cast<int>(mesh_.size()) - 1; }
  int degree() const { return m_; }
  std::size_t node_count() const { return static_cast<std::size_t>(intervals()) * m_ + 1; }
  const std::vector<double>& mesh() const { return mesh_; }
  const std::vector<State>& nodes() const { return nodes_; }
  std::vector<State>& nodes() { return nodes_; }
  double period() const { return T_; }
  void set_period(double T) { T_ = T; }
  double width(int j) const { return mesh_[j + 1] - mesh_[j]; }
  const State& u_minus() const { return nodes_.front(); }
  const State& u_plus() const { return nodes_.back(); }

  double node_time(std::size_t idx) const {
    const int j = std::min(static_cast<int>(idx / m_), intervals() - 1);
    const int k = static_cast<int>(idx - static_cast<std::size_t>(j) * m_);
    return mesh_[j] + width(j) * k / m_;
  }

  int locate(double t) const {
    const auto it = std::upper_bound(mesh_.begin(), mesh_.end(), t);
    const int j = static_cast<int>(it - mesh_.begin()) - 1;
    return std::clamp(j, 0, intervals() - 1);
  }

  State eval(double t, const CollocationScheme& sc) const {
    const int j = locate(t);
    const double tau = (t - mesh_[j]) / width(j);
    State u = State::Zero();
    for (int k = 0; k <= m_; ++k) u += sc.lagrange(k, tau) * nodes_[j * m_ + k];
    return u;
  }

  /// du/dt with respect to the normalized time t in [0, 1].
  Vec2 derivative(double t, const CollocationScheme& sc) const {
    const int j = locate(t);
    const double tau = (t - mesh_[j]) / width(j);
    Vec2 d = Vec2::Zero();
    for (int k = 0; k <= m_; ++k) d += sc.lagrange_slope(k, tau) * nodes_[j * m_ + k];
    return d / width(j);
  }

  State eval(double t) const { return eval(t, CollocationScheme(m_)); }

  /// Re-samples the piecewise polynomial onto another mesh (same degree).
  OrbitSegment resampled(std::vector<double> mesh) const {
    const CollocationScheme sc(m_);
    return sample(std::move(mesh), m_, T_, [&](double t) { return eval(t, sc); });
  }

  /// Dense copy of the node values as a flat vector (x0, y0, x1, y1, ...).
  Eigen::VectorXd flat() const {
    Eigen::VectorXd v(2 * nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) v.segment<2>(2 * i) = nodes_[i];
    return v;
  }

  void assign_flat(const Eigen::Ref<const Eigen::VectorXd>& v) {
    for (std::size_t i = 0; i < nodes_.size(); ++i) nodes_[i] = v.segment<2>(2 * i);
  }

 private:
  std::vector<double> mesh_;
  int m_ = 4;
  std::vector<State> nodes_;
  double T_ = 1.0;
};

/// Value at Gauss node i of interval j, from a flat node vector.
inline State gauss_value(const CollocationScheme& sc, std::span<const double> nodes, int j, int i) {
  State u = State::Zero();
  const int m = sc.m;
  for (int k = 0; k <= m; ++k) {
    const std::size_t idx = 2 * (static_cast<std::size_t>(j) * m + k);
    u += sc.value(i, k) * State(nodes[idx], nodes[idx + 1]);
  }
  return u;
}

inline Vec2 gauss_slope(const CollocationScheme& sc, std::span<const double> nodes, int j, int i) {
  Vec2 d = Vec2::Zero();
  const int m = sc.m;
  for (int k = 0; k <= m; ++k) {
    const std::size_t idx = 2 * (static_cast<std::size_t>(j) * m + k);
    d += sc.slope(i, k) * Vec2(nodes[idx], nodes[idx + 1]);
  }
  return d;
}

/// Collocation residual, 2 N m components ordered by interval, node, component:
///   sum_k slope(i,k) U_{j,k} - h_j T f(u(z_ij), p).
/// `field` is any planar vector field.
template <class Field>
void collocation_residual(const CollocationScheme& sc, const std::vector<double>& mesh,
                          std::span<const double> nodes, double T, const Field& field,
                          std::span<double> out) {
  const int n = static_cast<int>(mesh.size()) - 1;
  for (int j = 0; j < n; ++j) {
    const double h = mesh[j + 1] - mesh[j];
    for (int i = 0; i < sc.m; ++i) {
      const Vec2 r = gauss_slope(sc, nodes, j, i) - h * T * field(gauss_value(sc, nodes, j, i));
      const std::size_t row = 2 * (static_cast<std::size_t>(j) * sc.m + i);
      out[row] = r.x();
      out[row + 1] = r.y();
    }
  }
}

inline Eigen::VectorXd collocation_residual(const OrbitSegment& seg, const Params& p) {
  const CollocationScheme sc(seg.degree());
  const Eigen::VectorXd flat = seg.flat();
  Eigen::VectorXd r(2 * seg.intervals() * seg.degree());
  collocation_residual(sc, seg.mesh(), std::span<const double>(flat.data(), flat.size()),
                       seg.period(), [&](const State& u) { return eval_field(u, p); },
                       std::span<double>(r.data(), r.size()));
  return r;
}

/// Gauss quadrature of g(t, u(t)) over [0, 1] on the segment's own nodes.
template <class Fn>
double integrate_segment(const OrbitSegment& seg, const CollocationScheme& sc, const Fn& g) {
  double sum = 0.0;
  for (int j = 0; j < seg.intervals(); ++j) {
    const double h = seg.width(j);
    for (int i = 0; i < sc.m; ++i) {
      const double t = seg.mesh()[j] + h * sc.gauss(i);
      sum += h * sc.weights(i) * g(t, seg.eval(t, sc));
    }
  }
  return sum;
}

/// The segment phase condition
///   int_0^1 u_r . u dt + u_+ . (u_+/2 - u_r+) - u_- . (u_-/2 - u_r-),
/// evaluated exactly as written with u_r taken on u's mesh.
inline double phase_condition(const OrbitSegment& u, const OrbitSegment& ref) {
  const CollocationScheme sc(u.degree());
  const double integral = integrate_segment(u, sc, [&](double t, const State& x) {
    return ref.eval(t, sc).dot(x);
  });
  return integral + u.u_plus().dot(0.5 * u.u_plus() - ref.u_plus()) -
         u.u_minus().dot(0.5 * u.u_minus() - ref.u_minus());
}

/// Classical integral phase condition for periodic orbits,
///   int_0^1 u_r'(t) . (u(t) - u_r(t)) dt.
inline double periodic_phase_condition(const OrbitSegment& u, const OrbitSegment& ref) {
  const CollocationScheme sc(u.degree());
  return integrate_segment(u, sc, [&](double t, const State& x) {
    return ref.derivative(t, sc).dot(x - ref.eval(t, sc));
  });
}

/// Weights of the mesh density: phase-space arclength, a local expansion
/// rate (so that passages near hyperbolic equilibria are resolved in time),
/// and uniform time. `rate` is ignored when empty.
struct MeshDensity {
  double uniform = 0.1;
  double rate_share = 0.0;
  std::function<double(const State&)> rate;
};

/// Mesh equidistributing the density above. Each share is normalized over
/// the segment before blending; arclength gets the remainder.
inline std::vector<double> equidistributed_mesh(const OrbitSegment& seg, const MeshDensity& density,
                                                int intervals = 0) {
  if (intervals <= 0) intervals = seg.intervals();
  const CollocationScheme sc(seg.degree());
  const int n = seg.intervals();
  std::vector<double> arc(n, 0.0);
  std::vector<double> stiff(n, 0.0);
  double total = 0.0;
  double stiff_total = 0.0;
  for (int j = 0; j < n; ++j) {
    const double h = seg.width(j);
    for (int i = 0; i < sc.m; ++i) {
      const double t = seg.mesh()[j] + h * sc.gauss(i);
      arc[j] += h * sc.weights(i) * seg.derivative(t, sc).norm();
      if (density.rate) stiff[j] += h * sc.weights(i) * density.rate(seg.eval(t, sc));
    }
    total += arc[j];
    stiff_total += stiff[j];
  }
  const double uniform = density.uniform;
  const double rate_share = stiff_total > 0.0 ? density.rate_share : 0.0;
  const double arc_share = 1.0 - uniform - rate_share;
  // Cumulative monitor F(t), linear inside each old interval.
  std::vector<double> cum(n + 1, 0.0);
  for (int j = 0; j < n; ++j) {
    const double a = total > 0.0 ? arc[j] / total : 0.0;
    const double r = rate_share > 0.0 ? stiff[j] / stiff_total : 0.0;
    cum[j + 1] = cum[j] + arc_share * a + rate_share * r + uniform * seg.width(j);
  }
  const double norm = cum.back();
  std::vector<double> mesh(intervals + 1);
  mesh[0] = 0.0;
  mesh[intervals] = 1.0;
  int j = 0;
  for (int k = 1; k < intervals; ++k) {
    const double target = norm * k / intervals;
    while (j < n - 1 && cum[j + 1] < target) ++j;
    const double frac = (target - cum[j]) / (cum[j + 1] - cum[j]);
    mesh[k] = seg.mesh()[j] + frac * seg.width(j);
  }
  for (int k = 1; k <= intervals; ++k) {
    if (!(mesh[k] > mesh[k - 1])) {
      throw Error(ErrorCode::numerical_failure, "degenerate mesh after equidistribution");
    }
  }
  return mesh;
}

inline std::vector<double> equidistributed_mesh(const OrbitSegment& seg, double uniform = 0.1,
                                                int intervals = 0) {
  return equidistributed_mesh(seg, MeshDensity{uniform, 0.0, {}}, intervals);
}

}  // namespace hilltop
