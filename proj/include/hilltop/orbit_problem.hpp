#pragma once

// Equation blocks for orbit-segment and equilibrium continuation problems of
// the normal form, and a problem type that owns a collocation mesh.

#include "hilltop/collocation.hpp"
#include "hilltop/continuation.hpp"
#include "hilltop/equilibria.hpp"

#include <memory>

namespace hilltop {

/// Offsets of the parameter unknowns; alpha is a problem constant.
struct ParamIndex {
  double alpha = 0.0;
  Index mu = 0;
  Index beta = 0;
  Index gamma = 0;

  Params at(const VectorXd& z) const { return Params{alpha, z(beta), z(gamma), z(mu)}; }
  std::array<Index, 3> columns() const { return {mu, beta, gamma}; }
};

/// Mesh shared by the blocks of one problem.
struct MeshData {
  std::vector<double> mesh;
  CollocationScheme scheme;
  int intervals() const { return static_cast<int>(mesh.size()) - 1; }
  Index node_count() const { return static_cast<Index>(intervals()) * scheme.m + 1; }
};

inline State state_at(const VectorXd& z, Index offset) { return State(z(offset), z(offset + 1)); }

/// u' = T f(u, p) at the Gauss nodes (2 N m equations).
class CollocationBlock : public Block {
 public:
  CollocationBlock(std::shared_ptr<const MeshData> mesh, Index nodes, Index period, ParamIndex p)
      : mesh_(std::move(mesh)), nodes_(nodes), period_(period), p_(p) {}
  std::string name() const override { return "collocation"; }
  Index size() const override { return 2 * mesh_->intervals() * mesh_->scheme.m; }

  void residual(const VectorXd& z, std::span<double> out) const override {
    const Params p = p_.at(z);
    collocation_residual(mesh_->scheme, mesh_->mesh, node_span(z), z(period_),
                         [&](const State& u) { return eval_field(u, p); }, out);
  }

  void jacobian(const VectorXd& z, Index row0, Triplets& out) const override {
    const auto& sc = mesh_->scheme;
    const int m = sc.m;
    const Params p = p_.at(z);
    const double T = z(period_);
    const auto nodes = node_span(z);
    const auto pcols = p_.columns();
    for (int j = 0; j < mesh_->intervals(); ++j) {
      const double h = mesh_->mesh[j + 1] - mesh_->mesh[j];
      for (int i = 0; i < m; ++i) {
        const State u = gauss_value(sc, nodes, j, i);
        const Mat2 jac = eval_jacobian(u, p);
        const Vec2 f = eval_field(u, p);
        const auto dp = eval_param_jacobian(u, p);
        const Index row = row0 + 2 * (static_cast<Index>(j) * m + i);
        for (int k = 0; k <= m; ++k) {
          const Index col = nodes_ + 2 * (static_cast<Index>(j) * m + k);
          const Mat2 blk = sc.slope(i, k) * Mat2::Identity() - h * T * sc.value(i, k) * jac;
          for (int a = 0; a < 2; ++a) {
            for (int b = 0; b < 2; ++b) out.emplace_back(row + a, col + b, blk(a, b));
          }
        }
        for (int a = 0; a < 2; ++a) {
          out.emplace_back(row + a, period_, -h * f(a));
          for (int c = 0; c < 3; ++c) out.emplace_back(row + a, pcols[c], -h * T * dp(a, c));
        }
      }
    }
  }

 private:
  std::span<const double> node_span(const VectorXd& z) const {
    return std::span<const double>(z.data() + nodes_, 2 * mesh_->node_count());
  }
  std::shared_ptr<const MeshData> mesh_;
  Index nodes_;
  Index period_;
  ParamIndex p_;
};

/// u(0) - u(1) = 0.
class PeriodicityBlock : public Block {
 public:
  PeriodicityBlock(std::shared_ptr<const MeshData> mesh, Index nodes)
      : mesh_(std::move(mesh)), nodes_(nodes) {}
  std::string name() const override { return "periodicity"; }
  Index size() const override { return 2; }
  void residual(const VectorXd& z, std::span<double> out) const override {
    const Index last = nodes_ + 2 * (mesh_->node_count() - 1);
    out[0] = z(nodes_) - z(last);
    out[1] = z(nodes_ + 1) - z(last + 1);
  }
  void jacobian(const VectorXd&, Index row0, Triplets& out) const override {
    const Index last = nodes_ + 2 * (mesh_->node_count() - 1);
    for (int a = 0; a < 2; ++a) {
      out.emplace_back(row0 + a, nodes_ + a, 1.0);
      out.emplace_back(row0 + a, last + a, -1.0);
    }
  }

 private:
  std::shared_ptr<const MeshData> mesh_;
  Index nodes_;
};

/// Quadrature weights of int_0^1 g(t) . u(t) dt as a linear form on the nodes.
inline VectorXd integral_weights(const MeshData& md, const std::function<Vec2(int, int)>& g) {
  const auto& sc = md.scheme;
  const int m = sc.m;
  VectorXd w = VectorXd::Zero(2 * md.node_count());
  for (int j = 0; j < md.intervals(); ++j) {
    const double h = md.mesh[j + 1] - md.mesh[j];
    for (int i = 0; i < m; ++i) {
      const Vec2 gi = g(j, i) * h * sc.weights(i);
      for (int k = 0; k <= m; ++k) {
        w.segment<2>(2 * (static_cast<Index>(j) * m + k)) += sc.value(i, k) * gi;
      }
    }
  }
  return w;
}

/// int_0^1 u_r'(t) . (u(t) - u_r(t)) dt = 0 with u_r the last accepted orbit.
class PeriodicPhaseBlock : public Block {
 public:
  PeriodicPhaseBlock(std::shared_ptr<const MeshData> mesh, Index nodes)
      : mesh_(std::move(mesh)), nodes_(nodes) {}
  std::string name() const override { return "phase"; }
  Index size() const override { return 1; }
  void residual(const VectorXd& z, std::span<double> out) const override {
    out[0] = weights_.dot(z.segment(nodes_, weights_.size())) - offset_;
  }
  void jacobian(const VectorXd&, Index row0, Triplets& out) const override {
    for (Index c = 0; c < weights_.size(); ++c) {
      if (weights_(c) != 0.0) out.emplace_back(row0, nodes_ + c, weights_(c));
    }
  }
  void accept(const VectorXd& z) override {
    const Index n = 2 * mesh_->node_count();
    const VectorXd ref = z.segment(nodes_, n);
    const std::span<const double> rs(ref.data(), ref.size());
    weights_ = integral_weights(*mesh_, [&](int j, int i) {
      const double h = mesh_->mesh[j + 1] - mesh_->mesh[j];
      return Vec2(gauss_slope(mesh_->scheme, rs, j, i) / h);
    });
    offset_ = weights_.dot(ref);
  }

 private:
  std::shared_ptr<const MeshData> mesh_;
  Index nodes_;
  VectorXd weights_;
  double offset_ = 0.0;
};

/// Weight function of the integral term in the segment phase condition.
enum class SegmentPhase {
  reference,        // int u_r . u dt, as the condition is usually written down
  reference_slope,  // int u_r' . u dt; with the end terms this is int u' . (u - u_r) dt
};

inline const char* to_string(SegmentPhase p) {
  return p == SegmentPhase::reference ? "reference" : "reference_slope";
}

/// The segment phase condition
///   int w . u dt + u_+ . (u_+/2 - u_r+) - u_- . (u_-/2 - u_r-) = 0,
/// with w = u_r (or u_r') and the reference replaced by the last accepted segment.
class SegmentPhaseBlock : public Block {
 public:
  SegmentPhaseBlock(std::shared_ptr<const MeshData> mesh, Index nodes,
                    SegmentPhase form = SegmentPhase::reference)
      : mesh_(std::move(mesh)), nodes_(nodes), form_(form) {}
  std::string name() const override { return "phase"; }
  Index size() const override { return 1; }
  void residual(const VectorXd& z, std::span<double> out) const override {
    const State um = state_at(z, nodes_);
    const State up = state_at(z, last());
    out[0] = weights_.dot(z.segment(nodes_, weights_.size())) + up.dot(0.5 * up - ref_plus_) -
             um.dot(0.5 * um - ref_minus_);
  }
  void jacobian(const VectorXd& z, Index row0, Triplets& out) const override {
    VectorXd g = weights_;
    const Index n = g.size();
    g.segment<2>(n - 2) += state_at(z, last()) - ref_plus_;
    g.segment<2>(0) -= state_at(z, nodes_) - ref_minus_;
    for (Index c = 0; c < n; ++c) {
      if (g(c) != 0.0) out.emplace_back(row0, nodes_ + c, g(c));
    }
  }
  void accept(const VectorXd& z) override {
    const Index n = 2 * mesh_->node_count();
    const VectorXd ref = z.segment(nodes_, n);
    const std::span<const double> rs(ref.data(), ref.size());
    if (form_ == SegmentPhase::reference) {
      weights_ = integral_weights(
          *mesh_, [&](int j, int i) { return Vec2(gauss_value(mesh_->scheme, rs, j, i)); });
    } else {
      weights_ = integral_weights(*mesh_, [&](int j, int i) {
        const double h = mesh_->mesh[j + 1] - mesh_->mesh[j];
        return Vec2(gauss_slope(mesh_->scheme, rs, j, i) / h);
      });
    }
    ref_minus_ = state_at(z, nodes_);
    ref_plus_ = state_at(z, last());
  }
  SegmentPhase form() const { return form_; }

 private:
  Index last() const { return nodes_ + 2 * (mesh_->node_count() - 1); }
  std::shared_ptr<const MeshData> mesh_;
  Index nodes_;
  SegmentPhase form_;
  VectorXd weights_;
  State ref_minus_ = State::Zero();
  State ref_plus_ = State::Zero();
};

/// f(u, p) = 0 for the state slot at `u`.
class EquilibriumBlock : public Block {
 public:
  EquilibriumBlock(Index u, ParamIndex p, std::string label = "equilibrium")
      : u_(u), p_(p), label_(std::move(label)) {}
  std::string name() const override { return label_; }
  Index size() const override { return 2; }
  void residual(const VectorXd& z, std::span<double> out) const override {
    const State f = eval_field(state_at(z, u_), p_.at(z));
    out[0] = f.x();
    out[1] = f.y();
  }
  void jacobian(const VectorXd& z, Index row0, Triplets& out) const override {
    const Params p = p_.at(z);
    const State u = state_at(z, u_);
    const Mat2 j = eval_jacobian(u, p);
    const auto dp = eval_param_jacobian(u, p);
    const auto pc = p_.columns();
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) out.emplace_back(row0 + a, u_ + b, j(a, b));
      for (int c = 0; c < 3; ++c) out.emplace_back(row0 + a, pc[c], dp(a, c));
    }
  }

 private:
  Index u_;
  ParamIndex p_;
  std::string label_;
};

/// det of the state Jacobian at `u`: 4 x y - 4 alpha beta.
class SaddleNodeBlock : public Block {
 public:
  SaddleNodeBlock(Index u, ParamIndex p) : u_(u), p_(p) {}
  std::string name() const override { return "saddle_node"; }
  Index size() const override { return 1; }
  void residual(const VectorXd& z, std::span<double> out) const override {
    out[0] = eval_jacobian(state_at(z, u_), p_.at(z)).determinant();
  }
  void jacobian(const VectorXd& z, Index row0, Triplets& out) const override {
    out.emplace_back(row0, u_, 4.0 * z(u_ + 1));
    out.emplace_back(row0, u_ + 1, 4.0 * z(u_));
    out.emplace_back(row0, p_.beta, -4.0 * p_.alpha);
  }

 private:
  Index u_;
  ParamIndex p_;
};

/// Problem over one orbit segment stored in slot "u", with an owned mesh that
/// can be redistributed between runs.
class OrbitProblem : public ComposedProblem {
 public:
  OrbitProblem(std::string name, std::vector<double> mesh, int degree)
      : ComposedProblem(std::move(name)),
        mesh_(std::make_shared<MeshData>(MeshData{std::move(mesh), CollocationScheme(degree)})) {}

  std::shared_ptr<const MeshData> mesh() const { return mesh_; }
  Index nodes() const { return layout().offset("u"); }

  /// Packs a segment into the "u" slot of z (mesh must match).
  void put_segment(VectorXd& z, const OrbitSegment& seg) const {
    if (seg.mesh() != mesh_->mesh || seg.degree() != mesh_->scheme.m) {
      throw Error(ErrorCode::bad_input, "segment mesh does not match the problem mesh");
    }
    z.segment(nodes(), 2 * mesh_->node_count()) = seg.flat();
  }

  /// Orbit of a branch point, on the mesh the point was computed on.
  OrbitSegment segment(const BranchPoint& pt) const {
    const std::vector<double>& mesh = pt.mesh.empty() ? mesh_->mesh : pt.mesh;
    const int m = mesh_->scheme.m;
    const Index count = static_cast<Index>(mesh.size() - 1) * m + 1;
    std::vector<State> nodes(count);
    for (Index i = 0; i < count; ++i) nodes[i] = state_at(pt.z, this->nodes() + 2 * i);
    const Slot* T = layout().find("T");
    return OrbitSegment(mesh, m, std::move(nodes), T ? pt.z(T->offset) : 1.0);
  }

  OrbitSegment segment(const VectorXd& z) const {
    std::vector<State> nodes(mesh_->node_count());
    for (Index i = 0; i < mesh_->node_count(); ++i) nodes[i] = state_at(z, this->nodes() + 2 * i);
    const Slot* T = layout().find("T");
    return OrbitSegment(mesh_->mesh, mesh_->scheme.m, std::move(nodes), T ? z(T->offset) : 1.0);
  }

  /// Equidistributes arclength (with a fraction spread uniformly in time).
  std::optional<Transfer> remesh(const VectorXd& z) override {
    if (uniform_fraction_ < 0.0) return std::nullopt;
    const OrbitSegment old = segment(z);
    MeshDensity density{uniform_fraction_, rate_share_, {}};
    if (rate_share_ > 0.0) density.rate = expansion_rate(z);
    auto fresh = std::make_shared<MeshData>(
        MeshData{equidistributed_mesh(old, density), mesh_->scheme});
    const std::vector<double> old_mesh = mesh_->mesh;
    const Index off = nodes();
    const Index n = 2 * mesh_->node_count();
    *mesh_ = *fresh;
    Transfer transfer = [old_mesh, off, n, m = mesh_->scheme.m, self = this](const VectorXd& v) {
      std::vector<State> nodes(n / 2);
      for (Index i = 0; i < n / 2; ++i) nodes[i] = state_at(v, off + 2 * i);
      const OrbitSegment seg(old_mesh, m, std::move(nodes), 1.0);
      VectorXd out = v;
      out.segment(off, n) = seg.resampled(self->mesh_->mesh).flat();
      return out;
    };
    accept(transfer(z));
    return transfer;
  }

  /// Time-weighted (trapezoidal over nodes) norm for the orbit slot, so that
  /// mesh refinement in fast parts does not dominate the arclength.
  std::optional<VectorXd> slot_quadrature(const Slot& s) const override {
    if (!time_weighted_norm_ || s.name != "u") return std::nullopt;
    const int m = mesh_->scheme.m;
    VectorXd q = VectorXd::Zero(s.size);
    for (int j = 0; j < mesh_->intervals(); ++j) {
      const double w = (mesh_->mesh[j + 1] - mesh_->mesh[j]) / m;
      for (int k = 0; k <= m; ++k) {
        const double wk = (k == 0 || k == m) ? 0.5 * w : w;
        q.segment<2>(2 * (j * m + k)).array() += wk;
      }
    }
    return q / q.sum();
  }

  std::vector<double> mesh_snapshot() const override { return mesh_->mesh; }

  /// Switches back to a mesh with the same interval count, e.g. the one a
  /// stored branch point was computed on.
  void set_mesh(const std::vector<double>& mesh) {
    if (mesh.size() != mesh_->mesh.size()) {
      throw Error(ErrorCode::bad_input, "mesh has a different interval count");
    }
    mesh_->mesh = mesh;
  }

  /// Negative disables remeshing.
  void set_uniform_fraction(double f) { uniform_fraction_ = f; }
  void set_time_weighted_norm(bool on) { time_weighted_norm_ = on; }
  /// Share of the mesh density following the local expansion rate.
  void set_rate_share(double f) { rate_share_ = f; }

  /// Local expansion rate along the orbit in the segment's time, used by the
  /// mesh density. Empty when the problem has no vector field parameters.
  virtual std::function<double(const State&)> expansion_rate(const VectorXd& /*z*/) const {
    return {};
  }

  std::vector<std::pair<std::string, double>> columns(const VectorXd& z) const override {
    std::vector<std::pair<std::string, double>> out;
    for (const auto& s : layout().slots()) {
      if (s.name == "u") {
        const Index last = s.offset + s.size - 2;
        out.emplace_back("u_minus_x", z(s.offset));
        out.emplace_back("u_minus_y", z(s.offset + 1));
        out.emplace_back("u_plus_x", z(last));
        out.emplace_back("u_plus_y", z(last + 1));
      } else if (s.size == 1) {
        out.emplace_back(s.name, z(s.offset));
      } else if (s.size == 2) {
        out.emplace_back(s.name + "_x", z(s.offset));
        out.emplace_back(s.name + "_y", z(s.offset + 1));
      }
    }
    return out;
  }

  /// Adds "u" (nodes), "T", and the parameter slots in that order.
  ParamIndex add_standard_slots(double alpha) {
    layout().add("u", 2 * mesh_->node_count(), 1.0);
    layout().add("T", 1, 1.0);
    return add_parameter_slots(alpha);
  }

  ParamIndex add_parameter_slots(double alpha) {
    ParamIndex p;
    p.alpha = alpha;
    p.mu = layout().add("mu", 1, 1.0);
    p.beta = layout().add("beta", 1, 1.0);
    p.gamma = layout().add("gamma", 1, 1.0);
    return p;
  }

 private:
  std::shared_ptr<MeshData> mesh_;
  double uniform_fraction_ = 0.1;
  double rate_share_ = 0.0;
  bool time_weighted_norm_ = false;
};

/// T times the largest positive real part of the eigenvalues of J(u, p).
inline double expansion_rate(const State& u, const Params& p, double T) {
  const Mat2 j = eval_jacobian(u, p);
  const double half_tr = 0.5 * j.trace();
  const double disc = half_tr * half_tr - j.determinant();
  const double re = disc > 0.0 ? half_tr + std::sqrt(disc) : half_tr;
  return T * std::max(0.0, re);
}

}  // namespace hilltop
