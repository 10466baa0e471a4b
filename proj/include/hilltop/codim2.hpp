#pragma once

// Codimension-two points where a SNIC curve ends, approximated by orbit
// segments of large fixed length: the non-central SNIC (the invariant circle
// returns to the saddle node along its strong direction) and the
// SNICeroclinic (saddle node to saddle connection closing the circle). Both
// systems are located from fixed-period orbits and then tracked in
// (mu, beta, gamma).

#include "hilltop/periodic.hpp"

#include <cmath>

namespace hilltop {

/// Counts with the orbit segment reduced to its end points u_-, u_+ and the
/// collocation block counted as the 2 equations u_+ = flow_T(u_-).
struct ReducedCounts {
  Index equations = 0;
  Index unknowns = 0;
};

/// u_sn - u_- + v_c(u_sn, p, u_-) s_-.
class CenterDepartureBlock : public Block {
 public:
  CenterDepartureBlock(Index u_sn, Index u_minus, Index s_minus, ParamIndex p)
      : u_sn_(u_sn), u_minus_(u_minus), s_(s_minus), p_(p) {}
  std::string name() const override { return "departure"; }
  Index size() const override { return 2; }
  void residual(const VectorXd& z, std::span<double> out) const override {
    const State usn = state_at(z, u_sn_);
    const State um = state_at(z, u_minus_);
    const auto c = center_vectors(eval_jacobian(usn, p_.at(z)), usn, um);
    const Vec2 r = usn - um + c.v * z(s_);
    out[0] = r.x();
    out[1] = r.y();
  }
  std::vector<Index> dependencies() const override {
    return {u_sn_, u_sn_ + 1, u_minus_, u_minus_ + 1, s_, p_.mu, p_.beta, p_.gamma};
  }

 private:
  Index u_sn_, u_minus_, s_;
  ParamIndex p_;
};

/// w_c(u_sn, p, u_-) . (u_+ - u_sn) - s_+.
class CenterReturnBlock : public Block {
 public:
  CenterReturnBlock(Index u_sn, Index u_minus, Index u_plus, Index s_plus, ParamIndex p)
      : u_sn_(u_sn), u_minus_(u_minus), u_plus_(u_plus), s_(s_plus), p_(p) {}
  std::string name() const override { return "return"; }
  Index size() const override { return 1; }
  void residual(const VectorXd& z, std::span<double> out) const override {
    const State usn = state_at(z, u_sn_);
    const auto c = center_vectors(eval_jacobian(usn, p_.at(z)), usn, state_at(z, u_minus_));
    out[0] = c.w.dot(state_at(z, u_plus_) - usn) - z(s_);
  }
  std::vector<Index> dependencies() const override {
    return {u_sn_, u_sn_ + 1, u_minus_, u_minus_ + 1, u_plus_, u_plus_ + 1,
            s_,    p_.mu,     p_.beta,  p_.gamma};
  }

 private:
  Index u_sn_, u_minus_, u_plus_, s_;
  ParamIndex p_;
};

/// u_sa - u_+ + v_s(u_sa, p, u_+) s_+. Once the segment end has converged
/// onto the saddle to rounding level the orientation rule is void; v_s then
/// keeps the orientation of the last accepted point.
class StableArrivalBlock : public Block {
 public:
  StableArrivalBlock(Index u_sa, Index u_plus, Index s_plus, ParamIndex p)
      : u_sa_(u_sa), u_plus_(u_plus), s_(s_plus), p_(p) {}
  std::string name() const override { return "arrival"; }
  Index size() const override { return 2; }
  void residual(const VectorXd& z, std::span<double> out) const override {
    const Vec2 r = state_at(z, u_sa_) - state_at(z, u_plus_) + direction(z) * z(s_);
    out[0] = r.x();
    out[1] = r.y();
  }
  std::vector<Index> dependencies() const override {
    return {u_sa_, u_sa_ + 1, u_plus_, u_plus_ + 1, s_, p_.mu, p_.beta, p_.gamma};
  }
  void accept(const VectorXd& z) override {
    try {
      hint_ = direction(z);
    } catch (const Error&) {
      // No orientation at this point either; the next evaluation reports it.
    }
  }

  Vec2 direction(const VectorXd& z) const {
    const State usa = state_at(z, u_sa_);
    const State up = state_at(z, u_plus_);
    const Mat2 j = eval_jacobian(usa, p_.at(z));
    if (!hint_) return stable_eigen(j, usa, up).v;
    const Vec2 v = stable_eigen(j, usa, usa + *hint_).v;
    const double side = v.dot(up - usa);
    if (std::abs(side) <= kTie * std::max(1.0, usa.norm())) return v;
    return side > 0.0 ? v : Vec2(-v);
  }

  static constexpr double kTie = 1e-12;

 private:
  Index u_sa_, u_plus_, s_;
  ParamIndex p_;
  std::optional<Vec2> hint_;
};

/// Shared layout and diagnostics: "u", "T", "mu", "beta", "gamma", "u_sn",
/// [extra equilibria], "s_minus", "s_plus".
class SaddleNodeConnectionProblem : public OrbitProblem {
 public:
  const ParamIndex& params() const { return p_; }
  Index period_index() const { return T_; }
  Index u_sn_index() const { return u_sn_; }
  Index s_minus_index() const { return s_minus_; }
  Index s_plus_index() const { return s_plus_; }
  Index u_plus_index() const { return nodes() + 2 * (mesh()->node_count() - 1); }

  State u_minus(const VectorXd& z) const { return state_at(z, nodes()); }
  State u_plus(const VectorXd& z) const { return state_at(z, u_plus_index()); }
  State u_sn(const VectorXd& z) const { return state_at(z, u_sn_); }

  ReducedCounts reduced_counts() const {
    const Index collocation = 2 * static_cast<Index>(mesh()->intervals()) * mesh()->scheme.m;
    const Index interior_nodes = 2 * mesh()->node_count() - 4;
    return {equation_count() - collocation + 2, layout().size() - interior_nodes};
  }

  /// max(|f(u_sn)|, |det J(u_sn)|).
  double sn_residual(const VectorXd& z) const {
    const Params p = p_.at(z);
    const State u = u_sn(z);
    return std::max(eval_field(u, p).cwiseAbs().maxCoeff(),
                    std::abs(eval_jacobian(u, p).determinant()));
  }

  /// Distance of (gamma, lambda) from the closed-form saddle-node surface at x_sn.
  double locus_gap(const VectorXd& z) const {
    const Params p = p_.at(z);
    const double x = u_sn(z).x();
    if (x == 0.0) return kFar;
    const auto pt = saddle_node_point(p.alpha, p.beta, x);
    return std::max(std::abs(pt.gamma - p.gamma), std::abs(pt.lambda - p.lambda()));
  }

  double sn_trace(const VectorXd& z) const { return eval_jacobian(u_sn(z), p_.at(z)).trace(); }

  std::optional<std::string> admissibility(const VectorXd& z) const override {
    const double tr = sn_trace(z);
    if (!(tr < 0.0)) {
      return "saddle node is not transversally stable (trace " + std::to_string(tr) + ")";
    }
    return std::nullopt;
  }

  std::function<double(const State&)> expansion_rate(const VectorXd& z) const override {
    const Params p = p_.at(z);
    const double T = z(T_);
    return [p, T](const State& u) { return hilltop::expansion_rate(u, p, T); };
  }

  static constexpr double kFar = 1e3;

 protected:
  SaddleNodeConnectionProblem(std::string name, double alpha, std::vector<double> mesh,
                              int degree)
      : OrbitProblem(std::move(name), std::move(mesh), degree) {
    p_ = add_standard_slots(alpha);
    T_ = layout().offset("T");
    u_sn_ = layout().add("u_sn", 2);
  }

  void add_s_slots() {
    s_minus_ = layout().add("s_minus", 1);
    s_plus_ = layout().add("s_plus", 1);
  }

  void add_common_monitors() {
    add_monitor(Monitor::value("T", T_));
    add_monitor(Monitor::value("mu", p_.mu));
    add_monitor(Monitor::value("beta", p_.beta));
    add_monitor(Monitor::value("gamma", p_.gamma));
    add_monitor(Monitor::value("s_minus", s_minus_));
    add_monitor(Monitor::value("s_plus", s_plus_));
    add_monitor({"sn_trace", [this](const VectorXd& z, const VectorXd&) { return sn_trace(z); },
                 std::nullopt});
    add_monitor({"sn_residual",
                 [this](const VectorXd& z, const VectorXd&) { return sn_residual(z); },
                 std::nullopt});
    add_monitor({"locus_gap", [this](const VectorXd& z, const VectorXd&) { return locus_gap(z); },
                 std::nullopt});
  }

  ParamIndex p_;
  Index T_ = 0;
  Index u_sn_ = 0;
  Index s_minus_ = 0;
  Index s_plus_ = 0;
};

/// Orbit segment leaving a saddle node along v_c and returning near it, with
/// s_+ the signed approach along the left null vector. s_+ = 0 marks a
/// non-central SNIC.
class NcSnicProblem : public SaddleNodeConnectionProblem {
 public:
  NcSnicProblem(double alpha, std::vector<double> mesh, int degree,
                SegmentPhase phase = SegmentPhase::reference)
      : SaddleNodeConnectionProblem("noncentral_snic", alpha, std::move(mesh), degree) {
    add_s_slots();
    add_block<CollocationBlock>(this->mesh(), nodes(), T_, p_);
    add_block<EquilibriumBlock>(u_sn_, p_, "equilibrium");
    add_block<SaddleNodeBlock>(u_sn_, p_);
    add_block<CenterDepartureBlock>(u_sn_, nodes(), s_minus_, p_);
    add_block<CenterReturnBlock>(u_sn_, nodes(), u_plus_index(), s_plus_, p_);
    add_block<SegmentPhaseBlock>(this->mesh(), nodes(), phase);
    add_common_monitors();
    add_monitor({"gap_plus",
                 [this](const VectorXd& z, const VectorXd&) { return (u_plus(z) - u_sn(z)).norm(); },
                 std::nullopt});
    add_monitor({"d", [this](const VectorXd& z, const VectorXd&) { return distance(z); },
                 std::nullopt});
  }

  /// |s_-| + |u_+ - u_sn|.
  double distance(const VectorXd& z) const {
    return std::abs(z(s_minus_)) + (u_plus(z) - u_sn(z)).norm();
  }

  VectorXd pack(const OrbitSegment& seg, const State& u_sn, const Params& p, double s_minus,
                double s_plus) const {
    VectorXd z = VectorXd::Zero(layout().size());
    put_segment(z, seg);
    z(T_) = seg.period();
    z(p_.mu) = p.mu;
    z(p_.beta) = p.beta;
    z(p_.gamma) = p.gamma;
    z.segment<2>(u_sn_) = u_sn;
    z(s_minus_) = s_minus;
    z(s_plus_) = s_plus;
    return z;
  }
};

/// Orbit segment from a saddle node (leaving along v_c) to a saddle (arriving
/// along its stable eigenvector).
class SniceroclinicProblem : public SaddleNodeConnectionProblem {
 public:
  SniceroclinicProblem(double alpha, std::vector<double> mesh, int degree,
                       SegmentPhase phase = SegmentPhase::reference)
      : SaddleNodeConnectionProblem("sniceroclinic", alpha, std::move(mesh), degree) {
    u_sa_ = layout().add("u_sa", 2);
    add_s_slots();
    add_block<CollocationBlock>(this->mesh(), nodes(), T_, p_);
    add_block<EquilibriumBlock>(u_sn_, p_, "equilibrium_minus");
    add_block<SaddleNodeBlock>(u_sn_, p_);
    add_block<EquilibriumBlock>(u_sa_, p_, "equilibrium_plus");
    add_block<CenterDepartureBlock>(u_sn_, nodes(), s_minus_, p_);
    add_block<StableArrivalBlock>(u_sa_, u_plus_index(), s_plus_, p_);
    add_block<SegmentPhaseBlock>(this->mesh(), nodes(), phase);
    add_common_monitors();
    add_monitor({"d", [this](const VectorXd& z, const VectorXd&) { return distance(z); },
                 std::nullopt});
    add_monitor({"saddle_det",
                 [this](const VectorXd& z, const VectorXd&) {
                   return eval_jacobian(u_sa(z), p_.at(z)).determinant();
                 },
                 std::nullopt});
  }

  Index u_sa_index() const { return u_sa_; }
  State u_sa(const VectorXd& z) const { return state_at(z, u_sa_); }

  /// s_- + s_+.
  double distance(const VectorXd& z) const { return z(s_minus_) + z(s_plus_); }

  std::optional<std::string> admissibility(const VectorXd& z) const override {
    if (auto why = SaddleNodeConnectionProblem::admissibility(z)) return why;
    if (!(eval_jacobian(u_sa(z), p_.at(z)).determinant() < 0.0)) {
      return std::string("end equilibrium is no longer a saddle");
    }
    return std::nullopt;
  }

  VectorXd pack(const OrbitSegment& seg, const State& u_sn, const State& u_sa, const Params& p,
                double s_minus, double s_plus) const {
    VectorXd z = VectorXd::Zero(layout().size());
    put_segment(z, seg);
    z(T_) = seg.period();
    z(p_.mu) = p.mu;
    z(p_.beta) = p.beta;
    z(p_.gamma) = p.gamma;
    z.segment<2>(u_sn_) = u_sn;
    z.segment<2>(u_sa_) = u_sa;
    z(s_minus_) = s_minus;
    z(s_plus_) = s_plus;
    return z;
  }

 private:
  Index u_sa_ = 0;
};

// ---------------------------------------------------------------------------
// Seeds from periodic orbits

/// Arc of a periodic orbit between phases a < b (b - a <= 1) as a segment of
/// length T (b - a) on an arclength-equidistributed mesh.
inline OrbitSegment periodic_arc(const OrbitSegment& po, double a, double b, int intervals,
                                 int degree) {
  const CollocationScheme sc(po.degree());
  auto at = [&](double t) {
    double s = a + (b - a) * t;
    s -= std::floor(s);
    return po.eval(s, sc);
  };
  const double T = po.period() * (b - a);
  const OrbitSegment fine =
      OrbitSegment::sample(OrbitSegment::uniform_mesh(8 * intervals), degree, T, at);
  return OrbitSegment::sample(equidistributed_mesh(fine, 0.1, intervals), degree, T, at);
}

namespace detail {

// Distances from `target` along a periodic orbit at `samples` equispaced phases.
inline std::vector<double> distance_profile(const OrbitSegment& po, const State& target,
                                            int samples) {
  const CollocationScheme sc(po.degree());
  std::vector<double> d(samples);
  for (int k = 0; k < samples; ++k) {
    d[k] = (po.eval(static_cast<double>(k) / samples, sc) - target).norm();
  }
  return d;
}

inline int argmin(const std::vector<double>& v) {
  return static_cast<int>(std::min_element(v.begin(), v.end()) - v.begin());
}

// Index steps from k (direction +-1, cyclic) until the distance reaches r.
inline int walk_until(const std::vector<double>& d, int k, int dir, double r) {
  const int n = static_cast<int>(d.size());
  for (int step = 1; step < n; ++step) {
    const int i = ((k + dir * step) % n + n) % n;
    if (d[i] >= r) return k + dir * step;
  }
  throw Error(ErrorCode::seed_quality, "orbit never leaves the neighbourhood of the equilibrium");
}

inline SNLocusPoint nearest_sn_point(const OrbitSegment& po, const Params& p, int samples,
                                     double* distance = nullptr) {
  const auto pts = saddle_node_points_at_gamma(p.alpha, p.beta, p.gamma);
  if (pts.empty()) throw Error(ErrorCode::seed_quality, "no saddle-node state at this gamma");
  double best = std::numeric_limits<double>::infinity();
  SNLocusPoint out;
  for (const auto& pt : pts) {
    const auto d = distance_profile(po, pt.state(), samples);
    const double m = *std::min_element(d.begin(), d.end());
    if (m < best) {
      best = m;
      out = pt;
    }
  }
  if (distance) *distance = best;
  return out;
}

}  // namespace detail

struct NcSnicSeed {
  OrbitSegment segment;
  State u_sn = State::Zero();
  Params params;
  double s_minus = 0.0;
  double s_plus = 0.0;
};

/// Cuts a periodic orbit passing close to a saddle-node state into a segment
/// that starts and ends at distance `cut` from it. The parameters are moved
/// onto the saddle-node surface (mu = mu_sn at the same beta, gamma).
inline NcSnicSeed ncsnic_seed(const OrbitSegment& po, const Params& p, int intervals,
                              double cut = 0.02, int samples = 20000) {
  double closest = 0.0;
  const auto sn = detail::nearest_sn_point(po, p, samples, &closest);
  if (closest >= cut) {
    throw Error(ErrorCode::seed_quality, "orbit does not pass within the cut radius of a saddle node");
  }
  const auto d = detail::distance_profile(po, sn.state(), samples);
  const int k = detail::argmin(d);
  const int a = detail::walk_until(d, k, +1, cut);
  const int b = detail::walk_until(d, k + samples, -1, cut);
  NcSnicSeed s{periodic_arc(po, static_cast<double>(a) / samples, static_cast<double>(b) / samples,
                            intervals, po.degree()),
               sn.state(), sn.params(p.alpha, p.beta), 0.0, 0.0};
  const State um = s.segment.nodes().front();
  const State up = s.segment.nodes().back();
  const auto c = center_vectors(eval_jacobian(s.u_sn, s.params), s.u_sn, um);
  s.s_minus = c.v.dot(um - s.u_sn);
  s.s_plus = c.w.dot(up - s.u_sn);
  return s;
}

struct SniceroclinicSeed {
  OrbitSegment segment;
  State u_sn = State::Zero();
  State u_sa = State::Zero();
  Params params;
  double s_minus = 0.0;
  double s_plus = 0.0;
  double sn_dwell = 0.0;      // time spent within the dwell radius of u_sn
  double saddle_dwell = 0.0;  // and of u_sa, on the source orbit
  std::size_t index = 0;      // source point on the fixed-period curve
};

struct DwellTimes {
  double sn = 0.0;
  double saddle = 0.0;
  State u_sn = State::Zero();
  State u_sa = State::Zero();
  bool has_saddle = false;
};

/// Time a periodic orbit spends within `radius` of the nearest saddle-node
/// state and of the nearest saddle. Saddles closer than 4 radius to that
/// state (the partner born in the saddle node) are not counted.
inline DwellTimes dwell_times(const OrbitSegment& po, const Params& p, double radius,
                              int samples = 4000) {
  DwellTimes out;
  auto dwell = [&](const State& s) {
    const auto d = detail::distance_profile(po, s, samples);
    const auto n = std::count_if(d.begin(), d.end(), [&](double v) { return v < radius; });
    return po.period() * static_cast<double>(n) / samples;
  };
  const auto pts = saddle_node_points_at_gamma(p.alpha, p.beta, p.gamma);
  for (const auto& pt : pts) {
    const double t = dwell(pt.state());
    if (t >= out.sn) {
      out.sn = t;
      out.u_sn = pt.state();
    }
  }
  for (const auto& e : find_equilibria(p)) {
    if (e.jacobian.determinant() >= 0.0 || (e.state - out.u_sn).norm() < 4.0 * radius) continue;
    const double t = dwell(e.state);
    if (!out.has_saddle || t > out.saddle) {
      out.saddle = t;
      out.u_sa = e.state;
      out.has_saddle = true;
    }
  }
  return out;
}

/// Seed from the fixed-period point whose orbit has the longest pair of
/// plateaus near a saddle node and a saddle. The segment runs from leaving
/// the saddle node (distance `cut`) to arriving at the saddle.
inline SniceroclinicSeed sniceroclinic_seed(const FixedPeriodCurve& c, int intervals,
                                            double radius = 0.05, double cut = 0.02,
                                            double min_dwell = 5.0, int samples = 20000) {
  double best = -1.0;
  std::size_t best_i = 0;
  DwellTimes best_dw;
  for (std::size_t i = 0; i < c.curve.size(); ++i) {
    const OrbitSegment po = periodic_orbit(c.curve[i], c.degree);
    const auto dw = dwell_times(po, c.params.at(c.curve[i].z), radius);
    if (!dw.has_saddle) continue;
    const double score = std::min(dw.sn, dw.saddle);
    if (score > best) {
      best = score;
      best_i = i;
      best_dw = dw;
    }
  }
  if (best < min_dwell) {
    throw Error(ErrorCode::seed_quality,
                "no orbit with two long plateaus near a saddle node and a saddle (best " +
                    std::to_string(best) + ")");
  }
  const OrbitSegment po = periodic_orbit(c.curve[best_i], c.degree);
  const Params p0 = c.params.at(c.curve[best_i].z);
  const auto sn = detail::nearest_sn_point(po, p0, samples);
  SniceroclinicSeed s;
  s.params = sn.params(p0.alpha, p0.beta);
  s.u_sn = sn.state();
  s.sn_dwell = best_dw.sn;
  s.saddle_dwell = best_dw.saddle;
  s.index = best_i;
  bool found = false;
  for (const auto& e : find_equilibria(s.params)) {
    if (e.jacobian.determinant() >= 0.0) continue;
    if (!found || (e.state - best_dw.u_sa).norm() < (s.u_sa - best_dw.u_sa).norm()) {
      s.u_sa = e.state;
      found = true;
    }
  }
  if (!found) throw Error(ErrorCode::seed_quality, "no saddle on the saddle-node surface");

  const auto dn = detail::distance_profile(po, s.u_sn, samples);
  const auto ds = detail::distance_profile(po, s.u_sa, samples);
  const int a = detail::walk_until(dn, detail::argmin(dn), +1, cut);
  int k = a;
  double closest = std::numeric_limits<double>::infinity();
  for (int i = a; i < a + samples; ++i) {
    const double v = ds[i % samples];
    if (v < closest) {
      closest = v;
      k = i;
    }
  }
  if (closest >= cut) throw Error(ErrorCode::seed_quality, "orbit does not reach the saddle");
  const int b = detail::walk_until(ds, k, -1, cut);
  s.segment = periodic_arc(po, static_cast<double>(a) / samples, static_cast<double>(b) / samples,
                           intervals, po.degree());
  const State um = s.segment.nodes().front();
  const State up = s.segment.nodes().back();
  const auto cv = center_vectors(eval_jacobian(s.u_sn, s.params), s.u_sn, um);
  s.s_minus = cv.v.dot(um - s.u_sn);
  const auto st = stable_eigen(eval_jacobian(s.u_sa, s.params), s.u_sa, up);
  s.s_plus = st.v.dot(up - s.u_sa);
  return s;
}

// ---------------------------------------------------------------------------
// Run sequences

struct Codim2Options {
  int intervals = 200;
  int degree = 4;
  double accurate_period = 2e3;  // length reached by the accuracy run
  double beta_span = 0.3;        // tracking runs go to beta0 -+ span
  double cut = 0.02;
  SegmentPhase phase = SegmentPhase::reference_slope;
  int max_steps = 2000;
  double h_max = 0.1;
  double rate_share = 0.4;  // mesh share following the expansion rate (saddle passages)
};

inline Codim2Options sniceroclinic_defaults() {
  Codim2Options o;
  o.accurate_period = 1e3;
  return o;
}

/// Curve of a tracking run in both beta directions, merged in beta order.
struct TrackedCurve {
  Branch toward_minus;
  Branch toward_plus;
  std::vector<BranchPoint> points;
};

struct NcSnicResult {
  Branch accuracy;  // run 1: T grows, parameters fixed
  Branch snic;      // run 2: SNIC at fixed beta and T
  std::optional<BranchPoint> noncentral;
  TrackedCurve curve;  // run 3: s_+ = 0
  ParamIndex params;
  ReducedCounts counts;
  std::vector<double> seed_mesh;
  std::string status = "ok";
};

struct SniceroclinicResult {
  Branch accuracy;
  TrackedCurve curve;
  ParamIndex params;
  ReducedCounts counts;
  SniceroclinicSeed seed;
  std::string status = "ok";
};

namespace detail {

inline StepControls codim2_controls(const Codim2Options& o) {
  StepControls c;
  c.h0 = 0.01;
  c.h_max = o.h_max;
  c.min_cos = 0.8;
  c.max_steps = o.max_steps;
  c.remesh_every = 5;
  return c;
}

inline TrackedCurve track_in_beta(OrbitProblem& prob, const VectorXd& z0, double beta0,
                                  std::vector<std::string> frozen, const Codim2Options& o) {
  TrackedCurve tc;
  const StepControls ctl = codim2_controls(o);
  const std::vector<double> mesh0 = prob.mesh_snapshot();
  auto side = [&](int sign) {
    // Each side starts from the same point and mesh.
    prob.set_mesh(mesh0);
    RunSpec r;
    r.frozen = frozen;
    r.direction = "beta";
    r.direction_sign = sign;
    r.events = {{"beta_end", "beta", beta0 + sign * o.beta_span, true}};
    return continue_branch(prob, z0, r, ctl);
  };
  tc.toward_minus = side(-1);
  tc.toward_plus = side(+1);
  for (auto it = tc.toward_minus.points.rbegin(); it != tc.toward_minus.points.rend(); ++it) {
    tc.points.push_back(*it);
  }
  if (!tc.toward_plus.points.empty()) {
    tc.points.insert(tc.points.end(), tc.toward_plus.points.begin() + 1,
                     tc.toward_plus.points.end());
  }
  return tc;
}

inline std::string run_status(const Branch& b, const std::string& run) {
  return b.failed ? run + ": " + b.termination : std::string();
}

}  // namespace detail

/// Locates a non-central SNIC at the seed's beta and tracks it in beta:
/// run 1 lengthens the segment to the accurate period at fixed (beta, gamma);
/// run 2 follows the SNIC in (gamma, mu) until s_+ = 0; run 3 follows s_+ = 0.
inline NcSnicResult run_ncsnic_pipeline(const NcSnicSeed& seed, const Codim2Options& o = {}) {
  NcSnicResult out;
  NcSnicProblem prob(seed.params.alpha, seed.segment.mesh(), o.degree, o.phase);
  prob.set_rate_share(o.rate_share);
  out.params = prob.params();
  out.counts = prob.reduced_counts();
  out.seed_mesh = seed.segment.mesh();
  const StepControls ctl = detail::codim2_controls(o);
  const VectorXd z0 = prob.pack(seed.segment, seed.u_sn, seed.params, seed.s_minus, seed.s_plus);

  RunSpec r1;
  r1.frozen = {"beta", "gamma"};
  r1.direction = "T";
  r1.events = {{"accurate", "T", o.accurate_period, true}};
  out.accuracy = continue_branch(prob, z0, r1, ctl);
  if (out.accuracy.find_event("accurate") == nullptr) {
    out.status = "run 1 did not reach T: " + out.accuracy.termination;
    return out;
  }

  const VectorXd z1 = out.accuracy.points.back().z;
  const std::vector<double> mesh1 = prob.mesh_snapshot();
  for (int sign : {-1, 1}) {
    prob.set_mesh(mesh1);
    RunSpec r2;
    r2.frozen = {"beta", "T"};
    r2.direction = "gamma";
    r2.direction_sign = sign;
    r2.events = {{"noncentral", "s_plus", 0.0, true}};
    out.snic = continue_branch(prob, z1, r2, ctl);
    if (const BranchPoint* e = out.snic.find_event("noncentral")) {
      out.noncentral = *e;
      break;
    }
  }
  if (!out.noncentral) {
    out.status = "run 2 found no s_+ = 0: " + out.snic.termination;
    return out;
  }

  VectorXd z2 = out.noncentral->z;
  z2(prob.s_plus_index()) = 0.0;
  prob.set_mesh(out.noncentral->mesh);
  out.curve = detail::track_in_beta(prob, z2, prob.params().at(z2).beta, {"s_plus", "T"}, o);
  for (const Branch* b : {&out.curve.toward_minus, &out.curve.toward_plus}) {
    const std::string s = detail::run_status(*b, "run 3");
    if (!s.empty()) out.status = s;
  }
  return out;
}

/// Locates a SNICeroclinic at the seed's beta (run 1, segment lengthened at
/// fixed beta) and tracks it in beta at fixed T (run 2).
inline SniceroclinicResult run_sniceroclinic_pipeline(const SniceroclinicSeed& seed,
                                                      const Codim2Options& o =
                                                          sniceroclinic_defaults()) {
  SniceroclinicResult out;
  out.seed = seed;
  SniceroclinicProblem prob(seed.params.alpha, seed.segment.mesh(), o.degree, o.phase);
  prob.set_rate_share(o.rate_share);
  out.params = prob.params();
  out.counts = prob.reduced_counts();
  const StepControls ctl = detail::codim2_controls(o);
  const VectorXd z0 =
      prob.pack(seed.segment, seed.u_sn, seed.u_sa, seed.params, seed.s_minus, seed.s_plus);

  RunSpec r1;
  r1.frozen = {"beta"};
  r1.direction = "T";
  r1.events = {{"accurate", "T", o.accurate_period, true}};
  out.accuracy = continue_branch(prob, z0, r1, ctl);
  if (out.accuracy.find_event("accurate") == nullptr) {
    out.status = "run 1 did not reach T: " + out.accuracy.termination;
    return out;
  }
  const VectorXd z1 = out.accuracy.points.back().z;
  out.curve = detail::track_in_beta(prob, z1, prob.params().at(z1).beta, {"T"}, o);
  for (const Branch* b : {&out.curve.toward_minus, &out.curve.toward_plus}) {
    const std::string s = detail::run_status(*b, "run 2");
    if (!s.empty()) out.status = s;
  }
  return out;
}

}  // namespace hilltop
