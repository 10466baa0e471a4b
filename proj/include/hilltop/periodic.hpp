#pragma once

// Periodic orbits of the normal form: the periodic boundary-value problem,
// starting data at a Hopf point, Floquet multipliers from the collocation
// linearization, and fixed-period approximation of homoclinic/SNIC curves.

#include "hilltop/analytic_loci.hpp"
#include "hilltop/orbit_problem.hpp"

#include <complex>
#include <numbers>

namespace hilltop {

struct FloquetResult {
  std::array<double, 2> multipliers{};  // ordered by |value|
  double trivial = 1.0;                 // the multiplier closest to 1
  double nontrivial = 0.0;              // det / trivial
  double log_abs_det = 0.0;             // log |m1 m2| from the propagators
  double divergence_integral = 0.0;     // T * int_0^1 tr J(u(t)) dt
  bool complex_pair = false;

  bool stable() const { return std::abs(nontrivial) < 1.0; }
  /// |m1 m2 - exp(T int tr J)|.
  double liouville_defect() const {
    return std::abs(std::exp(log_abs_det) - std::exp(divergence_integral));
  }
};

/// Multipliers of u' = T f(u, p) on a converged periodic segment. The
/// monodromy matrix is the product of per-interval propagators of the
/// linearized collocation equations; its trace is accumulated with running
/// normalization and its determinant as a sum of logarithms.
inline FloquetResult floquet_multipliers(const OrbitSegment& po, const Params& p) {
  const CollocationScheme sc(po.degree());
  const int m = sc.m;
  const double T = po.period();
  Mat2 prod = Mat2::Identity();
  double log_scale = 0.0;
  double log_det = 0.0;
  int det_sign = 1;
  Eigen::MatrixXd a(2 * m, 2 * m);
  Eigen::MatrixXd a0(2 * m, 2);
  for (int j = 0; j < po.intervals(); ++j) {
    const double h = po.width(j);
    for (int i = 0; i < m; ++i) {
      const double t = po.mesh()[j] + h * sc.gauss(i);
      const Mat2 jac = eval_jacobian(po.eval(t, sc), p);
      for (int k = 0; k <= m; ++k) {
        const Mat2 blk = sc.slope(i, k) * Mat2::Identity() - h * T * sc.value(i, k) * jac;
        if (k == 0) {
          a0.block<2, 2>(2 * i, 0) = blk;
        } else {
          a.block<2, 2>(2 * i, 2 * (k - 1)) = blk;
        }
      }
    }
    const Eigen::MatrixXd sol = -a.partialPivLu().solve(a0);
    const Mat2 mj = sol.block<2, 2>(2 * (m - 1), 0);
    const double dj = mj.determinant();
    if (dj == 0.0) throw Error(ErrorCode::numerical_failure, "singular interval propagator");
    log_det += std::log(std::abs(dj));
    if (dj < 0.0) det_sign = -det_sign;
    prod = mj * prod;
    const double nrm = prod.norm();
    prod /= nrm;
    log_scale += std::log(nrm);
  }
  FloquetResult out;
  out.log_abs_det = log_det;
  out.divergence_integral = T * integrate_segment(po, sc, [&](double, const State& u) {
    return eval_jacobian(u, p).trace();
  });
  // Characteristic polynomial of exp(log_scale) * prod, solved for the
  // larger root first; the smaller one follows from the determinant.
  const double tr_scaled = prod.trace();
  const double det_rel = det_sign * std::exp(log_det - 2.0 * log_scale);  // det / scale^2
  const double disc = tr_scaled * tr_scaled - 4.0 * det_rel;
  if (disc < 0.0) {
    out.complex_pair = true;
    const double modulus = std::exp(0.5 * log_det);
    out.multipliers = {modulus, modulus};
    out.trivial = modulus;
    out.nontrivial = modulus;
    return out;
  }
  const double big_scaled =
      0.5 * (tr_scaled + std::copysign(std::sqrt(disc), tr_scaled == 0.0 ? 1.0 : tr_scaled));
  const double big = big_scaled * std::exp(log_scale);
  const double small = det_sign * std::exp(log_det) / big;
  out.multipliers = {small, big};
  out.trivial = std::abs(big - 1.0) < std::abs(small - 1.0) ? big : small;
  out.nontrivial = det_sign * std::exp(log_det) / out.trivial;
  return out;
}

/// Periodic orbit problem: collocation + periodicity + integral phase
/// condition, unknowns (u, T, mu, beta, gamma).
class PeriodicOrbitProblem : public OrbitProblem {
 public:
  PeriodicOrbitProblem(double alpha, std::vector<double> mesh, int degree,
                       std::string name = "periodic_orbit")
      : OrbitProblem(std::move(name), std::move(mesh), degree) {
    p_ = add_standard_slots(alpha);
    T_ = layout().offset("T");
    add_block<CollocationBlock>(this->mesh(), nodes(), T_, p_);
    add_block<PeriodicityBlock>(this->mesh(), nodes());
    add_block<PeriodicPhaseBlock>(this->mesh(), nodes());
    add_monitor(Monitor::value("T", T_));
    add_monitor(Monitor::value("mu", p_.mu));
    add_monitor(Monitor::value("gamma", p_.gamma));
    add_monitor(Monitor::fold("fold_mu", p_.mu));
    add_monitor({"amplitude", [this](const VectorXd& z, const VectorXd&) { return amplitude(z); },
                 std::nullopt});
    add_monitor({"multiplier",
                 [this](const VectorXd& z, const VectorXd&) {
                   return floquet_multipliers(segment(z), p_.at(z)).nontrivial;
                 },
                 std::nullopt});
  }

  const ParamIndex& params() const { return p_; }

  std::function<double(const State&)> expansion_rate(const VectorXd& z) const override {
    return [p = p_.at(z), T = z(T_)](const State& u) { return hilltop::expansion_rate(u, p, T); };
  }

  VectorXd pack(const OrbitSegment& seg, const Params& p) const {
    VectorXd z = VectorXd::Zero(layout().size());
    put_segment(z, seg);
    z(T_) = seg.period();
    z(p_.mu) = p.mu;
    z(p_.beta) = p.beta;
    z(p_.gamma) = p.gamma;
    return z;
  }

  /// Larger side of the bounding box of the nodes.
  double amplitude(const VectorXd& z) const {
    const Index n = mesh()->node_count();
    State lo = state_at(z, nodes());
    State hi = lo;
    for (Index i = 1; i < n; ++i) {
      const State u = state_at(z, nodes() + 2 * i);
      lo = lo.cwiseMin(u);
      hi = hi.cwiseMax(u);
    }
    return (hi - lo).maxCoeff();
  }

  /// Smallest distance from the orbit nodes to `target`.
  double distance_to(const VectorXd& z, const State& target) const {
    double best = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < mesh()->node_count(); ++i) {
      best = std::min(best, (state_at(z, nodes() + 2 * i) - target).norm());
    }
    return best;
  }

 protected:
  ParamIndex p_;
  Index T_ = 0;
};

struct HopfStart {
  OrbitSegment guess;
  Params params;
  HopfInfo hopf;
  VectorXd amplitude_functional;  // c with c.z = constraint_value fixes the amplitude
  double constraint_value = 0.0;
  double epsilon = 0.0;
};

/// Small-amplitude guess u = x_eq + eps (cos 2 pi t v_re - sin 2 pi t v_im) with
/// (v_re, v_im) the normalized critical eigenvector and T = 2 pi / sqrt(det J).
inline HopfStart start_periodic_from_hopf(const PeriodicOrbitProblem& prob, const Params& at,
                                          double epsilon = 1e-3) {
  Params p = at;
  p.mu = 0.0;  // the trace-zero equilibrium exists at lambda = lambda_tr0
  const HopfInfo hopf = trace_zero_point(p);
  if (hopf.kind != TraceZeroKind::hopf) {
    throw Error(ErrorCode::no_hopf, "no Hopf point at these parameters");
  }
  const double w = hopf.eigen_frequency;
  const double x = hopf.x_eq;
  Vec2 v_re(2.0 * p.alpha, -2.0 * x);
  Vec2 v_im(0.0, w);
  const double nrm = std::sqrt(v_re.squaredNorm() + v_im.squaredNorm());
  v_re /= nrm;
  v_im /= nrm;
  const State eq = hopf.equilibrium();
  const double T = 2.0 * std::numbers::pi / w;
  HopfStart s;
  s.guess = OrbitSegment::sample(prob.mesh()->mesh, prob.mesh()->scheme.m, T, [&](double t) {
    const double th = 2.0 * std::numbers::pi * t;
    return State(eq + epsilon * (std::cos(th) * v_re - std::sin(th) * v_im));
  });
  s.params = p;
  s.hopf = hopf;
  s.epsilon = epsilon;
  // u(0) = eq + eps v_re; hold its component along v_re.
  const Vec2 dir = v_re.normalized();
  s.amplitude_functional = VectorXd::Zero(prob.layout().size());
  s.amplitude_functional.segment<2>(prob.nodes()) = dir;
  s.constraint_value = dir.dot(eq) + epsilon * v_re.norm();
  return s;
}

/// Periodic orbits of fixed large period approximating homoclinic and SNIC
/// orbits, with distance monitors to saddles and to the saddle-node locus.
class FixedPeriodProblem : public PeriodicOrbitProblem {
 public:
  FixedPeriodProblem(double alpha, std::vector<double> mesh, int degree)
      : PeriodicOrbitProblem(alpha, std::move(mesh), degree, "fixed_period_orbit") {
    add_monitor({"saddle_distance",
                 [this](const VectorXd& z, const VectorXd&) { return saddle_distance(z); },
                 std::nullopt});
    add_monitor({"sn_distance",
                 [this](const VectorXd& z, const VectorXd&) { return nearest_sn(z).distance; },
                 std::nullopt});
    add_monitor({"sn_offset",
                 [this](const VectorXd& z, const VectorXd&) { return nearest_sn(z).mu_offset; },
                 std::nullopt});
  }

  /// Closest approach of the orbit to any saddle (large without saddles).
  double saddle_distance(const VectorXd& z) const {
    double best = kFar;
    for (const auto& e : find_equilibria(p_.at(z))) {
      if (e.jacobian.determinant() < 0.0) best = std::min(best, distance_to(z, e.state));
    }
    return best;
  }

  struct SnApproach {
    double distance = kFar;   // orbit to the nearest saddle-node state at this gamma
    double mu_offset = kFar;  // mu - mu_sn for that locus point
  };

  SnApproach nearest_sn(const VectorXd& z) const {
    const Params p = p_.at(z);
    SnApproach out;
    for (const auto& pt : saddle_node_points_at_gamma(p.alpha, p.beta, p.gamma)) {
      const double d = distance_to(z, pt.state());
      if (d < out.distance) out = {d, p.mu - pt.params(p.alpha, p.beta).mu};
    }
    return out;
  }

  static constexpr double kFar = 1e3;
};

struct FixedPeriodOptions {
  double period = 170.0;
  int intervals = 150;
  int degree = 4;
  double hopf_epsilon = 1e-3;
  double end_amplitude = 0.05;  // stop once the orbit has shrunk into a Takens-Bogdanov point
  double near = 1e-2;           // distance threshold for saddle and saddle-node approach
  int max_steps = 3000;
};

/// Closed SNIC stretch of a fixed-period curve: orbit within `near` of a
/// saddle-node state and away from every saddle.
struct SnicSegment {
  std::size_t first = 0;
  std::size_t last = 0;  // inclusive point indices into the merged curve
  Params start;
  Params end;
};

struct FixedPeriodCurve {
  Branch growth;       // periodic orbits from the Hopf point up to the fixed period
  Branch toward_minus;  // fixed-period branch with gamma initially decreasing
  Branch toward_plus;
  std::vector<BranchPoint> curve;  // toward_minus reversed, then toward_plus
  std::vector<std::string> monitor_names;
  ParamIndex params;
  int degree = 4;
  std::optional<SnicSegment> snic;
};

/// Orbit stored in a periodic-orbit branch point (nodes first, then T).
inline OrbitSegment periodic_orbit(const BranchPoint& pt, int degree) {
  if (pt.mesh.size() < 2) throw Error(ErrorCode::bad_input, "branch point carries no mesh");
  const Index count = static_cast<Index>(pt.mesh.size() - 1) * degree + 1;
  std::vector<State> nodes(count);
  for (Index i = 0; i < count; ++i) nodes[i] = state_at(pt.z, 2 * i);
  return OrbitSegment(pt.mesh, degree, std::move(nodes), pt.z(2 * count));
}

/// Homoclinic/SNIC curve in (gamma, mu) at fixed (alpha, beta), traced by
/// periodic orbits of one fixed large period. The starting orbit is grown
/// from the Hopf point at gamma = gamma_start.
inline FixedPeriodCurve continue_fixed_period_homoclinic(double alpha, double beta,
                                                         double gamma_start,
                                                         const FixedPeriodOptions& opt = {}) {
  PeriodicOrbitProblem grow(alpha, OrbitSegment::uniform_mesh(opt.intervals), opt.degree);
  const auto hs = start_periodic_from_hopf(grow, Params{alpha, beta, gamma_start, 0.0},
                                           opt.hopf_epsilon);
  RunSpec r1;
  r1.frozen = {"beta", "gamma"};
  r1.initial_constraint = std::make_pair(hs.amplitude_functional, hs.constraint_value);
  r1.direction_functional = hs.amplitude_functional;
  r1.events = {{"fixed_period", "T", opt.period, true}};
  StepControls c1;
  c1.h0 = 0.01;
  c1.h_max = 0.2;
  c1.max_steps = 600;
  c1.remesh_every = 5;
  FixedPeriodCurve out;
  out.degree = opt.degree;
  out.growth = continue_branch(grow, grow.pack(hs.guess, hs.params), r1, c1);
  if (out.growth.find_event("fixed_period") == nullptr) {
    throw Error(ErrorCode::numerical_failure,
                "periodic branch did not reach the fixed period: " + out.growth.termination);
  }
  const VectorXd start = out.growth.points.back().z;

  StepControls c2;
  c2.h0 = 0.01;
  c2.h_max = 0.1;
  c2.min_cos = 0.8;
  c2.max_steps = opt.max_steps;
  c2.remesh_every = 5;
  auto run_side = [&](int sign) {
    FixedPeriodProblem prob(alpha, grow.mesh()->mesh, opt.degree);
    prob.set_rate_share(0.4);
    RunSpec r;
    r.frozen = {"beta", "T"};
    r.direction = "gamma";
    r.direction_sign = sign;
    r.events = {{"saddle_release", "saddle_distance", opt.near, false},
                {"takens_bogdanov", "amplitude", opt.end_amplitude, true}};
    Branch b = continue_branch(prob, start, r, c2);
    out.params = prob.params();
    out.monitor_names = b.monitor_names;
    return b;
  };
  out.toward_minus = run_side(-1);
  out.toward_plus = run_side(+1);
  for (auto it = out.toward_minus.points.rbegin(); it != out.toward_minus.points.rend(); ++it) {
    out.curve.push_back(*it);
  }
  out.curve.insert(out.curve.end(), out.toward_plus.points.begin() + 1,
                   out.toward_plus.points.end());

  // Longest run of SNIC points.
  const std::size_t ks = out.toward_plus.monitor_index("saddle_distance");
  const std::size_t kn = out.toward_plus.monitor_index("sn_distance");
  std::size_t best_len = 0;
  for (std::size_t i = 0; i < out.curve.size();) {
    auto snic = [&](std::size_t j) {
      return out.curve[j].monitors[kn] < opt.near && out.curve[j].monitors[ks] > opt.near;
    };
    if (!snic(i)) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < out.curve.size() && snic(j + 1)) ++j;
    if (j - i + 1 > best_len) {
      best_len = j - i + 1;
      // Located crossings just outside the run are the sharper endpoints.
      std::size_t a = i, b = j;
      if (a > 0 && !out.curve[a - 1].event.empty()) --a;
      if (b + 1 < out.curve.size() && !out.curve[b + 1].event.empty()) ++b;
      out.snic = SnicSegment{a, b, out.params.at(out.curve[a].z), out.params.at(out.curve[b].z)};
    }
    i = j + 1;
  }
  return out;
}

struct SnpoResult {
  Branch branch;                   // periodic orbits grown from the Hopf point
  std::optional<BranchPoint> fold;  // first fold in mu with nontrivial multiplier at +1
  ParamIndex params;
};

/// Grows periodic orbits from the Hopf point at gamma and reports the first
/// saddle-node of periodic orbits. Folds whose nontrivial multiplier is not
/// within `multiplier_tol` of 1 (long orbits near homoclinics, where the
/// multiplier is ill-conditioned) are ignored.
inline SnpoResult find_snpo(double alpha, double beta, double gamma, int intervals = 60,
                            double max_period = 60.0, double multiplier_tol = 1e-3) {
  PeriodicOrbitProblem prob(alpha, OrbitSegment::uniform_mesh(intervals), 4);
  const auto hs = start_periodic_from_hopf(prob, Params{alpha, beta, gamma, 0.0});
  RunSpec run;
  run.frozen = {"beta", "gamma"};
  run.initial_constraint = std::make_pair(hs.amplitude_functional, hs.constraint_value);
  run.direction_functional = hs.amplitude_functional;
  run.events = {{"snpo", "fold_mu", 0.0, false}, {"max_period", "T", max_period, true}};
  StepControls ctl;
  ctl.h0 = 0.01;
  ctl.h_max = 0.1;
  ctl.remesh_every = 5;
  SnpoResult out{continue_branch(prob, prob.pack(hs.guess, hs.params), run, ctl), std::nullopt,
                 prob.params()};
  const std::size_t km = out.branch.monitor_index("multiplier");
  for (const auto& p : out.branch.points) {
    if (p.event == "snpo" && std::abs(p.monitors[km] - 1.0) < multiplier_tol) {
      out.fold = p;
      break;
    }
  }
  return out;
}

struct OrbitAtParams {
  OrbitSegment orbit;
  FloquetResult floquet;
};

/// Periodic orbits of the Hopf family at the given parameters, in the order
/// the family reaches them (small stable/unstable orbit first).
inline std::vector<OrbitAtParams> periodic_orbits_at(const Params& p, int intervals = 60,
                                                     double max_period = 60.0) {
  PeriodicOrbitProblem prob(p.alpha, OrbitSegment::uniform_mesh(intervals), 4);
  const auto hs = start_periodic_from_hopf(prob, Params{p.alpha, p.beta, p.gamma, 0.0});
  RunSpec run;
  run.frozen = {"beta", "gamma"};
  run.initial_constraint = std::make_pair(hs.amplitude_functional, hs.constraint_value);
  run.direction_functional = hs.amplitude_functional;
  run.events = {{"at_mu", "mu", p.mu, false}, {"max_period", "T", max_period, true}};
  StepControls ctl;
  ctl.h0 = 0.01;
  ctl.h_max = 0.1;
  ctl.remesh_every = 5;
  const Branch b = continue_branch(prob, prob.pack(hs.guess, hs.params), run, ctl);
  std::vector<OrbitAtParams> out;
  for (const auto& pt : b.points) {
    if (pt.event != "at_mu") continue;
    OrbitSegment po = periodic_orbit(pt, 4);
    FloquetResult fl = floquet_multipliers(po, prob.params().at(pt.z));
    out.push_back({std::move(po), fl});
  }
  return out;
}

/// Closed polygon through `samples` equispaced phases of a periodic orbit.
inline std::vector<State> orbit_polygon(const OrbitSegment& po, int samples = 2000) {
  const CollocationScheme sc(po.degree());
  std::vector<State> out(samples);
  for (int k = 0; k < samples; ++k) out[k] = po.eval(static_cast<double>(k) / samples, sc);
  return out;
}

/// Even-odd rule.
inline bool inside_polygon(const std::vector<State>& poly, const State& q) {
  bool inside = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const State& a = poly[i];
    const State& b = poly[j];
    if ((a.y() > q.y()) != (b.y() > q.y()) &&
        q.x() < a.x() + (q.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y())) {
      inside = !inside;
    }
  }
  return inside;
}

}  // namespace hilltop
