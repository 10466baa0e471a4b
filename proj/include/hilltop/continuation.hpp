#pragma once

// Pseudo-arclength continuation of F(z) = 0 with a named unknown layout,
// frozen slots, monitors and events.

#include "hilltop/core.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hilltop {

using Eigen::Index;
using Eigen::VectorXd;
using Triplets = std::vector<Eigen::Triplet<double>>;

struct Slot {
  std::string name;
  Index offset = 0;
  Index size = 0;
  double scale_floor = 1.0;  // lower bound of the arclength scale for this slot
};

class Layout {
 public:
  Index add(std::string name, Index size, double scale_floor = 1.0) {
    if (find(name)) throw Error(ErrorCode::bad_input, "duplicate slot " + name);
    slots_.push_back({std::move(name), size_, size, scale_floor});
    size_ += size;
    return slots_.back().offset;
  }
  Index size() const { return size_; }
  const std::vector<Slot>& slots() const { return slots_; }
  void set_scale_floor(std::string_view name, double floor) {
    for (auto& s : slots_) {
      if (s.name == name) s.scale_floor = floor;
    }
  }
  const Slot* find(std::string_view name) const {
    for (const auto& s : slots_) {
      if (s.name == name) return &s;
    }
    return nullptr;
  }
  const Slot& slot(std::string_view name) const {
    const Slot* s = find(name);
    if (!s) throw Error(ErrorCode::bad_input, "unknown slot " + std::string(name));
    return *s;
  }
  Index offset(std::string_view name) const { return slot(name).offset; }

 private:
  std::vector<Slot> slots_;
  Index size_ = 0;
};

/// A group of equations. The default Jacobian is a central difference over
/// the declared dependencies.
class Block {
 public:
  virtual ~Block() = default;
  virtual std::string name() const = 0;
  virtual Index size() const = 0;
  virtual void residual(const VectorXd& z, std::span<double> out) const = 0;
  virtual std::vector<Index> dependencies() const { return {}; }
  virtual void jacobian(const VectorXd& z, Index row0, Triplets& out) const {
    const Index n = size();
    std::vector<double> rp(n), rm(n);
    VectorXd w = z;
    for (Index c : dependencies()) {
      const double h = 1e-6 * std::max(1.0, std::abs(z(c)));
      w(c) = z(c) + h;
      residual(w, rp);
      w(c) = z(c) - h;
      residual(w, rm);
      w(c) = z(c);
      for (Index r = 0; r < n; ++r) out.emplace_back(row0 + r, c, (rp[r] - rm[r]) / (2.0 * h));
    }
  }
  virtual void accept(const VectorXd& /*z*/) {}
};

struct Monitor {
  std::string name;
  std::function<double(const VectorXd& z, const VectorXd& tangent)> fn;
  std::optional<Index> slot;  // set when the monitor is a plain unknown

  static Monitor value(std::string name, Index index) {
    return {std::move(name), [index](const VectorXd& z, const VectorXd&) { return z(index); }, index};
  }
  /// Tangent component of an unknown; vanishes at folds with respect to it.
  static Monitor fold(std::string name, Index index) {
    return {std::move(name), [index](const VectorXd&, const VectorXd& t) { return t(index); },
            std::nullopt};
  }
};

/// A resampling of the discretization: maps any old unknown vector (solution
/// or tangent) onto the new discretization.
using Transfer = std::function<VectorXd(const VectorXd&)>;

class Problem {
 public:
  virtual ~Problem() = default;
  virtual std::string name() const = 0;
  virtual const Layout& layout() const = 0;
  virtual Index equation_count() const = 0;
  virtual void evaluate(const VectorXd& z, VectorXd& r, Triplets* jac) const = 0;
  virtual std::vector<Monitor> monitors() const { return {}; }
  /// Called after every accepted point (reference-solution update).
  virtual void accept(const VectorXd& /*z*/) {}
  /// Returns a diagnostic when the point violates an assumption of the system.
  virtual std::optional<std::string> admissibility(const VectorXd& /*z*/) const {
    return std::nullopt;
  }
  /// Relative weights (summing to 1) of the entries of a slot in the
  /// arclength norm; uniform when absent.
  virtual std::optional<VectorXd> slot_quadrature(const Slot& /*s*/) const { return std::nullopt; }
  /// Optionally redistributes the mesh; returns the transfer to the new one.
  virtual std::optional<Transfer> remesh(const VectorXd& /*z*/) { return std::nullopt; }
  /// Current mesh of a discretized problem, recorded with every branch point.
  virtual std::vector<double> mesh_snapshot() const { return {}; }
  /// Scalar columns written to branch tables.
  virtual std::vector<std::pair<std::string, double>> columns(const VectorXd& z) const {
    std::vector<std::pair<std::string, double>> out;
    for (const auto& s : layout().slots()) {
      if (s.size == 1) {
        out.emplace_back(s.name, z(s.offset));
      } else if (s.size == 2) {
        out.emplace_back(s.name + "_x", z(s.offset));
        out.emplace_back(s.name + "_y", z(s.offset + 1));
      }
    }
    return out;
  }
};

/// Problem assembled from blocks over a shared layout.
class ComposedProblem : public Problem {
 public:
  explicit ComposedProblem(std::string name) : name_(std::move(name)) {}
  std::string name() const override { return name_; }
  const Layout& layout() const override { return layout_; }
  Layout& layout() { return layout_; }

  template <class B, class... Args>
  B& add_block(Args&&... args) {
    auto b = std::make_unique<B>(std::forward<Args>(args)...);
    B& ref = *b;
    blocks_.push_back(std::move(b));
    return ref;
  }
  const std::vector<std::unique_ptr<Block>>& blocks() const { return blocks_; }

  Index equation_count() const override {
    Index n = 0;
    for (const auto& b : blocks_) n += b->size();
    return n;
  }

  void evaluate(const VectorXd& z, VectorXd& r, Triplets* jac) const override {
    r.resize(equation_count());
    Index row = 0;
    for (const auto& b : blocks_) {
      b->residual(z, std::span<double>(r.data() + row, b->size()));
      if (jac) b->jacobian(z, row, *jac);
      row += b->size();
    }
  }

  void accept(const VectorXd& z) override {
    for (auto& b : blocks_) b->accept(z);
  }

  std::vector<Monitor> monitors() const override { return monitors_; }
  void add_monitor(Monitor m) { monitors_.push_back(std::move(m)); }

 private:
  std::string name_;
  Layout layout_;
  std::vector<std::unique_ptr<Block>> blocks_;
  std::vector<Monitor> monitors_;
};

struct EventSpec {
  std::string tag;
  std::string monitor;
  double target = 0.0;
  bool stop = false;
};

struct StepControls {
  double h0 = 0.05;
  double h_min = 1e-7;
  double h_max = 0.5;
  int max_steps = 400;
  int newton_max = 12;
  double newton_tol = 1e-10;   // residual (max norm) for convergence
  double accept_tol = 1e-8;    // residual bound for an accepted point
  double event_tol = 1e-8;     // monitor tolerance for located events
  int fast_iterations = 3;     // grow the step when Newton needs at most this many
  double grow = 1.5;
  double min_cos = 0.95;       // reject steps turning the tangent more than this
  double max_correction = 1.0; // reject corrections longer than this multiple of the step
  int remesh_every = 0;        // accepted steps between mesh redistributions (0 = never)
};

struct RunSpec {
  std::vector<std::string> frozen;   // slot names held at their initial values
  std::string direction;             // scalar slot orienting the initial tangent
  int direction_sign = 1;
  std::vector<EventSpec> events;
  /// Optional linear constraint c.z = value used for the initial correction;
  /// defaults to holding `direction` at its initial value.
  std::optional<std::pair<VectorXd, double>> initial_constraint;
  /// When set, the initial tangent is oriented by c.t > 0 instead.
  std::optional<VectorXd> direction_functional;
};

struct BranchPoint {
  VectorXd z;
  VectorXd tangent;
  std::vector<double> monitors;
  double step = 0.0;
  int newton_iterations = 0;
  double residual = 0.0;
  std::string event;
  std::vector<double> mesh;  // discretization the point was computed on, if any
};

struct Branch {
  std::string problem;
  std::vector<std::string> frozen;
  std::vector<std::string> free;
  std::vector<std::string> monitor_names;
  std::vector<EventSpec> events;
  StepControls controls;
  std::vector<BranchPoint> points;
  std::string termination;
  bool failed = false;  // corrector failure or violated assumption

  const BranchPoint* find_event(std::string_view tag) const {
    for (const auto& p : points) {
      if (p.event == tag) return &p;
    }
    return nullptr;
  }
  std::size_t monitor_index(std::string_view name) const {
    for (std::size_t i = 0; i < monitor_names.size(); ++i) {
      if (monitor_names[i] == name) return i;
    }
    throw Error(ErrorCode::bad_input, "unknown monitor " + std::string(name));
  }
};

/// Unknown count minus equation count (including frozen slots); must be 1.
inline Index dimension_deficit(const Problem& prob, const std::vector<std::string>& frozen) {
  Index frozen_count = 0;
  for (const auto& name : frozen) frozen_count += prob.layout().slot(name).size;
  return prob.layout().size() - prob.equation_count() - frozen_count;
}

namespace detail {

struct NewtonResult {
  VectorXd z;
  bool converged = false;
  int iterations = 0;
  double residual = std::numeric_limits<double>::infinity();
  std::string error;  // set when a block could not be evaluated
};

class Corrector {
 public:
  Corrector(const Problem& prob, const std::vector<Index>& frozen_idx, const VectorXd& frozen_val,
            const StepControls& ctl)
      : prob_(prob), frozen_idx_(frozen_idx), frozen_val_(frozen_val), ctl_(ctl) {}

  Index rows() const { return prob_.equation_count() + static_cast<Index>(frozen_idx_.size()) + 1; }

  /// Residual of F, frozen rows, and the linear row a.z = b.
  VectorXd residual(const VectorXd& z, const VectorXd& a, double b, Triplets* jac) const {
    VectorXd r;
    prob_.evaluate(z, r, jac);
    const Index e = prob_.equation_count();
    VectorXd full(rows());
    full.head(e) = r;
    for (std::size_t k = 0; k < frozen_idx_.size(); ++k) {
      full(e + static_cast<Index>(k)) = z(frozen_idx_[k]) - frozen_val_(static_cast<Index>(k));
      if (jac) jac->emplace_back(e + static_cast<Index>(k), frozen_idx_[k], 1.0);
    }
    full(rows() - 1) = a.dot(z) - b;
    if (jac) {
      for (Index c = 0; c < a.size(); ++c) {
        if (a(c) != 0.0) jac->emplace_back(rows() - 1, c, a(c));
      }
    }
    return full;
  }

  bool factorize(const VectorXd& z, const VectorXd& a, double b, VectorXd* r_out) {
    Triplets trip;
    const VectorXd r = residual(z, a, b, &trip);
    if (r_out) *r_out = r;
    Eigen::SparseMatrix<double> j(rows(), z.size());
    j.setFromTriplets(trip.begin(), trip.end());
    j.makeCompressed();
    lu_.compute(j);
    return lu_.info() == Eigen::Success;
  }

  VectorXd solve(const VectorXd& rhs) { return lu_.solve(rhs); }

  NewtonResult newton(VectorXd z, const VectorXd& a, double b) {
    NewtonResult res;
    for (int it = 0; it <= ctl_.newton_max; ++it) {
      VectorXd r;
      bool ok = false;
      try {
        ok = factorize(z, a, b, &r);
      } catch (const Error& e) {
        // A block undefined at this iterate (e.g. lost orientation) ends the attempt.
        res.residual = std::numeric_limits<double>::infinity();
        res.error = e.what();
        break;
      }
      res.residual = r.lpNorm<Eigen::Infinity>();
      res.iterations = it;
      if (!std::isfinite(res.residual)) break;
      if (res.residual <= ctl_.newton_tol) {
        res.converged = true;
        break;
      }
      if (!ok || it == ctl_.newton_max) break;
      const VectorXd dz = solve(r);
      if (!dz.allFinite()) break;
      z -= dz;
      if (dz.lpNorm<Eigen::Infinity>() <= 1e-13 * (1.0 + z.lpNorm<Eigen::Infinity>())) {
        VectorXd r2;
        try {
          r2 = residual(z, a, b, nullptr);
        } catch (const Error& e) {
          res.error = e.what();
          break;
        }
        res.residual = r2.lpNorm<Eigen::Infinity>();
        res.converged = res.residual <= ctl_.accept_tol;
        res.iterations = it + 1;
        break;
      }
    }
    res.z = std::move(z);
    return res;
  }

  /// Null direction of [F_z; frozen] completed by the row a: solves for the
  /// vector with a.t = 1.
  std::optional<VectorXd> tangent(const VectorXd& z, const VectorXd& a) {
    try {
      if (!factorize(z, a, 0.0, nullptr)) return std::nullopt;
    } catch (const Error&) {
      return std::nullopt;
    }
    VectorXd rhs = VectorXd::Zero(rows());
    rhs(rows() - 1) = 1.0;
    VectorXd t = solve(rhs);
    if (!t.allFinite()) return std::nullopt;
    return t;
  }

 private:
  const Problem& prob_;
  const std::vector<Index>& frozen_idx_;
  const VectorXd& frozen_val_;
  const StepControls& ctl_;
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu_;
};

}  // namespace detail

/// Pseudo-arclength continuation. Unknowns are weighted by a per-slot scale
/// max(floor, RMS of the slot at the last accepted point), and each slot's
/// contribution to the arclength norm is divided by its size.
class Continuation {
 public:
  Continuation(Problem& prob, RunSpec run, StepControls ctl)
      : prob_(prob), run_(std::move(run)), ctl_(ctl) {
    const Index deficit = dimension_deficit(prob_, run_.frozen);
    if (deficit != 1) {
      throw Error(ErrorCode::bad_input, prob_.name() + ": dimension deficit " +
                                            std::to_string(deficit) + " (expected 1)");
    }
    monitors_ = prob_.monitors();
    trace_ = std::getenv("HILLTOP_TRACE") != nullptr;
  }

  Branch run(VectorXd z0) {
    Branch br;
    br.problem = prob_.name();
    br.frozen = run_.frozen;
    for (const auto& s : prob_.layout().slots()) {
      if (std::find(run_.frozen.begin(), run_.frozen.end(), s.name) == run_.frozen.end()) {
        br.free.push_back(s.name);
      }
    }
    for (const auto& m : monitors_) br.monitor_names.push_back(m.name);
    br.events = run_.events;
    br.controls = ctl_;

    freeze(z0);
    const Index dir = run_.direction.empty() ? 0 : prob_.layout().slot(run_.direction).offset;
    if (run_.direction.empty() && !(run_.initial_constraint && run_.direction_functional)) {
      throw Error(ErrorCode::bad_input, "run needs a direction slot or an explicit constraint");
    }
    VectorXd c = VectorXd::Zero(z0.size());
    double cval = 0.0;
    if (run_.initial_constraint) {
      c = run_.initial_constraint->first;
      cval = run_.initial_constraint->second;
    } else {
      c(dir) = 1.0;
      cval = z0(dir);
    }
    detail::Corrector corr(prob_, frozen_idx_, frozen_val_, ctl_);
    prob_.accept(z0);  // references start at the initial guess
    auto first = corr.newton(z0, c, cval);
    if (!first.converged) {
      br.termination = "initial correction failed (residual " + std::to_string(first.residual) + ")";
      br.failed = true;
      return br;
    }
    VectorXd z = first.z;
    update_weights(z);
    auto t0 = corr.tangent(z, c);
    if (!t0) {
      br.termination = "singular Jacobian at the initial point";
      br.failed = true;
      return br;
    }
    VectorXd t = normalized(*t0);
    const double lead = run_.direction_functional ? run_.direction_functional->dot(t) : t(dir);
    if (lead * run_.direction_sign < 0.0) t = -t;
    if (lead == 0.0) {
      br.termination = "initial tangent has no component along " + run_.direction;
      br.failed = true;
      return br;
    }
    prob_.accept(z);
    if (auto why = prob_.admissibility(z)) {
      br.termination = *why;
      br.failed = true;
      return br;
    }
    br.points.push_back(make_point(z, t, 0.0, first.iterations, first.residual));

    double h = ctl_.h0;
    int accepted = 0;
    for (int step = 0; step < ctl_.max_steps; ++step) {
      if (ctl_.remesh_every > 0 && accepted > 0 && accepted % ctl_.remesh_every == 0) {
        if (!remesh(corr, z, t, br)) return br;
      }
      const VectorXd a = weighted(t);
      const double b = a.dot(z) + h;
      const VectorXd predicted = z + h * t;
      auto res = corr.newton(predicted, a, b);
      if (res.converged) {
        const VectorXd dz = res.z - predicted;
        res.converged = std::sqrt(inner(dz, dz)) <= ctl_.max_correction * h;
      }
      std::optional<VectorXd> tn;
      if (res.converged) tn = corr.tangent(res.z, a);
      bool good = res.converged && tn.has_value();
      VectorXd t_new;
      if (good) {
        t_new = normalized(*tn);
        if (inner(t_new, t) < 0.0) t_new = -t_new;
        good = inner(t_new, t) >= ctl_.min_cos || h <= ctl_.h_min;
      }
      if (!good) {
        if (trace_) {
          std::fprintf(stderr, "[%s] step %d rejected: h=%.3g converged=%d its=%d res=%.3g %s\n",
                       prob_.name().c_str(), step, h, int(res.converged), res.iterations,
                       res.residual, res.error.c_str());
        }
        h *= 0.5;
        if (h < ctl_.h_min) {
          br.termination = "corrector failed at minimum step";
          br.failed = true;
          return br;
        }
        continue;
      }
      ++accepted;
      const BranchPoint prev = br.points.back();
      BranchPoint next = make_point(res.z, t_new, h, res.iterations, res.residual);
      const bool stop = handle_events(corr, prev, next, br);
      if (stop) return br;
      z = res.z;
      prob_.accept(z);
      update_weights(z);
      t = normalized(t_new);
      br.points.push_back(std::move(next));
      if (auto why = prob_.admissibility(z)) {
        br.termination = *why;
        br.failed = true;
        return br;
      }
      if (res.iterations <= ctl_.fast_iterations) h = std::min(h * ctl_.grow, ctl_.h_max);
    }
    br.termination = "maximum number of steps";
    return br;
  }

  double inner(const VectorXd& a, const VectorXd& b) const {
    return (a.array() * weights_.array() * b.array()).sum();
  }

 private:
  void freeze(const VectorXd& z0) {
    frozen_idx_.clear();
    for (const auto& name : run_.frozen) {
      const Slot& s = prob_.layout().slot(name);
      for (Index k = 0; k < s.size; ++k) frozen_idx_.push_back(s.offset + k);
    }
    frozen_val_.resize(static_cast<Index>(frozen_idx_.size()));
    for (std::size_t k = 0; k < frozen_idx_.size(); ++k) {
      frozen_val_(static_cast<Index>(k)) = z0(frozen_idx_[k]);
    }
  }

  void update_weights(const VectorXd& z) {
    weights_.resize(z.size());
    for (const auto& s : prob_.layout().slots()) {
      VectorXd q = prob_.slot_quadrature(s).value_or(VectorXd::Constant(s.size, 1.0 / s.size));
      const double rms = std::sqrt(q.dot(z.segment(s.offset, s.size).cwiseAbs2()));
      const double scale = std::max(s.scale_floor, rms);
      weights_.segment(s.offset, s.size) = q / (scale * scale);
    }
  }

  VectorXd weighted(const VectorXd& t) const { return (weights_.array() * t.array()).matrix(); }
  VectorXd normalized(const VectorXd& t) const { return t / std::sqrt(inner(t, t)); }

  BranchPoint make_point(const VectorXd& z, const VectorXd& t, double h, int its, double resid) {
    BranchPoint p;
    p.z = z;
    p.tangent = t;
    p.step = h;
    p.newton_iterations = its;
    p.residual = resid;
    p.mesh = prob_.mesh_snapshot();
    for (const auto& m : monitors_) p.monitors.push_back(m.fn(z, t));
    return p;
  }

  std::size_t monitor_index(const std::string& name) const {
    for (std::size_t i = 0; i < monitors_.size(); ++i) {
      if (monitors_[i].name == name) return i;
    }
    throw Error(ErrorCode::bad_input, "event refers to unknown monitor " + name);
  }

  /// Locates every event crossed between prev and next and inserts the
  /// located points. Returns true when a stop event ended the branch.
  bool handle_events(detail::Corrector& corr, const BranchPoint& prev, const BranchPoint& next,
                     Branch& br) {
    struct Hit {
      double frac;
      const EventSpec* spec;
    };
    std::vector<Hit> hits;
    for (const auto& ev : run_.events) {
      const std::size_t k = monitor_index(ev.monitor);
      const double g0 = prev.monitors[k] - ev.target;
      const double g1 = next.monitors[k] - ev.target;
      if (g0 == 0.0) continue;
      if (g0 * g1 <= 0.0) hits.push_back({g0 / (g0 - g1), &ev});
    }
    std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) { return a.frac < b.frac; });
    for (const auto& hit : hits) {
      auto located = locate(corr, prev, next, *hit.spec);
      BranchPoint pt = located ? std::move(*located) : next;
      pt.event = located ? hit.spec->tag : hit.spec->tag + "?";
      if (hit.spec->stop) {
        prob_.accept(pt.z);
        br.points.push_back(std::move(pt));
        br.termination = "event " + hit.spec->tag;
        return true;
      }
      br.points.push_back(std::move(pt));
    }
    return false;
  }

  std::optional<BranchPoint> locate(detail::Corrector& corr, const BranchPoint& prev,
                                    const BranchPoint& next, const EventSpec& ev) {
    const std::size_t k = monitor_index(ev.monitor);
    const Monitor& mon = monitors_[k];
    const VectorXd a_prev = weighted(prev.tangent);
    auto finish = [&](const VectorXd& z, int its, double resid) -> std::optional<BranchPoint> {
      auto tn = corr.tangent(z, a_prev);
      if (!tn) return std::nullopt;
      VectorXd t = normalized(*tn);
      if (inner(t, prev.tangent) < 0.0) t = -t;
      BranchPoint p = make_point(z, t, std::sqrt(inner(z - prev.z, z - prev.z)), its, resid);
      if (std::abs(p.monitors[k] - ev.target) > ctl_.event_tol) return std::nullopt;
      return p;
    };
    const double g0 = prev.monitors[k] - ev.target;
    const double g1 = next.monitors[k] - ev.target;
    if (mon.slot) {
      // Replace the arclength row by the slot constraint.
      const double frac = g0 / (g0 - g1);
      VectorXd guess = prev.z + frac * (next.z - prev.z);
      VectorXd e = VectorXd::Zero(guess.size());
      e(*mon.slot) = 1.0;
      auto res = corr.newton(guess, e, ev.target);
      if (res.converged) return finish(res.z, res.iterations, res.residual);
      return std::nullopt;
    }
    // Illinois iteration on the arclength step from prev.
    const VectorXd a = weighted(prev.tangent);
    const double base = a.dot(prev.z);
    double s0 = 0.0, s1 = next.step, f0 = g0, f1 = g1;
    int side = 0;
    for (int it = 0; it < 60; ++it) {
      const double s = (s0 * f1 - s1 * f0) / (f1 - f0);
      auto res = corr.newton(prev.z + s * prev.tangent, a, base + s);
      if (!res.converged) return std::nullopt;
      auto tn = corr.tangent(res.z, a);
      if (!tn) return std::nullopt;
      VectorXd t = normalized(*tn);
      if (inner(t, prev.tangent) < 0.0) t = -t;
      BranchPoint p = make_point(res.z, t, s, res.iterations, res.residual);
      const double f = p.monitors[k] - ev.target;
      if (std::abs(f) <= ctl_.event_tol) return p;
      if (f * f1 > 0.0) {
        s1 = s;
        f1 = f;
        if (side == 1) f0 *= 0.5;
        side = 1;
      } else {
        s0 = s;
        f0 = f;
        if (side == -1) f1 *= 0.5;
        side = -1;
      }
      if (std::abs(s1 - s0) <= 1e-15 * std::max(1.0, std::abs(s1))) break;
    }
    return std::nullopt;
  }

  bool remesh(detail::Corrector& corr, VectorXd& z, VectorXd& t, Branch& br) {
    auto transfer = prob_.remesh(z);
    if (!transfer) return true;
    VectorXd zn = (*transfer)(z);
    VectorXd tn = (*transfer)(t) - (*transfer)(VectorXd::Zero(t.size()));
    update_weights(zn);
    tn = normalized(tn);
    const VectorXd a = weighted(tn);
    auto res = corr.newton(zn, a, a.dot(zn));
    if (!res.converged) {
      br.termination = "correction after remeshing failed" +
                       (res.error.empty() ? std::string() : " (" + res.error + ")");
      br.failed = true;
      return false;
    }
    auto tt = corr.tangent(res.z, a);
    if (!tt) {
      br.termination = "singular Jacobian after remeshing";
      br.failed = true;
      return false;
    }
    z = res.z;
    t = normalized(*tt);
    if (inner(t, tn) < 0.0) t = -t;
    prob_.accept(z);
    update_weights(z);
    // The last point now lives on the new mesh.
    const std::string tag = br.points.back().event;
    br.points.back() = make_point(z, t, br.points.back().step, res.iterations, res.residual);
    br.points.back().event = tag;
    return true;
  }

  Problem& prob_;
  RunSpec run_;
  StepControls ctl_;
  std::vector<Monitor> monitors_;
  std::vector<Index> frozen_idx_;
  VectorXd frozen_val_;
  VectorXd weights_;
  bool trace_ = false;
};

inline Branch continue_branch(Problem& prob, const VectorXd& z0, const RunSpec& run,
                              const StepControls& ctl = {}) {
  return Continuation(prob, run, ctl).run(z0);
}

}  // namespace hilltop
