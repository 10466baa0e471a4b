#pragma once

// Time integration of the normal form with box-exit detection, and the
// escape-time / departure-angle grid scan.

#include "hilltop/normal_form.hpp"

#include <boost/numeric/odeint.hpp>

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <utility>
#include <numbers>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace hilltop {

struct Box {
  double x_min = -10.0;
  double x_max = 10.0;
  double y_min = -10.0;
  double y_max = 10.0;

  bool contains(const State& s) const {
    return s.x() >= x_min && s.x() <= x_max && s.y() >= y_min && s.y() <= y_max;
  }
  /// Largest violation of the four box constraints; <= 0 inside.
  double excess(const State& s) const {
    return std::max({s.x() - x_max, x_min - s.x(), s.y() - y_max, y_min - s.y()});
  }
};

enum class ExitSide { top, right, other };

inline const char* to_string(ExitSide s) {
  switch (s) {
    case ExitSide::top: return "top";
    case ExitSide::right: return "right";
    case ExitSide::other: return "other";
  }
  return "unknown";
}

struct ExitInfo {
  double t_exit = 0.0;
  State exit_point = State::Zero();
  ExitSide side = ExitSide::other;
};

enum class TrajectoryStatus { exited, trapped, stiff };

struct TimedState {
  double t = 0.0;
  State state = State::Zero();
};

struct Trajectory {
  std::vector<TimedState> samples;  // only filled when requested
  std::optional<ExitInfo> exit;
  TrajectoryStatus status = TrajectoryStatus::trapped;
  State end_state = State::Zero();  // exit point, or the state at t_max
  double end_time = 0.0;
};

struct IntegrationOptions {
  double t_max = 1e4;
  double tol = 1e-9;
  bool record_samples = false;
  double initial_step = 1e-3;
};

namespace detail {

using OdeState = std::array<double, 2>;

struct FieldRhs {
  Params p;
  double shift;  // mu + lambda_tr0
  void operator()(const OdeState& u, OdeState& du, double /*t*/) const {
    du[0] = u[0] * u[0] - shift - p.gamma + 2.0 * p.alpha * u[1];
    du[1] = u[1] * u[1] - shift + p.gamma + 2.0 * p.beta * u[0];
  }
};

inline State to_state(const OdeState& u) { return State(u[0], u[1]); }

}  // namespace detail

/// Integrates from s0 until the trajectory leaves `box` or t_max is reached.
/// Uses the Dormand-Prince 5(4) pair with dense output; the crossing time is
/// located by bisection on the dense output.
inline Trajectory integrate_to_exit(const State& s0, const Params& p, const Box& box,
                                    const IntegrationOptions& opt = {}) {
  namespace odeint = boost::numeric::odeint;
  if (opt.t_max <= 0.0) throw Error(ErrorCode::bad_input, "t_max must be positive");
  if (!box.contains(s0)) throw Error(ErrorCode::bad_input, "initial state outside the box");

  const detail::FieldRhs rhs{p, p.mu + lambda_tr0(p)};
  auto stepper = odeint::make_dense_output(opt.tol, opt.tol,
                                           odeint::runge_kutta_dopri5<detail::OdeState>());
  stepper.initialize(detail::OdeState{s0.x(), s0.y()}, 0.0, opt.initial_step);

  Trajectory traj;
  if (opt.record_samples) traj.samples.push_back({0.0, s0});
  detail::OdeState tmp{};
  auto state_at = [&](double t) {
    stepper.calc_state(t, tmp);
    return detail::to_state(tmp);
  };

  try {
    while (true) {
      const auto [t0, t1] = stepper.do_step(rhs);
      if (t1 - t0 <= 1e-13 * std::max(1.0, std::abs(t1))) {
        traj.status = TrajectoryStatus::stiff;
        traj.end_time = t1;
        traj.end_state = detail::to_state(stepper.current_state());
        return traj;
      }
      const double t_hi_limit = std::min(t1, opt.t_max);
      const State at_hi = state_at(t_hi_limit);
      if (!at_hi.allFinite() || box.excess(at_hi) > 0.0) {
        double lo = t0;
        double hi = t_hi_limit;
        for (int it = 0; it < 200 && hi - lo > 1e-12 * std::max(1.0, hi); ++it) {
          const double mid = 0.5 * (lo + hi);
          const State s = state_at(mid);
          if (s.allFinite() && box.excess(s) <= 0.0) lo = mid; else hi = mid;
        }
        State e = state_at(hi);
        ExitInfo info;
        info.t_exit = hi;
        // Snap the violated coordinate onto the boundary.
        const double vx_hi = e.x() - box.x_max, vx_lo = box.x_min - e.x();
        const double vy_hi = e.y() - box.y_max, vy_lo = box.y_min - e.y();
        const double worst = std::max({vx_hi, vx_lo, vy_hi, vy_lo});
        if (worst == vy_hi) {
          e.y() = box.y_max;
          info.side = ExitSide::top;
        } else if (worst == vx_hi) {
          e.x() = box.x_max;
          info.side = ExitSide::right;
        } else {
          if (worst == vx_lo) e.x() = box.x_min; else e.y() = box.y_min;
          info.side = ExitSide::other;
        }
        e.x() = std::clamp(e.x(), box.x_min, box.x_max);
        e.y() = std::clamp(e.y(), box.y_min, box.y_max);
        info.exit_point = e;
        traj.exit = info;
        traj.status = TrajectoryStatus::exited;
        traj.end_state = e;
        traj.end_time = hi;
        if (opt.record_samples) traj.samples.push_back({hi, e});
        return traj;
      }
      if (opt.record_samples) traj.samples.push_back({t_hi_limit, at_hi});
      if (t1 >= opt.t_max) {
        traj.status = TrajectoryStatus::trapped;
        traj.end_state = at_hi;
        traj.end_time = opt.t_max;
        return traj;
      }
    }
  } catch (const odeint::step_adjustment_error&) {
    traj.status = TrajectoryStatus::stiff;
    traj.end_time = stepper.current_time();
    traj.end_state = detail::to_state(stepper.current_state());
    return traj;
  }
}

/// 4 psi / pi - 1, with psi the angle at the bottom-left corner between the
/// upward vertical and the ray to the exit point. Top-left corner -> -1,
/// top-right -> 0, bottom-right -> +1.
inline double departure_scalar(const State& exit_point, const Box& box, double tol = 1e-9) {
  const bool on_top = std::abs(exit_point.y() - box.y_max) <= tol;
  const bool on_right = std::abs(exit_point.x() - box.x_max) <= tol;
  if (!on_top && !on_right) {
    throw Error(ErrorCode::out_of_model, "exit point is not on the top or right side of the box");
  }
  const double psi = std::atan2(exit_point.x() - box.x_min, exit_point.y() - box.y_min);
  return 4.0 * psi / std::numbers::pi - 1.0;
}

enum class CellFlag { ok, trapped, stiff, off_model_exit };

inline const char* to_string(CellFlag f) {
  switch (f) {
    case CellFlag::ok: return "ok";
    case CellFlag::trapped: return "trapped";
    case CellFlag::stiff: return "stiff";
    case CellFlag::off_model_exit: return "off_model_exit";
  }
  return "unknown";
}

/// Cells are indexed (i, j) with x0 = x_min + i dx, y0 = y_min + j dy; storage
/// index is i * n + j.
struct EscapeGrid {
  Params params;
  Box box;
  int n = 0;
  double t_max = 0.0;
  double tol = 0.0;
  std::vector<std::optional<double>> departure;
  std::vector<std::optional<double>> escape_time;
  std::vector<CellFlag> flag;
  std::vector<State> end_state;  // where each trajectory ended

  std::size_t index(int i, int j) const { return static_cast<std::size_t>(i) * n + j; }
  State initial_state(int i, int j) const {
    return State(box.x_min + (box.x_max - box.x_min) * i / (n - 1),
                 box.y_min + (box.y_max - box.y_min) * j / (n - 1));
  }
};

/// Worker count for grid scans: HILLTOP_THREADS if set, else hardware concurrency.
inline unsigned scan_thread_count() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("HILLTOP_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) n = std::min<unsigned>(n, static_cast<unsigned>(v));
  }
  return n;
}

inline EscapeGrid escape_scan(const Params& p, const Box& box, int n, double t_max = 1e4,
                              double tol = 1e-9, unsigned threads = 0) {
  if (n < 2) throw Error(ErrorCode::bad_input, "escape grid needs n >= 2");
  EscapeGrid g;
  g.params = p;
  g.box = box;
  g.n = n;
  g.t_max = t_max;
  g.tol = tol;
  const std::size_t cells = static_cast<std::size_t>(n) * n;
  g.departure.assign(cells, std::nullopt);
  g.escape_time.assign(cells, std::nullopt);
  g.flag.assign(cells, CellFlag::trapped);
  g.end_state.assign(cells, State::Zero());

  const IntegrationOptions opt{t_max, tol, false, 1e-3};
  auto run_cell = [&](std::size_t idx) {
    const int i = static_cast<int>(idx / n);
    const int j = static_cast<int>(idx % n);
    const Trajectory tr = integrate_to_exit(g.initial_state(i, j), p, box, opt);
    g.end_state[idx] = tr.end_state;
    switch (tr.status) {
      case TrajectoryStatus::trapped: g.flag[idx] = CellFlag::trapped; break;
      case TrajectoryStatus::stiff: g.flag[idx] = CellFlag::stiff; break;
      case TrajectoryStatus::exited:
        if (tr.exit->side == ExitSide::other) {
          g.flag[idx] = CellFlag::off_model_exit;
        } else {
          g.flag[idx] = CellFlag::ok;
          g.escape_time[idx] = tr.exit->t_exit;
          g.departure[idx] = departure_scalar(tr.exit->exit_point, box);
        }
        break;
    }
  };

  if (threads == 0) threads = scan_thread_count();
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t idx = next++; idx < cells; idx = next++) run_cell(idx);
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  return g;
}

/// Summary of the funnelling ("ghost attractor") signature of an escape grid.
struct GhostSignature {
  double modal_value = 0.0;
  std::size_t modal_cells = 0;       // cells within +-halfwidth of the modal value
  std::size_t components = 0;        // 4-connected components of the modal set
  std::size_t largest_component = 0;
  double largest_fraction = 0.0;     // largest component / all cells
  double median_time_inside = 0.0;   // median escape time over the largest component
  double median_time_outside = 0.0;  // median over every other escaping cell
};

namespace detail {

inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + mid));
  return m;
}

/// Labels 4-connected components of `mask` on an n x n grid (index i * n + j).
/// Returns labels (-1 outside the mask) and the size of each component.
inline std::pair<std::vector<int>, std::vector<std::size_t>> label_components(
    const std::vector<char>& mask, int n) {
  std::vector<int> label(mask.size(), -1);
  std::vector<std::size_t> sizes;
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < mask.size(); ++start) {
    if (!mask[start] || label[start] >= 0) continue;
    const int id = static_cast<int>(sizes.size());
    sizes.push_back(0);
    stack.push_back(start);
    label[start] = id;
    while (!stack.empty()) {
      const std::size_t c = stack.back();
      stack.pop_back();
      ++sizes[id];
      const int i = static_cast<int>(c / n);
      const int j = static_cast<int>(c % n);
      const int di[4] = {1, -1, 0, 0};
      const int dj[4] = {0, 0, 1, -1};
      for (int k = 0; k < 4; ++k) {
        const int ni = i + di[k];
        const int nj = j + dj[k];
        if (ni < 0 || nj < 0 || ni >= n || nj >= n) continue;
        const std::size_t nb = static_cast<std::size_t>(ni) * n + nj;
        if (mask[nb] && label[nb] < 0) {
          label[nb] = id;
          stack.push_back(nb);
        }
      }
    }
  }
  return {label, sizes};
}

}  // namespace detail

/// The modal departure value is the centre of the width-2*halfwidth window
/// holding the most escaping cells.
inline GhostSignature ghost_signature(const EscapeGrid& g, double halfwidth = 0.02) {
  GhostSignature sig;
  std::vector<double> values;
  for (const auto& d : g.departure) {
    if (d) values.push_back(*d);
  }
  if (values.empty()) return sig;
  std::sort(values.begin(), values.end());
  std::size_t best = 0;
  for (std::size_t lo = 0, hi = 0; lo < values.size(); ++lo) {
    while (hi < values.size() && values[hi] <= values[lo] + 2.0 * halfwidth) ++hi;
    if (hi - lo > best) {
      best = hi - lo;
      sig.modal_value = values[lo] + halfwidth;
    }
  }
  std::vector<char> mask(g.departure.size(), 0);
  for (std::size_t c = 0; c < mask.size(); ++c) {
    mask[c] = g.departure[c] && std::abs(*g.departure[c] - sig.modal_value) <= halfwidth;
    sig.modal_cells += mask[c];
  }
  const auto [label, sizes] = detail::label_components(mask, g.n);
  sig.components = sizes.size();
  const auto largest = std::max_element(sizes.begin(), sizes.end());
  const int largest_id = static_cast<int>(largest - sizes.begin());
  sig.largest_component = *largest;
  sig.largest_fraction = static_cast<double>(*largest) / static_cast<double>(mask.size());
  std::vector<double> inside;
  std::vector<double> outside;
  for (std::size_t c = 0; c < mask.size(); ++c) {
    if (!g.escape_time[c]) continue;
    (label[c] == largest_id ? inside : outside).push_back(*g.escape_time[c]);
  }
  sig.median_time_inside = detail::median(inside);
  sig.median_time_outside = detail::median(outside);
  return sig;
}

}  // namespace hilltop
