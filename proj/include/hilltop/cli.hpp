#pragma once

// Command-line front end. Every command resolves a flat key/value
// configuration (defaults < config file < flags), writes CSV tables into an
// output directory and finishes with manifest.json. Exit codes: 0 success,
// 1 bad input, 2 numerical failure (partial outputs are kept).

#include "hilltop/codim2.hpp"
#include "hilltop/named_points.hpp"
#include "hilltop/flow.hpp"
#include "hilltop/io.hpp"

#include <CLI11.hpp>
#include <boost/version.hpp>

#include <charconv>
#include <iostream>
#include <set>

namespace hilltop::cli {

inline constexpr int kOk = 0;
inline constexpr int kBadInput = 1;
inline constexpr int kNumericalFailure = 2;

struct KeySpec {
  std::string key;
  std::string fallback;  // empty: unset unless given
  std::string help;
};

/// Resolved configuration of one command.
class Settings {
 public:
  Settings(std::map<std::string, std::string> values, std::set<std::string> explicit_keys)
      : values_(std::move(values)), explicit_(std::move(explicit_keys)) {}

  const std::map<std::string, std::string>& values() const { return values_; }
  bool given(const std::string& key) const { return explicit_.count(key) > 0; }
  bool has(const std::string& key) const { return !str(key).empty(); }

  const std::string& str(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw Error(ErrorCode::bad_input, "no setting " + key);
    return it->second;
  }

  double num(const std::string& key) const { return parse_double(key, str(key)); }

  int integer(const std::string& key) const {
    const std::string& s = str(key);
    int v = 0;
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || end != s.data() + s.size()) {
      throw Error(ErrorCode::bad_input, key + ": expected an integer, got '" + s + "'");
    }
    return v;
  }

  Box box(const std::string& key) const {
    const std::string& s = str(key);
    std::vector<double> v;
    std::size_t start = 0;
    while (start <= s.size()) {
      const auto comma = s.find(',', start);
      const std::string part =
          io::ConfigFile::trim(s.substr(start, comma == std::string::npos ? std::string::npos
                                                                           : comma - start));
      v.push_back(parse_double(key, part));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (v.size() != 4 || !(v[0] < v[1]) || !(v[2] < v[3])) {
      throw Error(ErrorCode::bad_input, key + ": expected x0,x1,y0,y1 with x0 < x1 and y0 < y1");
    }
    return Box{v[0], v[1], v[2], v[3]};
  }

  /// (alpha, beta, gamma, mu); lambda converts to mu when given instead.
  Params params() const {
    Params p{num("alpha"), num("beta"), num("gamma"), num("mu")};
    if (has("lambda")) p = Params::from_lambda(p.alpha, p.beta, p.gamma, num("lambda"));
    return p;
  }

  static double parse_double(const std::string& key, const std::string& s) {
    double v = 0.0;
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || end != s.data() + s.size() || !std::isfinite(v)) {
      throw Error(ErrorCode::bad_input, key + ": expected a number, got '" + s + "'");
    }
    return v;
  }

 private:
  std::map<std::string, std::string> values_;
  std::set<std::string> explicit_;
};

/// What a command leaves behind besides its files.
struct Outcome {
  std::string status = "ok";
  nlohmann::json summary = nlohmann::json::object();
  std::vector<std::string> diagnostics;
  bool failed() const { return status != "ok"; }
};

struct Command {
  std::string name;
  std::string help;
  std::vector<KeySpec> keys;
  std::function<void(const Settings&, io::OutputDir&, Outcome&)> run;
};

namespace detail {

inline std::vector<KeySpec> parameter_keys(const char* beta) {
  return {{"alpha", "3.1", "coupling alpha"},
          {"beta", beta, "coupling beta"},
          {"gamma", "0", "asymmetry gamma"},
          {"mu", "0", "distance from the trace-zero locus"},
          {"lambda", "", "lambda form of the shift; replaces mu when given"},
          {"point", "", "named parameter point (mutualistic-a..d, mixed-g)"}};
}

inline void add(std::vector<KeySpec>& keys, std::vector<KeySpec> more) {
  keys.insert(keys.end(), more.begin(), more.end());
}

inline std::vector<io::Cell> row(std::initializer_list<io::Cell> cells) { return cells; }

inline io::Cell maybe(const std::optional<double>& v) {
  return v ? io::Cell(*v) : io::Cell(std::numeric_limits<double>::quiet_NaN());
}

inline nlohmann::json params_json(const Params& p) {
  return {{"alpha", p.alpha}, {"beta", p.beta}, {"gamma", p.gamma}, {"mu", p.mu},
          {"lambda", p.lambda()}};
}

inline io::Table equilibria_table(const Params& p) {
  io::Table t({"x", "y", "type", "eig1_re", "eig1_im", "eig2_re", "eig2_im", "trace", "det",
               "residual"});
  for (const auto& e : find_equilibria(p)) {
    t.add(row({e.state.x(), e.state.y(), std::string(to_string(e.type)), e.eigenvalues[0].real(),
               e.eigenvalues[0].imag(), e.eigenvalues[1].real(), e.eigenvalues[1].imag(),
               e.jacobian.trace(), e.jacobian.determinant(), e.residual}));
  }
  return t;
}

inline io::Table orbit_table(const std::vector<std::pair<std::string, OrbitSegment>>& orbits,
                             int samples) {
  io::Table t({"orbit", "t", "x", "y"});
  for (const auto& [label, po] : orbits) {
    const CollocationScheme sc(po.degree());
    for (int k = 0; k <= samples; ++k) {
      const double s = static_cast<double>(k) / samples;
      const State u = po.eval(s, sc);
      t.add(row({label, s * po.period(), u.x(), u.y()}));
    }
  }
  return t;
}

// --- loci -------------------------------------------------------------------

inline void run_loci(const Settings& s, io::OutputDir& out, Outcome& oc) {
  const Params p = s.params();
  const double g0 = s.num("gamma_min"), g1 = s.num("gamma_max");
  const double m0 = s.num("mu_min"), m1 = s.num("mu_max");
  const int n = s.integer("samples");
  const double x_max = s.num("x_max");
  if (!(g0 < g1) || !(m0 < m1) || n < 2 || !(x_max > 0.0)) {
    throw Error(ErrorCode::bad_input, "loci: need gamma_min < gamma_max, mu_min < mu_max, "
                                      "samples >= 2, x_max > 0");
  }
  auto inside = [&](double gamma, double mu) {
    return gamma >= g0 && gamma <= g1 && mu >= m0 && mu <= m1;
  };

  // Saddle-node curve sampled in x on both sides of the pole, with the cusp
  // inserted where it falls.
  std::optional<CuspPoint> cusp;
  if (p.alpha * p.beta != 0.0) cusp = cusp_point(p.alpha, p.beta);
  std::vector<double> xs;
  for (int k = 0; k < n; ++k) {
    const double x = -x_max + 2.0 * x_max * k / (n - 1);
    if (x != 0.0) xs.push_back(x);
  }
  if (cusp) xs.push_back(cusp->x);
  std::sort(xs.begin(), xs.end());
  io::Table sn({"piece", "x", "y", "lambda", "gamma", "mu", "note"});
  long long piece = 0;
  bool previous = false;
  double last_x = 0.0;
  for (double x : xs) {
    const auto pt = saddle_node_point(p.alpha, p.beta, x);
    const double mu = pt.params(p.alpha, p.beta).mu;
    const bool keep = inside(pt.gamma, mu);
    if (keep) {
      if (!previous || (last_x < 0.0) != (x < 0.0)) ++piece;
      const bool is_cusp = cusp && x == cusp->x;
      sn.add(row({piece, pt.x, pt.y, pt.lambda, pt.gamma, mu, std::string(is_cusp ? "cusp" : "")}));
    }
    previous = keep;
    last_x = x;
  }
  out.write("saddle_node.csv", sn);

  // Trace-zero locus lies on mu = 0; its kind changes at the TB points.
  io::Table tz({"gamma", "mu", "kind", "x_eq", "ell1", "criticality"});
  for (int k = 0; k < n; ++k) {
    const double gamma = g0 + (g1 - g0) * k / (n - 1);
    if (!inside(gamma, 0.0)) continue;
    const auto h = trace_zero_point(Params{p.alpha, p.beta, gamma, 0.0});
    std::string crit;
    if (h.kind == TraceZeroKind::hopf) {
      crit = h.criticality() == Criticality::supercritical  ? "supercritical"
             : h.criticality() == Criticality::subcritical ? "subcritical"
                                                           : "degenerate";
    }
    tz.add(row({gamma, 0.0, std::string(to_string(h.kind)), h.x_eq, maybe(h.ell1), crit}));
  }
  out.write("trace_zero.csv", tz);

  io::Table pts({"label", "gamma", "mu", "lambda", "x", "y"});
  nlohmann::json summary;
  if (cusp) {
    const Params c = Params::from_lambda(p.alpha, p.beta, cusp->gamma, cusp->lambda);
    const auto sp = saddle_node_point(p.alpha, p.beta, cusp->x);
    pts.add(row({std::string("cusp"), cusp->gamma, c.mu, cusp->lambda, sp.x, sp.y}));
    summary["cusp"] = {{"gamma", cusp->gamma}, {"lambda", cusp->lambda}, {"mu", c.mu}};
  }
  if (p.alpha * p.beta < 0.0) {
    const auto [ga, gb] = takens_bogdanov_gammas(p.alpha, p.beta);
    for (double g : {ga, gb}) {
      const auto h = trace_zero_point(Params{p.alpha, p.beta, g, 0.0});
      pts.add(row({std::string("takens_bogdanov"), g, 0.0,
                   Params{p.alpha, p.beta, g, 0.0}.lambda(), h.x_eq, -h.x_eq}));
    }
    // Hopf with ell1 = 0 at gamma = 0.
    const auto h0 = trace_zero_point(Params{p.alpha, p.beta, 0.0, 0.0});
    if (h0.kind == TraceZeroKind::hopf) {
      pts.add(row({std::string("bautin"), 0.0, 0.0, 0.0, h0.x_eq, -h0.x_eq}));
    }
    summary["takens_bogdanov_gamma"] = {ga, gb};
  }
  out.write("points.csv", pts);
  summary["saddle_node_rows"] = sn.rows();
  oc.summary = summary;
}

// --- equilibria ---------------------------------------------------------------

inline void run_equilibria(const Settings& s, io::OutputDir& out, Outcome& oc) {
  const Params p = s.params();
  const io::Table t = equilibria_table(p);
  out.write("equilibria.csv", t);
  const auto rep = classify_case(p);
  oc.summary = {{"params", params_json(p)}, {"count", t.rows()}, {"case", to_string(rep.kind)}};
  if (rep.skew_product) oc.diagnostics.push_back("alpha*beta = 0: skew product");
  if (rep.reversing_symmetry) oc.diagnostics.push_back("alpha = -beta, gamma = 0: reversing symmetry");
  if (rep.xy_symmetry) oc.diagnostics.push_back("alpha = beta, gamma = 0: x-y symmetry");
}

// --- portrait -----------------------------------------------------------------

inline void run_portrait(const Settings& s, io::OutputDir& out, Outcome& oc) {
  const Params p = s.params();
  const Box box = s.box("box");
  const int fan = s.integer("fan");
  if (fan < 2) throw Error(ErrorCode::bad_input, "portrait: fan must be >= 2");
  const IntegrationOptions opt{s.num("tmax"), s.num("tol"), true, 1e-3};
  const int stride = std::max(1, s.integer("stride"));

  io::Table traj({"trajectory", "t", "x", "y"});
  io::Table ends({"trajectory", "x0", "y0", "status", "t_end", "x_end", "y_end", "departure"});
  long long id = 0;
  // Starts on a fan x fan lattice strictly inside the box.
  for (int i = 0; i < fan; ++i) {
    for (int j = 0; j < fan; ++j, ++id) {
      const State s0(box.x_min + (box.x_max - box.x_min) * (i + 0.5) / fan,
                     box.y_min + (box.y_max - box.y_min) * (j + 0.5) / fan);
      const Trajectory tr = integrate_to_exit(s0, p, box, opt);
      for (std::size_t k = 0; k < tr.samples.size(); ++k) {
        if (k % stride != 0 && k + 1 != tr.samples.size()) continue;
        traj.add(row({id, tr.samples[k].t, tr.samples[k].state.x(), tr.samples[k].state.y()}));
      }
      std::string status = tr.status == TrajectoryStatus::exited    ? "exited"
                           : tr.status == TrajectoryStatus::trapped ? "trapped"
                                                                     : "stiff";
      std::optional<double> dep;
      if (tr.exit && tr.exit->side != ExitSide::other) dep = departure_scalar(tr.exit->exit_point, box);
      ends.add(row({id, s0.x(), s0.y(), status, tr.end_time, tr.end_state.x(), tr.end_state.y(),
                    maybe(dep)}));
    }
  }
  out.write("trajectories.csv", traj);
  out.write("endpoints.csv", ends);
  out.write("equilibria.csv", equilibria_table(p));

  if (s.integer("orbits") != 0) {
    std::vector<std::pair<std::string, OrbitSegment>> orbits;
    try {
      const auto found = periodic_orbits_at(p, s.integer("intervals"), s.num("max_period"));
      for (std::size_t k = 0; k < found.size(); ++k) {
        orbits.emplace_back((found[k].floquet.stable() ? "stable_" : "unstable_") +
                                std::to_string(k),
                            found[k].orbit);
      }
    } catch (const Error& e) {
      oc.diagnostics.push_back(std::string("periodic orbits: ") + e.what());
    }
    out.write("orbits.csv", orbit_table(orbits, 400));
    oc.summary["orbits"] = orbits.size();
  }
  oc.summary["params"] = params_json(p);
  oc.summary["trajectories"] = id;
}

// --- po -----------------------------------------------------------------------

inline void run_po(const Settings& s, io::OutputDir& out, Outcome& oc) {
  const Params p = s.params();
  const auto r = find_snpo(p.alpha, p.beta, p.gamma, s.integer("intervals"), s.num("max_period"),
                           s.num("multiplier_tol"));
  out.write("branch.csv", io::branch_table(r.branch));
  io::Table fold({"gamma", "mu", "T", "amplitude", "multiplier"});
  if (r.fold) {
    const Params q = r.params.at(r.fold->z);
    fold.add(row({q.gamma, q.mu, r.fold->monitors[r.branch.monitor_index("T")],
                  r.fold->monitors[r.branch.monitor_index("amplitude")],
                  r.fold->monitors[r.branch.monitor_index("multiplier")]}));
  }
  out.write("snpo.csv", fold);
  const auto h = trace_zero_point(Params{p.alpha, p.beta, p.gamma, 0.0});
  oc.summary = {{"points", r.branch.points.size()},
                {"termination", r.branch.termination},
                {"snpo", r.fold.has_value()},
                {"hopf_ell1", h.ell1 ? nlohmann::json(*h.ell1) : nlohmann::json()}};
  if (r.branch.failed) {
    oc.status = "continuation failed: " + r.branch.termination;
  }
}

// --- homoclinic ---------------------------------------------------------------

inline FixedPeriodOptions fixed_period_options(const Settings& s) {
  FixedPeriodOptions o;
  o.period = s.num("homoclinic_T");
  o.intervals = s.integer("homoclinic_intervals");
  o.near = s.num("near");
  return o;
}

inline io::Table curve_table(const FixedPeriodCurve& c) {
  io::Table t = io::branch_table(
      Branch{.monitor_names = c.monitor_names, .points = c.curve},
      {{"snic", [&](const BranchPoint&, std::size_t i) {
          return c.snic && i >= c.snic->first && i <= c.snic->last ? 1.0 : 0.0;
        }}});
  return t;
}

inline void write_curve(const FixedPeriodCurve& c, io::OutputDir& out, Outcome& oc) {
  out.write("growth.csv", io::branch_table(c.growth));
  out.write("curve.csv", curve_table(c));
  io::Table seg({"end", "gamma", "mu", "index"});
  if (c.snic) {
    seg.add(row({std::string("start"), c.snic->start.gamma, c.snic->start.mu,
                 static_cast<long long>(c.snic->first)}));
    seg.add(row({std::string("end"), c.snic->end.gamma, c.snic->end.mu,
                 static_cast<long long>(c.snic->last)}));
  }
  out.write("snic_segment.csv", seg);
  oc.summary["curve_points"] = c.curve.size();
  oc.summary["snic_segment"] = c.snic.has_value();
  for (const Branch* b : {&c.toward_minus, &c.toward_plus}) {
    if (b->failed) oc.diagnostics.push_back("fixed-period side: " + b->termination);
  }
}

inline void run_homoclinic(const Settings& s, io::OutputDir& out, Outcome& oc) {
  const Params p = s.params();
  const auto c = continue_fixed_period_homoclinic(p.alpha, p.beta, s.num("gamma_start"),
                                                  fixed_period_options(s));
  write_curve(c, out, oc);
  if (!c.snic) oc.status = "no SNIC segment on the fixed-period curve";
}

// --- codim-2 ------------------------------------------------------------------

inline SegmentPhase phase_form(const Settings& s) {
  const std::string& v = s.str("phase");
  if (v == "reference") return SegmentPhase::reference;
  if (v == "reference_slope") return SegmentPhase::reference_slope;
  throw Error(ErrorCode::bad_input, "phase: expected reference or reference_slope, got '" + v + "'");
}

inline Codim2Options codim2_options(const Settings& s, Codim2Options o) {
  o.accurate_period = s.num("T");
  o.intervals = s.integer("intervals");
  o.beta_span = s.num("beta_span");
  o.cut = s.num("cut");
  o.phase = phase_form(s);
  o.max_steps = s.integer("max_steps");
  return o;
}

inline io::ExtraColumns state_columns(std::vector<std::pair<std::string, Index>> slots) {
  io::ExtraColumns cols;
  for (const auto& [name, at] : slots) {
    cols.emplace_back(name + "_x", [at](const BranchPoint& pt, std::size_t) { return pt.z(at); });
    cols.emplace_back(name + "_y",
                      [at](const BranchPoint& pt, std::size_t) { return pt.z(at + 1); });
  }
  return cols;
}

inline void write_runs(io::OutputDir& out,
                       const std::vector<std::pair<std::string, const Branch*>>& runs,
                       const io::ExtraColumns& extra) {
  std::string all;
  for (const auto& [name, b] : runs) {
    const io::Table t = io::branch_table(*b, extra, name);
    out.write(name + ".csv", t);
    const std::string text = t.str();
    all += all.empty() ? text : text.substr(text.find('\n') + 1);
  }
  out.write("branch.csv", all);
}

inline Branch as_branch(const TrackedCurve& c) {
  Branch b;
  b.monitor_names = c.toward_minus.monitor_names;
  b.points = c.points;
  return b;
}

inline nlohmann::json point_json(const Branch& b, const BranchPoint& pt) {
  nlohmann::json j;
  for (std::size_t k = 0; k < b.monitor_names.size(); ++k) j[b.monitor_names[k]] = pt.monitors[k];
  return j;
}

inline FixedPeriodCurve source_curve(const Settings& s, io::OutputDir& out, Outcome& oc) {
  const Params p = s.params();
  auto c = continue_fixed_period_homoclinic(p.alpha, p.beta, s.num("gamma_start"),
                                            fixed_period_options(s));
  write_curve(c, out, oc);
  return c;
}

inline void run_ncsnic(const Settings& s, io::OutputDir& out, Outcome& oc) {
  const Codim2Options o = codim2_options(s, Codim2Options{});
  const FixedPeriodCurve c = source_curve(s, out, oc);
  if (!c.snic) {
    oc.status = "no SNIC segment to seed from";
    return;
  }
  const std::size_t mid = (c.snic->first + c.snic->last) / 2;
  const auto seed = ncsnic_seed(periodic_orbit(c.curve[mid], c.degree), c.params.at(c.curve[mid].z),
                                o.intervals, o.cut);
  const NcSnicResult r = run_ncsnic_pipeline(seed, o);
  const NcSnicProblem shape(seed.params.alpha, OrbitSegment::uniform_mesh(o.intervals), o.degree);
  const auto extra = state_columns(
      {{"u_sn", shape.u_sn_index()}, {"u_minus", 0}, {"u_plus", shape.u_plus_index()}});
  const Branch curve = as_branch(r.curve);
  write_runs(out, {{"run1_accuracy", &r.accuracy}, {"run2_snic", &r.snic}, {"run3_noncentral", &curve}},
             extra);
  oc.summary["counts"] = {{"equations", r.counts.equations}, {"unknowns", r.counts.unknowns}};
  oc.summary["phase"] = s.str("phase");
  if (r.noncentral) oc.summary["noncentral"] = point_json(r.snic, *r.noncentral);
  oc.summary["curve_points"] = r.curve.points.size();
  if (r.status != "ok") oc.status = r.status;
}

inline void run_sniceroclinic(const Settings& s, io::OutputDir& out, Outcome& oc) {
  const Codim2Options o = codim2_options(s, sniceroclinic_defaults());
  const FixedPeriodCurve c = source_curve(s, out, oc);
  const auto seed = sniceroclinic_seed(c, o.intervals, s.num("dwell_radius"), o.cut);
  const SniceroclinicResult r = run_sniceroclinic_pipeline(seed, o);
  const SniceroclinicProblem shape(seed.params.alpha, OrbitSegment::uniform_mesh(o.intervals),
                                   o.degree);
  const auto extra = state_columns({{"u_sn", shape.u_sn_index()},
                                    {"u_sa", shape.u_sa_index()},
                                    {"u_minus", 0},
                                    {"u_plus", shape.u_plus_index()}});
  const Branch curve = as_branch(r.curve);
  write_runs(out, {{"run1_accuracy", &r.accuracy}, {"run2_sniceroclinic", &curve}}, extra);
  oc.summary["counts"] = {{"equations", r.counts.equations}, {"unknowns", r.counts.unknowns}};
  oc.summary["phase"] = s.str("phase");
  oc.summary["seed"] = {{"index", seed.index},
                        {"gamma", seed.params.gamma},
                        {"mu", seed.params.mu},
                        {"sn_dwell", seed.sn_dwell},
                        {"saddle_dwell", seed.saddle_dwell}};
  if (const BranchPoint* e = r.accuracy.find_event("accurate")) {
    oc.summary["accurate"] = point_json(r.accuracy, *e);
  }
  oc.summary["curve_points"] = r.curve.points.size();
  if (r.status != "ok") oc.status = r.status;
}

// --- escape-grid --------------------------------------------------------------

inline io::Table grid_table(const EscapeGrid& g) {
  io::Table t({"i", "j", "x0", "y0", "flag", "departure", "escape_time", "x_end", "y_end"});
  for (int i = 0; i < g.n; ++i) {
    for (int j = 0; j < g.n; ++j) {
      const std::size_t k = g.index(i, j);
      const State s0 = g.initial_state(i, j);
      t.add(row({static_cast<long long>(i), static_cast<long long>(j), s0.x(), s0.y(),
                 std::string(to_string(g.flag[k])), maybe(g.departure[k]), maybe(g.escape_time[k]),
                 g.end_state[k].x(), g.end_state[k].y()}));
    }
  }
  return t;
}

inline void run_escape_grid(const Settings& s, io::OutputDir& out, Outcome& oc) {
  const Params p = s.params();
  const int n = s.integer("n");
  const int threads = s.integer("threads");
  if (threads < 0) throw Error(ErrorCode::bad_input, "threads must be >= 0");
  const EscapeGrid g = escape_scan(p, s.box("box"), n, s.num("tmax"), s.num("tol"),
                                   static_cast<unsigned>(threads));
  out.write("grid.csv", grid_table(g));
  const auto sig = ghost_signature(g);
  std::size_t trapped = 0;
  for (auto f : g.flag) trapped += f == CellFlag::trapped ? 1 : 0;
  oc.summary = {{"params", params_json(p)},
                {"trapped", trapped},
                {"modal_departure", sig.modal_value},
                {"modal_components", sig.components},
                {"largest_fraction", sig.largest_fraction},
                {"median_time_inside", sig.median_time_inside},
                {"median_time_outside", sig.median_time_outside}};
}

}  // namespace detail

inline std::vector<Command> commands() {
  using detail::add;
  using detail::parameter_keys;
  std::vector<Command> cmds;

  Command loci{"loci", "closed-form bifurcation curves in a (gamma, mu) window",
               parameter_keys("1.3"), detail::run_loci};
  add(loci.keys, {{"gamma_min", "-8", "window"},
                  {"gamma_max", "8", "window"},
                  {"mu_min", "-20", "window"},
                  {"mu_max", "20", "window"},
                  {"x_max", "12", "saddle-node curve sampled for |x| <= x_max"},
                  {"samples", "4001", "samples per curve"}});
  cmds.push_back(loci);

  cmds.push_back({"equilibria", "equilibria and their types at one parameter point",
                  parameter_keys("1.3"), detail::run_equilibria});

  Command portrait{"portrait", "trajectory fan, equilibria and periodic orbits at one point",
                   parameter_keys("1.3"), detail::run_portrait};
  add(portrait.keys, {{"box", "-10,10,-10,10", "x0,x1,y0,y1"},
                      {"fan", "9", "fan x fan starting points"},
                      {"tmax", "100", "integration time limit"},
                      {"tol", "1e-9", "integrator tolerance"},
                      {"stride", "4", "keep every stride-th dense sample"},
                      {"orbits", "0", "1: also compute the Hopf-family orbits at this point"},
                      {"intervals", "60", "collocation intervals for orbits"},
                      {"max_period", "60", "orbit family stops at this period"}});
  cmds.push_back(portrait);

  Command po{"po", "periodic orbits from the Hopf point and the first fold of orbits",
             parameter_keys("-1.3"), detail::run_po};
  add(po.keys, {{"intervals", "60", "collocation intervals"},
                {"max_period", "60", "family stops at this period"},
                {"multiplier_tol", "1e-3", "fold accepted when |multiplier - 1| is below"}});
  cmds.push_back(po);

  const std::vector<KeySpec> fixed_period{
      {"gamma_start", "-1", "gamma of the Hopf point the long orbit grows from"},
      {"homoclinic_T", "170", "fixed period of the long orbits"},
      {"homoclinic_intervals", "150", "collocation intervals of the long orbits"},
      {"near", "1e-2", "distance defining a saddle or saddle-node passage"}};
  Command hom{"homoclinic", "homoclinic/SNIC curve from periodic orbits of fixed large period",
              parameter_keys("-1.3"), detail::run_homoclinic};
  add(hom.keys, fixed_period);
  cmds.push_back(hom);

  const std::vector<KeySpec> codim2{
      {"intervals", "200", "collocation intervals of the orbit segment"},
      {"beta_span", "0.3", "tracking runs go to beta -+ beta_span"},
      {"cut", "0.02", "segment ends at this distance from the equilibria"},
      {"phase", "reference_slope", "segment phase condition: reference_slope or reference"},
      {"max_steps", "2000", "continuation step limit per run"}};
  Command nc{"codim2-ncsnic", "non-central SNIC: locate at beta and track in (mu, beta, gamma)",
             parameter_keys("-1.3"), detail::run_ncsnic};
  add(nc.keys, fixed_period);
  add(nc.keys, codim2);
  add(nc.keys, {{"T", "2000", "segment length reached by the accuracy run"}});
  cmds.push_back(nc);

  Command sc{"codim2-sniceroclinic", "SNICeroclinic: locate at beta and track in (mu, beta, gamma)",
             parameter_keys("-1.3"), detail::run_sniceroclinic};
  add(sc.keys, fixed_period);
  add(sc.keys, codim2);
  add(sc.keys, {{"T", "1000", "segment length reached by the accuracy run"},
                {"dwell_radius", "0.05", "plateau radius used to pick the seed orbit"}});
  cmds.push_back(sc);

  Command grid{"escape-grid", "escape time and departure scalar on an n x n grid",
               parameter_keys("1.3"), detail::run_escape_grid};
  add(grid.keys, {{"box", "-10,10,-10,10", "x0,x1,y0,y1"},
                  {"n", "150", "cells per side"},
                  {"tmax", "1e4", "a trajectory still inside at tmax is trapped"},
                  {"tol", "1e-9", "integrator tolerance"},
                  {"threads", "0", "worker threads (0: HILLTOP_THREADS or all cores)"}});
  cmds.push_back(grid);

  for (auto& c : cmds) c.keys.push_back({"out", "out/" + c.name, "output directory"});
  return cmds;
}

/// Defaults, then the config file, then flags; a named point fills the
/// parameters that were not given explicitly.
inline Settings resolve(const Command& cmd, const std::optional<std::string>& config_path,
                        const std::map<std::string, std::string>& flags) {
  std::map<std::string, std::string> v;
  std::set<std::string> given;
  for (const auto& k : cmd.keys) v[k.key] = k.fallback;
  if (config_path) {
    for (const auto& [key, value] : io::ConfigFile::load(*config_path).entries) {
      if (!v.count(key)) {
        throw Error(ErrorCode::bad_input,
                    *config_path + ": unknown key '" + key + "' for " + cmd.name);
      }
      v[key] = value;
      given.insert(key);
    }
  }
  for (const auto& [key, value] : flags) {
    v[key] = value;
    given.insert(key);
  }
  if (given.count("mu") && given.count("lambda")) {
    throw Error(ErrorCode::bad_input, "give mu or lambda, not both");
  }
  if (!v["point"].empty()) {
    const auto p = named_points::lookup(v["point"]);
    if (!p) throw Error(ErrorCode::bad_input, "unknown point '" + v["point"] + "'");
    auto fill = [&](const char* key, double value) {
      if (!given.count(key)) v[key] = io::format_number(value);
    };
    fill("alpha", p->alpha);
    fill("beta", p->beta);
    fill("gamma", p->gamma);
    if (!given.count("lambda")) fill("mu", p->mu);
  }
  return Settings(std::move(v), std::move(given));
}

inline nlohmann::json manifest(const Command& cmd, const Settings& s, const io::OutputDir& out,
                               const Outcome& oc, int code) {
  nlohmann::json m;
  m["command"] = cmd.name;
  m["versions"] = {{"hilltop", HILLTOP_VERSION},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                 std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                 std::to_string(EIGEN_MINOR_VERSION)},
                   {"boost", BOOST_LIB_VERSION},
                   {"compiler", __VERSION__}};
  m["config"] = s.values();
  m["config_hash"] = io::hex32(io::crc32(io::canonical_config(s.values())));
  m["status"] = oc.status;
  m["exit_code"] = code;
  m["summary"] = oc.summary;
  m["diagnostics"] = oc.diagnostics;
  m["files"] = out.file_list();
  return m;
}

/// Runs one command line; returns the exit code.
inline int run(int argc, const char* const* argv, std::ostream& log = std::cerr) {
  const auto cmds = commands();
  CLI::App app{"Bifurcation analysis of the coupled saddle-node normal form"};
  app.require_subcommand(1);
  app.set_version_flag("--version", HILLTOP_VERSION);
  std::map<std::string, std::map<std::string, std::string>> flags;
  std::map<std::string, std::string> config;
  std::vector<CLI::App*> subs;
  for (const auto& cmd : cmds) {
    CLI::App* sub = app.add_subcommand(cmd.name, cmd.help);
    subs.push_back(sub);
    sub->add_option("--config", config[cmd.name], "flat key = value file");
    for (const auto& k : cmd.keys) {
      std::string help = k.help;
      if (!k.fallback.empty()) help += " [" + k.fallback + "]";
      sub->add_option("--" + k.key, flags[cmd.name][k.key], help)->allow_extra_args(false);
    }
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, log, log);
    return code == 0 ? kOk : kBadInput;
  }

  for (std::size_t c = 0; c < cmds.size(); ++c) {
    if (!subs[c]->parsed()) continue;
    const Command& cmd = cmds[c];
    std::map<std::string, std::string> given;
    for (const auto& k : cmd.keys) {
      if (subs[c]->count("--" + k.key) > 0) given[k.key] = flags[cmd.name][k.key];
    }
    std::optional<std::string> cfg;
    if (subs[c]->count("--config") > 0) cfg = config[cmd.name];

    std::optional<Settings> settings;
    try {
      settings = resolve(cmd, cfg, given);
      settings->params();  // validate the parameter block early
    } catch (const Error& e) {
      log << "error: " << e.what() << "\n";
      return kBadInput;
    }
    std::optional<io::OutputDir> out;
    try {
      out.emplace(settings->str("out"));
    } catch (const std::exception& e) {
      log << "error: cannot create output directory: " << e.what() << "\n";
      return kBadInput;
    }
    Outcome oc;
    int code = kOk;
    try {
      cmd.run(*settings, *out, oc);
      if (oc.failed()) code = kNumericalFailure;
    } catch (const Error& e) {
      oc.status = e.what();
      code = e.code() == ErrorCode::bad_input ? kBadInput : kNumericalFailure;
    }
    if (code != kOk) log << cmd.name << ": " << oc.status << "\n";
    out->write("manifest.json", manifest(cmd, *settings, *out, oc, code).dump(2) + "\n");
    return code;
  }
  return kBadInput;
}

}  // namespace hilltop::cli
