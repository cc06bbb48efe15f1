#pragma once

#include <atomic>
#include <exception>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include "phsobs/analysis.hpp"
#include "phsobs/reporting.hpp"
#include "phsobs/scenario.hpp"

namespace phsobs {

struct RunOptions {
  fs::path out_dir = "out";
  int jobs = 1;
  std::optional<Solver> solver;   // command-line override
  std::optional<int> n_d;         // command-line override
  std::optional<double> t_end;    // command-line override
};

inline Scenario apply_overrides(Scenario sc, const RunOptions& opt) {
  if (opt.solver) sc.solver.scheme = *opt.solver;
  if (opt.n_d) sc.grid.n_d = *opt.n_d;
  if (opt.t_end) sc.solver.t_end = *opt.t_end;
  return sc;
}

// Plant-shaped initial condition per the scenario's `initial` block.
inline Vec initial_plant_state(const Scenario& sc, const DiscreteSystem& d) {
  const int n = 2 * d.m;
  if (sc.initial_kind == "release") return release_state(d);
  if (sc.initial_kind == "zero") return Vec::Zero(n);
  if (sc.initial_kind == "modes") return slow_modes_state(d.A, sc.mode_count);
  if (sc.initial_kind == "explicit") {
    if (sc.x0.size() != n)
      throw StructuralError("explicit x0 length does not match the grid");
    return sc.x0;
  }
  throw StructuralError("unknown initial state kind: " + sc.initial_kind);
}

// Widens the plant state to the simulated system: the observer block starts
// at x0_hat when given, otherwise at rest.
inline Vec initial_state_for(const Scenario& sc, const DiscreteSystem& d,
                             const SimSystem& sys) {
  Vec x0 = initial_plant_state(sc, d);
  Vec z0 = Vec::Zero(sys.dim());
  z0.head(x0.size()) = x0;
  if (sys.dim() == 2 * x0.size() && sc.x0_hat.size()) {
    if (sc.x0_hat.size() != x0.size())
      throw StructuralError("x0_hat length does not match the grid");
    z0.tail(x0.size()) = sc.x0_hat;
  }
  return z0;
}

namespace detail {

inline Json grid_json(const Scenario& sc) {
  return {{"n_d", sc.grid.n_d}, {"scheme", to_string(sc.grid.scheme)}};
}

inline Json solver_json(const Scenario& sc) {
  return {{"scheme", to_string(sc.solver.scheme)},
          {"dt", sc.solver.dt},
          {"t_end", sc.solver.t_end},
          {"stride", sc.solver.stride}};
}

inline double max_increase(const std::vector<double>& v) {
  double worst = 0.0;
  for (std::size_t k = 1; k < v.size(); ++k)
    worst = std::max(worst, v[k] - v[k - 1]);
  return worst;
}

inline std::vector<double> to_std(const Vec& v) {
  return {v.data(), v.data() + v.size()};
}

}  // namespace detail

// Simulates the coupled plant-observer pair for the first design and writes
// traces.csv, field.csv, deflection.csv (bending systems) and report.json.
inline Json run_simulate(const Scenario& sc_in, const RunOptions& opt,
                         std::ostream& log = std::cout) {
  Scenario sc = apply_overrides(sc_in, opt);
  DiscreteSystem d = discretize(sc.model, sc.grid);
  const DesignEntry& design = sc.designs.front();
  SimSystem sys = couple_plant_observer(d, sc.model.io.C_m, design.L);
  Vec z0 = initial_state_for(sc, d, sys);
  TrajectoryRecord rec = simulate(sys, z0, sc.solver);

  const Series* H = rec.energy("H");
  const Series* Hh = rec.energy("Hhat");
  const Series* Ht = rec.energy("Htilde");
  const NamedSignal* ym = rec.output("ym");
  const NamedSignal* ymh = rec.output("ymhat");
  if (!H || !Hh || !Ht || !ym || !ymh)
    throw InvariantError("coupled record is missing required channels");
  const int k = static_cast<int>(ym->values.rows());

  std::vector<std::string> head = {"t", "H", "Hhat", "Htilde"};
  for (int i = 0; i < k; ++i) head.push_back("ym_" + std::to_string(i + 1));
  for (int i = 0; i < k; ++i) head.push_back("ymhat_" + std::to_string(i + 1));
  head.push_back("residual");
  CsvWriter traces(head);
  for (std::size_t s = 0; s < rec.t.size(); ++s) {
    std::vector<double> row = {rec.t[s], H->values[s], Hh->values[s],
                               Ht->values[s]};
    for (int i = 0; i < k; ++i)
      row.push_back(ym->values(i, static_cast<long>(s)));
    for (int i = 0; i < k; ++i)
      row.push_back(ymh->values(i, static_cast<long>(s)));
    row.push_back(rec.residual[s]);
    traces.row(row);
  }
  atomic_write(opt.out_dir / "traces.csv", traces.str());

  // Decimated state snapshots, one row per kept time.
  {
    const long nsnap = static_cast<long>(rec.snap_t.size());
    const long keep = std::max<long>(1, (nsnap + 200) / 201);
    std::vector<std::string> fh = {"t"};
    for (int i = 0; i < sys.dim(); ++i)
      fh.push_back("z_" + std::to_string(i + 1));
    CsvWriter field(fh);
    for (long s = 0; s < nsnap; s += keep) {
      std::vector<double> row = {rec.snap_t[s]};
      for (int i = 0; i < sys.dim(); ++i) row.push_back(rec.snapshots(i, s));
      field.row(row);
    }
    if ((nsnap - 1) % keep != 0) {
      std::vector<double> row = {rec.snap_t[nsnap - 1]};
      for (int i = 0; i < sys.dim(); ++i)
        row.push_back(rec.snapshots(i, nsnap - 1));
      field.row(row);
    }
    atomic_write(opt.out_dir / "field.csv", field.str());
  }

  DecayFit fit = fit_decay(rec.t, Ht->values);

  Json rep;
  rep["label"] = sc.label;
  if (!sc.preset_name.empty()) rep["preset"] = sc.preset_name;
  rep["design"] = design.name;
  rep["grid"] = detail::grid_json(sc);
  rep["solver"] = detail::solver_json(sc);
  rep["steps"] = rec.t.size() - 1;
  rep["energies"] = {
      {"H", {{"initial", H->values.front()}, {"final", H->values.back()}}},
      {"Hhat", {{"initial", Hh->values.front()}, {"final", Hh->values.back()}}},
      {"Htilde",
       {{"initial", Ht->values.front()}, {"final", Ht->values.back()}}}};
  double rmax = 0.0;
  for (double r : rec.residual) rmax = std::max(rmax, std::abs(r));
  rep["residual_max"] = rmax;
  rep["htilde_max_increase"] = detail::max_increase(Ht->values);
  rep["decay"] = {{"alpha", fit.alpha},
                  {"t_conv", fit.t_conv},
                  {"exact", fit.exact},
                  {"fit_points", fit.fit_points}};
  Json files = Json::array({"traces.csv", "field.csv"});

  if (sys.x2_offset >= 0) {
    DeflectionResult w = reconstruct_deflection(rec, sys, sc.solver.dt);
    CsvWriter defl({"t", "tip_spatial", "tip_temporal", "row_discrepancy"});
    const int tip = static_cast<int>(w.faces.size()) - 1;
    for (std::size_t s = 0; s < w.t.size(); ++s) {
      long col = static_cast<long>(s);
      double disc =
          (w.w_spatial.col(col) - w.w_temporal.col(col)).cwiseAbs().maxCoeff();
      defl.row({w.t[s], w.w_spatial(tip, col), w.w_temporal(tip, col), disc});
    }
    atomic_write(opt.out_dir / "deflection.csv", defl.str());
    files.push_back("deflection.csv");
    rep["deflection"] = {{"max_discrepancy", w.max_discrepancy},
                         {"rel_discrepancy", w.rel_discrepancy},
                         {"tip_initial", w.tip_initial}};
  }

  rep["files"] = files;
  atomic_write(opt.out_dir / "report.json", rep.dump(2) + "\n");

  log << "simulate: " << (sc.label.empty() ? sc.preset_name : sc.label)
      << "  steps=" << rec.t.size() - 1 << "  Htilde " << fmt_double(Ht->values.front())
      << " -> " << fmt_double(Ht->values.back()) << "\n"
      << "  decay alpha=" << fit.alpha << "  t_conv=" << fit.t_conv
      << "  residual_max=" << rmax << "\n"
      << "  wrote " << (opt.out_dir / "report.json").string() << "\n";
  return rep;
}

namespace detail {

inline Json clause_json(const ClauseCheck& c) {
  Json j = {{"index", c.index},
            {"description", c.description},
            {"rows", c.rows},
            {"vacuous", c.vacuous},
            {"kappa", c.kappa}};
  if (c.has_witness) {
    j["witness_phi_a"] = to_std(c.witness_phi_a);
    j["witness_phi_b"] = to_std(c.witness_phi_b);
  }
  return j;
}

// Picks the clause whose witness the verdict carries: the non-vacuous clause
// of largest kappa that produced one.
inline const ClauseCheck* witness_clause(const PropositionVerdict& v) {
  const ClauseCheck* best = nullptr;
  for (const auto& c : v.clauses)
    if (c.has_witness && (!best || c.kappa > best->kappa)) best = &c;
  return best;
}

}  // namespace detail

// Static feasibility verdicts for the requested propositions plus a short
// trajectory confirmation of each verdict: feasible clauses must be met by a
// generic run, infeasible ones are exercised from their witness state.
inline Json run_verify(const Scenario& sc_in, const RunOptions& opt,
                       std::ostream& log = std::cout) {
  Scenario sc = apply_overrides(sc_in, opt);
  std::vector<PropId> props = sc.propositions;
  if (props.empty())
    props = {PropId::P1_asym, PropId::P2_exp_N1, PropId::P3_exp_N2,
             PropId::P4_exp_partitioned};

  DiscreteSystem d = discretize(sc.model, sc.grid);
  SimSystem err = error_system(d);

  SolverConfig generic = sc.solver;
  generic.t_end = std::min(sc.solver.t_end, 1.0);
  SolverConfig seeded = sc.solver;
  seeded.t_end = std::min(sc.solver.t_end, 0.5);

  Json out;
  out["label"] = sc.label;
  if (!sc.preset_name.empty()) out["preset"] = sc.preset_name;
  out["grid"] = detail::grid_json(sc);
  out["tolerance"] = default_tolerance();
  Json plist = Json::array();

  log << std::left << std::setw(22) << "proposition" << std::setw(13)
      << "branch" << std::setw(12) << "verdict" << std::setw(14) << "kappa_max"
      << "runtime\n";
  for (PropId id : props) {
    PropositionVerdict v = check_proposition_static(sc.model, id);
    Json jp;
    jp["id"] = to_string(v.id);
    jp["branch"] = v.branch;
    jp["applicable"] = v.applicable;
    if (!v.applicable) jp["reason"] = v.reason;
    std::string verdict = "n/a", runtime = "-";
    if (v.applicable) {
      jp["feasible"] = v.feasible;
      jp["kappa_max"] = v.kappa_max;
      jp["best_clause"] = v.best_clause;
      Json jc = Json::array();
      for (const auto& c : v.clauses) jc.push_back(detail::clause_json(c));
      jp["clauses"] = jc;
      verdict = v.feasible ? "feasible" : "infeasible";

      if (v.feasible) {
        TrajectoryRecord r = simulate(err, release_state(d), generic);
        RuntimeCheck rc = check_proposition_runtime(
            r, sc.model.io.L, v.clauses[v.best_clause].rows);
        jp["runtime"] = {{"seed", "release"},
                         {"clause", v.best_clause},
                         {"kappa_empirical", rc.kappa_empirical},
                         {"included", rc.included},
                         {"excluded", rc.excluded},
                         {"ratio_to_static",
                          rc.kappa_empirical / std::max(v.kappa_max, 1e-300)}};
        std::ostringstream rs;
        rs << "kappa_emp=" << rc.kappa_empirical;
        runtime = rs.str();
      } else if (const ClauseCheck* wc = detail::witness_clause(v)) {
        Vec z0 = state_from_boundary_witness(d, wc->witness_phi_a,
                                             wc->witness_phi_b);
        TrajectoryRecord r = simulate(err, z0, seeded);
        RuntimeCheck rc =
            check_proposition_runtime(r, sc.model.io.L, wc->rows);
        jp["runtime"] = {{"seed", "witness"},
                         {"clause", wc->index},
                         {"kappa_empirical", rc.kappa_empirical},
                         {"included", rc.included},
                         {"excluded", rc.excluded}};
        std::ostringstream rs;
        rs << "witness kappa_emp=" << rc.kappa_empirical;
        runtime = rs.str();
      }
    }
    std::ostringstream kmax;
    if (v.applicable) kmax << v.kappa_max;
    log << std::left << std::setw(22) << to_string(v.id) << std::setw(13)
        << v.branch << std::setw(12) << verdict << std::setw(14) << kmax.str()
        << runtime << "\n";
    plist.push_back(jp);
  }
  out["propositions"] = plist;
  atomic_write(opt.out_dir / "report.json", out.dump(2) + "\n");
  log << "wrote " << (opt.out_dir / "report.json").string() << "\n";
  return out;
}

struct SweepRow {
  std::string design;
  DecayFit fit;
  RegimeReport regime;
  std::vector<double> t, htilde, tip;
};

// Runs the error system once per gain design (in parallel when jobs > 1),
// classifies each transient against the best convergence time in the group,
// and writes sweep.csv, overlay plots and report.json.
inline Json run_sweep(const Scenario& sc_in, const RunOptions& opt,
                      std::ostream& log = std::cout) {
  Scenario sc = apply_overrides(sc_in, opt);
  DiscreteSystem d = discretize(sc.model, sc.grid);
  Vec x0 = initial_plant_state(sc, d);

  const std::size_t nd = sc.designs.size();
  std::vector<SweepRow> rows(nd);
  std::vector<std::exception_ptr> errors(nd);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= nd) return;
      try {
        const DesignEntry& des = sc.designs[i];
        SimSystem err = error_system(d, sc.model.io.C_m, des.L);
        TrajectoryRecord rec = simulate(err, x0, sc.solver);
        SweepRow& row = rows[i];
        row.design = des.name;
        row.t = rec.t;
        row.htilde = rec.energy("Htilde")->values;
        row.fit = fit_decay(row.t, row.htilde);
        row.tip = rec.output("tip_err") ? tip_error_series(rec, "tip_err")
                                        : tip_error_series(rec, "ym");
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  int jobs = std::max(1, std::min<int>(opt.jobs, static_cast<int>(nd)));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  double best = std::numeric_limits<double>::infinity();
  for (const auto& r : rows) best = std::min(best, r.fit.t_conv);
  for (auto& r : rows) r.regime = classify_regime(r.fit, r.tip, best);

  CsvWriter csv({"design_index", "alpha", "t_conv", "crossings", "overshoot"});
  Json jrows = Json::array();
  log << std::left << std::setw(12) << "design" << std::setw(12) << "alpha"
      << std::setw(12) << "t_conv" << std::setw(11) << "crossings"
      << std::setw(12) << "overshoot" << "regime\n";
  for (std::size_t i = 0; i < nd; ++i) {
    const auto& r = rows[i];
    csv.row({static_cast<double>(i), r.regime.alpha, r.regime.t_conv,
             static_cast<double>(r.regime.crossings), r.regime.overshoot});
    jrows.push_back({{"design", r.design},
                     {"alpha", r.regime.alpha},
                     {"t_conv", r.regime.t_conv},
                     {"crossings", r.regime.crossings},
                     {"overshoot", r.regime.overshoot},
                     {"regime", r.regime.label}});
    log << std::left << std::setw(12) << r.design << std::setw(12)
        << r.regime.alpha << std::setw(12) << r.regime.t_conv << std::setw(11)
        << r.regime.crossings << std::setw(12) << r.regime.overshoot
        << r.regime.label << "\n";
  }
  atomic_write(opt.out_dir / "sweep.csv", csv.str());

  std::vector<PlotSeries> en, tip;
  for (const auto& r : rows) {
    en.push_back({r.design, r.t, r.htilde});
    tip.push_back({r.design, r.t, r.tip});
  }
  atomic_write(opt.out_dir / "htilde_overlay.svg",
               render_line_plot("error energy", "t", "Htilde", en, true));
  atomic_write(opt.out_dir / "tip_error.svg",
               render_line_plot("reconstruction error at the free end", "t",
                                "tip error", tip, false));

  Json rep;
  rep["label"] = sc.label;
  if (!sc.preset_name.empty()) rep["preset"] = sc.preset_name;
  rep["grid"] = detail::grid_json(sc);
  rep["solver"] = detail::solver_json(sc);
  rep["best_t_conv"] = best;
  rep["designs"] = jrows;
  rep["files"] = {"sweep.csv", "htilde_overlay.svg", "tip_error.svg"};
  atomic_write(opt.out_dir / "report.json", rep.dump(2) + "\n");
  log << "wrote " << (opt.out_dir / "report.json").string() << "\n";
  return rep;
}

// Writes the assembled operators in matrix-market array format.
inline Json run_export(const Scenario& sc_in, const RunOptions& opt,
                       std::ostream& log = std::cout) {
  Scenario sc = apply_overrides(sc_in, opt);
  DiscreteSystem d = discretize(sc.model, sc.grid);
  const std::string tag = "n_d=" + std::to_string(sc.grid.n_d) +
                          " scheme=" + to_string(sc.grid.scheme);
  const std::vector<std::pair<std::string, const Mat*>> mats = {
      {"A", &d.A},          {"B", &d.B},      {"C_y", &d.C_y},
      {"D_y", &d.D_y},      {"M_E", &d.M_energy}, {"S_diss", &d.S_diss}};
  Json files = Json::array();
  for (const auto& [name, M] : mats) {
    atomic_write(opt.out_dir / (name + ".mtx"), matrix_market(*M, tag));
    files.push_back(name + ".mtx");
  }
  Json rep;
  rep["label"] = sc.label;
  if (!sc.preset_name.empty()) rep["preset"] = sc.preset_name;
  rep["grid"] = detail::grid_json(sc);
  rep["state_dim"] = 2 * d.m;
  rep["input_dim"] = static_cast<int>(d.B.cols());
  rep["files"] = files;
  atomic_write(opt.out_dir / "report.json", rep.dump(2) + "\n");
  log << "exported " << files.size() << " matrices to " << opt.out_dir.string()
      << "\n";
  return rep;
}

}  // namespace phsobs
