// Acceptance gate: every release-blocking property of the toolkit, one line
// of output per criterion, nonzero exit when anything fails. Each check
// carries its numeric evidence so a failure is diagnosable from the log.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "phsobs/analysis.hpp"
#include "phsobs/discretize.hpp"
#include "phsobs/models.hpp"
#include "phsobs/simulate.hpp"

using namespace phsobs;

namespace {

using Vec2 = Eigen::Vector2d;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

double max_energy_increase(const TrajectoryRecord& rec, const char* name) {
  const Series* e = rec.energy(name);
  double worst = 0.0;
  for (std::size_t k = 1; k < e->values.size(); ++k)
    worst = std::max(worst, e->values[k] - e->values[k - 1]);
  return worst;
}

// 1. The derived input/output port splits satisfy the duality identities
//    with respect to the boundary pairing.
Outcome check_port_duality() {
  double worst = 0.0;
  for (const char* name : {"beam-3m", "beam-2m", "wave"}) {
    SigmaResiduals r = sigma_residuals(preset(name).model.io);
    worst = std::max(worst, r.max());
  }
  return {worst < 1e-10, "max pairing residual " + num(worst) + " (< 1e-10)"};
}

// 2. The assembled energy of the release profile matches the continuum
//    integral and improves monotonically under grid refinement.
Outcome check_energy_refinement() {
  const double h_cont = 0.73 / 6.0;
  ModelSpec model = preset("beam-2m").model;
  std::vector<double> errs;
  double h140 = 0.0;
  for (int nd : {140, 280, 560}) {
    DiscreteSystem d = discretize(model, {nd, Scheme::staggered_partitioned_n2});
    Vec x0 = release_state(d);
    double hd = 0.5 * x0.dot(d.M_energy * x0);
    if (nd == 140) h140 = hd;
    errs.push_back(std::abs(hd - h_cont));
  }
  bool close = errs[0] < 5e-3;
  bool shrinking = errs[0] > errs[1] && errs[1] > errs[2];
  std::ostringstream os;
  os << "H(0)=" << num(h140) << " vs " << num(h_cont) << ", errors "
     << num(errs[0]) << " > " << num(errs[1]) << " > " << num(errs[2]);
  return {close && shrinking, os.str()};
}

// 3. The staggered operators satisfy the discrete power-balance certificates
//    algebraically on every grid.
Outcome check_balance_certificates() {
  double worst = 0.0;
  for (const char* name : {"beam-2m", "wave"}) {
    ModelSpec model = preset(name).model;
    for (int nd : {20, 60, 140}) {
      DiscreteSystem d = discretize(model, {nd, default_scheme(model.system)});
      worst = std::max(worst, balance_residuals(d).max());
    }
  }
  return {worst < 1e-8, "max certificate residual " + num(worst) + " (< 1e-8)"};
}

// 4. The observer error energy never increases along trajectories, for every
//    preset with positive-definite injection gain and both integrators.
Outcome check_monotone_error_energy() {
  double worst = 0.0;
  std::string at = "any run";
  for (const char* name : {"beam-3m", "beam-2m", "wave"}) {
    ModelSpec model = preset(name).model;
    DiscreteSystem d = discretize(model, {140, default_scheme(model.system)});
    SimSystem err = error_system(d);
    Vec z0 = release_state(d);
    for (Solver solver :
         {Solver::implicit_midpoint, Solver::matrix_exponential}) {
      SolverConfig cfg;
      cfg.scheme = solver;
      cfg.dt = 1e-3;
      cfg.t_end = 8.0;
      TrajectoryRecord rec = simulate(err, z0, cfg);
      double inc = max_energy_increase(rec, "Htilde");
      if (inc > worst) {
        worst = inc;
        at = std::string(name) + "/" + to_string(solver);
      }
    }
  }
  return {worst <= 1e-9,
          "max step increase " + num(worst) + " at " + at + " (<= 1e-9)"};
}

// 5. Without damping and without injection the energy is conserved over a
//    long horizon.
Outcome check_lossless_conservation() {
  BeamParams params;
  params.damping = 0.0;
  ModelSpec model = beam_spec(params);
  model.io = preset("beam-2m").model.io;
  DiscreteSystem d = discretize(model, {140, Scheme::staggered_partitioned_n2});
  SimSystem sys = open_loop(d);
  Vec z0 = release_state(d);
  SolverConfig cfg;
  cfg.scheme = Solver::matrix_exponential;
  cfg.dt = 1e-3;
  cfg.t_end = 10.0;
  TrajectoryRecord rec = simulate(sys, z0, cfg);
  const Series* H = rec.energy("H");
  double h0 = H->values.front(), drift = 0.0;
  for (double v : H->values) drift = std::max(drift, std::abs(v - h0));
  drift /= h0;
  return {drift < 1e-8, "relative drift " + num(drift) + " over 10 s (< 1e-8)"};
}

// 6. The static feasibility verdicts are the expected ones and trajectories
//    confirm them: feasible bounds are met by a generic run, the infeasible
//    clause is defeated by its own witness state.
Outcome check_feasibility_verdicts() {
  ModelSpec b3 = preset("beam-3m").model;
  ModelSpec b2 = preset("beam-2m").model;
  PropositionVerdict b3p3 = check_proposition_static(b3, PropId::P3_exp_N2);
  PropositionVerdict b2p1 = check_proposition_static(b2, PropId::P1_asym);
  PropositionVerdict b2p4 =
      check_proposition_static(b2, PropId::P4_exp_partitioned);
  PropositionVerdict b2p3 = check_proposition_static(b2, PropId::P3_exp_N2);

  bool statics = b3p3.feasible && b2p1.feasible && b2p4.feasible &&
                 !b2p3.feasible && b2p3.has_witness;

  DiscreteSystem d = discretize(b2, {140, Scheme::staggered_partitioned_n2});
  SimSystem err = error_system(d);
  SolverConfig cfg;
  cfg.scheme = Solver::matrix_exponential;
  cfg.dt = 1e-3;
  cfg.t_end = 1.0;
  TrajectoryRecord generic = simulate(err, release_state(d), cfg);
  RuntimeCheck feas = check_proposition_runtime(
      generic, b2.io.L, b2p1.clauses[b2p1.best_clause].rows);

  Vec w0 = state_from_boundary_witness(d, b2p3.witness_phi_a,
                                       b2p3.witness_phi_b);
  cfg.t_end = 0.5;
  TrajectoryRecord seeded = simulate(err, w0, cfg);
  const ClauseCheck* wc = nullptr;
  for (const auto& c : b2p3.clauses)
    if (c.has_witness && (!wc || c.kappa > wc->kappa)) wc = &c;
  RuntimeCheck infeas = check_proposition_runtime(seeded, b2.io.L, wc->rows);

  bool runtime = feas.included > 0 &&
                 feas.kappa_empirical >= 0.5 * b2p1.kappa_max &&
                 infeas.included > 0 && infeas.kappa_empirical < 1e-3;
  std::ostringstream os;
  os << "static[b3.P3 " << (b3p3.feasible ? "ok" : "BAD") << ", b2.P1 "
     << (b2p1.feasible ? "ok" : "BAD") << ", b2.P4 "
     << (b2p4.feasible ? "ok" : "BAD") << ", b2.P3 "
     << (!b2p3.feasible ? "infeasible" : "BAD") << "]"
     << " runtime[kappa " << num(feas.kappa_empirical) << " vs "
     << num(b2p1.kappa_max) << ", witness " << num(infeas.kappa_empirical)
     << "]";
  return {statics && runtime, os.str()};
}

// 7. The three bundled injection-gain designs produce the three damping
//    regimes with the expected convergence times on the error dynamics.
Outcome check_design_regimes() {
  ModelSpec model = preset("beam-2m").model;
  DiscreteSystem d = discretize(model, {140, Scheme::staggered_partitioned_n2});
  Vec z0 = release_state(d);
  struct Design {
    const char* name;
    double l1, l2;
    double t_target;
    const char* label;
  };
  const std::vector<Design> designs = {
      {"d1", 0.03, 0.30, 3.0, "weakly_damped"},
      {"d2", 0.10, 1.00, 1.0, "critically_damped"},
      {"d3", 0.20, 2.00, 2.0, "overdamped"}};

  std::vector<DecayFit> fits;
  std::vector<std::vector<double>> tips;
  std::vector<std::vector<double>> times;
  for (const auto& des : designs) {
    Mat L = Vec2(des.l1, des.l2).asDiagonal();
    SimSystem err = error_system(d, model.io.C_m, L);
    SolverConfig cfg;
    cfg.scheme = Solver::matrix_exponential;
    cfg.dt = 1e-3;
    cfg.t_end = 8.0;
    TrajectoryRecord rec = simulate(err, z0, cfg);
    fits.push_back(fit_decay(rec.t, rec.energy("Htilde")->values));
    tips.push_back(tip_error_series(rec, "tip_err"));
    times.push_back(rec.t);
  }
  double best = std::min({fits[0].t_conv, fits[1].t_conv, fits[2].t_conv});
  bool pass = true;
  std::ostringstream os;
  for (std::size_t i = 0; i < designs.size(); ++i) {
    RegimeReport rep = classify_regime(fits[i], tips[i], best);
    bool label_ok = rep.label == designs[i].label;
    bool time_ok =
        std::abs(rep.t_conv - designs[i].t_target) <= 0.4 * designs[i].t_target;
    pass = pass && label_ok && time_ok;
    os << designs[i].name << "=" << rep.label << "/" << num(rep.t_conv) << "s"
       << (label_ok && time_ok ? "" : " BAD")
       << (i + 1 < designs.size() ? ", " : "");
  }
  bool order = fits[1].t_conv < fits[2].t_conv && fits[2].t_conv < fits[0].t_conv;
  if (!order) os << ", ordering BAD";
  return {pass && order, os.str()};
}

// 8. The implicit midpoint step converges at second order against the exact
//    propagator: halving dt divides the final-state error by about four.
Outcome check_midpoint_order() {
  ModelSpec model = preset("beam-2m").model;
  DiscreteSystem d = discretize(model, {60, Scheme::staggered_partitioned_n2});
  SimSystem err = error_system(d);
  Vec z0 = slow_modes_state(err.A, 6);
  auto final_error = [&](double dt) {
    SolverConfig mid{Solver::implicit_midpoint, dt, 1.0};
    SolverConfig ref{Solver::matrix_exponential, dt, 1.0};
    TrajectoryRecord a = simulate(err, z0, mid);
    TrajectoryRecord b = simulate(err, z0, ref);
    return (a.snapshots.col(a.snapshots.cols() - 1) -
            b.snapshots.col(b.snapshots.cols() - 1))
        .norm();
  };
  double e_coarse = final_error(2e-3);
  double e_fine = final_error(1e-3);
  double ratio = e_coarse / e_fine;
  std::ostringstream os;
  os << "error ratio " << num(ratio) << " for dt 2e-3 -> 1e-3 (in [3, 5])";
  return {ratio > 3.0 && ratio < 5.0, os.str()};
}

// 9. The two independent deflection reconstructions (spatial double sum of
//    curvature, time integral of velocity) agree, and the initial tip value
//    matches the closed-form double integral of the release curvature.
Outcome check_deflection_consistency() {
  ModelSpec model = preset("beam-2m").model;
  DiscreteSystem d = discretize(model, {140, Scheme::staggered_partitioned_n2});
  SimSystem sys = couple_plant_observer(d);
  Vec z0 = Vec::Zero(sys.dim());
  z0.head(2 * d.m) = release_state(d);
  SolverConfig cfg;
  cfg.scheme = Solver::matrix_exponential;
  cfg.dt = 1e-3;
  cfg.t_end = 8.0;
  TrajectoryRecord rec = simulate(sys, z0, cfg);
  DeflectionResult w = reconstruct_deflection(rec, sys, cfg.dt);
  // closed form: w(1) of w'' = z - 0.9 with w(0) = w'(0) = 0 is 1/6 - 0.45
  const double tip_target = 1.0 / 6.0 - 0.45;
  bool agree = w.rel_discrepancy < 0.02;
  bool tip_ok = std::abs(w.tip_initial - tip_target) < 1e-3;
  std::ostringstream os;
  os << "method discrepancy " << num(w.rel_discrepancy) << " (< 0.02), tip "
     << num(w.tip_initial) << " vs closed form " << num(tip_target);
  return {agree && tip_ok, os.str()};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
    double budget_s;  // wall-clock limit, 0 = none
  };
  const std::vector<Criterion> criteria = {
      {"boundary-port duality identities", check_port_duality, 0},
      {"discrete energy consistency under refinement", check_energy_refinement,
       0},
      {"exact discrete power-balance certificates", check_balance_certificates,
       0},
      {"monotone observer error energy", check_monotone_error_energy, 0},
      {"energy conservation without damping or injection",
       check_lossless_conservation, 0},
      {"feasibility verdicts with trajectory confirmation",
       check_feasibility_verdicts, 30.0},
      {"gain designs separate the three damping regimes", check_design_regimes,
       60.0},
      {"second-order accuracy of the implicit midpoint step",
       check_midpoint_order, 0},
      {"deflection reconstruction consistency", check_deflection_consistency,
       0},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto& c = criteria[i];
    auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    if (c.budget_s > 0 && secs > c.budget_s) {
      out.pass = false;
      out.detail += " [over time budget " + num(c.budget_s) + " s]";
    }
    std::printf("[%s] %zu %-55s %6.2f s  %s\n", out.pass ? "PASS" : "FAIL",
                i + 1, c.name, secs, out.detail.c_str());
    if (!out.pass) ++failures;
  }
  if (failures) std::printf("%d criterion(s) failed\n", failures);
  return failures ? 1 : 0;
}
