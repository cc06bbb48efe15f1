// Command-line front end: simulate, verify, sweep and export-matrices over
// scenario files. Exit codes: 0 success, 1 invariant violation, 2 bad input.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "phsobs/runner.hpp"

namespace {

struct Args {
  std::string scenario;
  phsobs::RunOptions opt;
  std::string solver;
  int n_d = 0;
  double t_end = 0.0;
};

void add_common(CLI::App* cmd, Args& a) {
  cmd->add_option("scenario", a.scenario, "scenario JSON file")->required();
  cmd->add_option("--out", a.opt.out_dir, "output directory (default: out)");
  cmd->add_option("--jobs", a.opt.jobs, "worker threads for sweeps")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--solver", a.solver,
                  "time integrator: midpoint | expm (overrides the scenario)");
  cmd->add_option("--nd", a.n_d, "grid cell count override (even, >= 20)");
  cmd->add_option("--tend", a.t_end, "simulated seconds override");
}

void fold_overrides(Args& a) {
  if (!a.solver.empty()) a.opt.solver = phsobs::solver_from_string(a.solver);
  if (a.n_d > 0) a.opt.n_d = a.n_d;
  if (a.t_end > 0.0) a.opt.t_end = a.t_end;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Boundary-observer toolkit for distributed port-Hamiltonian systems"};
  app.require_subcommand(1);

  Args a;
  CLI::App* sim = app.add_subcommand(
      "simulate", "integrate the coupled plant-observer pair");
  CLI::App* ver = app.add_subcommand(
      "verify", "check convergence conditions statically and on trajectories");
  CLI::App* swp = app.add_subcommand(
      "sweep", "compare observer gain designs on the error dynamics");
  CLI::App* exp = app.add_subcommand(
      "export-matrices", "write the assembled operators in matrix-market form");
  for (CLI::App* cmd : {sim, ver, swp, exp}) add_common(cmd, a);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    fold_overrides(a);
    phsobs::Scenario sc = phsobs::load_scenario(a.scenario);
    if (sim->parsed()) phsobs::run_simulate(sc, a.opt);
    if (ver->parsed()) phsobs::run_verify(sc, a.opt);
    if (swp->parsed()) phsobs::run_sweep(sc, a.opt);
    if (exp->parsed()) phsobs::run_export(sc, a.opt);
    return 0;
  } catch (const phsobs::StructuralError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const phsobs::InvariantError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
