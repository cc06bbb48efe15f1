#include <catch2/catch_amalgamated.hpp>

#include "phsobs/analysis.hpp"
#include "test_helpers.hpp"

using namespace phsobs;

namespace {

SimSystem scalar_decay(double rate) {
  SimSystem s;
  s.A = Mat::Constant(1, 1, -rate);
  s.energies = {{"H", Mat::Identity(1, 1)}};
  s.M_bal = Mat::Identity(1, 1);
  s.S_bal = Mat::Constant(1, 1, rate);
  return s;
}

SimSystem coupled_preset(const std::string& name, int nd) {
  Preset p = preset(name);
  GridConfig g{nd, default_scheme(p.model.system)};
  return couple_plant_observer(discretize(p.model, g));
}

Vec coupled_release(const SimSystem& sys) {
  Vec z0 = Vec::Zero(sys.dim());
  const int m = sys.m;
  // plant curvature block carries the ramp profile; observer starts at zero
  for (int j = 0; j < m; ++j) z0(m + j) = (j * sys.h) - 0.9;
  return z0;
}

}  // namespace

TEST_CASE("exponential propagator is exact on a scalar mode") {
  SimSystem s = scalar_decay(1.0);
  SolverConfig cfg;
  cfg.scheme = Solver::matrix_exponential;
  cfg.dt = 0.1;
  cfg.t_end = 1.0;
  TrajectoryRecord r = simulate(s, Vec::Ones(1), cfg);
  REQUIRE(r.snapshots(0, r.snap_t.size() - 1) ==
          Catch::Approx(std::exp(-1.0)).margin(1e-12));
}

TEST_CASE("record layout") {
  SimSystem s = scalar_decay(0.5);
  SolverConfig cfg;
  cfg.dt = 1e-2;
  cfg.t_end = 0.55;
  cfg.stride = 10;
  TrajectoryRecord r = simulate(s, Vec::Ones(1), cfg);
  REQUIRE(r.t.size() == 56);
  REQUIRE(r.residual.size() == r.t.size());
  REQUIRE(r.residual[0] == 0.0);
  for (std::size_t k = 1; k < r.t.size(); ++k)
    REQUIRE(r.t[k] > r.t[k - 1]);
  // snapshots at steps 0,10,...,50 plus the off-stride final step
  REQUIRE(r.snap_t.size() == 7);
  REQUIRE(r.snap_t.back() == Catch::Approx(0.55));
  REQUIRE(r.energy("H") != nullptr);
  REQUIRE(r.energy("H")->values.size() == r.t.size());
}

TEST_CASE("estimation error energy never increases under either solver") {
  for (const char* name : {"beam-3m", "beam-2m", "wave"}) {
    SimSystem sys = coupled_preset(name, 60);
    Vec z0 = name == std::string("wave")
                 ? [&] {
                     Vec z = Vec::Zero(sys.dim());
                     for (int j = 0; j < sys.m; ++j)
                       z(sys.m + j) = std::sin(3.0 * (j + 0.5) * sys.h);
                     return z;
                   }()
                 : coupled_release(sys);
    for (Solver sol : {Solver::implicit_midpoint, Solver::matrix_exponential}) {
      SolverConfig cfg;
      cfg.scheme = sol;
      cfg.dt = 1e-3;
      cfg.t_end = 1.0;
      TrajectoryRecord r = simulate(sys, z0, cfg);
      const auto& Ht = r.energy("Htilde")->values;
      double h0 = Ht[0];
      double worst = 0.0;
      for (std::size_t k = 1; k < Ht.size(); ++k)
        worst = std::max(worst, Ht[k] - Ht[k - 1]);
      INFO(name << " " << to_string(sol));
      REQUIRE(h0 > 0.0);
      REQUIRE(worst <= 1e-12 * h0);
      for (double v : Ht) REQUIRE(v >= -1e-12);
    }
  }
}

TEST_CASE("lossless zero-gain run conserves the error energy") {
  BeamParams p;
  p.damping = 0.0;
  ModelSpec m = beam_spec(p);
  m.io = preset("beam-2m").model.io;
  DiscreteSystem d = discretize(m, {60, Scheme::staggered_partitioned_n2});
  SimSystem sys = error_system(d, m.io.C_m, Mat::Zero(2, 2));
  Vec z0 = release_state(d);
  for (auto [sol, tol] : {std::pair{Solver::matrix_exponential, 1e-8},
                          {Solver::implicit_midpoint, 1e-6}}) {
    SolverConfig cfg;
    cfg.scheme = sol;
    cfg.dt = 1e-3;
    cfg.t_end = 10.0;
    TrajectoryRecord r = simulate(sys, z0, cfg);
    const auto& H = r.energy("Htilde")->values;
    double drift = 0.0;
    for (double v : H) drift = std::max(drift, std::abs(v - H[0]));
    INFO(to_string(sol));
    REQUIRE(drift / H[0] < tol);
  }
}

TEST_CASE("half-step composition of the exponential propagator") {
  SimSystem sys = coupled_preset("beam-2m", 20);
  REQUIRE(composition_residual(sys.A, 1e-3) < 1e-10);
}

TEST_CASE("per-step balance residual is third order in the step") {
  Preset p = preset("beam-2m");
  DiscreteSystem d = discretize(p.model, {60, Scheme::staggered_partitioned_n2});
  SimSystem sys = error_system(d);
  Vec z0 = slow_modes_state(sys.A, 4);
  for (Solver sol : {Solver::implicit_midpoint, Solver::matrix_exponential}) {
    auto worst_residual = [&](double dt) {
      SolverConfig cfg;
      cfg.scheme = sol;
      cfg.dt = dt;
      cfg.t_end = 0.5;
      TrajectoryRecord r = simulate(sys, z0, cfg);
      double w = 0.0;
      for (double v : r.residual) w = std::max(w, std::abs(v));
      return w;
    };
    double ratio = worst_residual(2e-3) / worst_residual(1e-3);
    INFO(to_string(sol));
    REQUIRE(ratio > 6.5);
    REQUIRE(ratio < 9.5);
  }
}

TEST_CASE("non-finite states abort with the step index") {
  SimSystem s = scalar_decay(-1e4);  // growth fast enough to overflow
  SolverConfig cfg;
  cfg.scheme = Solver::matrix_exponential;
  cfg.dt = 100.0;
  cfg.t_end = 1000.0;
  REQUIRE_THROWS_AS(simulate(s, Vec::Ones(1), cfg), SimulationError);
  try {
    simulate(s, Vec::Ones(1), cfg);
  } catch (const SimulationError& e) {
    REQUIRE(e.step() >= 1);
    REQUIRE(std::string(e.what()).find("step") != std::string::npos);
  }
}

TEST_CASE("ill-conditioned midpoint solve is refused") {
  SimSystem s = scalar_decay(-2.0 / 0.1);  // makes I - dt/2 A singular
  SolverConfig cfg;
  cfg.scheme = Solver::implicit_midpoint;
  cfg.dt = 0.1;
  cfg.t_end = 1.0;
  REQUIRE_THROWS_AS(simulate(s, Vec::Ones(1), cfg), InvariantError);
}

TEST_CASE("configuration errors") {
  SimSystem s = scalar_decay(1.0);
  SolverConfig cfg;
  REQUIRE_THROWS_AS(simulate(s, Vec::Ones(2), cfg), StructuralError);
  cfg.dt = -1.0;
  REQUIRE_THROWS_AS(simulate(s, Vec::Ones(1), cfg), StructuralError);
}
