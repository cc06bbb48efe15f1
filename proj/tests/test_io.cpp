#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "phsobs/runner.hpp"

using namespace phsobs;
namespace fsys = std::filesystem;

namespace {

std::string slurp(const fsys::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fsys::path fresh_dir(const std::string& tag) {
  fsys::path p = fsys::temp_directory_path() / ("phsobs_io_" + tag);
  fsys::remove_all(p);
  fsys::create_directories(p);
  return p;
}

Json wave_inline_json() {
  return Json::parse(R"({
    "schema_version": 1,
    "label": "inline wave",
    "system": {
      "order": 1, "state_dim": 2, "interval": [0.0, 1.0],
      "P": [[[0.0, 0.0], [0.0, 0.0]], [[0.0, 1.0], [1.0, 0.0]]],
      "H_diag": [1.0, 1.0]
    },
    "io": {
      "u_selection": [1, 4], "y_selection": [-2, 3],
      "C_m": [[1.0, 0.0], [0.0, 1.0]], "L": [1.0, 1.0]
    },
    "grid": {"n_d": 24},
    "solver": {"scheme": "matrix_exponential", "dt": 0.002, "t_end": 0.5},
    "initial": {"kind": "zero"},
    "designs": [{"name": "unit", "L": [1.0, 1.0]}]
  })");
}

}  // namespace

TEST_CASE("preset scenarios round-trip through json") {
  Json j = Json::parse(R"({
    "schema_version": 1,
    "label": "sweep",
    "preset": "beam-2m",
    "grid": {"n_d": 60},
    "solver": {"scheme": "expm", "dt": 0.005, "t_end": 2.5, "stride": 4},
    "initial": {"kind": "modes", "count": 3},
    "designs": [
      {"name": "d1", "L": [0.03, 0.3]},
      {"name": "d2", "L": [[0.1, 0.0], [0.0, 1.0]]}
    ],
    "propositions": ["P1_asym", "P4_exp_partitioned"]
  })");
  Scenario sc = scenario_from_json(j);
  REQUIRE(sc.preset_name == "beam-2m");
  REQUIRE(sc.grid.n_d == 60);
  REQUIRE(sc.solver.scheme == Solver::matrix_exponential);
  REQUIRE(sc.solver.stride == 4);
  REQUIRE(sc.initial_kind == "modes");
  REQUIRE(sc.mode_count == 3);
  REQUIRE(sc.designs.size() == 2);
  REQUIRE(sc.designs[0].L(1, 1) == 0.3);
  REQUIRE(sc.propositions.size() == 2);

  Scenario rt = scenario_from_json(scenario_to_json(sc));
  REQUIRE(rt.preset_name == sc.preset_name);
  REQUIRE(rt.grid.n_d == sc.grid.n_d);
  REQUIRE(rt.grid.scheme == sc.grid.scheme);
  REQUIRE(rt.solver.scheme == sc.solver.scheme);
  REQUIRE(rt.solver.dt == sc.solver.dt);
  REQUIRE(rt.solver.t_end == sc.solver.t_end);
  REQUIRE(rt.initial_kind == sc.initial_kind);
  REQUIRE(rt.mode_count == sc.mode_count);
  REQUIRE(rt.designs.size() == sc.designs.size());
  for (std::size_t i = 0; i < sc.designs.size(); ++i) {
    REQUIRE(rt.designs[i].name == sc.designs[i].name);
    REQUIRE((rt.designs[i].L - sc.designs[i].L).norm() == 0.0);
  }
  REQUIRE(rt.propositions == sc.propositions);
  REQUIRE((rt.model.io.C_m - sc.model.io.C_m).norm() == 0.0);
}

TEST_CASE("inline scenarios round-trip and validate") {
  Scenario sc = scenario_from_json(wave_inline_json());
  REQUIRE(sc.preset_name.empty());
  REQUIRE(sc.model.system.order == 1);
  REQUIRE(sc.grid.scheme == Scheme::staggered_n1);
  REQUIRE(validate_system(sc.model.system).all_passed());

  Scenario rt = scenario_from_json(scenario_to_json(sc));
  REQUIRE(rt.model.system.state_dim == 2);
  REQUIRE((rt.model.io.W_B - sc.model.io.W_B).norm() < 1e-15);
  REQUIRE((rt.model.io.L - sc.model.io.L).norm() == 0.0);
  REQUIRE(rt.initial_kind == "zero");
}

TEST_CASE("malformed scenarios are refused") {
  SECTION("preset and inline together") {
    Json j = wave_inline_json();
    j["preset"] = "wave";
    REQUIRE_THROWS_AS(scenario_from_json(j), StructuralError);
  }
  SECTION("neither preset nor inline") {
    Json j = Json::parse(R"({"schema_version": 1})");
    REQUIRE_THROWS_AS(scenario_from_json(j), StructuralError);
  }
  SECTION("wrong schema version") {
    Json j = Json::parse(R"({"schema_version": 2, "preset": "wave"})");
    REQUIRE_THROWS_AS(scenario_from_json(j), StructuralError);
  }
  SECTION("design L shape mismatch") {
    Json j = Json::parse(R"({
      "schema_version": 1, "preset": "beam-2m",
      "designs": [{"name": "bad", "L": [1.0, 1.0, 1.0]}]
    })");
    REQUIRE_THROWS_AS(scenario_from_json(j), StructuralError);
  }
  SECTION("unknown initial kind") {
    Json j = Json::parse(R"({
      "schema_version": 1, "preset": "wave",
      "initial": {"kind": "sine"}
    })");
    REQUIRE_THROWS_AS(scenario_from_json(j), StructuralError);
  }
  SECTION("missing file") {
    REQUIRE_THROWS_AS(load_scenario("/nonexistent/path.json"),
                      StructuralError);
  }
}

TEST_CASE("doubles survive a text round trip unchanged") {
  std::vector<double> values = {0.0,    1.0 / 3.0,      0.1,
                                -2.5e-17, 123456.7890123, 0.12454081632653059,
                                1e300,  -1.0 + 1e-15};
  for (double v : values) {
    std::string s = fmt_double(v);
    REQUIRE(std::strtod(s.c_str(), nullptr) == v);
  }
}

TEST_CASE("csv writer enforces the header width") {
  CsvWriter w({"a", "b"});
  w.row({1.0, 2.0});
  REQUIRE_THROWS_AS(w.row({1.0}), StructuralError);
  REQUIRE(w.str().rfind("a,b\n", 0) == 0);
}

TEST_CASE("atomic writes leave no temporaries behind") {
  fsys::path dir = fresh_dir("atomic");
  fsys::path target = dir / "nested" / "out.txt";
  atomic_write(target, "payload\n");
  REQUIRE(slurp(target) == "payload\n");
  int entries = 0;
  for (const auto& e : fsys::directory_iterator(target.parent_path())) {
    (void)e;
    ++entries;
  }
  REQUIRE(entries == 1);
  // overwrite through the same path keeps a single file
  atomic_write(target, "second\n");
  REQUIRE(slurp(target) == "second\n");
}

TEST_CASE("matrix-market export reparses exactly") {
  Mat M(2, 3);
  M << 1.0, 1.0 / 3.0, -2.0e-7, 4.5, 0.0, 9.999999999999999;
  std::string text = matrix_market(M, "test");
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  REQUIRE(line == "%%MatrixMarket matrix array real general");
  std::getline(in, line);
  REQUIRE(line == "% test");
  int rows, cols;
  in >> rows >> cols;
  REQUIRE(rows == 2);
  REQUIRE(cols == 3);
  Mat R(rows, cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) in >> R(r, c);
  REQUIRE((R - M).norm() == 0.0);
}

TEST_CASE("line plots are well-formed svg") {
  PlotSeries a{"one", {0.0, 1.0, 2.0}, {1.0, 0.5, 0.25}};
  PlotSeries b{"two", {0.0, 1.0, 2.0}, {0.0, 0.0, 0.0}};
  std::string svg = render_line_plot("title", "t", "E", {a, b}, true);
  REQUIRE(svg.rfind("<svg", 0) == 0);
  REQUIRE(svg.find("polyline") != std::string::npos);
  REQUIRE(svg.find("</svg>") != std::string::npos);
  REQUIRE(svg.find("nan") == std::string::npos);
  REQUIRE(svg.find("inf") == std::string::npos);
}

TEST_CASE("simulate run writes the documented artifacts") {
  Scenario sc = scenario_from_json(Json::parse(R"({
    "schema_version": 1, "preset": "wave",
    "grid": {"n_d": 20},
    "solver": {"scheme": "expm", "dt": 0.001, "t_end": 0.3},
    "initial": {"kind": "release"}
  })"));
  RunOptions opt;
  opt.out_dir = fresh_dir("simulate");
  std::ostringstream log;
  Json rep = run_simulate(sc, opt, log);

  REQUIRE(rep["steps"] == 300);
  REQUIRE(rep["preset"] == "wave");
  REQUIRE(rep["energies"]["Htilde"]["final"].get<double>() <
          rep["energies"]["Htilde"]["initial"].get<double>());
  REQUIRE(rep["residual_max"].get<double>() < 1e-6);

  std::string traces = slurp(opt.out_dir / "traces.csv");
  std::string header = traces.substr(0, traces.find('\n'));
  REQUIRE(header == "t,H,Hhat,Htilde,ym_1,ym_2,ymhat_1,ymhat_2,residual");
  long rows = std::count(traces.begin(), traces.end(), '\n');
  REQUIRE(rows == 302);  // header + one row per recorded step

  // golden first data row: zero-time state reproduces the assembled energy
  DiscreteSystem d = discretize(sc.model, sc.grid);
  SimSystem sys = couple_plant_observer(d);
  Vec z0 = Vec::Zero(sys.dim());
  z0.head(2 * d.m) = release_state(d);
  double H0 = 0.5 * z0.dot(sys.energies[0].M * z0);
  std::istringstream ts(traces);
  std::string line;
  std::getline(ts, line);
  std::getline(ts, line);
  std::string expect = "0," + fmt_double(H0) + ",0,";
  REQUIRE(line.rfind(expect, 0) == 0);
  REQUIRE(line.substr(line.size() - 2) == ",0");  // residual[0]

  REQUIRE(fsys::exists(opt.out_dir / "field.csv"));
  REQUIRE(fsys::exists(opt.out_dir / "report.json"));
  REQUIRE_FALSE(fsys::exists(opt.out_dir / "deflection.csv"));
  Json disk = Json::parse(slurp(opt.out_dir / "report.json"));
  REQUIRE(disk["steps"] == 300);
  REQUIRE(log.str().find("simulate:") != std::string::npos);
}

TEST_CASE("bending runs also reconstruct the deflection") {
  Scenario sc = scenario_from_json(Json::parse(R"({
    "schema_version": 1, "preset": "beam-2m",
    "grid": {"n_d": 40},
    "solver": {"scheme": "expm", "dt": 0.001, "t_end": 0.2},
    "initial": {"kind": "release"}
  })"));
  RunOptions opt;
  opt.out_dir = fresh_dir("deflect");
  std::ostringstream log;
  Json rep = run_simulate(sc, opt, log);
  REQUIRE(fsys::exists(opt.out_dir / "deflection.csv"));
  REQUIRE(rep["deflection"]["rel_discrepancy"].get<double>() < 0.05);
  std::string defl = slurp(opt.out_dir / "deflection.csv");
  REQUIRE(defl.rfind("t,tip_spatial,tip_temporal,row_discrepancy\n", 0) == 0);
}

TEST_CASE("empty time span is refused before any file is written") {
  Scenario sc = scenario_from_json(Json::parse(R"({
    "schema_version": 1, "preset": "wave",
    "grid": {"n_d": 20},
    "solver": {"dt": 0.001, "t_end": 0.0}
  })"));
  RunOptions opt;
  opt.out_dir = fresh_dir("empty_span");
  std::ostringstream log;
  REQUIRE_THROWS_AS(run_simulate(sc, opt, log), StructuralError);
  REQUIRE(fsys::is_empty(opt.out_dir));
}

TEST_CASE("verify run reports all four conditions") {
  Scenario sc = scenario_from_json(Json::parse(R"({
    "schema_version": 1, "preset": "wave",
    "grid": {"n_d": 20},
    "solver": {"dt": 0.001, "t_end": 0.5}
  })"));
  RunOptions opt;
  opt.out_dir = fresh_dir("verify");
  std::ostringstream log;
  Json rep = run_verify(sc, opt, log);
  REQUIRE(rep["propositions"].size() == 4);

  auto find = [&](const std::string& id) -> Json {
    for (const auto& p : rep["propositions"])
      if (p["id"] == id) return p;
    FAIL("missing proposition " + id);
    return {};
  };
  Json p1 = find("P1_asym");
  REQUIRE(p1["applicable"].get<bool>());
  REQUIRE(p1["feasible"].get<bool>());
  Json p2 = find("P2_exp_N1");
  REQUIRE(p2["applicable"].get<bool>());
  REQUIRE(p2["feasible"].get<bool>());
  REQUIRE(p2["kappa_max"].get<double>() == Catch::Approx(0.5).margin(1e-9));
  REQUIRE(p2["runtime"]["kappa_empirical"].get<double>() > 0.45);
  Json p3 = find("P3_exp_N2");
  REQUIRE_FALSE(p3["applicable"].get<bool>());
  REQUIRE(find("P4_exp_partitioned")["applicable"].get<bool>() == false);
  REQUIRE(log.str().find("P2_exp_N1") != std::string::npos);
  REQUIRE(fsys::exists(opt.out_dir / "report.json"));
}

TEST_CASE("verify run seeds witnesses for infeasible conditions") {
  Scenario sc = scenario_from_json(Json::parse(R"({
    "schema_version": 1, "preset": "beam-2m",
    "grid": {"n_d": 60},
    "solver": {"dt": 0.001, "t_end": 0.5},
    "propositions": ["P3_exp_N2"]
  })"));
  RunOptions opt;
  opt.out_dir = fresh_dir("verify_witness");
  std::ostringstream log;
  Json rep = run_verify(sc, opt, log);
  REQUIRE(rep["propositions"].size() == 1);
  Json p3 = rep["propositions"][0];
  REQUIRE_FALSE(p3["feasible"].get<bool>());
  REQUIRE(p3["runtime"]["seed"] == "witness");
  REQUIRE(p3["runtime"]["kappa_empirical"].get<double>() < 1e-3);
}

TEST_CASE("sweep run compares designs and draws overlays") {
  Scenario sc = scenario_from_json(Json::parse(R"({
    "schema_version": 1, "preset": "beam-2m",
    "grid": {"n_d": 40},
    "solver": {"scheme": "expm", "dt": 0.002, "t_end": 4.0},
    "designs": [
      {"name": "soft", "L": [0.03, 0.3]},
      {"name": "unit", "L": [0.1, 1.0]}
    ]
  })"));
  RunOptions opt;
  opt.out_dir = fresh_dir("sweep");
  opt.jobs = 2;
  std::ostringstream log;
  Json rep = run_sweep(sc, opt, log);
  REQUIRE(rep["designs"].size() == 2);
  for (const auto& dj : rep["designs"]) {
    std::string label = dj["regime"].get<std::string>();
    bool known = label == "weakly_damped" || label == "critically_damped" ||
                 label == "overdamped" || label == "exact";
    REQUIRE(known);
    REQUIRE(dj["t_conv"].get<double>() > 0.0);
  }
  double b = rep["best_t_conv"].get<double>();
  double t0 = rep["designs"][0]["t_conv"].get<double>();
  double t1 = rep["designs"][1]["t_conv"].get<double>();
  REQUIRE(b == std::min(t0, t1));
  REQUIRE(fsys::exists(opt.out_dir / "sweep.csv"));
  std::string svg = slurp(opt.out_dir / "htilde_overlay.svg");
  REQUIRE(svg.rfind("<svg", 0) == 0);
  REQUIRE(svg.find("soft") != std::string::npos);
  REQUIRE(fsys::exists(opt.out_dir / "tip_error.svg"));
}

TEST_CASE("scaling the gain trades convergence speed for damping") {
  Json j = Json::parse(R"({
    "schema_version": 1, "preset": "beam-2m",
    "grid": {"n_d": 60},
    "solver": {"scheme": "expm", "dt": 0.001, "t_end": 8.0},
    "initial": {"kind": "release"},
    "designs": []
  })");
  const int points = 20;
  for (int i = 0; i < points; ++i) {
    double c = std::pow(10.0, -1.0 + 2.0 * i / (points - 1.0));
    j["designs"].push_back(
        {{"name", "c" + std::to_string(i)}, {"L", {0.1 * c, 1.0 * c}}});
  }
  Scenario sc = scenario_from_json(j);
  RunOptions opt;
  opt.out_dir = fresh_dir("gain_scan");
  opt.jobs = 3;
  std::ostringstream log;
  Json rep = run_sweep(sc, opt, log);

  std::vector<double> tc;
  for (const auto& dj : rep["designs"])
    tc.push_back(dj["t_conv"].is_number()
                     ? dj["t_conv"].get<double>()
                     : std::numeric_limits<double>::infinity());
  REQUIRE(tc.size() == static_cast<std::size_t>(points));
  auto it = std::min_element(tc.begin(), tc.end());
  std::size_t best = static_cast<std::size_t>(it - tc.begin());
  // the 1% convergence time dips at an interior gain: too soft never
  // catches up, too stiff over-damps the correction
  REQUIRE(std::isfinite(*it));
  REQUIRE(best > 0);
  REQUIRE(best + 1 < tc.size());
  REQUIRE(tc.front() > 1.5 * *it);
  REQUIRE(tc.back() > 1.5 * *it);
}

TEST_CASE("export run writes reparsable operators") {
  Scenario sc = scenario_from_json(Json::parse(R"({
    "schema_version": 1, "preset": "wave", "grid": {"n_d": 20}
  })"));
  RunOptions opt;
  opt.out_dir = fresh_dir("export");
  std::ostringstream log;
  Json rep = run_export(sc, opt, log);
  REQUIRE(rep["state_dim"] == 20);
  for (const std::string name :
       {"A.mtx", "B.mtx", "C_y.mtx", "D_y.mtx", "M_E.mtx", "S_diss.mtx"}) {
    REQUIRE(fsys::exists(opt.out_dir / name));
  }
  std::istringstream in(slurp(opt.out_dir / "A.mtx"));
  std::string banner, comment;
  std::getline(in, banner);
  REQUIRE(banner == "%%MatrixMarket matrix array real general");
  std::getline(in, comment);
  REQUIRE(comment.rfind("% ", 0) == 0);
  int rows, cols;
  in >> rows >> cols;
  REQUIRE(rows == 20);
  REQUIRE(cols == 20);
  DiscreteSystem d = discretize(sc.model, sc.grid);
  Mat A(rows, cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) in >> A(r, c);
  REQUIRE((A - d.A).norm() == 0.0);
}

TEST_CASE("command-line overrides take precedence over the scenario") {
  Scenario sc = scenario_from_json(Json::parse(R"({
    "schema_version": 1, "preset": "wave",
    "grid": {"n_d": 60},
    "solver": {"scheme": "midpoint", "dt": 0.001, "t_end": 5.0}
  })"));
  RunOptions opt;
  opt.solver = Solver::matrix_exponential;
  opt.n_d = 20;
  opt.t_end = 0.25;
  Scenario eff = apply_overrides(sc, opt);
  REQUIRE(eff.grid.n_d == 20);
  REQUIRE(eff.solver.scheme == Solver::matrix_exponential);
  REQUIRE(eff.solver.t_end == 0.25);

  opt.out_dir = fresh_dir("override");
  std::ostringstream log;
  Json rep = run_simulate(sc, opt, log);
  REQUIRE(rep["steps"] == 250);
  REQUIRE(rep["grid"]["n_d"] == 20);
  REQUIRE(rep["solver"]["scheme"] == "matrix_exponential");
}

TEST_CASE("tolerance override parses like the environment hook") {
  REQUIRE(parse_tolerance_env(nullptr, 1e-9) == 1e-9);
  REQUIRE(parse_tolerance_env("2.5e-7", 1e-9) == 2.5e-7);
  REQUIRE(parse_tolerance_env("garbage", 1e-9) == 1e-9);
  REQUIRE(parse_tolerance_env("-1.0", 1e-9) == 1e-9);
  REQUIRE(parse_tolerance_env("0", 1e-9) == 1e-9);
}

TEST_CASE("initial state resolution covers every kind") {
  Scenario sc = scenario_from_json(Json::parse(R"({
    "schema_version": 1, "preset": "wave", "grid": {"n_d": 20}
  })"));
  DiscreteSystem d = discretize(sc.model, sc.grid);
  SimSystem coupled = couple_plant_observer(d);

  sc.initial_kind = "zero";
  REQUIRE(initial_plant_state(sc, d).norm() == 0.0);
  sc.initial_kind = "release";
  REQUIRE(initial_plant_state(sc, d).norm() > 0.0);
  sc.initial_kind = "modes";
  sc.mode_count = 4;
  REQUIRE(initial_plant_state(sc, d).norm() == Catch::Approx(1.0));
  sc.initial_kind = "explicit";
  sc.x0 = Vec::Ones(20);
  sc.x0_hat = 2.0 * Vec::Ones(20);
  Vec z0 = initial_state_for(sc, d, coupled);
  REQUIRE(z0.size() == 40);
  REQUIRE(z0.head(20).isApprox(Vec::Ones(20)));
  REQUIRE(z0.tail(20).isApprox(2.0 * Vec::Ones(20)));
  sc.x0 = Vec::Ones(7);
  REQUIRE_THROWS_AS(initial_plant_state(sc, d), StructuralError);
}
