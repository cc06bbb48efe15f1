#pragma once

#include <fstream>

#include <json.hpp>

#include "phsobs/analysis.hpp"

namespace phsobs {

using Json = nlohmann::json;

struct DesignEntry {
  std::string name;
  Mat L;
};

// A fully resolved run description. Scenario files hold either a preset name
// or an inline system/io block (constant diagonal energy density only), plus
// grid, solver, initial-state and gain-design settings.
struct Scenario {
  int schema_version = 1;
  std::string label;
  std::string preset_name;  // empty for inline systems
  ModelSpec model;
  GridConfig grid;
  SolverConfig solver;
  std::string initial_kind = "release";  // release | zero | modes | explicit
  int mode_count = 6;
  Vec x0, x0_hat;  // used by kind == "explicit"
  std::vector<DesignEntry> designs;       // never empty after parsing
  std::vector<PropId> propositions;       // empty = all applicable
  // kept for round-tripping inline systems
  Json inline_system, inline_io;
};

namespace detail {

inline Mat mat_from_json(const Json& j, const char* what) {
  if (!j.is_array() || j.empty())
    throw StructuralError(std::string(what) + " must be a non-empty array");
  if (j[0].is_number()) {  // diagonal shorthand
    Mat M = Mat::Zero(j.size(), j.size());
    for (std::size_t i = 0; i < j.size(); ++i) M(i, i) = j[i].get<double>();
    return M;
  }
  const std::size_t rows = j.size(), cols = j[0].size();
  Mat M(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols)
      throw StructuralError(std::string(what) + " rows have unequal length");
    for (std::size_t c = 0; c < cols; ++c) M(r, c) = j[r][c].get<double>();
  }
  return M;
}

inline Json mat_to_json(const Mat& M) {
  Json rows = Json::array();
  for (int r = 0; r < M.rows(); ++r) {
    Json row = Json::array();
    for (int c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    rows.push_back(row);
  }
  return rows;
}

inline Vec vec_from_json(const Json& j) {
  Vec v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v(i) = j[i].get<double>();
  return v;
}

inline Json vec_to_json(const Vec& v) {
  Json a = Json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline ModelSpec inline_model_from_json(const Json& sys, const Json& io) {
  SystemSpec s;
  s.order = sys.at("order").get<int>();
  s.state_dim = sys.at("state_dim").get<int>();
  if (sys.contains("interval")) {
    s.a = sys["interval"][0].get<double>();
    s.b = sys["interval"][1].get<double>();
  }
  const Json& P = sys.at("P");
  if (!P.is_array())
    throw StructuralError("system.P must be an array of matrices");
  for (const auto& pk : P) s.P.push_back(mat_from_json(pk, "system.P entry"));
  Vec hd = vec_from_json(sys.at("H_diag"));
  if (hd.size() != s.state_dim)
    throw StructuralError("H_diag length must equal state_dim");
  Mat Hc = hd.asDiagonal();
  s.H = [Hc](double) { return Hc; };
  if (sys.contains("coercivity")) {
    s.coercivity_m = sys["coercivity"][0].get<double>();
    s.coercivity_M = sys["coercivity"][1].get<double>();
  } else {
    s.coercivity_m = 0.5 * hd.minCoeff();
    s.coercivity_M = 2.0 * hd.maxCoeff();
  }

  ModelSpec m;
  m.system = s;
  std::vector<int> usel = io.at("u_selection").get<std::vector<int>>();
  std::vector<int> ysel = io.at("y_selection").get<std::vector<int>>();
  m.io = derive_io_from_trace_selection(s, usel, ysel);
  m.io.C_m = mat_from_json(io.at("C_m"), "io.C_m");
  m.io.L = mat_from_json(io.at("L"), "io.L");
  return m;
}

}  // namespace detail

inline Scenario scenario_from_json(const Json& j) {
  Scenario sc;
  sc.schema_version = j.value("schema_version", 0);
  if (sc.schema_version != 1)
    throw StructuralError("unsupported scenario schema_version");
  sc.label = j.value("label", std::string());

  const bool has_preset = j.contains("preset");
  const bool has_inline = j.contains("system");
  if (has_preset == has_inline)
    throw StructuralError("scenario needs exactly one of preset/system");
  if (has_preset) {
    sc.preset_name = j["preset"].get<std::string>();
    Preset p = preset(sc.preset_name);
    sc.model = p.model;
    sc.grid.n_d = p.default_nd;
  } else {
    if (!j.contains("io"))
      throw StructuralError("inline system needs an io block");
    sc.inline_system = j["system"];
    sc.inline_io = j["io"];
    sc.model = detail::inline_model_from_json(sc.inline_system, sc.inline_io);
  }
  sc.grid.scheme = default_scheme(sc.model.system);

  if (j.contains("grid")) {
    const Json& g = j["grid"];
    sc.grid.n_d = g.value("n_d", sc.grid.n_d);
    if (g.contains("scheme"))
      sc.grid.scheme = scheme_from_string(g["scheme"].get<std::string>());
  }
  if (j.contains("solver")) {
    const Json& s = j["solver"];
    if (s.contains("scheme"))
      sc.solver.scheme = solver_from_string(s["scheme"].get<std::string>());
    sc.solver.dt = s.value("dt", sc.solver.dt);
    sc.solver.t_end = s.value("t_end", sc.solver.t_end);
    sc.solver.stride = s.value("stride", sc.solver.stride);
  }
  if (j.contains("initial")) {
    const Json& ini = j["initial"];
    sc.initial_kind = ini.value("kind", std::string("release"));
    sc.mode_count = ini.value("count", 6);
    if (sc.initial_kind == "explicit") {
      sc.x0 = detail::vec_from_json(ini.at("x0"));
      if (ini.contains("x0_hat"))
        sc.x0_hat = detail::vec_from_json(ini["x0_hat"]);
    } else if (sc.initial_kind != "release" && sc.initial_kind != "zero" &&
               sc.initial_kind != "modes") {
      throw StructuralError("unknown initial kind: " + sc.initial_kind);
    }
  }
  if (j.contains("designs")) {
    for (const auto& dj : j["designs"]) {
      DesignEntry d;
      d.name = dj.at("name").get<std::string>();
      d.L = detail::mat_from_json(dj.at("L"), "design L");
      if (d.L.rows() != sc.model.io.C_m.rows())
        throw StructuralError("design L size does not match C_m");
      sc.designs.push_back(d);
    }
  }
  if (sc.designs.empty())
    sc.designs.push_back({"default", sc.model.io.L});
  if (j.contains("propositions"))
    for (const auto& pj : j["propositions"])
      sc.propositions.push_back(prop_from_string(pj.get<std::string>()));
  return sc;
}

inline Json scenario_to_json(const Scenario& sc) {
  Json j;
  j["schema_version"] = sc.schema_version;
  if (!sc.label.empty()) j["label"] = sc.label;
  if (!sc.preset_name.empty()) {
    j["preset"] = sc.preset_name;
  } else {
    j["system"] = sc.inline_system;
    j["io"] = sc.inline_io;
  }
  j["grid"] = {{"n_d", sc.grid.n_d}, {"scheme", to_string(sc.grid.scheme)}};
  j["solver"] = {{"scheme", to_string(sc.solver.scheme)},
                 {"dt", sc.solver.dt},
                 {"t_end", sc.solver.t_end},
                 {"stride", sc.solver.stride}};
  Json ini;
  ini["kind"] = sc.initial_kind;
  if (sc.initial_kind == "modes") ini["count"] = sc.mode_count;
  if (sc.initial_kind == "explicit") {
    ini["x0"] = detail::vec_to_json(sc.x0);
    if (sc.x0_hat.size()) ini["x0_hat"] = detail::vec_to_json(sc.x0_hat);
  }
  j["initial"] = ini;
  Json designs = Json::array();
  for (const auto& d : sc.designs)
    designs.push_back({{"name", d.name}, {"L", detail::mat_to_json(d.L)}});
  j["designs"] = designs;
  if (!sc.propositions.empty()) {
    Json props = Json::array();
    for (PropId id : sc.propositions) props.push_back(to_string(id));
    j["propositions"] = props;
  }
  return j;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw StructuralError("cannot open scenario file: " + path);
  Json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw StructuralError("scenario parse error in " + path + ": " + e.what());
  }
  return scenario_from_json(j);
}

}  // namespace phsobs
