#pragma once

#include <unsupported/Eigen/MatrixFunctions>

#include "phsobs/discretize.hpp"

namespace phsobs {

enum class Solver { implicit_midpoint, matrix_exponential };

inline std::string to_string(Solver s) {
  return s == Solver::implicit_midpoint ? "implicit_midpoint"
                                        : "matrix_exponential";
}

inline Solver solver_from_string(const std::string& s) {
  if (s == "implicit_midpoint" || s == "midpoint")
    return Solver::implicit_midpoint;
  if (s == "matrix_exponential" || s == "expm")
    return Solver::matrix_exponential;
  throw StructuralError("unknown solver: " + s);
}

struct SolverConfig {
  Solver scheme = Solver::implicit_midpoint;
  double dt = 1e-3;
  double t_end = 8.0;
  int stride = 10;          // snapshot decimation
  double solve_rcond = 1e-13;  // reciprocal-condition floor for the midpoint solve
};

struct Series {
  std::string name;
  std::vector<double> values;
};

struct NamedSignal {
  std::string name;
  Mat values;  // rows x sample count
};

struct TrajectoryRecord {
  std::vector<double> t;             // every step, t[0] = 0
  std::vector<Series> energies;      // one value per step
  std::vector<NamedSignal> outputs;  // rows per step
  std::vector<double> residual;      // per-step power-balance defect, [0] = 0
  std::vector<double> snap_t;
  Mat snapshots;  // state dim x len(snap_t), decimated

  const Series* energy(const std::string& name) const {
    for (const auto& s : energies)
      if (s.name == name) return &s;
    return nullptr;
  }
  const NamedSignal* output(const std::string& name) const {
    for (const auto& s : outputs)
      if (s.name == name) return &s;
    return nullptr;
  }
  std::size_t steps() const { return t.size(); }
};

// One-step propagator for the autonomous system z' = A z.
//   implicit_midpoint:   (I - dt/2 A) z+ = (I + dt/2 A) z
//   matrix_exponential:  z+ = exp(dt A) z
inline Mat step_matrix(const Mat& A, Solver scheme, double dt,
                       double rcond_floor = 1e-13) {
  const int n = static_cast<int>(A.rows());
  if (scheme == Solver::matrix_exponential) return Mat((dt * A).exp());
  Mat Mm = Mat::Identity(n, n) - 0.5 * dt * A;
  Eigen::PartialPivLU<Mat> lu(Mm);
  if (lu.rcond() < rcond_floor)
    throw InvariantError("midpoint solve is ill-conditioned; reduce dt");
  return lu.solve(Mat::Identity(n, n) + 0.5 * dt * A);
}

// Defect of the half-step composition property exp(dt A) =
// exp(dt/2 A) exp(dt/2 A); zero to round-off for the exact propagator.
inline double composition_residual(const Mat& A, double dt) {
  Mat full = step_matrix(A, Solver::matrix_exponential, dt);
  Mat half = step_matrix(A, Solver::matrix_exponential, 0.5 * dt);
  return (half * half - full).norm();
}

inline TrajectoryRecord simulate(const SimSystem& sys, const Vec& z0,
                                 const SolverConfig& cfg) {
  if (z0.size() != sys.A.rows())
    throw StructuralError("initial state length does not match the system");
  if (!(cfg.dt > 0.0) || !(cfg.t_end > 0.0))
    throw StructuralError("dt and t_end must be positive");
  if (cfg.stride < 1) throw StructuralError("stride must be >= 1");
  const long nsteps = std::lround(cfg.t_end / cfg.dt);
  if (nsteps < 1) throw StructuralError("t_end shorter than one step");

  Mat Phi = step_matrix(sys.A, cfg.scheme, cfg.dt, cfg.solve_rcond);

  TrajectoryRecord rec;
  rec.t.resize(nsteps + 1);
  rec.residual.assign(nsteps + 1, 0.0);
  for (const auto& e : sys.energies)
    rec.energies.push_back({e.name, std::vector<double>(nsteps + 1, 0.0)});
  for (const auto& g : sys.outputs)
    rec.outputs.push_back({g.name, Mat::Zero(g.C.rows(), nsteps + 1)});

  const long nsnap = nsteps / cfg.stride + 1 + (nsteps % cfg.stride ? 1 : 0);
  rec.snapshots.resize(z0.size(), nsnap);
  rec.snap_t.reserve(nsnap);

  Vec z = z0;
  double balance_prev = 0.5 * z.dot(sys.M_bal * z);
  double power_prev = -z.dot(sys.S_bal * z);
  long snap_count = 0;
  for (long k = 0; k <= nsteps; ++k) {
    if (k > 0) {
      z = Phi * z;
      if (!z.allFinite())
        throw SimulationError("state became non-finite", k);
      double balance = 0.5 * z.dot(sys.M_bal * z);
      double power = -z.dot(sys.S_bal * z);
      rec.residual[k] =
          (balance - balance_prev) - 0.5 * cfg.dt * (power + power_prev);
      balance_prev = balance;
      power_prev = power;
    }
    rec.t[k] = k * cfg.dt;
    for (std::size_t i = 0; i < sys.energies.size(); ++i)
      rec.energies[i].values[k] = 0.5 * z.dot(sys.energies[i].M * z);
    for (std::size_t i = 0; i < sys.outputs.size(); ++i)
      rec.outputs[i].values.col(k) = sys.outputs[i].C * z;
    if (k % cfg.stride == 0 || k == nsteps) {
      rec.snapshots.col(snap_count++) = z;
      rec.snap_t.push_back(k * cfg.dt);
    }
  }
  rec.snapshots.conservativeResize(Eigen::NoChange, snap_count);
  return rec;
}

}  // namespace phsobs
