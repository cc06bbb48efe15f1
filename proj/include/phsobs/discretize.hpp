#pragma once

#include <string>
#include <vector>

#include "phsobs/models.hpp"

namespace phsobs {

enum class Scheme {
  staggered_n1,             // first-order coupling, two staggered scalar fields
  staggered_partitioned_n2  // second-order coupling with partitioned structure
};

inline std::string to_string(Scheme s) {
  return s == Scheme::staggered_n1 ? "staggered_n1" : "staggered_partitioned_n2";
}

inline Scheme scheme_from_string(const std::string& s) {
  if (s == "staggered_n1") return Scheme::staggered_n1;
  if (s == "staggered_partitioned_n2") return Scheme::staggered_partitioned_n2;
  throw StructuralError("unknown scheme: " + s);
}

inline Scheme default_scheme(const SystemSpec& s) {
  return s.order == 1 ? Scheme::staggered_n1 : Scheme::staggered_partitioned_n2;
}

struct GridConfig {
  int n_d = 140;  // total discrete state dimension (both field groups)
  Scheme scheme = Scheme::staggered_partitioned_n2;
};

// Finite-dimensional realization  z' = A z + B u,  y = C_y z + D_y u  that
// reproduces the boundary-port energy identities exactly:
//   A^T M_energy + M_energy A + 2 S_diss = 0,   M_energy B = C_y^T,   D_y + D_y^T = 0,
// so 0.5 z' M_energy z obeys the same balance as the field energy.
struct DiscreteSystem {
  SystemSpec spec;
  IoConfig io;
  GridConfig grid;
  int m = 0;     // samples per field group
  double h = 0;  // cell width
  Mat A, B;
  Mat C_y, D_y;
  Mat M_energy;     // diagonal, positive
  Mat S_diss;  // internal dissipation: power = z^T S_diss z
  Mat E1, E2;  // effort rows of the two field groups, each m x n_d
  // Boundary trace reconstruction: phi_a = Ta_C z + Ta_D u, same at b.
  Mat Ta_C, Ta_D, Tb_C, Tb_D;
  std::vector<double> pos1, pos2;  // sample positions per field group

  double energy(const Vec& z) const { return 0.5 * z.dot(M_energy * z); }
};

struct BalanceResiduals {
  double power = 0.0;        // |A^T M + M A + 2 S|
  double collocation = 0.0;  // |M B - C_y^T|
  double passivity = 0.0;    // |D_y + D_y^T|
  double max() const {
    return std::max(power, std::max(collocation, passivity));
  }
};

inline BalanceResiduals balance_residuals(const DiscreteSystem& d) {
  BalanceResiduals r;
  r.power = (d.A.transpose() * d.M_energy + d.M_energy * d.A + 2.0 * d.S_diss).norm();
  r.collocation = (d.M_energy * d.B - d.C_y.transpose()).norm();
  r.passivity = (d.D_y + d.D_y.transpose()).norm();
  return r;
}

namespace detail {

inline void check_grid(const GridConfig& g) {
  if (g.n_d % 2 != 0) throw StructuralError("n_d must be even");
  if (g.n_d < 20) throw StructuralError("n_d must give at least 10 samples per field");
}

inline void check_diagonal_H(const SystemSpec& s, double tol) {
  for (int i = 0; i < 9; ++i) {
    double z = s.a + (s.b - s.a) * i / 8.0;
    Mat Hz = s.H(z);
    Mat off = Hz - Mat(Hz.diagonal().asDiagonal());
    if (off.norm() > tol * std::max(1.0, Hz.norm()))
      throw StructuralError("scheme requires a diagonal energy density");
  }
}

inline void check_selection(const IoConfig& io, const std::vector<int>& u_ref,
                            const std::vector<int>& y_ref) {
  if (io.u_selection != u_ref || io.y_selection != y_ref)
    throw StructuralError(
        "scheme supports only the collocated clamped/free trace selection");
}

inline std::pair<double, double> diagonal_damping(const SystemSpec& s, double tol) {
  const Mat& P0 = s.P[0];
  Mat off = P0 - Mat(P0.diagonal().asDiagonal());
  if (off.norm() > tol)
    throw StructuralError("scheme requires diagonal P0");
  double d1 = -P0(0, 0), d2 = -P0(P0.rows() - 1, P0.cols() - 1);
  if (d1 < -tol || d2 < -tol)
    throw StructuralError("scheme requires nonpositive diagonal P0");
  return {std::max(d1, 0.0), std::max(d2, 0.0)};
}

// Two scalar fields with first-order coupling x1' = d e2, x2' = d e1.
// x1 lives on interior+right faces, x2 on cell midpoints; inputs inject the
// missing boundary efforts e1(a) and e2(b).
inline DiscreteSystem assemble_staggered_n1(const ModelSpec& model,
                                            const GridConfig& grid, double tol) {
  const SystemSpec& s = model.system;
  if (s.order != 1 || s.state_dim != 2)
    throw StructuralError("staggered_n1 needs order 1 with two fields");
  Mat P1_ref = (Mat(2, 2) << 0.0, 1.0, 1.0, 0.0).finished();
  if ((s.P[1] - P1_ref).norm() > tol)
    throw StructuralError("staggered_n1 requires unit off-diagonal coupling");
  auto [d1, d2] = diagonal_damping(s, tol);
  check_diagonal_H(s, tol);
  check_selection(model.io, {+1, +4}, {-2, +3});

  DiscreteSystem d;
  d.spec = s;
  d.io = model.io;
  d.grid = grid;
  const int m = grid.n_d / 2;
  d.m = m;
  d.h = (s.b - s.a) / m;
  const double h = d.h;
  const int nd = grid.n_d;

  d.pos1.resize(m);
  d.pos2.resize(m);
  for (int i = 0; i < m; ++i) d.pos1[i] = s.a + (i + 1) * h;
  for (int j = 0; j < m; ++j) d.pos2[j] = s.a + (j + 0.5) * h;

  d.E1 = Mat::Zero(m, nd);
  d.E2 = Mat::Zero(m, nd);
  for (int i = 0; i < m; ++i) d.E1(i, i) = s.H(d.pos1[i])(0, 0);
  for (int j = 0; j < m; ++j) d.E2(j, m + j) = s.H(d.pos2[j])(1, 1);

  // forward/backward staggered differences; boundary efforts come from u
  Mat D1 = Mat::Zero(m, m), D2 = Mat::Zero(m, m);
  Mat B1 = Mat::Zero(m, 2), B2 = Mat::Zero(m, 2);
  for (int k = 0; k < m; ++k) {
    D1(k, k) = -1.0 / h;
    if (k + 1 < m) D1(k, k + 1) = 1.0 / h;
  }
  B1(m - 1, 1) = 1.0 / h;  // e2(b) = u2
  for (int j = 0; j < m; ++j) {
    D2(j, j) = 1.0 / h;
    if (j >= 1) D2(j, j - 1) = -1.0 / h;
  }
  B2(0, 0) = -1.0 / h;  // e1(a) = u1

  d.A = Mat::Zero(nd, nd);
  d.B = Mat::Zero(nd, 2);
  d.A.topRows(m) = D1 * d.E2 - d1 * d.E1;
  d.A.bottomRows(m) = D2 * d.E1 - d2 * d.E2;
  d.B.topRows(m) = B1;
  d.B.bottomRows(m) = B2;

  d.C_y = Mat::Zero(2, nd);
  d.D_y = Mat::Zero(2, 2);
  d.C_y.row(0) = -d.E2.row(0);     // -e2(a)
  d.C_y.row(1) = d.E1.row(m - 1);  // e1(b)

  Vec me(nd);
  for (int i = 0; i < m; ++i) me(i) = h * s.H(d.pos1[i])(0, 0);
  for (int j = 0; j < m; ++j) me(m + j) = h * s.H(d.pos2[j])(1, 1);
  d.M_energy = me.asDiagonal();
  d.S_diss = h * (d1 * d.E1.transpose() * d.E1 + d2 * d.E2.transpose() * d.E2);

  d.Ta_C = Mat::Zero(2, nd);
  d.Ta_D = Mat::Zero(2, 2);
  d.Tb_C = Mat::Zero(2, nd);
  d.Tb_D = Mat::Zero(2, 2);
  d.Ta_D(0, 0) = 1.0;              // e1(a) = u1
  d.Ta_C.row(1) = d.E2.row(0);     // e2(a) ~ nearest midpoint effort
  d.Tb_C.row(0) = d.E1.row(m - 1); // e1(b)
  d.Tb_D(1, 1) = 1.0;              // e2(b) = u2
  return d;
}

// Two scalar fields with second-order coupling x1' = -dd e2 + P0, x2' = dd e1.
// x1 on faces 1..m, x2 on faces 0..m-1; the two first-derivative stages live
// on cell midpoints, giving exact summation-by-parts against the trapezoid
// energy weight.
inline DiscreteSystem assemble_staggered_n2(const ModelSpec& model,
                                            const GridConfig& grid, double tol) {
  const SystemSpec& s = model.system;
  auto part = detect_partitioned_structure(s, tol);
  if (!part || part->half_dim != 1)
    throw StructuralError(
        "staggered_partitioned_n2 needs a scalar partitioned structure");
  if (part->Q1.norm() > tol || std::abs(part->Q2(0, 0) - 1.0) > tol)
    throw StructuralError(
        "staggered_partitioned_n2 requires Q1 = 0 and unit Q2");
  auto [d1, d2] = diagonal_damping(s, tol);
  check_diagonal_H(s, tol);
  check_selection(model.io, {+1, +3, +6, +8}, {+4, -2, +7, -5});

  DiscreteSystem d;
  d.spec = s;
  d.io = model.io;
  d.grid = grid;
  const int m = grid.n_d / 2;
  d.m = m;
  d.h = (s.b - s.a) / m;
  const double h = d.h;
  const int nd = grid.n_d;

  d.pos1.resize(m);
  d.pos2.resize(m);
  for (int i = 0; i < m; ++i) d.pos1[i] = s.a + (i + 1) * h;
  for (int j = 0; j < m; ++j) d.pos2[j] = s.a + j * h;

  d.E1 = Mat::Zero(m, nd);
  d.E2 = Mat::Zero(m, nd);
  for (int i = 0; i < m; ++i) d.E1(i, i) = s.H(d.pos1[i])(0, 0);
  for (int j = 0; j < m; ++j) d.E2(j, m + j) = s.H(d.pos2[j])(1, 1);

  // Stage 1: first derivatives at cell midpoints.
  //   w1_{j+1/2} = (e1_{j+1} - e1_j)/h with e1_0 = u1,
  //   w2_{j+1/2} = (e2_{j+1} - e2_j)/h with e2_m = u3.
  Mat W1s = Mat::Zero(m, m), W2s = Mat::Zero(m, m);
  Mat W1u = Mat::Zero(m, 4), W2u = Mat::Zero(m, 4);
  for (int j = 0; j < m; ++j) {
    W1s(j, j) = 1.0 / h;
    if (j >= 1) W1s(j, j - 1) = -1.0 / h;
    W2s(j, j) = -1.0 / h;
    if (j + 1 < m) W2s(j, j + 1) = 1.0 / h;
  }
  W1u(0, 0) = -1.0 / h;
  W2u(m - 1, 2) = 1.0 / h;

  // Stage 2: second differences back onto the face grids.
  //   x2'_j = (w1_{j+1/2} - w1_{j-1/2})/h with w1_{-1/2} = u2,
  //   x1'_k = -(w2_{k+3/2} - w2_{k+1/2})/h with w2_{m+1/2} = u4.
  Mat D2s = Mat::Zero(m, m), D1s = Mat::Zero(m, m);
  Mat D2u = Mat::Zero(m, 4), D1u = Mat::Zero(m, 4);
  for (int i = 0; i < m; ++i) {
    D2s(i, i) = 1.0 / h;
    if (i >= 1) D2s(i, i - 1) = -1.0 / h;
  }
  D2u(0, 1) = -1.0 / h;
  for (int k = 0; k < m; ++k) {
    D1s(k, k) = -1.0 / h;
    if (k + 1 < m) D1s(k, k + 1) = 1.0 / h;
  }
  D1u(m - 1, 3) = 1.0 / h;

  d.A = Mat::Zero(nd, nd);
  d.B = Mat::Zero(nd, 4);
  d.A.topRows(m) = -D1s * (W2s * d.E2) - d1 * d.E1;
  d.B.topRows(m) = -D1s * W2u - D1u;
  d.A.bottomRows(m) = D2s * (W1s * d.E1) - d2 * d.E2;
  d.B.bottomRows(m) = D2s * W1u + D2u;

  d.C_y = Mat::Zero(4, nd);
  d.D_y = Mat::Zero(4, 4);
  d.C_y.row(0) = (W2s * d.E2).row(0);  // d/dz e2 at a
  d.D_y.row(0) = W2u.row(0);
  d.C_y.row(1) = -d.E2.row(0);         // -e2(a)
  d.C_y.row(2) = (W1s * d.E1).row(m - 1);  // d/dz e1 at b
  d.D_y.row(2) = W1u.row(m - 1);
  d.C_y.row(3) = -d.E1.row(m - 1);     // -e1(b)

  Vec me(nd);
  for (int i = 0; i < m; ++i) me(i) = h * s.H(d.pos1[i])(0, 0);
  for (int j = 0; j < m; ++j) me(m + j) = h * s.H(d.pos2[j])(1, 1);
  d.M_energy = me.asDiagonal();
  d.S_diss = h * (d1 * d.E1.transpose() * d.E1 + d2 * d.E2.transpose() * d.E2);

  // Trace stacks (e1, e2, d e1, d e2) at each end.
  d.Ta_C = Mat::Zero(4, nd);
  d.Ta_D = Mat::Zero(4, 4);
  d.Tb_C = Mat::Zero(4, nd);
  d.Tb_D = Mat::Zero(4, 4);
  d.Ta_D(0, 0) = 1.0;                       // e1(a) = u1
  d.Ta_C.row(1) = d.E2.row(0);              // e2(a)
  d.Ta_D(2, 1) = 1.0;                       // d e1(a) = u2
  d.Ta_C.row(3) = (W2s * d.E2).row(0);      // d e2(a)
  d.Ta_D.row(3) += W2u.row(0);
  d.Tb_C.row(0) = d.E1.row(m - 1);          // e1(b)
  d.Tb_D(1, 2) = 1.0;                       // e2(b) = u3
  d.Tb_C.row(2) = (W1s * d.E1).row(m - 1);  // d e1(b)
  d.Tb_D.row(2) += W1u.row(m - 1);
  d.Tb_D(3, 3) = 1.0;                       // d e2(b) = u4
  return d;
}

}  // namespace detail

inline DiscreteSystem discretize(const ModelSpec& model, const GridConfig& grid,
                                 double tol = default_tolerance()) {
  detail::check_grid(grid);
  ValidationReport rep = validate_system(model.system, tol);
  if (!rep.all_passed()) {
    std::string bad;
    for (const auto& c : rep.checks)
      if (!c.passed) bad += (bad.empty() ? "" : ", ") + c.name;
    throw InvariantError("system fails validation: " + bad);
  }
  switch (grid.scheme) {
    case Scheme::staggered_n1:
      return detail::assemble_staggered_n1(model, grid, tol);
    case Scheme::staggered_partitioned_n2:
      return detail::assemble_staggered_n2(model, grid, tol);
  }
  throw StructuralError("unreachable scheme");
}

// Samples per-field profiles onto the staggered grids.
inline Vec sample_state(const DiscreteSystem& d,
                        const std::function<double(double)>& f1,
                        const std::function<double(double)>& f2) {
  Vec z(2 * d.m);
  for (int i = 0; i < d.m; ++i) z(i) = f1(d.pos1[i]);
  for (int j = 0; j < d.m; ++j) z(d.m + j) = f2(d.pos2[j]);
  return z;
}

// Rest-release profile used throughout the studies: zero momentum and an
// affine curvature ramp crossing zero at zeta = 0.9.
inline Vec release_state(const DiscreteSystem& d) {
  return sample_state(d, [](double) { return 0.0; },
                      [](double z) { return z - 0.9; });
}

// Named quadratic form 0.5 z^T M z recorded along a trajectory.
struct QuadForm {
  std::string name;
  Mat M;
};

// Named linear readout rows recorded along a trajectory.
struct OutputGroup {
  std::string name;
  Mat C;
};

// Autonomous closed system prepared for time integration together with the
// bookkeeping needed by the analysis layer.
struct SimSystem {
  Mat A;
  std::vector<QuadForm> energies;
  std::vector<OutputGroup> outputs;
  Mat M_bal, S_bal;  // discrete balance d/dt(0.5 z'Mz) = -z'Sz holds exactly
  int m = 0;
  double h = 0.0;
  int plant_dim = 0;   // leading block that is the plant copy (coupled systems)
  int x2_offset = -1;  // curvature block offset inside the plant copy

  int dim() const { return static_cast<int>(A.rows()); }
  const OutputGroup* output(const std::string& name) const {
    for (const auto& g : outputs)
      if (g.name == name) return &g;
    return nullptr;
  }
};

namespace detail {

// Row functional equal to the free-end deflection obtained by twice summing
// the curvature block with left-rectangle rule and clamped left end.
inline Vec tip_row(int dim, int offset, int m, double h) {
  Vec r = Vec::Zero(dim);
  for (int i = 0; i < m; ++i) r(offset + i) = h * h * (m - i);
  return r;
}

inline Mat output_feedback_gain(const DiscreteSystem& d, const Mat& C_m,
                                const Mat& L) {
  const int ny = static_cast<int>(d.C_y.rows());
  if (C_m.cols() != ny) throw StructuralError("C_m must have one column per output");
  if (L.rows() != C_m.rows() || L.cols() != C_m.rows())
    throw StructuralError("L must be square with the measured dimension");
  Mat Lam = 0.5 * (L + L.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> les(Lam, Eigen::EigenvaluesOnly);
  if (les.eigenvalues().minCoeff() < -1e-12 * (1.0 + Lam.norm()))
    throw InvariantError(
        "injection gain must be positive semidefinite (zero for open loop)");
  Mat Fy = -C_m.transpose() * L * C_m;
  Mat M = Mat::Identity(ny, ny) - Fy * d.D_y;
  Eigen::FullPivLU<Mat> lu(M);
  if (!lu.isInvertible())
    throw InvariantError("output feedback is ill-posed through D_y");
  return lu.solve(Fy * d.C_y);  // u = K z
}

}  // namespace detail

// Plant alone with u = 0.
inline SimSystem open_loop(const DiscreteSystem& d) {
  SimSystem s;
  s.A = d.A;
  s.energies = {{"H", d.M_energy}};
  s.outputs = {{"y", d.C_y}, {"phi_a", d.Ta_C}, {"phi_b", d.Tb_C}};
  s.M_bal = d.M_energy;
  s.S_bal = d.S_diss;
  s.m = d.m;
  s.h = d.h;
  s.plant_dim = static_cast<int>(d.A.rows());
  s.x2_offset = d.spec.order == 2 ? d.m : -1;
  if (d.spec.order == 2) s.outputs.push_back({"vel", d.E1});
  return s;
}

// Autonomous dynamics of the estimation error x - x_hat under output
// injection u_err = -C_m^T L C_m y_err.
inline SimSystem error_system(const DiscreteSystem& d, const Mat& C_m,
                              const Mat& L) {
  Mat K = detail::output_feedback_gain(d, C_m, L);
  Mat Cy_cl = d.C_y + d.D_y * K;
  Mat Lam = 0.5 * (L + L.transpose());

  SimSystem s;
  s.A = d.A + d.B * K;
  s.energies = {{"Htilde", d.M_energy}};
  s.outputs = {{"ym", C_m * Cy_cl},
               {"phi_a", d.Ta_C + d.Ta_D * K},
               {"phi_b", d.Tb_C + d.Tb_D * K}};
  s.M_bal = d.M_energy;
  s.S_bal = d.S_diss + Cy_cl.transpose() * C_m.transpose() * Lam * C_m * Cy_cl;
  s.m = d.m;
  s.h = d.h;
  s.plant_dim = static_cast<int>(d.A.rows());
  s.x2_offset = d.spec.order == 2 ? d.m : -1;
  if (d.spec.order == 2)
    s.outputs.push_back({"tip_err", detail::tip_row(s.dim(), d.m, d.m, d.h).transpose()});
  return s;
}

inline SimSystem error_system(const DiscreteSystem& d) {
  return error_system(d, d.io.C_m, d.io.L);
}

// Plant and observer stacked as one autonomous system (external input zero).
// The observer copies the plant and adds measured-output injection.
inline SimSystem couple_plant_observer(const DiscreteSystem& d, const Mat& C_m,
                                       const Mat& L) {
  if (d.D_y.norm() > 1e-14 * (1.0 + d.B.norm()))
    throw StructuralError("coupled assembly assumes a strictly proper plant");
  Mat K = detail::output_feedback_gain(d, C_m, L);  // u_err = K z_err
  const int n = static_cast<int>(d.A.rows());
  Mat G = -d.B * K;  // injection gain times C_y, shaped n x n
  Mat Lam = 0.5 * (L + L.transpose());

  SimSystem s;
  s.A = Mat::Zero(2 * n, 2 * n);
  s.A.topLeftCorner(n, n) = d.A;
  s.A.bottomLeftCorner(n, n) = G;
  s.A.bottomRightCorner(n, n) = d.A - G;

  Mat Mtil = Mat::Zero(2 * n, 2 * n);
  Mat Mplant = Mat::Zero(2 * n, 2 * n), Mobs = Mat::Zero(2 * n, 2 * n);
  Mplant.topLeftCorner(n, n) = d.M_energy;
  Mobs.bottomRightCorner(n, n) = d.M_energy;
  Mtil.topLeftCorner(n, n) = d.M_energy;
  Mtil.bottomRightCorner(n, n) = d.M_energy;
  Mtil.topRightCorner(n, n) = -d.M_energy;
  Mtil.bottomLeftCorner(n, n) = -d.M_energy;
  s.energies = {{"H", Mplant}, {"Hhat", Mobs}, {"Htilde", Mtil}};

  // strictly proper (guard above), so both full outputs are pure state readouts
  const int ny = static_cast<int>(d.C_y.rows());
  Mat Yplant(ny, 2 * n), Yobs(ny, 2 * n);
  Yplant << d.C_y, Mat::Zero(ny, n);
  Yobs << Mat::Zero(ny, n), d.C_y;
  Mat Cym = C_m * d.C_y;
  Mat Cplant(Cym.rows(), 2 * n), Cobs(Cym.rows(), 2 * n);
  Cplant << Cym, Mat::Zero(Cym.rows(), n);
  Cobs << Mat::Zero(Cym.rows(), n), Cym;
  s.outputs = {{"y", Yplant}, {"yhat", Yobs}, {"ym", Cplant}, {"ymhat", Cobs}};
  if (d.spec.order == 2) {
    Mat vel(d.m, 2 * n);
    vel << d.E1, Mat::Zero(d.m, n);
    s.outputs.push_back({"vel", vel});
  }

  Mat Dz(n, 2 * n);
  Dz << Mat::Identity(n, n), -Mat::Identity(n, n);
  Mat S_err =
      d.S_diss + d.C_y.transpose() * C_m.transpose() * Lam * C_m * d.C_y;
  s.M_bal = Mtil;
  s.S_bal = Dz.transpose() * S_err * Dz;

  Mat phiA(d.Ta_C.rows(), 2 * n), phiB(d.Tb_C.rows(), 2 * n);
  Mat TaCl = d.Ta_C + d.Ta_D * K;
  Mat TbCl = d.Tb_C + d.Tb_D * K;
  phiA << TaCl, -TaCl;
  phiB << TbCl, -TbCl;
  s.outputs.push_back({"phi_a", phiA});
  s.outputs.push_back({"phi_b", phiB});
  s.m = d.m;
  s.h = d.h;
  s.plant_dim = n;
  s.x2_offset = d.spec.order == 2 ? d.m : -1;
  if (d.spec.order == 2) {
    Vec tr = detail::tip_row(2 * n, d.m, d.m, d.h) -
             detail::tip_row(2 * n, n + d.m, d.m, d.h);
    s.outputs.push_back({"tip_err", tr.transpose()});
  }
  return s;
}

inline SimSystem couple_plant_observer(const DiscreteSystem& d) {
  return couple_plant_observer(d, d.io.C_m, d.io.L);
}

}  // namespace phsobs
