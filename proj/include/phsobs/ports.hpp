#pragma once

#include <cmath>
#include <cstdlib>
#include <vector>

#include "phsobs/system_spec.hpp"

namespace phsobs {

// Boundary trace stack at one end: phi = (e, d/dzeta e, ..., d^(N-1)/dzeta^N-1 e)
// with e = H x the effort field. Port variables recombine the two end stacks,
//   f = (1/sqrt(2)) Q (phi_b - phi_a),   e_port = (1/sqrt(2)) (phi_b + phi_a),
// so that f . e_port equals the boundary power flow.
struct PortVector {
  Vec flow;    // f
  Vec effort;  // e_port
};

// Block-anti-triangular recombination matrix built from P_1..P_N.
// Block (i,j), 1-based, holds (-1)^(i-1) P_{i+j-1} for i+j <= N+1 and zero
// beyond the anti-diagonal. Symmetric, and nonsingular whenever P_N is.
inline Mat build_Q(const SystemSpec& s) {
  detail::require_structure(s);
  const int N = s.order, n = s.state_dim;
  Mat Q = Mat::Zero(N * n, N * n);
  for (int i = 1; i <= N; ++i) {
    double sign = (i % 2 == 1) ? 1.0 : -1.0;
    for (int j = 1; i + j <= N + 1; ++j)
      Q.block((i - 1) * n, (j - 1) * n, n, n) = sign * s.P[i + j - 1];
  }
  return Q;
}

// Power pairing matrix: (f;e)^T Sigma (f;e) = 2 f . e.
inline Mat sigma_matrix(int boundary_dim) {
  Mat S = Mat::Zero(2 * boundary_dim, 2 * boundary_dim);
  S.topRightCorner(boundary_dim, boundary_dim).setIdentity();
  S.bottomLeftCorner(boundary_dim, boundary_dim).setIdentity();
  return S;
}

// Linear map (f; e) -> (phi_a; phi_b). Inverse of the port definition above.
inline Mat trace_matrix(const SystemSpec& s) {
  Mat Q = build_Q(s);
  Mat Qi = inverse_checked(Q, "port recombination matrix Q");
  const int m = Q.rows();
  const double c = 1.0 / std::sqrt(2.0);
  Mat T(2 * m, 2 * m);
  T.topLeftCorner(m, m) = -c * Qi;
  T.topRightCorner(m, m) = c * Mat::Identity(m, m);
  T.bottomLeftCorner(m, m) = c * Qi;
  T.bottomRightCorner(m, m) = c * Mat::Identity(m, m);
  return T;
}

inline PortVector ports_from_traces(const SystemSpec& s, const Vec& phi_a,
                                    const Vec& phi_b) {
  const int m = s.boundary_dim();
  if (phi_a.size() != m || phi_b.size() != m)
    throw StructuralError("trace stacks must have length N*n");
  Mat Q = build_Q(s);
  const double c = 1.0 / std::sqrt(2.0);
  return {c * Q * (phi_b - phi_a), c * (phi_b + phi_a)};
}

// Inverse map; returns (phi_a, phi_b).
inline std::pair<Vec, Vec> traces_from_ports(const SystemSpec& s, const Vec& f,
                                             const Vec& e) {
  const int m = s.boundary_dim();
  if (f.size() != m || e.size() != m)
    throw StructuralError("port vectors must have length N*n");
  Mat T = trace_matrix(s);
  Vec fe(2 * m);
  fe << f, e;
  Vec phi = T * fe;
  return {phi.head(m), phi.tail(m)};
}

// Input/output structure: u = W_B (f;e), y = W_C (f;e), y_m = C_m y.
struct IoConfig {
  Mat W_B;                       // boundary_dim x 2*boundary_dim
  Mat W_C;                       // boundary_dim x 2*boundary_dim
  Mat C_m;                       // q x boundary_dim, measured-output selector
  Mat L;                         // q x q observer gain
  std::vector<int> u_selection;  // signed 1-based rows into (phi_a; phi_b)
  std::vector<int> y_selection;  // empty when W_B/W_C were given directly
};

struct SigmaResiduals {
  double r_BB = 0.0;  // |W_B Sigma W_B^T|
  double r_CC = 0.0;  // |W_C Sigma W_C^T|
  double r_CB = 0.0;  // |W_C Sigma W_B^T - I|
  double max() const { return std::max(r_BB, std::max(r_CC, r_CB)); }
};

inline SigmaResiduals sigma_residuals(const IoConfig& io) {
  const int m = static_cast<int>(io.W_B.rows());
  Mat S = sigma_matrix(m);
  SigmaResiduals r;
  r.r_BB = (io.W_B * S * io.W_B.transpose()).norm();
  r.r_CC = (io.W_C * S * io.W_C.transpose()).norm();
  r.r_CB = (io.W_C * S * io.W_B.transpose() - Mat::Identity(m, m)).norm();
  return r;
}

// Selection matrix over the stacked traces (phi_a; phi_b): one row per entry
// of `rows`, sign carried by the index, indices 1-based.
inline Mat selection_matrix(const std::vector<int>& rows, int stack_len) {
  Mat S = Mat::Zero(static_cast<int>(rows.size()), stack_len);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    int idx = rows[k];
    if (idx == 0 || std::abs(idx) > stack_len)
      throw StructuralError("trace selection index out of range");
    S(static_cast<int>(k), std::abs(idx) - 1) = idx > 0 ? 1.0 : -1.0;
  }
  return S;
}

// Builds W_B, W_C from signed trace selections and checks that the pair forms
// a valid power-conserving input/output split:
//   W_B Sigma W_B^T = 0,  W_C Sigma W_C^T = 0,  W_C Sigma W_B^T = I.
inline IoConfig derive_io_from_trace_selection(const SystemSpec& s,
                                               const std::vector<int>& u_sel,
                                               const std::vector<int>& y_sel,
                                               double tol = default_tolerance()) {
  const int m = s.boundary_dim();
  if (static_cast<int>(u_sel.size()) != m || static_cast<int>(y_sel.size()) != m)
    throw StructuralError("selection must pick exactly N*n traces per port");
  Mat T = trace_matrix(s);
  IoConfig io;
  io.W_B = selection_matrix(u_sel, 2 * m) * T;
  io.W_C = selection_matrix(y_sel, 2 * m) * T;
  io.u_selection = u_sel;
  io.y_selection = y_sel;
  SigmaResiduals r = sigma_residuals(io);
  if (r.max() > tol) {
    std::ostringstream os;
    os << "selection is not a valid port split: |W_B S W_B^T|=" << r.r_BB
       << " |W_C S W_C^T|=" << r.r_CC << " |W_C S W_B^T - I|=" << r.r_CB;
    throw InvariantError(os.str());
  }
  return io;
}

struct IoValues {
  Vec u;
  Vec y;
  Vec y_m;
};

inline IoValues io_from_ports(const IoConfig& io, const Vec& f, const Vec& e) {
  if (f.size() != io.W_B.rows() || e.size() != io.W_B.rows())
    throw StructuralError("port vector length does not match W_B");
  Vec fe(f.size() + e.size());
  fe << f, e;
  IoValues v;
  v.u = io.W_B * fe;
  v.y = io.W_C * fe;
  v.y_m = io.C_m.size() ? Vec(io.C_m * v.y) : Vec();
  return v;
}

// Energy of a sampled field: one half the trapezoid quadrature of x^T H x.
// X holds one column per grid node.
inline double hamiltonian(const SystemSpec& s, const std::vector<double>& grid,
                          const Mat& X) {
  if (X.rows() != s.state_dim ||
      X.cols() != static_cast<Eigen::Index>(grid.size()))
    throw StructuralError("field samples must be n x len(grid)");
  if (grid.size() < 2) throw StructuralError("grid needs at least two nodes");
  std::vector<double> w = trapezoid_weights(grid);
  double acc = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    Vec xk = X.col(static_cast<Eigen::Index>(k));
    acc += w[k] * xk.dot(s.H(grid[k]) * xk);
  }
  return 0.5 * acc;
}

}  // namespace phsobs
