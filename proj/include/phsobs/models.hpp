#pragma once

#include <functional>
#include <optional>
#include <string>

#include "phsobs/ports.hpp"

namespace phsobs {

// Clamped-free bending beam in energy coordinates x1 = momentum density,
// x2 = curvature, with optional distributed viscous damping d >= 0 on x1.
// Inputs collocate the clamped-end velocities with the free-end internal
// forces; outputs are their power conjugates.
struct BeamParams {
  std::function<double(double)> rho = [](double) { return 1.0; };
  std::function<double(double)> EI = [](double) { return 1.0; };
  double damping = 0.2;
  double coercivity_m = 0.0;  // 0 = derive from samples below
  double coercivity_M = 0.0;
};

struct ModelSpec {
  SystemSpec system;
  IoConfig io;  // C_m and L left empty; filled by a measurement preset
};

namespace detail {

inline void derive_coercivity(SystemSpec& s, double m_hint, double M_hint,
                              int samples = 257) {
  if (m_hint > 0.0 && M_hint > m_hint) {
    s.coercivity_m = m_hint;
    s.coercivity_M = M_hint;
    return;
  }
  double lo = 1e300, hi = -1e300;
  for (int i = 0; i < samples; ++i) {
    double z = s.a + (s.b - s.a) * i / (samples - 1.0);
    Eigen::SelfAdjointEigenSolver<Mat> es(s.H(z));
    lo = std::min(lo, es.eigenvalues().minCoeff());
    hi = std::max(hi, es.eigenvalues().maxCoeff());
  }
  s.coercivity_m = 0.5 * lo;
  s.coercivity_M = 2.0 * hi;
}

}  // namespace detail

inline ModelSpec beam_spec(const BeamParams& p = {}) {
  if (p.damping < 0.0) throw StructuralError("beam damping must be >= 0");
  SystemSpec s;
  s.order = 2;
  s.state_dim = 2;
  s.a = 0.0;
  s.b = 1.0;
  s.P.resize(3);
  s.P[0] = (Mat(2, 2) << -p.damping, 0.0, 0.0, 0.0).finished();
  s.P[1] = Mat::Zero(2, 2);
  s.P[2] = (Mat(2, 2) << 0.0, -1.0, 1.0, 0.0).finished();
  auto rho = p.rho;
  auto EI = p.EI;
  s.H = [rho, EI](double z) {
    Mat H = Mat::Zero(2, 2);
    H(0, 0) = 1.0 / rho(z);
    H(1, 1) = EI(z);
    return H;
  };
  detail::derive_coercivity(s, p.coercivity_m, p.coercivity_M);

  ModelSpec model;
  model.system = s;
  // Trace stack per end: (e1, e2, d e1, d e2).  Inputs: clamped-end velocity
  // pair and free-end force pair; outputs close the collocated power pairing.
  model.io = derive_io_from_trace_selection(s, {+1, +3, +6, +8},
                                            {+4, -2, +7, -5});
  return model;
}

// Lossless transport pair (e.g. vibrating string) with wave speed c:
// x1 = velocity-like field, x2 = strain-like field, H = diag(1, c^2).
inline ModelSpec wave_spec(double c = 1.0) {
  if (!(c > 0.0)) throw StructuralError("wave speed must be positive");
  SystemSpec s;
  s.order = 1;
  s.state_dim = 2;
  s.a = 0.0;
  s.b = 1.0;
  s.P.resize(2);
  s.P[0] = Mat::Zero(2, 2);
  s.P[1] = (Mat(2, 2) << 0.0, 1.0, 1.0, 0.0).finished();
  s.H = [c](double) {
    Mat H = Mat::Zero(2, 2);
    H(0, 0) = 1.0;
    H(1, 1) = c * c;
    return H;
  };
  detail::derive_coercivity(s, std::min(1.0, c * c) * 0.5,
                            std::max(1.0, c * c) * 2.0);

  ModelSpec model;
  model.system = s;
  model.io = derive_io_from_trace_selection(s, {+1, +4}, {-2, +3});
  return model;
}

// Second-order systems whose coupling splits into two half-size field groups:
//   P1 = [[0, Q1], [Q1, 0]],  P2 = [[0, -Q2], [Q2, 0]],  H = diag(H1, H2),
// Q1, Q2 symmetric with Q2 invertible. Needed by the partition-based
// convergence test and by the second-order staggered scheme.
struct PartitionedStructure {
  int half_dim = 0;  // size of each field group
  Mat Q1;
  Mat Q2;
};

inline std::optional<PartitionedStructure> detect_partitioned_structure(
    const SystemSpec& s, double tol = default_tolerance(), int h_samples = 17) {
  if (s.order != 2 || s.state_dim % 2 != 0) return std::nullopt;
  const int h = s.state_dim / 2;
  auto blk = [&](const Mat& M, int i, int j) { return M.block(i * h, j * h, h, h); };

  Mat Q1 = blk(s.P[1], 0, 1);
  Mat Q2 = blk(s.P[2], 1, 0);
  double scale1 = std::max(1.0, s.P[1].norm());
  double scale2 = std::max(1.0, s.P[2].norm());
  bool ok = blk(s.P[1], 0, 0).norm() <= tol * scale1 &&
            blk(s.P[1], 1, 1).norm() <= tol * scale1 &&
            (blk(s.P[1], 1, 0) - Q1).norm() <= tol * scale1 &&
            (Q1 - Q1.transpose()).norm() <= tol * scale1 &&
            blk(s.P[2], 0, 0).norm() <= tol * scale2 &&
            blk(s.P[2], 1, 1).norm() <= tol * scale2 &&
            (blk(s.P[2], 0, 1) + Q2).norm() <= tol * scale2 &&
            (Q2 - Q2.transpose()).norm() <= tol * scale2;
  if (!ok) return std::nullopt;
  Eigen::JacobiSVD<Mat> svd(Q2);
  if (svd.singularValues().minCoeff() <= tol) return std::nullopt;
  for (int i = 0; i < h_samples; ++i) {
    double z = s.a + (s.b - s.a) * i / (h_samples - 1.0);
    Mat Hz = s.H(z);
    double hs = std::max(1.0, Hz.norm());
    if (blk(Hz, 0, 1).norm() > tol * hs || blk(Hz, 1, 0).norm() > tol * hs)
      return std::nullopt;
  }
  return PartitionedStructure{h, Q1, Q2};
}

// Named model + measurement configurations used across tests and scenarios.
//   beam-3m : damped beam, measured outputs y_2..y_4, L = I_3
//   beam-2m : damped beam, measured outputs y_3..y_4, L = diag(0.1, 1.0)
//   wave    : lossless wave, full measurement, L = I_2
struct Preset {
  std::string name;
  ModelSpec model;
  int default_nd = 140;
};

inline Preset preset(const std::string& name) {
  Preset p;
  p.name = name;
  if (name == "beam-3m" || name == "beam-2m") {
    p.model = beam_spec();
    if (name == "beam-3m") {
      p.model.io.C_m = Mat::Identity(4, 4).bottomRows(3);
      p.model.io.L = Mat::Identity(3, 3);
    } else {
      p.model.io.C_m = Mat::Identity(4, 4).bottomRows(2);
      p.model.io.L = (Mat(2, 2) << 0.1, 0.0, 0.0, 1.0).finished();
    }
  } else if (name == "wave") {
    p.model = wave_spec(1.0);
    p.model.io.C_m = Mat::Identity(2, 2);
    p.model.io.L = Mat::Identity(2, 2);
  } else {
    throw StructuralError("unknown preset: " + name);
  }
  return p;
}

}  // namespace phsobs
