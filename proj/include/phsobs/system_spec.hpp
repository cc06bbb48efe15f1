#pragma once

#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "phsobs/dense.hpp"
#include "phsobs/errors.hpp"
#include "phsobs/tolerance.hpp"

namespace phsobs {

// First-order-in-time boundary-controlled system
//   d/dt x(t,zeta) = sum_k P_k d^k/dzeta^k (H(zeta) x),   zeta in [a,b],
// with constant square matrices P_0..P_N and a pointwise symmetric,
// uniformly coercive and bounded energy density H.
struct SystemSpec {
  int order = 0;      // N, highest spatial derivative
  int state_dim = 0;  // n, number of field components
  double a = 0.0;
  double b = 1.0;
  std::vector<Mat> P;             // P[0]..P[order], each state_dim x state_dim
  std::function<Mat(double)> H;   // energy density at a point
  double coercivity_m = 0.0;      // asserted lower bound: m I < H
  double coercivity_M = 0.0;      // asserted upper bound: H < M I

  int boundary_dim() const { return order * state_dim; }  // size of one trace stack
};

struct ValidationCheck {
  std::string name;
  bool passed = false;
  double margin = 0.0;  // distance to the failure boundary, sign convention: >0 passes
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;

  bool all_passed() const {
    for (const auto& c : checks)
      if (!c.passed) return false;
    return true;
  }
  const ValidationCheck* find(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return &c;
    return nullptr;
  }
};

namespace detail {

inline void require_structure(const SystemSpec& s) {
  if (s.order < 1) throw StructuralError("derivative order must be >= 1");
  if (s.state_dim < 1) throw StructuralError("state dimension must be >= 1");
  if (!(s.b > s.a)) throw StructuralError("interval must satisfy a < b");
  if (static_cast<int>(s.P.size()) != s.order + 1) {
    std::ostringstream os;
    os << "expected " << s.order + 1 << " P matrices, got " << s.P.size();
    throw StructuralError(os.str());
  }
  for (int k = 0; k <= s.order; ++k)
    if (s.P[k].rows() != s.state_dim || s.P[k].cols() != s.state_dim)
      throw StructuralError("P matrix " + std::to_string(k) + " is not n x n");
  if (!s.H) throw StructuralError("energy density H is not set");
  Mat H0 = s.H(s.a);
  if (H0.rows() != s.state_dim || H0.cols() != s.state_dim)
    throw StructuralError("H(zeta) is not n x n");
}

}  // namespace detail

// Checks the well-posedness requirements on a structurally complete spec.
// Structural defects (wrong sizes, missing data) throw; mathematical
// violations are reported as failed checks with margins.
inline ValidationReport validate_system(const SystemSpec& s,
                                        double tol = default_tolerance(),
                                        int h_samples = 33) {
  detail::require_structure(s);
  ValidationReport rep;
  auto add = [&rep](const std::string& name, bool ok, double margin,
                    const std::string& detail = "") {
    rep.checks.push_back({name, ok, margin, detail});
  };

  {
    Mat S0 = s.P[0] + s.P[0].transpose();
    Eigen::SelfAdjointEigenSolver<Mat> es(S0);
    double lmax = es.eigenvalues().maxCoeff();
    add("P0_dissipative", lmax <= tol, -lmax, "max eig of P0 + P0^T");
  }
  for (int k = 1; k <= s.order; ++k) {
    // alternating symmetry: P_k^T = (-1)^(k-1) P_k
    double sign = (k % 2 == 1) ? 1.0 : -1.0;
    double res = (s.P[k].transpose() - sign * s.P[k]).norm();
    double scale = std::max(1.0, s.P[k].norm());
    add("P" + std::to_string(k) + (sign > 0 ? "_symmetric" : "_antisymmetric"),
        res <= tol * scale, tol * scale - res);
  }
  {
    Eigen::JacobiSVD<Mat> svd(s.P[s.order]);
    double smin = svd.singularValues().minCoeff();
    add("PN_nonsingular", smin > tol, smin - tol,
        "smallest singular value of highest-order P");
  }
  {
    bool mM_ok = s.coercivity_m > 0.0 && s.coercivity_M > s.coercivity_m;
    add("coercivity_bounds_ordered", mM_ok,
        std::min(s.coercivity_m, s.coercivity_M - s.coercivity_m));
    double worst_sym = 0.0, worst_low = 1e300, worst_high = 1e300;
    for (int i = 0; i < h_samples; ++i) {
      double z = s.a + (s.b - s.a) * i / (h_samples - 1.0);
      Mat Hz = s.H(z);
      worst_sym = std::max(worst_sym, (Hz - Hz.transpose()).norm());
      Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (Hz + Hz.transpose()));
      worst_low = std::min(worst_low, es.eigenvalues().minCoeff() - s.coercivity_m);
      worst_high = std::min(worst_high, s.coercivity_M - es.eigenvalues().maxCoeff());
    }
    add("H_symmetric", worst_sym <= tol, tol - worst_sym);
    add("H_coercive", worst_low >= -tol, worst_low, "min over samples of eig_min(H) - m");
    add("H_bounded", worst_high >= -tol, worst_high, "min over samples of M - eig_max(H)");
  }
  return rep;
}

}  // namespace phsobs
