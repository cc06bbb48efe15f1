#pragma once

#include <cmath>
#include <limits>

#include "phsobs/simulate.hpp"

namespace phsobs {

// Convergence statements checked by this toolkit, each a family of boundary
// observation inequalities: the measured-output power must dominate a stated
// set of boundary traces on the admissible closed-loop subspace.
enum class PropId { P1_asym, P2_exp_N1, P3_exp_N2, P4_exp_partitioned };

inline std::string to_string(PropId p) {
  switch (p) {
    case PropId::P1_asym: return "P1_asym";
    case PropId::P2_exp_N1: return "P2_exp_N1";
    case PropId::P3_exp_N2: return "P3_exp_N2";
    case PropId::P4_exp_partitioned: return "P4_exp_partitioned";
  }
  return "?";
}

inline PropId prop_from_string(const std::string& s) {
  if (s == "P1_asym") return PropId::P1_asym;
  if (s == "P2_exp_N1") return PropId::P2_exp_N1;
  if (s == "P3_exp_N2") return PropId::P3_exp_N2;
  if (s == "P4_exp_partitioned") return PropId::P4_exp_partitioned;
  throw StructuralError("unknown proposition id: " + s);
}

struct ClauseSpec {
  std::string description;
  std::vector<int> rows;  // 0-based rows into the stacked traces (phi_a; phi_b)
};

// Trace-domination clause families. Row layout per end: efforts first
// (n rows), then their first derivatives (n rows, order-2 systems only);
// phi_b rows start at boundary_dim.
inline std::vector<ClauseSpec> proposition_clauses(const SystemSpec& s,
                                                   PropId id) {
  const int n = s.state_dim, bd = s.boundary_dim();
  auto rng = [](int from, int count) {
    std::vector<int> r(count);
    for (int i = 0; i < count; ++i) r[i] = from + i;
    return r;
  };
  auto cat = [](std::initializer_list<std::vector<int>> parts) {
    std::vector<int> r;
    for (const auto& p : parts) r.insert(r.end(), p.begin(), p.end());
    return r;
  };
  switch (id) {
    case PropId::P1_asym:
      return {{"all traces at a", rng(0, bd)}, {"all traces at b", rng(bd, bd)}};
    case PropId::P2_exp_N1:
      return {{"effort stack at a", rng(0, bd)},
              {"effort stack at b", rng(bd, bd)}};
    case PropId::P3_exp_N2: {
      auto ea = rng(0, n), da = rng(n, n), eb = rng(bd, n), db = rng(bd + n, n);
      return {{"e(a), de(a), e(b)", cat({ea, da, eb})},
              {"e(a), de(a), de(b)", cat({ea, da, db})},
              {"e(b), de(b), e(a)", cat({eb, db, ea})},
              {"e(b), de(b), de(a)", cat({eb, db, da})}};
    }
    case PropId::P4_exp_partitioned: {
      const int half = n / 2;
      auto ea = rng(0, n), eb = rng(bd, n);
      auto e1a = rng(0, half), e1b = rng(bd, half);
      auto d1a = rng(n, half), d2a = rng(n + half, half);
      auto d1b = rng(bd + n, half), d2b = rng(bd + n + half, half);
      return {{"e(a), d1(a), e1(b)", cat({ea, d1a, e1b})},
              {"e(a), d2(a), d1(b)", cat({ea, d2a, d1b})},
              {"e(b), d1(b), e1(a)", cat({eb, d1b, e1a})},
              {"e(b), d2(b), d1(a)", cat({eb, d2b, d1a})}};
    }
  }
  return {};
}

struct ClauseCheck {
  int index = 0;
  std::string description;
  std::vector<int> rows;
  bool vacuous = false;  // clause traces vanish identically on the subspace
  double kappa = 0.0;
  bool has_witness = false;
  Vec witness_ports;  // unit vector in the admissible subspace
  Vec witness_phi_a, witness_phi_b;
};

struct PropositionVerdict {
  PropId id = PropId::P1_asym;
  std::string branch;  // "asymptotic" or "exponential"
  bool applicable = true;
  std::string reason;  // filled when not applicable
  bool feasible = false;
  double kappa_max = 0.0;
  int best_clause = -1;
  std::vector<ClauseCheck> clauses;
  // convenience copy of the weakest non-vacuous clause witness, if infeasible
  bool has_witness = false;
  Vec witness_phi_a, witness_phi_b;
};

// Worst-case ratio of measured-output power to clause trace power over the
// admissible subspace K = ker(W_B + C_m^T L C_m W_C), computed per clause as
// a generalized eigenvalue problem after deflating directions where the
// clause traces vanish.
inline PropositionVerdict check_proposition_static(
    const ModelSpec& model, PropId id, double tol = default_tolerance()) {
  const SystemSpec& s = model.system;
  const IoConfig& io = model.io;
  if (!io.C_m.size() || !io.L.size())
    throw StructuralError("io configuration must include C_m and L");

  PropositionVerdict v;
  v.id = id;
  v.branch = id == PropId::P1_asym ? "asymptotic" : "exponential";
  if (id == PropId::P2_exp_N1 && s.order != 1) {
    v.applicable = false;
    v.reason = "requires a first-order system";
    return v;
  }
  if ((id == PropId::P3_exp_N2 || id == PropId::P4_exp_partitioned) &&
      s.order != 2) {
    v.applicable = false;
    v.reason = "requires a second-order system";
    return v;
  }
  if (id == PropId::P4_exp_partitioned && !detect_partitioned_structure(s)) {
    v.applicable = false;
    v.reason = "system has no partitioned structure";
    return v;
  }

  const int bd = s.boundary_dim();
  Mat T = trace_matrix(s);
  Mat Lam = 0.5 * (io.L + io.L.transpose());
  Mat sqrtLam = sym_sqrt_psd(Lam);
  Mat CW = sqrtLam * io.C_m * io.W_C;  // measured rows over ports

  Mat K_constraint = io.W_B + io.C_m.transpose() * io.L * io.C_m * io.W_C;
  Mat B_K = nullspace(K_constraint, 1e-10);
  Mat E = CW * B_K;
  const double e_parent = spectral_norm(CW);

  const double inf = std::numeric_limits<double>::infinity();
  double kappa_max = -1.0;
  for (const auto& cl : proposition_clauses(s, id)) {
    ClauseCheck c;
    c.index = static_cast<int>(v.clauses.size());
    c.description = cl.description;
    c.rows = cl.rows;

    Mat Sc = Mat::Zero(static_cast<int>(cl.rows.size()), 2 * bd);
    for (std::size_t r = 0; r < cl.rows.size(); ++r)
      Sc(static_cast<int>(r), cl.rows[r]) = 1.0;
    Mat ScT = Sc * T;
    Mat F = ScT * B_K;

    Eigen::JacobiSVD<Mat> svd(F, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double f_cut = 1e-10 * spectral_norm(ScT);
    int rank = 0;
    for (int i = 0; i < sv.size(); ++i)
      if (sv(i) > f_cut) ++rank;

    if (rank == 0 || B_K.cols() == 0) {
      c.vacuous = true;
      c.kappa = inf;
      v.clauses.push_back(c);
      continue;
    }
    Mat V1 = svd.matrixV().leftCols(rank);
    Mat NF = svd.matrixV().rightCols(B_K.cols() - rank);

    Mat U0 = orthonormal_range(E * NF, 1e-10 * e_parent);
    Mat Pp = Mat::Identity(E.rows(), E.rows()) - U0 * U0.transpose();
    Mat PE = Pp * E * V1;
    Mat Apen = PE.transpose() * PE;
    Mat FV = F * V1;
    Mat Bpen = FV.transpose() * FV;
    Eigen::GeneralizedSelfAdjointEigenSolver<Mat> ges(Apen, Bpen);
    c.kappa = std::max(ges.eigenvalues()(0), 0.0);

    if (c.kappa <= tol) {
      Vec v1 = V1 * ges.eigenvectors().col(0);
      Vec tls = lstsq(E * NF, Vec(-E * v1));
      Vec wp = B_K * (v1 + (NF.cols() ? Vec(NF * tls) : Vec::Zero(v1.size())));
      double nrm = wp.norm();
      if (nrm > 0) wp /= nrm;
      Vec phi = T * wp;
      c.has_witness = true;
      c.witness_ports = wp;
      c.witness_phi_a = phi.head(bd);
      c.witness_phi_b = phi.tail(bd);
    }
    v.clauses.push_back(c);
  }

  int best = -1;
  for (const auto& c : v.clauses) {
    double k = c.vacuous ? inf : c.kappa;
    if (k > kappa_max) {
      kappa_max = k;
      best = c.index;
    }
  }
  v.kappa_max = kappa_max;
  v.best_clause = best;
  v.feasible = kappa_max > tol;
  if (!v.feasible) {
    // weakest clause witness, preferring the smallest kappa with a witness
    double kmin = inf;
    for (const auto& c : v.clauses)
      if (c.has_witness && c.kappa < kmin) {
        kmin = c.kappa;
        v.has_witness = true;
        v.witness_phi_a = c.witness_phi_a;
        v.witness_phi_b = c.witness_phi_b;
      }
  }
  return v;
}

struct RuntimeCheck {
  double kappa_empirical = std::numeric_limits<double>::infinity();
  long included = 0;
  long excluded = 0;  // steps whose clause trace power sat below the floor
  std::vector<double> ratio;  // NaN where excluded
};

// Empirical counterpart of the static bound along a recorded trajectory:
// ratio of measured-output power to clause trace power per step.
inline RuntimeCheck check_proposition_runtime(const TrajectoryRecord& rec,
                                              const Mat& L,
                                              const std::vector<int>& rows,
                                              double floor_rel = 1e-12) {
  const NamedSignal* ym = rec.output("ym");
  const NamedSignal* pa = rec.output("phi_a");
  const NamedSignal* pb = rec.output("phi_b");
  if (!ym || !pa || !pb)
    throw StructuralError("record lacks ym/phi_a/phi_b outputs");
  Mat Lam = 0.5 * (L + L.transpose());
  const int bd = static_cast<int>(pa->values.rows());
  const long nt = static_cast<long>(rec.t.size());

  std::vector<double> rhs(nt, 0.0), lhs(nt, 0.0);
  double rhs_max = 0.0;
  for (long k = 0; k < nt; ++k) {
    Vec y = ym->values.col(k);
    lhs[k] = y.dot(Lam * y);
    double acc = 0.0;
    for (int r : rows) {
      double val = r < bd ? pa->values(r, k) : pb->values(r - bd, k);
      acc += val * val;
    }
    rhs[k] = acc;
    rhs_max = std::max(rhs_max, acc);
  }
  RuntimeCheck out;
  out.ratio.assign(nt, std::numeric_limits<double>::quiet_NaN());
  const double floor = floor_rel * std::max(1.0, rhs_max);
  for (long k = 0; k < nt; ++k) {
    if (rhs[k] > floor) {
      out.ratio[k] = lhs[k] / rhs[k];
      out.kappa_empirical = std::min(out.kappa_empirical, out.ratio[k]);
      ++out.included;
    } else {
      ++out.excluded;
    }
  }
  return out;
}

// Builds a discrete state whose boundary traces approximate a given witness:
// each effort component is interpolated between its end values (cubic Hermite
// when derivative traces exist, affine otherwise) and mapped back through the
// energy density at the staggered sample points.
inline Vec state_from_boundary_witness(const DiscreteSystem& d,
                                       const Vec& phi_a, const Vec& phi_b) {
  const SystemSpec& s = d.spec;
  const int n = s.state_dim, bd = s.boundary_dim();
  if (phi_a.size() != bd || phi_b.size() != bd)
    throw StructuralError("witness traces must have length N*n");
  const double len = s.b - s.a;
  auto effort = [&](int field, double z) {
    double t = (z - s.a) / len;
    double ea = phi_a(field), eb = phi_b(field);
    if (s.order == 1) return ea + t * (eb - ea);
    double da = phi_a(n + field), db = phi_b(n + field);
    double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * ea + (t3 - 2 * t2 + t) * len * da +
           (-2 * t3 + 3 * t2) * eb + (t3 - t2) * len * db;
  };
  Vec z(2 * d.m);
  for (int i = 0; i < d.m; ++i) {
    double p = d.pos1[i];
    z(i) = effort(0, p) / s.H(p)(0, 0);
  }
  for (int j = 0; j < d.m; ++j) {
    double p = d.pos2[j];
    z(d.m + j) = effort(1, p) / s.H(p)(1, 1);
  }
  return z;
}

// Normalized real combination of the `count` slowest eigenvectors of A,
// ordered by eigenvalue magnitude. Used to seed smooth trajectories whose
// time discretization error is dominated by resolved modes.
inline Vec slow_modes_state(const Mat& A, int count) {
  Eigen::EigenSolver<Mat> es(A);
  const auto& lam = es.eigenvalues();
  std::vector<int> idx(lam.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  std::sort(idx.begin(), idx.end(),
            [&](int a, int b) { return std::abs(lam(a)) < std::abs(lam(b)); });
  Vec z = Vec::Zero(A.rows());
  for (int k = 0; k < std::min<int>(count, static_cast<int>(idx.size())); ++k)
    z += es.eigenvectors().col(idx[k]).real();
  double nrm = z.norm();
  if (nrm > 0) z /= nrm;
  return z;
}

struct DecayFit {
  double alpha = 0.0;   // fitted decay rate of the energy envelope
  double t_conv = std::numeric_limits<double>::infinity();  // 1% crossing time
  bool exact = false;   // series identically zero
  long fit_points = 0;
};

// Least-squares slope of log(E) over the trailing half of the above-floor
// segment; t_conv is the first time E drops below 1% of E(0).
inline DecayFit fit_decay(const std::vector<double>& t,
                          const std::vector<double>& E) {
  if (t.size() != E.size() || t.size() < 2)
    throw StructuralError("decay fit needs matching series of length >= 2");
  DecayFit fit;
  double e0 = E[0];
  double emax = 0.0;
  for (double v : E) emax = std::max(emax, v);
  if (emax <= 1e-250) {
    fit.exact = true;
    fit.alpha = 0.0;
    fit.t_conv = 0.0;
    return fit;
  }
  const double floor = 1e-14 * e0;
  std::size_t seg_end = t.size();
  for (std::size_t k = 0; k < E.size(); ++k) {
    if (E[k] < floor) {
      seg_end = k;
      break;
    }
  }
  if (seg_end < 2) seg_end = 2;
  std::size_t lo = seg_end / 2;
  if (seg_end - lo < 2) lo = seg_end - 2;

  double st = 0, sy = 0, stt = 0, sty = 0;
  long np = 0;
  for (std::size_t k = lo; k < seg_end; ++k) {
    if (!(E[k] > 0.0)) continue;
    double y = std::log(E[k]);
    st += t[k];
    sy += y;
    stt += t[k] * t[k];
    sty += t[k] * y;
    ++np;
  }
  double denom = np * stt - st * st;
  fit.alpha = denom != 0.0 ? -(np * sty - st * sy) / denom : 0.0;
  fit.fit_points = np;

  for (std::size_t k = 0; k < E.size(); ++k) {
    if (E[k] < 0.01 * e0) {
      fit.t_conv = t[k];
      break;
    }
  }
  return fit;
}

struct RegimeReport {
  double alpha = 0.0;
  double t_conv = std::numeric_limits<double>::infinity();
  int crossings = 0;
  double overshoot = 0.0;  // fraction of the initial tip value
  std::string label;       // weakly_damped | critically_damped | overdamped | exact
};

// Classifies the transient of an error signal (typically the reconstructed
// end-tip error): oscillatory overshooting decay, monotone-but-slow decay,
// or the balanced regime in between. `best_t_conv` is the fastest 1% time in
// the comparison group (the signal's own when judged alone).
inline RegimeReport classify_regime(const DecayFit& fit,
                                    const std::vector<double>& tip,
                                    double best_t_conv) {
  RegimeReport rep;
  rep.alpha = fit.alpha;
  rep.t_conv = fit.t_conv;
  if (fit.exact) {
    rep.label = "exact";
    return rep;
  }
  double s0 = tip.empty() ? 0.0 : tip[0];
  const double dead = 1e-3 * std::abs(s0);
  int prev = 0;
  for (double v : tip) {
    int sgn = v > dead ? 1 : (v < -dead ? -1 : 0);
    if (sgn != 0) {
      if (prev != 0 && sgn != prev) ++rep.crossings;
      prev = sgn;
    }
  }
  if (std::abs(s0) > 0) {
    double worst = 0.0;
    double dir = s0 > 0 ? 1.0 : -1.0;
    for (double v : tip) worst = std::max(worst, -dir * v);
    rep.overshoot = std::max(0.0, worst / std::abs(s0));
  }
  if (rep.crossings >= 2 && rep.overshoot >= 0.2)
    rep.label = "weakly_damped";
  else if (rep.crossings == 0 && rep.t_conv > 1.5 * best_t_conv)
    rep.label = "overdamped";
  else
    rep.label = "critically_damped";
  return rep;
}

struct DeflectionResult {
  std::vector<double> t;      // snapshot times
  std::vector<double> faces;  // face positions, clamped end first
  Mat w_spatial;   // (m+1) x snapshots, curvature double sum per snapshot
  Mat w_temporal;  // (m+1) x snapshots, velocity time integral from the anchor
  double max_discrepancy = 0.0;
  double rel_discrepancy = 0.0;  // relative to the spatial max magnitude
  double tip_initial = 0.0;      // anchor deflection at the free end
};

namespace detail {

// Clamped-end double integration of face curvature values (trapezoid), with
// the missing last face filled by linear extrapolation.
inline Vec double_integrate_anchor(const Vec& chi, double h) {
  const int m = static_cast<int>(chi.size());
  Vec faces(m + 1);
  faces.head(m) = chi;
  faces(m) = 2.0 * chi(m - 1) - chi(m - 2);
  Vec slope = Vec::Zero(m + 1), w = Vec::Zero(m + 1);
  for (int j = 0; j < m; ++j)
    slope(j + 1) = slope(j) + 0.5 * h * (faces(j) + faces(j + 1));
  for (int j = 0; j < m; ++j)
    w(j + 1) = w(j) + 0.5 * h * (slope(j) + slope(j + 1));
  return w;
}

// Same quantity under the scheme's own summation rule (midpoint slopes,
// rectangle accumulation); exact companion of the staggered dynamics.
inline Vec double_integrate_rect(const Vec& chi, double h) {
  const int m = static_cast<int>(chi.size());
  Vec w = Vec::Zero(m + 1);
  double slope = 0.0, acc = 0.0;
  for (int j = 0; j < m; ++j) {
    slope += h * chi(j);
    acc += h * slope;
    w(j + 1) = acc;
  }
  return w;
}

}  // namespace detail

// Reconstructs the transverse deflection of a bending state two ways:
//  (i) spatially, integrating the curvature field twice from the clamped end
//      (anchored at t = 0, increments accumulated with the scheme's own rule);
// (ii) temporally, integrating the recorded velocity field from the anchor.
// Their agreement ties the curvature and velocity histories together.
inline DeflectionResult reconstruct_deflection(const TrajectoryRecord& rec,
                                               const SimSystem& sys,
                                               double dt) {
  if (sys.x2_offset < 0 || sys.m <= 1)
    throw StructuralError("system carries no bending geometry");
  const NamedSignal* vel = rec.output("vel");
  if (!vel) throw StructuralError("record lacks the velocity output");
  const int m = sys.m;
  const double h = sys.h;
  const long nsnap = static_cast<long>(rec.snap_t.size());

  DeflectionResult out;
  out.t = rec.snap_t;
  out.faces.resize(m + 1);
  for (int j = 0; j <= m; ++j) out.faces[j] = j * h;
  out.w_spatial.resize(m + 1, nsnap);
  out.w_temporal.resize(m + 1, nsnap);

  Vec chi0 = rec.snapshots.col(0).segment(sys.x2_offset, m);
  Vec w0 = detail::double_integrate_anchor(chi0, h);
  out.tip_initial = w0(m);

  for (long k = 0; k < nsnap; ++k) {
    Vec chi = rec.snapshots.col(k).segment(sys.x2_offset, m);
    out.w_spatial.col(k) =
        w0 + detail::double_integrate_rect(Vec(chi - chi0), h);
  }

  // velocity rows live on faces 1..m; the clamped face does not move
  Vec I_acc = Vec::Zero(m);
  long snap_idx = 0;
  for (long k = 0; k < static_cast<long>(rec.t.size()); ++k) {
    if (k > 0)
      I_acc += 0.5 * dt * (vel->values.col(k - 1) + vel->values.col(k));
    if (snap_idx < nsnap &&
        std::lround(rec.snap_t[snap_idx] / dt) == k) {
      out.w_temporal(0, snap_idx) = 0.0;
      out.w_temporal.col(snap_idx).tail(m) = w0.tail(m) + I_acc;
      ++snap_idx;
    }
  }
  if (snap_idx != nsnap)
    throw StructuralError("snapshot times do not align with the step grid");

  double wmax = out.w_spatial.cwiseAbs().maxCoeff();
  out.max_discrepancy = (out.w_spatial - out.w_temporal).cwiseAbs().maxCoeff();
  out.rel_discrepancy = wmax > 0 ? out.max_discrepancy / wmax : 0.0;
  return out;
}

// Scheme-consistent free-end deflection series of an error curvature history,
// used as the regime classification signal; decays to zero with the error.
inline std::vector<double> tip_error_series(const TrajectoryRecord& rec,
                                            const std::string& output_name) {
  const NamedSignal* tip = rec.output(output_name);
  if (!tip) throw StructuralError("record lacks output " + output_name);
  std::vector<double> s(rec.t.size());
  for (std::size_t k = 0; k < rec.t.size(); ++k)
    s[k] = tip->values(0, static_cast<long>(k));
  return s;
}

}  // namespace phsobs
