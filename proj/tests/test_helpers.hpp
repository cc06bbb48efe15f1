#pragma once

#include <random>

#include "phsobs/models.hpp"

namespace phsobs::testing {

// Random well-posed system for property tests: the P matrices carry the
// required alternating symmetry, P_N is kept away from singular, H is a
// constant diagonal in [0.5, 2].
inline SystemSpec random_spec(std::mt19937& rng, int N, int n) {
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  auto rand_mat = [&](int r, int c) {
    Mat M(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) M(i, j) = unif(rng);
    return M;
  };
  SystemSpec s;
  s.order = N;
  s.state_dim = n;
  s.a = 0.0;
  s.b = 1.0;
  s.P.resize(N + 1);
  {
    Mat R = rand_mat(n, n);
    Mat Sk = rand_mat(n, n);
    s.P[0] = (Sk - Sk.transpose()) - R.transpose() * R;
  }
  for (int k = 1; k <= N; ++k) {
    Mat R = rand_mat(n, n);
    s.P[k] = (k % 2 == 1) ? Mat(R + R.transpose()) : Mat(R - R.transpose());
  }
  // keep the top-order matrix comfortably nonsingular
  for (int tries = 0; tries < 64; ++tries) {
    Eigen::JacobiSVD<Mat> svd(s.P[N]);
    if (svd.singularValues().minCoeff() > 0.3) break;
    if (N % 2 == 1) {
      s.P[N] += Mat::Identity(n, n);
    } else {
      Mat J = Mat::Zero(n, n);
      for (int i = 0; i + 1 < n; i += 2) {
        J(i, i + 1) = 1.0;
        J(i + 1, i) = -1.0;
      }
      s.P[N] += J;
    }
  }
  Vec hd(n);
  for (int i = 0; i < n; ++i) hd(i) = 0.5 + 1.5 * (0.5 * (unif(rng) + 1.0));
  Mat Hc = hd.asDiagonal();
  s.H = [Hc](double) { return Hc; };
  s.coercivity_m = 0.25;
  s.coercivity_M = 4.0;
  return s;
}

inline Vec random_vec(std::mt19937& rng, int n) {
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = unif(rng);
  return v;
}

}  // namespace phsobs::testing
