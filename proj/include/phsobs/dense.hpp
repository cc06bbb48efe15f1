#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "phsobs/errors.hpp"

namespace phsobs {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

inline bool is_finite(const Mat& M) { return M.allFinite(); }

inline double spectral_norm(const Mat& M) {
  if (M.size() == 0) return 0.0;
  return Eigen::JacobiSVD<Mat>(M).singularValues()(0);
}

// Orthonormal basis of the kernel of M. Rank cut at rcond times the largest
// singular value; an empty kernel gives a matrix with zero columns.
inline Mat nullspace(const Mat& M, double rcond = 1e-10) {
  if (M.rows() == 0) return Mat::Identity(M.cols(), M.cols());
  Eigen::JacobiSVD<Mat> svd(M, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  double cut = sv.size() ? rcond * sv(0) : 0.0;
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > cut) ++rank;
  return svd.matrixV().rightCols(M.cols() - rank);
}

// Orthonormal basis of the range of M, keeping directions with singular value
// above the absolute threshold.
inline Mat orthonormal_range(const Mat& M, double abs_threshold) {
  if (M.size() == 0) return Mat::Zero(M.rows(), 0);
  Eigen::JacobiSVD<Mat> svd(M, Eigen::ComputeFullU);
  const auto& sv = svd.singularValues();
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > abs_threshold) ++rank;
  return svd.matrixU().leftCols(rank);
}

// Symmetric positive semidefinite square root; tiny negative eigenvalues from
// round-off are clamped to zero.
inline Mat sym_sqrt_psd(const Mat& S) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (S + S.transpose()));
  Vec lam = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

inline Vec lstsq(const Mat& A, const Vec& b) {
  if (A.cols() == 0) return Vec::Zero(0);
  return A.jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(b);
}

inline Mat inverse_checked(const Mat& M, const char* label) {
  Eigen::FullPivLU<Mat> lu(M);
  if (!lu.isInvertible())
    throw InvariantError(std::string(label) + " is singular");
  return lu.inverse();
}

// Trapezoid weights for an ordered grid.
inline std::vector<double> trapezoid_weights(const std::vector<double>& grid) {
  std::vector<double> w(grid.size(), 0.0);
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    double half = 0.5 * (grid[k + 1] - grid[k]);
    w[k] += half;
    w[k + 1] += half;
  }
  return w;
}

}  // namespace phsobs
