#pragma once

// Stability of SEM coefficient matrices: spectral radius strictly below one
// (with a numerical margin), which in particular excludes the eigenvalue 1.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>

#include "error.hpp"

namespace dcgx {

struct StabilityReport {
  double spectral_radius = 0.0;
  double max_real_eigenvalue_gap = 0.0;  // min over eigenvalues of |lambda - 1|
  bool stable = true;
};

inline Eigen::VectorXcd eigenvalues(const Eigen::MatrixXd& B) {
  if (B.rows() != B.cols()) throw Error(Errc::ShapeMismatch, "matrix must be square");
  if (B.rows() == 0) return {};
  Eigen::EigenSolver<Eigen::MatrixXd> solver(B, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) {
    throw Error(Errc::EigenFailure, "unsymmetric eigensolver did not converge");
  }
  return solver.eigenvalues();
}

inline double spectral_radius(const Eigen::MatrixXd& B) {
  const Eigen::VectorXcd ev = eigenvalues(B);
  double radius = 0.0;
  for (const auto& z : ev) radius = std::max(radius, std::abs(z));
  return radius;
}

inline StabilityReport stability_report(const Eigen::MatrixXd& B, double eps_stab) {
  const Eigen::VectorXcd ev = eigenvalues(B);
  StabilityReport report;
  report.max_real_eigenvalue_gap = std::numeric_limits<double>::infinity();
  for (const auto& z : ev) {
    report.spectral_radius = std::max(report.spectral_radius, std::abs(z));
    report.max_real_eigenvalue_gap = std::min(report.max_real_eigenvalue_gap, std::abs(z - 1.0));
  }
  report.stable = report.spectral_radius <= 1.0 - eps_stab;
  return report;
}

inline bool is_stable(const Eigen::MatrixXd& B, double eps_stab) {
  return spectral_radius(B) <= 1.0 - eps_stab;
}

/// Treats eigensolver failure as "not stable".
inline bool is_stable_or_reject(const Eigen::MatrixXd& B, double eps_stab) noexcept {
  try {
    return is_stable(B, eps_stab);
  } catch (const Error&) {
    return false;
  }
}

/// Cheap bounds on the spectral radius: lower <= rho(B) <= upper.
/// The lower bound uses |tr(B^2)| <= p rho^2; the upper bound is the smallest
/// of the Frobenius, max-row-sum and max-column-sum norms.
struct RadiusBounds {
  double lower = 0.0;
  double upper = 0.0;
};

inline RadiusBounds spectral_radius_bounds(const Eigen::MatrixXd& B) {
  const auto p = static_cast<double>(B.rows());
  double trace_sq = 0.0;
  for (Eigen::Index j = 0; j < B.rows(); ++j) {
    for (Eigen::Index k = 0; k < B.cols(); ++k) trace_sq += B(j, k) * B(k, j);
  }
  RadiusBounds bounds;
  bounds.lower = std::sqrt(std::abs(trace_sq) / p);
  const double frob = B.norm();
  const double rows = B.cwiseAbs().rowwise().sum().maxCoeff();
  const double cols = B.cwiseAbs().colwise().sum().maxCoeff();
  bounds.upper = std::min({frob, rows, cols});
  return bounds;
}

/// log|det(I - B)| via partial-pivot LU, together with the determinant sign.
struct LogDet {
  double log_abs = 0.0;
  int sign = 1;
};

inline LogDet log_det_i_minus(const Eigen::MatrixXd& B) {
  const auto p = B.rows();
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(Eigen::MatrixXd::Identity(p, p) - B);
  const Eigen::MatrixXd& packed = lu.matrixLU();
  LogDet out;
  out.sign = static_cast<int>(lu.permutationP().determinant());
  for (Eigen::Index j = 0; j < p; ++j) {
    const double d = packed(j, j);
    if (d == 0.0) {
      out.log_abs = -std::numeric_limits<double>::infinity();
      out.sign = 0;
      return out;
    }
    if (d < 0) out.sign = -out.sign;
    out.log_abs += std::log(std::abs(d));
  }
  return out;
}

}  // namespace dcgx
