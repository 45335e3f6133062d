#pragma once

// The three likelihood forms used by the sampler:
//  * the Laplace marginal of a cluster's expression rows, tau integrated out,
//    with the |det(I - B)| Jacobian;
//  * the predictive of one expression row given the rest of a cluster, with
//    the intercept integrated out;
//  * the multivariate-t predictive of one covariate row under the
//    normal-inverse-Wishart similarity model.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "distributions.hpp"
#include "error.hpp"
#include "model.hpp"
#include "stability.hpp"

namespace dcgx {

enum class YPredictiveForm {
  Exact,      // conjugate normal, each member weighted by its own tau row
  AsPrinted,  // literal covariance expression, shared Sigma, no scale factor
};

/// Per-cluster sufficient statistics for the label update.
struct ClusterSuffStats {
  std::vector<int> member_ids;  // sorted
  int count = 0;
  Eigen::VectorXd sum_X;
  Eigen::MatrixXd sum_XXt;
  Eigen::VectorXd sum_Y;
  Eigen::VectorXd inv_tau_sum;  // (j): sum_i 1 / tau_ij
  Eigen::MatrixXd weighted_Y;   // row j: sum_i y_i / tau_ij

  static ClusterSuffStats empty(Eigen::Index p, Eigen::Index q) {
    ClusterSuffStats s;
    s.sum_X = Eigen::VectorXd::Zero(q);
    s.sum_XXt = Eigen::MatrixXd::Zero(q, q);
    s.sum_Y = Eigen::VectorXd::Zero(p);
    s.inv_tau_sum = Eigen::VectorXd::Zero(p);
    s.weighted_Y = Eigen::MatrixXd::Zero(p, p);
    return s;
  }

  /// tau may be empty, in which case every tau_ij is taken to be 1.
  void add(int i, const Dataset& data, const Eigen::MatrixXd& tau) { update(i, data, tau, 1.0); }
  void remove(int i, const Dataset& data, const Eigen::MatrixXd& tau) { update(i, data, tau, -1.0); }

  static ClusterSuffStats from_members(std::span<const int> members, const Dataset& data,
                                       const Eigen::MatrixXd& tau) {
    ClusterSuffStats s = empty(data.p(), data.q());
    for (int i : members) s.add(i, data, tau);
    return s;
  }

 private:
  void update(int i, const Dataset& data, const Eigen::MatrixXd& tau, double sign) {
    const auto x = data.X.row(i).transpose();
    const auto y = data.Y.row(i).transpose();
    sum_X += sign * x;
    sum_XXt += sign * (x * x.transpose());
    sum_Y += sign * y;
    for (Eigen::Index j = 0; j < y.size(); ++j) {
      const double w = tau.size() == 0 ? 1.0 : 1.0 / tau(i, j);
      inv_tau_sum(j) += sign * w;
      weighted_Y.row(j) += sign * w * y.transpose();
    }
    if (sign > 0) {
      member_ids.insert(std::lower_bound(member_ids.begin(), member_ids.end(), i), i);
      ++count;
    } else {
      auto it = std::lower_bound(member_ids.begin(), member_ids.end(), i);
      if (it == member_ids.end() || *it != i) {
        throw Error(Errc::ShapeMismatch, "unit is not a member of this cluster");
      }
      member_ids.erase(it);
      --count;
    }
  }
};

/// I - B with its log-determinant, cached per cluster during a label sweep.
struct ClusterKernel {
  Eigen::MatrixXd A;
  double log_abs_det = 0.0;

  static ClusterKernel of(const Eigen::MatrixXd& B) {
    ClusterKernel k;
    k.A = Eigen::MatrixXd::Identity(B.rows(), B.cols()) - B;
    const LogDet ld = log_det_i_minus(B);
    if (ld.sign == 0) throw Error(Errc::SingularJacobian, "I - B is singular");
    k.log_abs_det = ld.log_abs;
    return k;
  }
};

/// SEM residuals r_i = (I - B) y_i - M for the selected rows, one row per unit.
inline Eigen::MatrixXd sem_residuals(const Eigen::MatrixXd& Y, std::span<const int> rows,
                                     const Eigen::MatrixXd& B, const Eigen::VectorXd& M) {
  const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(B.rows(), B.cols()) - B;
  Eigen::MatrixXd R(static_cast<Eigen::Index>(rows.size()), B.rows());
  for (Eigen::Index r = 0; r < R.rows(); ++r) {
    R.row(r) = (A * Y.row(rows[r]).transpose() - M).transpose();
  }
  return R;
}

/// Log of prod_i P_E((I - B) y_i - M) |det(I - B)| over the selected rows.
inline double sem_marginal_loglik(const Eigen::MatrixXd& Y, std::span<const int> rows,
                                  const Eigen::MatrixXd& B, const Eigen::VectorXd& M,
                                  const Eigen::VectorXd& sigma, bool strict_det = false) {
  for (Eigen::Index j = 0; j < sigma.size(); ++j) {
    if (!(sigma(j) > 0.0)) throw Error(Errc::NonPositiveSigma, "noise scale must be > 0");
  }
  const LogDet ld = log_det_i_minus(B);
  if (ld.sign == 0 || !std::isfinite(ld.log_abs)) {
    throw Error(Errc::SingularJacobian, "det(I - B) underflowed");
  }
  const auto count = static_cast<double>(rows.size());
  if (strict_det && ld.sign < 0 && rows.size() % 2 == 1) {
    // det(I - B)^|S| is negative: not a density.
    return -std::numeric_limits<double>::infinity();
  }
  double total = count * ld.log_abs;
  const Eigen::MatrixXd R = sem_residuals(Y, rows, B, M);
  for (Eigen::Index j = 0; j < sigma.size(); ++j) {
    const double norm = -0.5 * std::log(2.0 * sigma(j));
    const double rate = std::sqrt(2.0 / sigma(j));
    total += count * norm - rate * R.col(j).cwiseAbs().sum();
  }
  return total;
}

inline double sem_marginal_loglik(const Eigen::MatrixXd& Y_cluster, const Eigen::MatrixXd& B,
                                  const Eigen::VectorXd& M, const Eigen::VectorXd& sigma,
                                  bool strict_det = false) {
  std::vector<int> rows(static_cast<std::size_t>(Y_cluster.rows()));
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<int>(i);
  return sem_marginal_loglik(Y_cluster, rows, B, M, sigma, strict_det);
}

/// Sum of cluster marginal log-likelihoods for a whole chain state.
inline double state_y_loglik(const ChainState& state, const Dataset& data, bool strict_det = false) {
  const auto members = members_by_cluster(state);
  double total = 0.0;
  for (std::size_t l = 0; l < state.clusters.size(); ++l) {
    const auto& c = state.clusters[l];
    total += sem_marginal_loglik(data.Y, members[l], c.B, c.M, c.sigma, strict_det);
  }
  return total;
}

// ---------------------------------------------------------------------------
// Intercept-collapsed Y predictive
// ---------------------------------------------------------------------------

/// log P(y_i | other members, B, Sigma) for an existing cluster whose
/// statistics exclude unit i. `tau_row` is unit i's mixing scales.
inline double y_collapsed_predictive_logpdf(const Eigen::VectorXd& y, const ClusterSuffStats& stats,
                                            const ClusterKernel& kernel, const Eigen::VectorXd& sigma,
                                            const Eigen::VectorXd& tau_row, double lambda,
                                            YPredictiveForm form = YPredictiveForm::Exact) {
  if (stats.count <= 0) throw Error(Errc::TooSmall, "existing-cluster predictive needs members");
  const Eigen::VectorXd Ay = kernel.A * y;
  double total = kernel.log_abs_det;
  const auto p = y.size();
  if (form == YPredictiveForm::AsPrinted) {
    const Eigen::VectorXd A_sum = kernel.A * stats.sum_Y;
    const double n_minus = stats.count;
    for (Eigen::Index j = 0; j < p; ++j) {
      const double scaled = sigma(j) * tau_row(j) / lambda;
      const double mean = A_sum(j) / (n_minus + scaled);
      const double var = (n_minus + 1.0 + scaled) / (n_minus + scaled);
      total += normal_logpdf(Ay(j), mean, var);
    }
    return total;
  }
  for (Eigen::Index j = 0; j < p; ++j) {
    const double precision = 1.0 / lambda + stats.inv_tau_sum(j) / sigma(j);
    const double weighted = kernel.A.row(j).dot(stats.weighted_Y.row(j)) / sigma(j);
    const double mean = weighted / precision;
    const double var = 1.0 / precision + sigma(j) * tau_row(j);
    total += normal_logpdf(Ay(j), mean, var);
  }
  return total;
}

/// log P(y_i | B*, Sigma*) for a fresh cluster, intercept integrated over its prior.
inline double y_new_cluster_logpdf(const Eigen::VectorXd& y, const ClusterKernel& kernel,
                                   const Eigen::VectorXd& sigma, const Eigen::VectorXd& tau_row,
                                   double lambda, YPredictiveForm form = YPredictiveForm::Exact) {
  const Eigen::VectorXd Ay = kernel.A * y;
  double total = kernel.log_abs_det;
  for (Eigen::Index j = 0; j < y.size(); ++j) {
    const double s = sigma(j) * tau_row(j);
    const double var = form == YPredictiveForm::AsPrinted ? 1.0 + lambda / s : lambda + s;
    total += normal_logpdf(Ay(j), 0.0, var);
  }
  return total;
}

// ---------------------------------------------------------------------------
// Covariate similarity: N(mu, Lambda), mu ~ N(0, omega Lambda), Lambda ~ IW(q, I)
// ---------------------------------------------------------------------------

inline double x_new_cluster_logpdf(const Eigen::VectorXd& x, double omega) {
  const auto q = x.size();
  return mvt_logpdf(x, 1.0, Eigen::VectorXd::Zero(q),
                    (1.0 + omega) * Eigen::MatrixXd::Identity(q, q));
}

/// Multivariate-t predictive of x given the (leave-one-out) members in `stats`.
inline double x_collapsed_predictive_logpdf(const Eigen::VectorXd& x, const ClusterSuffStats& stats,
                                            double omega) {
  if (stats.count == 0) return x_new_cluster_logpdf(x, omega);
  const auto q = x.size();
  const double n = stats.count;
  const double shrink = omega / (1.0 + n * omega);
  const Eigen::VectorXd loc = shrink * stats.sum_X;
  const Eigen::MatrixXd psi = Eigen::MatrixXd::Identity(q, q) -
                              shrink * stats.sum_X * stats.sum_X.transpose() + stats.sum_XXt;
  const double factor = (omega + 1.0 + n * omega) / ((n + 1.0) * (1.0 + n * omega));
  return mvt_logpdf(x, n + 1.0, loc, factor * psi);
}

inline double log_multivariate_gamma(double a, Eigen::Index q) {
  double total = 0.25 * static_cast<double>(q * (q - 1)) * std::log(std::numbers::pi);
  for (Eigen::Index j = 0; j < q; ++j) total += std::lgamma(a - 0.5 * static_cast<double>(j));
  return total;
}

/// Closed-form log g(X_S): the covariate marginal of a whole cluster.
inline double x_cluster_log_marginal(const ClusterSuffStats& stats, Eigen::Index q, double omega) {
  if (stats.count == 0) return 0.0;
  const double n = stats.count;
  const double kappa0 = 1.0 / omega;
  const double kappa_n = kappa0 + n;
  const auto qd = static_cast<double>(q);
  const double nu0 = qd;
  const double nu_n = nu0 + n;
  const Eigen::MatrixXd psi_n = Eigen::MatrixXd::Identity(q, q) + stats.sum_XXt -
                                stats.sum_X * stats.sum_X.transpose() / kappa_n;
  Eigen::LLT<Eigen::MatrixXd> llt(psi_n);
  if (llt.info() != Eigen::Success) throw Error(Errc::NotPD, "posterior scale is not positive definite");
  double log_det = 0.0;
  for (Eigen::Index j = 0; j < q; ++j) log_det += 2.0 * std::log(llt.matrixL()(j, j));
  return -0.5 * n * qd * std::log(std::numbers::pi) + log_multivariate_gamma(0.5 * nu_n, q) -
         log_multivariate_gamma(0.5 * nu0, q) - 0.5 * nu_n * log_det +
         0.5 * qd * (std::log(kappa0) - std::log(kappa_n));
}

/// Sum of log g(X_S) over the clusters of a state.
inline double state_x_logmarginal(const ChainState& state, const Dataset& data, double omega) {
  const auto members = members_by_cluster(state);
  double total = 0.0;
  for (const auto& m : members) {
    total += x_cluster_log_marginal(ClusterSuffStats::from_members(m, data, {}), data.q(), omega);
  }
  return total;
}

}  // namespace dcgx
