#pragma once

// Within-chain MCMC updates. One sweep runs, per cluster, the Gibbs steps
// for phi, sigma, M, gamma and eta and the random-walk Metropolis step for
// B; then the latent scales tau; then the cluster labels with auxiliary
// components (Neal's Algorithm 8).
//
// Heated chains (temperature T > 1) raise only likelihood terms to 1/T.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "distributions.hpp"
#include "likelihood.hpp"
#include "model.hpp"
#include "random.hpp"
#include "stability.hpp"

namespace dcgx {

// ---------------------------------------------------------------------------
// Full-conditional parameters. Kept separate from the draws so they can be
// checked directly.
// ---------------------------------------------------------------------------

struct ShapeScale {
  double shape = 0.0;
  double scale = 0.0;
};

inline int edge_count(const ClusterParams& cluster) {
  int total = 0;
  for (Eigen::Index j = 0; j < cluster.gamma.rows(); ++j) {
    for (Eigen::Index k = 0; k < cluster.gamma.cols(); ++k) {
      if (j != k) total += cluster.gamma(j, k);
    }
  }
  return total;
}

/// Beta(a, b) parameters of phi | gamma.
inline std::pair<double, double> phi_conditional(const ClusterParams& cluster, const Hyperparams& hp) {
  const auto p = static_cast<double>(cluster.p());
  const double edges = edge_count(cluster);
  return {edges + hp.a_phi, p * p - p - edges + hp.b_phi};
}

/// Inverse-gamma parameters of sigma_j, one per gene.
inline std::vector<ShapeScale> sigma_conditional(const ClusterParams& cluster, const Dataset& data,
                                                 std::span<const int> members,
                                                 const Eigen::MatrixXd& tau, const Hyperparams& hp,
                                                 double temperature = 1.0) {
  const Eigen::MatrixXd R = sem_residuals(data.Y, members, cluster.B, cluster.M);
  std::vector<ShapeScale> out(static_cast<std::size_t>(cluster.p()));
  for (Eigen::Index j = 0; j < cluster.p(); ++j) {
    double ss = 0.0;
    for (Eigen::Index r = 0; r < R.rows(); ++r) ss += R(r, j) * R(r, j) / tau(members[r], j);
    out[j].shape = hp.a_sigma + 0.5 * static_cast<double>(members.size()) / temperature;
    out[j].scale = hp.b_sigma + 0.5 * ss / temperature;
  }
  return out;
}

/// Diagonal Gaussian conditional of the intercepts.
struct DiagonalGaussian {
  Eigen::VectorXd mean;
  Eigen::VectorXd var;
};

inline DiagonalGaussian M_conditional(const ClusterParams& cluster, const Dataset& data,
                                      std::span<const int> members, const Eigen::MatrixXd& tau,
                                      const Hyperparams& hp, double temperature = 1.0) {
  const auto p = cluster.p();
  const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(p, p) - cluster.B;
  Eigen::VectorXd precision = Eigen::VectorXd::Constant(p, 1.0 / hp.lambda);
  Eigen::VectorXd weighted = Eigen::VectorXd::Zero(p);
  for (int i : members) {
    const Eigen::VectorXd Ay = A * data.Y.row(i).transpose();
    for (Eigen::Index j = 0; j < p; ++j) {
      const double inv_var = 1.0 / (temperature * cluster.sigma(j) * tau(i, j));
      precision(j) += inv_var;
      weighted(j) += inv_var * Ay(j);
    }
  }
  DiagonalGaussian out;
  out.var = precision.cwiseInverse();
  out.mean = out.var.cwiseProduct(weighted);
  return out;
}

/// P(gamma_jk = 1 | B_jk, phi, eta), evaluated in log space.
inline double gamma_inclusion_prob(double b, double phi, double eta, double nu0) {
  const double log_slab = std::log(phi) + normal_logpdf(b, 0.0, eta);
  const double log_spike = std::log1p(-phi) + normal_logpdf(b, 0.0, nu0 * eta);
  return 1.0 / (1.0 + std::exp(log_spike - log_slab));
}

inline ShapeScale eta_conditional(const ClusterParams& cluster, const Hyperparams& hp) {
  const auto p = static_cast<double>(cluster.p());
  double ss = 0.0;
  for (Eigen::Index j = 0; j < cluster.p(); ++j) {
    for (Eigen::Index k = 0; k < cluster.p(); ++k) {
      if (j == k) continue;
      const double b = cluster.B(j, k);
      ss += cluster.gamma(j, k) ? b * b : b * b / hp.nu0;
    }
  }
  return {hp.a_eta + 0.5 * (p * p - p), hp.b_eta + 0.5 * ss};
}

// ---------------------------------------------------------------------------
// Draws
// ---------------------------------------------------------------------------

inline double update_phi(ClusterParams& cluster, const Hyperparams& hp, Rng& rng) {
  const auto [a, b] = phi_conditional(cluster, hp);
  cluster.phi = beta_variate(rng, a, b);
  return cluster.phi;
}

inline const Eigen::VectorXd& update_sigma(ClusterParams& cluster, const Dataset& data,
                                           std::span<const int> members, const Eigen::MatrixXd& tau,
                                           const Hyperparams& hp, Rng& rng, double temperature = 1.0) {
  const auto params = sigma_conditional(cluster, data, members, tau, hp, temperature);
  for (Eigen::Index j = 0; j < cluster.p(); ++j) {
    cluster.sigma(j) = inv_gamma_variate(rng, params[j].shape, params[j].scale);
  }
  return cluster.sigma;
}

inline const Eigen::VectorXd& update_M(ClusterParams& cluster, const Dataset& data,
                                       std::span<const int> members, const Eigen::MatrixXd& tau,
                                       const Hyperparams& hp, Rng& rng, double temperature = 1.0) {
  const DiagonalGaussian cond = M_conditional(cluster, data, members, tau, hp, temperature);
  for (Eigen::Index j = 0; j < cluster.p(); ++j) {
    cluster.M(j) = normal(rng, cond.mean(j), std::sqrt(cond.var(j)));
  }
  return cluster.M;
}

inline const Eigen::MatrixXi& update_gamma(ClusterParams& cluster, const Hyperparams& hp, Rng& rng) {
  for (Eigen::Index j = 0; j < cluster.p(); ++j) {
    for (Eigen::Index k = 0; k < cluster.p(); ++k) {
      if (j == k) {
        cluster.gamma(j, k) = 0;
        continue;
      }
      const double prob = gamma_inclusion_prob(cluster.B(j, k), cluster.phi, cluster.eta, hp.nu0);
      cluster.gamma(j, k) = bernoulli(rng, prob) ? 1 : 0;
    }
  }
  return cluster.gamma;
}

inline double update_eta(ClusterParams& cluster, const Hyperparams& hp, Rng& rng) {
  const ShapeScale params = eta_conditional(cluster, hp);
  cluster.eta = inv_gamma_variate(rng, params.shape, params.scale);
  return cluster.eta;
}

struct BUpdateStats {
  int proposals = 0;
  int accepts = 0;
  int reversals = 0;
  int reversal_accepts = 0;
  int pair_proposals = 0;
  int pair_accepts = 0;
};

/// Independence Metropolis-Hastings on each unordered pair (B(j, k), B(k, j)).
///
/// The proposal is an equal mixture of four components: B(j, k) from the
/// least-squares conditional of row j with B(k, j) from the spike, the mirror
/// image, both entries from the spike, and both from their conditionals. The least-squares conditional
/// treats row noise as Gaussian with variance sigma * T, widened by a factor
/// of two in scale. Neither component depends on the current pair, so the
/// Hastings correction is q(old) / q(new). Gamma is left unchanged.
inline void update_B_pairs(ClusterParams& cluster, const Dataset& data, std::span<const int> members,
                           const Hyperparams& hp, Rng& rng, double temperature, BUpdateStats& stats) {
  const auto p = cluster.p();
  const auto count = static_cast<Eigen::Index>(members.size());
  if (count == 0) return;
  Eigen::MatrixXd Ymem(count, p);
  for (Eigen::Index r = 0; r < count; ++r) Ymem.row(r) = data.Y.row(members[r]);
  Eigen::MatrixXd R = Ymem * (Eigen::MatrixXd::Identity(p, p) - cluster.B).transpose();
  R.rowwise() -= cluster.M.transpose();
  const Eigen::VectorXd sumsq = Ymem.colwise().squaredNorm().transpose();
  const double spike_var = hp.nu0 * cluster.eta;
  double log_det = log_det_i_minus(cluster.B).log_abs;

  struct Conditional {
    double mean, var;
  };
  // Least-squares conditional of B(a, c) given the rest of row a.
  auto conditional = [&](Eigen::Index a, Eigen::Index c) {
    const double cross = Ymem.col(c).dot(R.col(a)) + cluster.B(a, c) * sumsq(c);
    return Conditional{cross / sumsq(c), 4.0 * cluster.sigma(a) * temperature / sumsq(c)};
  };
  auto log_q = [&](double b_jk, double b_kj, const Conditional& cj, const Conditional& ck) {
    const double jk_slab = normal_logpdf(b_jk, cj.mean, cj.var);
    const double kj_slab = normal_logpdf(b_kj, ck.mean, ck.var);
    const double jk_spike = normal_logpdf(b_jk, 0.0, spike_var);
    const double kj_spike = normal_logpdf(b_kj, 0.0, spike_var);
    const std::array<double, 4> parts{jk_slab + kj_spike, jk_spike + kj_slab, jk_spike + kj_spike,
                                      jk_slab + kj_slab};
    return log_sum_exp(parts);
  };
  auto log_prior = [&](Eigen::Index a, Eigen::Index c, double b) {
    return normal_logpdf(b, 0.0, cluster.eta * (cluster.gamma(a, c) ? 1.0 : hp.nu0));
  };

  for (Eigen::Index j = 0; j < p; ++j) {
    for (Eigen::Index k = j + 1; k < p; ++k) {
      if (!(sumsq(j) > 0.0) || !(sumsq(k) > 0.0)) continue;
      ++stats.pair_proposals;
      const Conditional cj = conditional(j, k);
      const Conditional ck = conditional(k, j);
      const int pick = static_cast<int>(4.0 * uniform_open(rng));
      const double z1 = std_normal(rng);
      const double z2 = std_normal(rng);
      const double log_u = std::log(uniform_open(rng));
      const double spike_sd = std::sqrt(spike_var);
      double new_jk = spike_sd * z1;
      double new_kj = spike_sd * z2;
      if (pick == 0 || pick == 3) new_jk = cj.mean + std::sqrt(cj.var) * z1;
      if (pick == 1 || pick == 3) new_kj = ck.mean + std::sqrt(ck.var) * z2;
      const double old_jk = cluster.B(j, k);
      const double old_kj = cluster.B(k, j);
      Eigen::MatrixXd B_new = cluster.B;
      B_new(j, k) = new_jk;
      B_new(k, j) = new_kj;
      const LogDet ld = log_det_i_minus(B_new);
      if (ld.sign == 0 || !std::isfinite(ld.log_abs)) continue;
      if (hp.strict_paper_det && ld.sign < 0 && count % 2 == 1) continue;
      const double rate_j = std::sqrt(2.0 / cluster.sigma(j));
      const double rate_k = std::sqrt(2.0 / cluster.sigma(k));
      double abs_change = 0.0;
      for (Eigen::Index r = 0; r < count; ++r) {
        const double rj = R(r, j) - (new_jk - old_jk) * Ymem(r, k);
        const double rk = R(r, k) - (new_kj - old_kj) * Ymem(r, j);
        abs_change += rate_j * (std::abs(rj) - std::abs(R(r, j))) + rate_k * (std::abs(rk) - std::abs(R(r, k)));
      }
      double log_ratio = (static_cast<double>(count) * (ld.log_abs - log_det) - abs_change) / temperature;
      if (!hp.likelihood_only_b_ratio) {
        log_ratio += log_prior(j, k, new_jk) + log_prior(k, j, new_kj) - log_prior(j, k, old_jk) -
                     log_prior(k, j, old_kj);
      }
      log_ratio += log_q(old_jk, old_kj, cj, ck) - log_q(new_jk, new_kj, cj, ck);
      if (!(log_u < log_ratio)) continue;
      if (!is_stable_or_reject(B_new, hp.eps_stab)) continue;
      ++stats.pair_accepts;
      R.col(j) -= (new_jk - old_jk) * Ymem.col(k);
      R.col(k) -= (new_kj - old_kj) * Ymem.col(j);
      cluster.B = std::move(B_new);
      log_det = ld.log_abs;
    }
  }
}

/// Log ratio of the spike-and-slab densities of B(j, k) + delta and B(j, k).
inline double b_prior_log_ratio(const ClusterParams& cluster, Eigen::Index j, Eigen::Index k, double delta,
                                double nu0) {
  const double var = cluster.eta * (cluster.gamma(j, k) ? 1.0 : nu0);
  const double b = cluster.B(j, k);
  return -delta * (2.0 * b + delta) / (2.0 * var);
}

/// Log acceptance ratio of moving B(j, k) by `delta`: the likelihood ratio
/// tempered by 1/T plus, unless hp.likelihood_only_b_ratio, the untempered
/// prior ratio. Exposed for tests; update_B computes the same quantity
/// incrementally.
inline double b_move_log_ratio(const ClusterParams& cluster, const Dataset& data,
                               std::span<const int> members, Eigen::Index j, Eigen::Index k,
                               double delta, double temperature, const Hyperparams& hp) {
  ClusterParams moved = cluster;
  moved.B(j, k) += delta;
  const double now =
      sem_marginal_loglik(data.Y, members, cluster.B, cluster.M, cluster.sigma, hp.strict_paper_det);
  const double next = sem_marginal_loglik(data.Y, members, moved.B, moved.M, moved.sigma, hp.strict_paper_det);
  const double prior = hp.likelihood_only_b_ratio ? 0.0 : b_prior_log_ratio(cluster, j, k, delta, hp.nu0);
  return (next - now) / temperature + prior;
}

/// Entrywise random-walk Metropolis over the off-diagonal entries of B.
///
/// Proposals that leave the stable set are rejected outright; the others are
/// accepted on the tempered ratio of Laplace marginal likelihoods times the
/// spike-and-slab prior ratio (see b_move_log_ratio). Changing
/// B(j, k) only moves column j of the residuals, and the determinant ratio is
/// 1 - delta * (I - B)^{-1}(k, j), so each proposal costs O(|S|) plus an
/// eigensolve when the likelihood test passes. The entrywise pass is followed
/// by edge reversals, which swap B(j, k) and B(k, j) together with their
/// indicators, and by update_B_pairs when hp.pair_moves is set.
inline BUpdateStats update_B(ClusterParams& cluster, const Dataset& data, std::span<const int> members,
                             const Hyperparams& hp, Rng& rng, double temperature = 1.0,
                             double tau_prop = -1.0) {
  if (tau_prop <= 0.0) tau_prop = hp.tau_prop;
  const auto p = cluster.p();
  const auto count = static_cast<Eigen::Index>(members.size());
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(p, p) - cluster.B;
  Eigen::MatrixXd A_inv = A.partialPivLu().inverse();
  Eigen::MatrixXd Ymem(count, p);
  for (Eigen::Index r = 0; r < count; ++r) Ymem.row(r) = data.Y.row(members[r]);
  Eigen::MatrixXd R = Ymem * A.transpose();
  R.rowwise() -= cluster.M.transpose();

  BUpdateStats stats;
  for (Eigen::Index j = 0; j < p; ++j) {
    const double rate = std::sqrt(2.0 / cluster.sigma(j));
    for (Eigen::Index k = 0; k < p; ++k) {
      if (j == k) continue;
      ++stats.proposals;
      const double delta = tau_prop * std_normal(rng);
      const double log_u = std::log(uniform_open(rng));
      if (delta == 0.0) {
        ++stats.accepts;
        continue;
      }
      const double det_ratio = 1.0 - delta * A_inv(k, j);
      if (det_ratio == 0.0) continue;
      if (hp.strict_paper_det && det_ratio < 0.0 && count % 2 == 1) continue;
      double log_ratio = static_cast<double>(count) * std::log(std::abs(det_ratio));
      double abs_change = 0.0;
      for (Eigen::Index r = 0; r < count; ++r) {
        abs_change += std::abs(R(r, j) - delta * Ymem(r, k)) - std::abs(R(r, j));
      }
      log_ratio -= rate * abs_change;
      log_ratio /= temperature;
      if (!hp.likelihood_only_b_ratio) log_ratio += b_prior_log_ratio(cluster, j, k, delta, hp.nu0);
      if (!(log_u < log_ratio)) continue;

      cluster.B(j, k) += delta;
      if (!is_stable_or_reject(cluster.B, hp.eps_stab)) {
        cluster.B(j, k) -= delta;
        continue;
      }
      ++stats.accepts;
      R.col(j) -= delta * Ymem.col(k);
      // Sherman-Morrison for A - delta e_j e_k^T.
      const Eigen::VectorXd u = A_inv.col(j);
      const Eigen::RowVectorXd v = A_inv.row(k);
      A_inv += (delta / det_ratio) * u * v;
      A(j, k) -= delta;
    }
  }

  // Edge reversals: swap (B, gamma) at (j, k) and (k, j) for pairs holding a
  // slab entry. The move is its own inverse and leaves the prior unchanged.
  double log_det = log_det_i_minus(cluster.B).log_abs;
  for (Eigen::Index j = 0; j < p; ++j) {
    for (Eigen::Index k = j + 1; k < p; ++k) {
      if (cluster.gamma(j, k) == 0 && cluster.gamma(k, j) == 0) continue;
      const double b_jk = cluster.B(j, k);
      const double b_kj = cluster.B(k, j);
      const double log_u = std::log(uniform_open(rng));
      ++stats.reversals;
      if (b_jk == b_kj) continue;
      Eigen::MatrixXd B_new = cluster.B;
      B_new(j, k) = b_kj;
      B_new(k, j) = b_jk;
      const LogDet ld = log_det_i_minus(B_new);
      if (ld.sign == 0) continue;
      if (hp.strict_paper_det && ld.sign < 0 && count % 2 == 1) continue;
      const double rate_j = std::sqrt(2.0 / cluster.sigma(j));
      const double rate_k = std::sqrt(2.0 / cluster.sigma(k));
      double abs_change = 0.0;
      for (Eigen::Index r = 0; r < count; ++r) {
        const double rj = R(r, j) + (b_jk - b_kj) * Ymem(r, k);
        const double rk = R(r, k) + (b_kj - b_jk) * Ymem(r, j);
        abs_change += rate_j * (std::abs(rj) - std::abs(R(r, j))) + rate_k * (std::abs(rk) - std::abs(R(r, k)));
      }
      const double log_ratio = (static_cast<double>(count) * (ld.log_abs - log_det) - abs_change) / temperature;
      if (!(log_u < log_ratio)) continue;
      if (!is_stable_or_reject(B_new, hp.eps_stab)) continue;
      ++stats.reversal_accepts;
      R.col(j) += (b_jk - b_kj) * Ymem.col(k);
      R.col(k) += (b_kj - b_jk) * Ymem.col(j);
      cluster.B = std::move(B_new);
      std::swap(cluster.gamma(j, k), cluster.gamma(k, j));
      log_det = ld.log_abs;
    }
  }
  if (hp.pair_moves) update_B_pairs(cluster, data, members, hp, rng, temperature, stats);
  return stats;
}

/// tau_ij ~ GIG(2, r_ij^2 / sigma_j, 1/2) for every unit and gene.
inline void update_tau(ChainState& state, const Dataset& data, Rng& rng) {
  const auto p = data.p();
  std::vector<Eigen::MatrixXd> A;
  A.reserve(state.clusters.size());
  for (const auto& c : state.clusters) A.push_back(Eigen::MatrixXd::Identity(p, p) - c.B);
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const auto& c = state.clusters[state.xi[i]];
    const Eigen::VectorXd r = A[state.xi[i]] * data.Y.row(i).transpose() - c.M;
    for (Eigen::Index j = 0; j < p; ++j) {
      state.tau(i, j) = sample_gig_half(r(j) * r(j) / c.sigma(j), rng);
    }
  }
}

/// Unnormalized label log-weights for unit i: existing clusters first, then
/// the auxiliary components. Statistics must already exclude unit i.
inline std::vector<double> label_log_weights(const Eigen::VectorXd& y, const Eigen::VectorXd& x,
                                             const Eigen::VectorXd& tau_row,
                                             std::span<const ClusterParams> clusters,
                                             std::span<const ClusterKernel> kernels,
                                             std::span<const ClusterSuffStats> stats,
                                             std::span<const ClusterParams> aux,
                                             std::span<const ClusterKernel> aux_kernels,
                                             const Hyperparams& hp, double temperature) {
  const YPredictiveForm form = hp.paper_y_predictive ? YPredictiveForm::AsPrinted : YPredictiveForm::Exact;
  const double power = hp.temper_xi ? 1.0 / temperature : 1.0;
  std::vector<double> log_w;
  log_w.reserve(clusters.size() + aux.size());
  for (std::size_t l = 0; l < clusters.size(); ++l) {
    const double ly = y_collapsed_predictive_logpdf(y, stats[l], kernels[l], clusters[l].sigma, tau_row,
                                                    hp.lambda, form);
    const double lx = x_collapsed_predictive_logpdf(x, stats[l], hp.omega);
    log_w.push_back(std::log(static_cast<double>(stats[l].count)) + power * (ly + lx));
  }
  const double log_aux_mass = std::log(hp.alpha / static_cast<double>(aux.size()));
  const double lx_new = x_new_cluster_logpdf(x, hp.omega);
  for (std::size_t m = 0; m < aux.size(); ++m) {
    const double ly = y_new_cluster_logpdf(y, aux_kernels[m], aux[m].sigma, tau_row, hp.lambda, form);
    log_w.push_back(log_aux_mass + power * (ly + lx_new));
  }
  return log_w;
}

/// Sequential label update for units 0..n-1 with m_aux auxiliary components.
///
/// A unit that leaves a singleton cluster contributes that cluster's
/// parameters as the first auxiliary component; the remaining components are
/// fresh cascade-prior draws. Emptied clusters are removed immediately (the
/// last cluster takes the freed label), so labels stay contiguous. The
/// intercepts are integrated out here and redrawn for every cluster at the end.
inline void update_xi(ChainState& state, const Dataset& data, const Hyperparams& hp, Rng& rng) {
  const auto p = data.p();
  auto& clusters = state.clusters;
  std::vector<ClusterKernel> kernels;
  std::vector<ClusterSuffStats> stats;
  {
    const auto members = members_by_cluster(state);
    for (std::size_t l = 0; l < clusters.size(); ++l) {
      kernels.push_back(ClusterKernel::of(clusters[l].B));
      stats.push_back(ClusterSuffStats::from_members(members[l], data, state.tau));
    }
  }

  const auto m_aux = static_cast<std::size_t>(hp.m_aux);
  std::vector<ClusterParams> aux(m_aux);
  std::vector<ClusterKernel> aux_kernels(m_aux);

  for (int i = 0; i < static_cast<int>(data.n()); ++i) {
    const int current = state.xi[i];
    stats[current].remove(i, data, state.tau);
    std::size_t first_fresh = 0;
    if (stats[current].count == 0) {
      aux[0] = std::move(clusters[current]);
      aux_kernels[0] = std::move(kernels[current]);
      first_fresh = 1;
      const int last = static_cast<int>(clusters.size()) - 1;
      if (current != last) {
        clusters[current] = std::move(clusters[last]);
        kernels[current] = std::move(kernels[last]);
        stats[current] = std::move(stats[last]);
        for (int member : stats[current].member_ids) state.xi[member] = current;
      }
      clusters.pop_back();
      kernels.pop_back();
      stats.pop_back();
    }
    for (std::size_t m = first_fresh; m < m_aux; ++m) {
      aux[m] = sample_prior_cluster(p, hp, rng);
      aux_kernels[m] = ClusterKernel::of(aux[m].B);
    }

    const Eigen::VectorXd y = data.Y.row(i).transpose();
    const Eigen::VectorXd x = data.X.row(i).transpose();
    const Eigen::VectorXd tau_row = state.tau.row(i).transpose();
    const auto log_w = label_log_weights(y, x, tau_row, clusters, kernels, stats, aux, aux_kernels, hp,
                                         state.temperature);
    const auto probs = normalize_log_weights(log_w);
    const std::size_t pick = sample_categorical(rng, probs);

    if (pick < clusters.size()) {
      state.xi[i] = static_cast<int>(pick);
      stats[pick].add(i, data, state.tau);
    } else {
      const std::size_t m = pick - clusters.size();
      clusters.push_back(std::move(aux[m]));
      kernels.push_back(std::move(aux_kernels[m]));
      stats.push_back(ClusterSuffStats::empty(p, data.q()));
      stats.back().add(i, data, state.tau);
      state.xi[i] = static_cast<int>(clusters.size()) - 1;
    }
  }

  for (std::size_t l = 0; l < clusters.size(); ++l) {
    update_M(clusters[l], data, stats[l].member_ids, state.tau, hp, rng, state.temperature);
  }
}

struct SweepStats {
  BUpdateStats b;
};

/// One full sweep in the fixed update order.
inline SweepStats sweep(ChainState& state, const Dataset& data, const Hyperparams& hp, Rng& rng,
                        double tau_prop = -1.0) {
  SweepStats out;
  const auto members = members_by_cluster(state);
  const double temperature = state.temperature;
  for (std::size_t l = 0; l < state.clusters.size(); ++l) {
    auto& cluster = state.clusters[l];
    update_phi(cluster, hp, rng);
    update_sigma(cluster, data, members[l], state.tau, hp, rng, temperature);
    update_M(cluster, data, members[l], state.tau, hp, rng, temperature);
    update_gamma(cluster, hp, rng);
    update_eta(cluster, hp, rng);
    const BUpdateStats b = update_B(cluster, data, members[l], hp, rng, temperature, tau_prop);
    out.b.proposals += b.proposals;
    out.b.accepts += b.accepts;
  }
  update_tau(state, data, rng);
  update_xi(state, data, hp, rng);
  return out;
}

/// Invariant check used by tests and by the trace writer: contiguous labels,
/// no empty cluster, stable B, positive sigma and tau.
inline bool state_is_valid(const ChainState& state, double eps_stab) {
  std::vector<int> counts(state.clusters.size(), 0);
  for (int label : state.xi) {
    if (label < 0 || label >= static_cast<int>(state.clusters.size())) return false;
    ++counts[label];
  }
  for (int c : counts) {
    if (c == 0) return false;
  }
  for (const auto& c : state.clusters) {
    if (!is_stable_or_reject(c.B, eps_stab)) return false;
    if ((c.sigma.array() <= 0.0).any()) return false;
    if (c.B.diagonal().cwiseAbs().maxCoeff() != 0.0) return false;
  }
  return (state.tau.array() > 0.0).all();
}

}  // namespace dcgx
