#pragma once

// Domain types shared by the sampler, prediction and I/O layers.
//
// Cluster labels are 0-based inside the library (0..L-1); the on-disk
// formats shift them to 1..L.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "error.hpp"
#include "random.hpp"

namespace dcgx {

using Eigen::MatrixXd;
using Eigen::MatrixXi;
using Eigen::VectorXd;

struct Dataset {
  MatrixXd Y;  // n x p expression
  MatrixXd X;  // n x q covariates
  std::vector<std::string> gene_names;

  Eigen::Index n() const { return Y.rows(); }
  Eigen::Index p() const { return Y.cols(); }
  Eigen::Index q() const { return X.cols(); }
};

inline Dataset validate_dataset(MatrixXd raw_Y, MatrixXd raw_X,
                                std::vector<std::string> gene_names = {}) {
  if (!raw_Y.allFinite() || !raw_X.allFinite()) {
    throw Error(Errc::NonFinite, "expression or covariate matrix has a NaN/Inf entry");
  }
  if (raw_Y.rows() != raw_X.rows()) {
    throw Error(Errc::ShapeMismatch, "Y has " + std::to_string(raw_Y.rows()) + " rows, X has " +
                                         std::to_string(raw_X.rows()));
  }
  if (raw_Y.rows() < 2 || raw_Y.cols() < 2) {
    throw Error(Errc::TooSmall, "need n >= 2 and p >= 2");
  }
  if (raw_X.cols() < 1) {
    throw Error(Errc::TooSmall, "need at least one covariate column");
  }
  if (gene_names.empty()) {
    for (Eigen::Index j = 0; j < raw_Y.cols(); ++j) gene_names.push_back("g" + std::to_string(j + 1));
  }
  if (static_cast<Eigen::Index>(gene_names.size()) != raw_Y.cols()) {
    throw Error(Errc::ShapeMismatch, "gene name count does not match column count");
  }
  return Dataset{std::move(raw_Y), std::move(raw_X), std::move(gene_names)};
}

/// Fixed prior and tuning constants.
struct Hyperparams {
  double lambda = 10.0;  // intercept prior variance
  double a_sigma = 2.0, b_sigma = 2.0;
  double a_phi = 1.0, b_phi = 1.0;
  double a_eta = 0.01, b_eta = 0.01;
  double nu0 = 0.01;    // spike shrink factor
  double omega = 100.0; // covariate prior scale
  double alpha = 1.0;   // CRP concentration
  double tau_prop = 0.05;
  std::vector<double> temperatures{2.5, 2.0, 1.5, 1.0};
  int swap_interval = 10;
  int n_iter = 1000;
  int n_burn = 250;
  int m_aux = 1;
  // Starting partition: k-means on standardized covariates into this many
  // clusters; 1 starts from a single cluster.
  int init_clusters = 10;
  double eps_stab = 1e-6;
  std::uint64_t seed = 1;

  int max_stability_tries = 1000;
  // Robbins-Monro tuning of tau_prop towards 0.3 acceptance, burn-in only.
  bool adapt_tau_prop = false;
  // Accept B moves on the likelihood ratio alone, leaving out the
  // spike-and-slab prior ratio.
  bool likelihood_only_b_ratio = false;
  // Follow each B sweep with independence proposals on every pair
  // (B(j, k), B(k, j)) that put one or both entries in the spike.
  bool pair_moves = true;
  // Use det(I - B) rather than |det(I - B)| in the Jacobian.
  bool strict_paper_det = false;
  // Add the covariate marginal to the replica-swap ratio.
  bool include_x_in_swap = false;
  // Evaluate the intercept-collapsed Y predictive with the literal covariance
  // expression (no noise-scale factor, one shared Sigma) instead of the exact
  // conjugate one.
  bool paper_y_predictive = false;
  // Raise the Y and X predictive terms of the label update to 1/T in heated chains.
  bool temper_xi = true;

  void validate() const {
    auto require = [](bool ok, const char* what) {
      if (!ok) throw Error(Errc::InvalidConfig, what);
    };
    require(lambda > 0, "lambda must be > 0");
    require(a_sigma > 0 && b_sigma > 0, "a_sigma, b_sigma must be > 0");
    require(a_phi > 0 && b_phi > 0, "a_phi, b_phi must be > 0");
    require(a_eta > 0 && b_eta > 0, "a_eta, b_eta must be > 0");
    require(nu0 > 0 && nu0 < 1, "nu0 must lie in (0, 1)");
    require(omega > 0, "omega must be > 0");
    require(alpha > 0, "alpha must be > 0");
    require(tau_prop > 0, "tau_prop must be > 0");
    require(swap_interval > 0, "swap_interval must be positive");
    require(n_iter > 0, "n_iter must be positive");
    require(n_burn >= 0 && n_burn < n_iter, "n_burn must lie in [0, n_iter)");
    require(m_aux > 0, "m_aux must be positive");
    require(init_clusters > 0, "init_clusters must be positive");
    require(eps_stab > 0 && eps_stab < 1, "eps_stab must lie in (0, 1)");
    require(max_stability_tries > 0, "max_stability_tries must be positive");
    require(!temperatures.empty(), "at least one temperature is required");
    int cold = 0;
    for (double t : temperatures) {
      require(std::isfinite(t) && t >= 1.0, "temperatures must be >= 1");
      if (t == 1.0) ++cold;
    }
    require(cold == 1, "exactly one temperature must equal 1");
    auto sorted = temperatures;
    std::sort(sorted.begin(), sorted.end());
    require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(),
            "temperatures must be pairwise distinct");
  }
};

/// Parameters of one occupied cluster.
struct ClusterParams {
  MatrixXd B;      // p x p, zero diagonal; B(j, k) != 0 encodes k -> j
  VectorXd M;      // intercepts
  VectorXd sigma;  // noise scales, > 0
  MatrixXi gamma;  // edge indicators, diagonal 0
  double eta = 1.0;
  double phi = 0.5;

  Eigen::Index p() const { return B.rows(); }
};

struct ChainState {
  std::vector<int> xi;  // label per unit, 0-based, contiguous
  std::vector<ClusterParams> clusters;
  MatrixXd tau;  // n x p latent Laplace mixing scales
  double temperature = 1.0;
  std::uint64_t stream = 0;

  int num_clusters() const { return static_cast<int>(clusters.size()); }
};

/// Members of each cluster, in increasing unit order.
inline std::vector<std::vector<int>> members_by_cluster(const ChainState& state) {
  std::vector<std::vector<int>> members(state.clusters.size());
  for (int i = 0; i < static_cast<int>(state.xi.size()); ++i) members[state.xi[i]].push_back(i);
  return members;
}

/// Drop empty clusters and relabel so that labels are 0..L-1 in order of
/// first appearance of the surviving labels.
inline void compact_labels(ChainState& state) {
  std::vector<int> remap(state.clusters.size(), -1);
  std::vector<ClusterParams> kept;
  for (int& label : state.xi) {
    if (remap[label] < 0) {
      remap[label] = static_cast<int>(kept.size());
      kept.push_back(std::move(state.clusters[label]));
    }
    label = remap[label];
  }
  state.clusters = std::move(kept);
}

/// Lloyd's k-means with k-means++ seeding on column-standardized rows of X.
/// Returns contiguous 0-based labels; empty groups are dropped.
inline std::vector<int> kmeans_labels(const MatrixXd& X, int k, Rng& rng, int max_iter = 100) {
  const auto n = X.rows();
  k = static_cast<int>(std::min<Eigen::Index>(k, n));
  std::vector<int> labels(static_cast<std::size_t>(n), 0);
  if (k <= 1) return labels;
  MatrixXd Z = X.rowwise() - X.colwise().mean();
  for (Eigen::Index d = 0; d < Z.cols(); ++d) {
    const double sd = std::sqrt(Z.col(d).squaredNorm() / static_cast<double>(n));
    if (sd > 0.0) Z.col(d) /= sd;
  }
  MatrixXd centres(k, Z.cols());
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  centres.row(0) = Z.row(pick(rng));
  VectorXd dist = (Z.rowwise() - centres.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = dist.sum();
    Eigen::Index chosen = pick(rng);
    if (total > 0.0) {
      double u = uniform_open(rng) * total;
      for (chosen = 0; chosen < n - 1; ++chosen) {
        u -= dist(chosen);
        if (u <= 0.0) break;
      }
    }
    centres.row(c) = Z.row(chosen);
    dist = dist.cwiseMin((Z.rowwise() - centres.row(c)).rowwise().squaredNorm());
  }
  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index best = 0;
      (centres.rowwise() - Z.row(i)).rowwise().squaredNorm().minCoeff(&best);
      if (labels[i] != static_cast<int>(best)) {
        labels[i] = static_cast<int>(best);
        changed = true;
      }
    }
    if (!changed && iter > 0) break;
    MatrixXd sums = MatrixXd::Zero(k, Z.cols());
    VectorXd counts = VectorXd::Zero(k);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(labels[i]) += Z.row(i);
      counts(labels[i]) += 1.0;
    }
    for (int c = 0; c < k; ++c) {
      if (counts(c) > 0.0) centres.row(c) = sums.row(c) / counts(c);
    }
  }
  std::vector<int> remap(static_cast<std::size_t>(k), -1);
  int next = 0;
  for (int& label : labels) {
    if (remap[label] < 0) remap[label] = next++;
    label = remap[label];
  }
  return labels;
}

/// Start with B = 0, M = 0, tau = 1 in every cluster; sigma, eta and phi
/// drawn from their priors. The partition is a single cluster when
/// init_clusters is 1, otherwise k-means on the covariates.
inline ChainState init_state(const Dataset& data, const Hyperparams& hp, double temperature,
                             Rng& rng) {
  const auto n = data.n();
  const auto p = data.p();
  ChainState state;
  state.temperature = temperature;
  state.xi = kmeans_labels(data.X, hp.init_clusters, rng);
  state.tau = MatrixXd::Ones(n, p);
  const int k = *std::max_element(state.xi.begin(), state.xi.end()) + 1;
  for (int l = 0; l < k; ++l) {
    ClusterParams cluster;
    cluster.B = MatrixXd::Zero(p, p);
    cluster.M = VectorXd::Zero(p);
    cluster.sigma.resize(p);
    for (Eigen::Index j = 0; j < p; ++j) cluster.sigma(j) = inv_gamma_variate(rng, hp.a_sigma, hp.b_sigma);
    cluster.gamma = MatrixXi::Zero(p, p);
    cluster.eta = inv_gamma_variate(rng, hp.a_eta, hp.b_eta);
    cluster.phi = beta_variate(rng, hp.a_phi, hp.b_phi);
    state.clusters.push_back(std::move(cluster));
  }
  return state;
}

/// One retained sample of the cold chain.
struct Snapshot {
  int iteration = 0;
  std::vector<int> xi;
  std::vector<ClusterParams> clusters;
  MatrixXd tau;  // may be empty when loaded from a trace file
  double loglik = 0.0;
};

struct SwapRecord {
  double t_low = 1.0;
  double t_high = 1.0;
  int attempts = 0;
  int accepts = 0;

  double rate() const { return attempts == 0 ? 0.0 : static_cast<double>(accepts) / attempts; }
};

struct Trace {
  std::vector<Snapshot> samples;
  Hyperparams hp;
  std::vector<SwapRecord> swaps;  // one per adjacent temperature pair
  double b_acceptance = 0.0;      // cold chain, post burn-in
};

}  // namespace dcgx
