#pragma once

// Synthetic benchmarks with known ground truth.
//
// Scenario 1: three clusters of units, each with its own sparse cyclic graph
// over p = 10 genes, separated in a 2-D covariate space.
// Scenario 2: one 3-cycle whose coefficients vary smoothly with the covariates.
//
// The scenario-1 skeletons below are fixed stand-ins: each has ten edges,
// one two-cycle and one three-cycle on disjoint nodes, and otherwise only
// edges leading away from the cycles, so every draw from the coefficient
// mixture has spectral radius at most 0.8.

#include <Eigen/Dense>

#include <cmath>
#include <utility>
#include <vector>

#include "error.hpp"
#include "model.hpp"
#include "random.hpp"
#include "stability.hpp"

namespace dcgx {

using Skeleton = std::vector<std::pair<int, int>>;  // (from, to), 0-based

inline std::vector<Skeleton> default_scenario1_skeletons() {
  return {
      {{0, 1}, {1, 0}, {2, 3}, {3, 4}, {4, 2}, {1, 5}, {5, 6}, {4, 7}, {6, 8}, {8, 9}},
      {{5, 6}, {6, 5}, {7, 8}, {8, 9}, {9, 7}, {0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}},
      {{2, 7}, {7, 2}, {0, 3}, {3, 6}, {6, 0}, {1, 2}, {7, 8}, {8, 9}, {4, 5}, {5, 1}},
  };
}

inline Eigen::MatrixXi skeleton_matrix(const Skeleton& skeleton, int p) {
  Eigen::MatrixXi adj = Eigen::MatrixXi::Zero(p, p);
  for (auto [from, to] : skeleton) adj(to, from) = 1;
  return adj;
}

struct GroundTruth {
  int scenario = 1;
  std::vector<int> true_xi;               // scenario 1
  std::vector<Skeleton> skeletons;        // per cluster (scenario 2: the single cycle)
  std::vector<Eigen::MatrixXd> true_B;    // per cluster (scenario 1) or per unit (scenario 2)
  std::vector<Eigen::VectorXd> true_M;
  double true_sigma = 0.1;
  std::vector<double> spectral_radius;    // per entry of true_B
};

inline constexpr double kTruthDetFloor = 1e-10;

inline std::pair<Dataset, GroundTruth> gen_scenario1(int n_per_cluster, std::uint64_t seed,
                                                     std::vector<Skeleton> skeletons = default_scenario1_skeletons()) {
  if (n_per_cluster < 1) throw Error(Errc::InvalidConfig, "n_per_cluster must be >= 1");
  constexpr int p = 10;
  constexpr int q = 2;
  const int clusters = static_cast<int>(skeletons.size());
  const double m_centres[] = {-0.2, 0.0, 0.2};
  const double x_centres[] = {-5.0, 0.0, 5.0};
  if (clusters != 3) throw Error(Errc::InvalidConfig, "scenario 1 uses exactly three skeletons");
  for (const auto& sk : skeletons) {
    for (auto [from, to] : sk) {
      if (from < 0 || to < 0 || from >= p || to >= p || from == to) {
        throw Error(Errc::InvalidConfig, "skeleton edge out of range");
      }
    }
  }

  Rng rng = make_stream(seed, 1);
  std::uniform_real_distribution<double> coef(0.6, 0.8);
  GroundTruth truth;
  truth.scenario = 1;
  truth.skeletons = skeletons;

  const int n = n_per_cluster * clusters;
  Eigen::MatrixXd Y(n, p);
  Eigen::MatrixXd X(n, q);
  for (int l = 0; l < clusters; ++l) {
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(p, p);
    bool ok = false;
    for (int attempt = 0; attempt < 1000 && !ok; ++attempt) {
      B.setZero();
      for (auto [from, to] : skeletons[l]) {
        const double magnitude = coef(rng);
        B(to, from) = bernoulli(rng, 0.5) ? magnitude : -magnitude;
      }
      const LogDet ld = log_det_i_minus(B);
      ok = ld.sign != 0 && std::exp(ld.log_abs) > kTruthDetFloor;
    }
    if (!ok) throw Error(Errc::UnstableTruth, "could not draw a coefficient set with det(I - B) != 0");
    Eigen::VectorXd M(p);
    for (int j = 0; j < p; ++j) M(j) = normal(rng, m_centres[l], 1e-2);
    truth.true_B.push_back(B);
    truth.true_M.push_back(M);
    truth.spectral_radius.push_back(spectral_radius(B));

    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(Eigen::MatrixXd::Identity(p, p) - B);
    for (int u = 0; u < n_per_cluster; ++u) {
      const int i = l * n_per_cluster + u;
      Eigen::VectorXd e(p);
      for (int j = 0; j < p; ++j) {
        std::exponential_distribution<double> expo(1.0);
        const double tau = expo(rng);
        e(j) = normal(rng, 0.0, std::sqrt(truth.true_sigma * tau));
      }
      Y.row(i) = lu.solve(M + e).transpose();
      for (int d = 0; d < q; ++d) X(i, d) = normal(rng, x_centres[l], 1.0);
      truth.true_xi.push_back(l);
    }
  }
  return {validate_dataset(std::move(Y), std::move(X)), std::move(truth)};
}

inline double f_curve(double z) {
  const double a = std::exp(3.0 * z);
  const double b = std::exp(3.0 * (1.0 - z));
  return (a - b) / (a + b) + 0.1;
}

inline Skeleton scenario2_skeleton() { return {{0, 1}, {1, 2}, {2, 0}}; }

/// True B(x) of scenario 2: B21 = f(sqrt(x1 x2)), B13 = f(sqrt((x1^2 + x2^2) / 2)),
/// B32 = f((x1 + x2) / 2), in 1-based gene numbering.
inline Eigen::MatrixXd scenario2_B(double x1, double x2) {
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(3, 3);
  B(1, 0) = f_curve(std::sqrt(x1 * x2));
  B(0, 2) = f_curve(std::sqrt(0.5 * (x1 * x1 + x2 * x2)));
  B(2, 1) = f_curve(0.5 * (x1 + x2));
  return B;
}

inline std::pair<Dataset, GroundTruth> gen_scenario2(int n, std::uint64_t seed) {
  if (n < 1) throw Error(Errc::InvalidConfig, "n must be >= 1");
  constexpr int p = 3;
  Rng rng = make_stream(seed, 2);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::exponential_distribution<double> expo(1.0);
  GroundTruth truth;
  truth.scenario = 2;
  truth.skeletons = {scenario2_skeleton()};
  const Eigen::VectorXd M = Eigen::VectorXd::Ones(p);
  truth.true_M = {M};

  Eigen::MatrixXd Y(n, p);
  Eigen::MatrixXd X(n, 2);
  for (int i = 0; i < n; ++i) {
    Eigen::MatrixXd B;
    double x1 = 0.0;
    double x2 = 0.0;
    for (int attempt = 0;; ++attempt) {
      if (attempt == 1000) throw Error(Errc::UnstableTruth, "no design point with det(I - B(x)) != 0");
      x1 = unit(rng);
      x2 = unit(rng);
      B = scenario2_B(x1, x2);
      // For the 3-cycle, det(I - B) = 1 - B21 B32 B13.
      if (std::abs(1.0 - B(1, 0) * B(2, 1) * B(0, 2)) > kTruthDetFloor) break;
    }
    Eigen::VectorXd e(p);
    for (int j = 0; j < p; ++j) e(j) = normal(rng, 0.0, std::sqrt(truth.true_sigma * expo(rng)));
    Y.row(i) = (Eigen::MatrixXd::Identity(p, p) - B).partialPivLu().solve(M + e).transpose();
    X(i, 0) = x1;
    X(i, 1) = x2;
    truth.spectral_radius.push_back(std::cbrt(std::abs(B(1, 0) * B(2, 1) * B(0, 2))));
    truth.true_B.push_back(std::move(B));
  }
  return {validate_dataset(std::move(Y), std::move(X)), std::move(truth)};
}

}  // namespace dcgx
