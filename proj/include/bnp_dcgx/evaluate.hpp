#pragma once

// Structure-recovery metrics, cluster alignment and function-recovery
// diagnostics.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <vector>

#include "error.hpp"
#include "predict.hpp"
#include "random.hpp"

namespace dcgx {

struct ConfusionCounts {
  long tp = 0;
  long fp = 0;
  long tn = 0;
  long fn = 0;
};

/// Directed-edge counts over off-diagonal entries.
inline ConfusionCounts confusion(const Eigen::MatrixXi& est, const Eigen::MatrixXi& truth) {
  if (est.rows() != truth.rows() || est.cols() != truth.cols() || est.rows() != est.cols()) {
    throw Error(Errc::ShapeMismatch, "edge matrices must be square and of equal size");
  }
  ConfusionCounts c;
  for (Eigen::Index j = 0; j < est.rows(); ++j) {
    for (Eigen::Index k = 0; k < est.cols(); ++k) {
      if (j == k) continue;
      const bool e = est(j, k) != 0;
      const bool t = truth(j, k) != 0;
      if (e && t) ++c.tp;
      else if (e) ++c.fp;
      else if (t) ++c.fn;
      else ++c.tn;
    }
  }
  return c;
}

struct StructureMetrics {
  double tpr = 0.0;
  double fdr = 0.0;
  double mcc = 0.0;
};

/// TPR, FDR and the standard (square-root denominator) Matthews correlation.
/// Any 0/0 ratio is reported as 0.
inline StructureMetrics tpr_fdr_mcc(const ConfusionCounts& c) {
  const auto ratio = [](double num, double den) { return den == 0.0 ? 0.0 : num / den; };
  const double tp = static_cast<double>(c.tp);
  const double fp = static_cast<double>(c.fp);
  const double tn = static_cast<double>(c.tn);
  const double fn = static_cast<double>(c.fn);
  StructureMetrics m;
  m.tpr = ratio(tp, tp + fn);
  m.fdr = ratio(fp, tp + fp);
  const double den = std::sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn));
  m.mcc = ratio(tn * tp - fn * fp, den);
  return m;
}

// ---------------------------------------------------------------------------
// Cluster alignment
// ---------------------------------------------------------------------------

/// Minimum-cost perfect assignment on a square cost matrix (Hungarian
/// algorithm, O(k^3)). Returns the column assigned to each row.
inline std::vector<int> hungarian_min_cost(const std::vector<std::vector<double>>& cost) {
  const int k = static_cast<int>(cost.size());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(k + 1, 0.0), v(k + 1, 0.0), way_min(k + 1);
  std::vector<int> match(k + 1, 0), way(k + 1, 0);
  for (int row = 1; row <= k; ++row) {
    match[0] = row;
    int col0 = 0;
    std::fill(way_min.begin(), way_min.end(), inf);
    std::vector<bool> used(k + 1, false);
    do {
      used[col0] = true;
      const int r = match[col0];
      double delta = inf;
      int col1 = 0;
      for (int col = 1; col <= k; ++col) {
        if (used[col]) continue;
        const double reduced = cost[r - 1][col - 1] - u[r] - v[col];
        if (reduced < way_min[col]) {
          way_min[col] = reduced;
          way[col] = col0;
        }
        if (way_min[col] < delta) {
          delta = way_min[col];
          col1 = col;
        }
      }
      for (int col = 0; col <= k; ++col) {
        if (used[col]) {
          u[match[col]] += delta;
          v[col] -= delta;
        } else {
          way_min[col] -= delta;
        }
      }
      col0 = col1;
    } while (match[col0] != 0);
    do {
      const int col1 = way[col0];
      match[col0] = match[col1];
      col0 = col1;
    } while (col0 != 0);
  }
  std::vector<int> assignment(k, -1);
  for (int col = 1; col <= k; ++col) {
    if (match[col] > 0) assignment[match[col] - 1] = col - 1;
  }
  return assignment;
}

struct Alignment {
  std::map<int, int> mapping;  // estimated label -> true label (matched labels only)
  double accuracy = 0.0;
};

/// Maximal-overlap matching of estimated to true labels.
inline Alignment align_clusters(const std::vector<int>& est_xi, const std::vector<int>& true_xi) {
  if (est_xi.size() != true_xi.size()) throw Error(Errc::ShapeMismatch, "label vectors differ in length");
  if (est_xi.empty()) return {};
  std::map<int, int> est_index, true_index;
  for (int label : est_xi) est_index.emplace(label, 0);
  for (int label : true_xi) true_index.emplace(label, 0);
  int next = 0;
  for (auto& [label, idx] : est_index) idx = next++;
  next = 0;
  for (auto& [label, idx] : true_index) idx = next++;
  const int k = static_cast<int>(std::max(est_index.size(), true_index.size()));
  std::vector<std::vector<double>> overlap(k, std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < est_xi.size(); ++i) {
    overlap[est_index[est_xi[i]]][true_index[true_xi[i]]] += 1.0;
  }
  std::vector<std::vector<double>> cost(k, std::vector<double>(k));
  for (int r = 0; r < k; ++r) {
    for (int c = 0; c < k; ++c) cost[r][c] = -overlap[r][c];
  }
  const auto assignment = hungarian_min_cost(cost);
  std::vector<int> est_labels(k, -1), true_labels(k, -1);
  for (auto [label, idx] : est_index) est_labels[idx] = label;
  for (auto [label, idx] : true_index) true_labels[idx] = label;
  Alignment out;
  double matched = 0.0;
  for (int r = 0; r < k; ++r) {
    const int c = assignment[r];
    matched += overlap[r][c];
    if (est_labels[r] >= 0 && true_labels[c] >= 0) out.mapping[est_labels[r]] = true_labels[c];
  }
  out.accuracy = matched / static_cast<double>(est_xi.size());
  return out;
}

// ---------------------------------------------------------------------------
// Scenario-1 style per-cluster structure recovery
// ---------------------------------------------------------------------------

/// Per true cluster: average the units' posterior edge probabilities,
/// threshold, and compare with that cluster's true edge set. No estimated
/// labels are involved.
inline std::vector<StructureMetrics> cluster_structure_metrics(const FittedGraphs& graphs,
                                                               const std::vector<int>& true_xi,
                                                               const std::vector<Eigen::MatrixXi>& true_edges,
                                                               double threshold = 0.5) {
  std::vector<StructureMetrics> out;
  for (std::size_t l = 0; l < true_edges.size(); ++l) {
    const auto p = true_edges[l].rows();
    Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(p, p);
    int count = 0;
    for (std::size_t i = 0; i < true_xi.size(); ++i) {
      if (true_xi[i] != static_cast<int>(l)) continue;
      mean += graphs.unit_prob[i];
      ++count;
    }
    if (count > 0) mean /= count;
    const Eigen::MatrixXi est = (mean.array() > threshold).cast<int>();
    out.push_back(tpr_fdr_mcc(confusion(est, true_edges[l])));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Function recovery
// ---------------------------------------------------------------------------

struct EntryRecovery {
  int to = 0;
  int from = 0;
  double rmse = 0.0;
  double coverage = 0.0;  // fraction of grid points with truth inside mean +- 2 sd
};

/// RMSE of the posterior mean and +-2 sd coverage over the grid, for each
/// listed entry (to, from) of B.
inline std::vector<EntryRecovery> curve_recovery(
    const std::vector<GraphPrediction>& predictions, const std::vector<Eigen::VectorXd>& grid,
    const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& truth_fn,
    const std::vector<std::pair<int, int>>& entries) {
  if (predictions.size() != grid.size()) throw Error(Errc::ShapeMismatch, "one prediction per grid point");
  std::vector<EntryRecovery> out;
  for (auto [to, from] : entries) {
    EntryRecovery rec{to, from, 0.0, 0.0};
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const double truth = truth_fn(grid[g])(to, from);
      const double mean = predictions[g].B_mean(to, from);
      const double sd = predictions[g].B_sd(to, from);
      rec.rmse += (mean - truth) * (mean - truth);
      if (std::abs(truth - mean) <= 2.0 * sd) rec.coverage += 1.0;
    }
    if (!grid.empty()) {
      rec.rmse = std::sqrt(rec.rmse / static_cast<double>(grid.size()));
      rec.coverage /= static_cast<double>(grid.size());
    }
    out.push_back(rec);
  }
  return out;
}

inline std::vector<EntryRecovery> curve_recovery(
    const PredictionContext& context, const std::vector<Eigen::VectorXd>& grid,
    const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& truth_fn,
    const std::vector<std::pair<int, int>>& entries, std::uint64_t seed) {
  std::vector<GraphPrediction> predictions;
  predictions.reserve(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    Rng rng = make_stream(seed, g);
    predictions.push_back(context.predict(grid[g], rng));
  }
  return curve_recovery(predictions, grid, truth_fn, entries);
}

/// The slice grids of the continuous-graph benchmark: x1 in {0.05, ..., 0.95}
/// at x2 in {0.25, 0.5, 0.75}, and the same with the roles swapped, minus
/// points in the [0.95, 1]^2 corner.
inline std::vector<Eigen::VectorXd> scenario2_slice_grid() {
  std::vector<Eigen::VectorXd> grid;
  const double fixed[] = {0.25, 0.5, 0.75};
  for (int axis = 0; axis < 2; ++axis) {
    for (double f : fixed) {
      for (int s = 0; s < 19; ++s) {
        const double v = 0.05 + 0.05 * s;
        Eigen::VectorXd x(2);
        x(axis) = v;
        x(1 - axis) = f;
        if (x(0) >= 0.95 && x(1) >= 0.95) continue;
        grid.push_back(x);
      }
    }
  }
  return grid;
}

}  // namespace dcgx
