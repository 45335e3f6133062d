#pragma once

// Partition-averaged graph estimates.
//
// For a new covariate point, each retained sample contributes the B of the
// cluster the point would join under the CRP prior times the covariate
// predictive; a draw of the new-cluster atom contributes a fresh stable
// cascade-prior draw. Averaging over samples gives the posterior mean of
// B(x), and every contributing matrix is stable by construction.

#include <Eigen/Dense>

#include <cmath>
#include <utility>
#include <vector>

#include "distributions.hpp"
#include "likelihood.hpp"
#include "model.hpp"
#include "random.hpp"
#include "stability.hpp"

namespace dcgx {

struct GraphPrediction {
  Eigen::MatrixXd B_mean;
  Eigen::MatrixXd B_sd;
  std::vector<Eigen::MatrixXd> B_samples;
  Eigen::MatrixXd edge_prob;
  bool all_stable = true;
};

/// Covariate statistics of every cluster of every retained sample, built once
/// and shared across prediction points.
class PredictionContext {
 public:
  PredictionContext(const Trace& trace, const Dataset& data, const Hyperparams& hp)
      : trace_(&trace), hp_(hp), n_(data.n()), p_(data.p()) {
    if (trace.samples.empty()) throw Error(Errc::TooSmall, "prediction needs a nonempty trace");
    stats_.reserve(trace.samples.size());
    for (const auto& sample : trace.samples) {
      std::vector<std::vector<int>> members(sample.clusters.size());
      for (int i = 0; i < static_cast<int>(sample.xi.size()); ++i) members[sample.xi[i]].push_back(i);
      std::vector<ClusterSuffStats> per_cluster;
      per_cluster.reserve(members.size());
      for (const auto& m : members) per_cluster.push_back(ClusterSuffStats::from_members(m, data, {}));
      stats_.push_back(std::move(per_cluster));
    }
  }

  std::size_t num_samples() const { return stats_.size(); }

  /// Probabilities of joining each existing cluster of sample t, with the
  /// new-cluster atom last.
  std::vector<double> assignment_probs(const Eigen::VectorXd& x, std::size_t t) const {
    const auto& per_cluster = stats_[t];
    std::vector<double> log_w;
    log_w.reserve(per_cluster.size() + 1);
    for (const auto& s : per_cluster) {
      log_w.push_back(std::log(static_cast<double>(s.count)) +
                      x_collapsed_predictive_logpdf(x, s, hp_.omega));
    }
    log_w.push_back(std::log(hp_.alpha) + x_new_cluster_logpdf(x, hp_.omega));
    return normalize_log_weights(log_w);
  }

  GraphPrediction predict(const Eigen::VectorXd& x, Rng& rng) const {
    GraphPrediction out;
    const auto T = static_cast<double>(stats_.size());
    out.B_mean = Eigen::MatrixXd::Zero(p_, p_);
    out.edge_prob = Eigen::MatrixXd::Zero(p_, p_);
    Eigen::MatrixXd second = Eigen::MatrixXd::Zero(p_, p_);
    out.B_samples.reserve(stats_.size());
    for (std::size_t t = 0; t < stats_.size(); ++t) {
      const auto probs = assignment_probs(x, t);
      const std::size_t pick = sample_categorical(rng, probs);
      const auto& clusters = trace_->samples[t].clusters;
      Eigen::MatrixXd B;
      Eigen::MatrixXi gamma;
      if (pick < clusters.size()) {
        B = clusters[pick].B;
        gamma = clusters[pick].gamma;
      } else {
        CascadeDraw draw = sample_cascade_prior(p_, hp_, rng);
        B = std::move(draw.B);
        gamma = std::move(draw.gamma);
      }
      out.all_stable = out.all_stable && is_stable_or_reject(B, hp_.eps_stab);
      out.B_mean += B;
      second += B.cwiseProduct(B);
      out.edge_prob += gamma.cast<double>();
      out.B_samples.push_back(std::move(B));
    }
    out.B_mean /= T;
    out.edge_prob /= T;
    out.edge_prob.diagonal().setZero();
    out.B_sd = (second / T - out.B_mean.cwiseProduct(out.B_mean)).cwiseMax(0.0).cwiseSqrt();
    return out;
  }

 private:
  const Trace* trace_;
  Hyperparams hp_;
  Eigen::Index n_;
  Eigen::Index p_;
  std::vector<std::vector<ClusterSuffStats>> stats_;
};

inline GraphPrediction predict_B(const Eigen::VectorXd& x_new, const Trace& trace, const Dataset& data,
                                 const Hyperparams& hp, Rng& rng) {
  return PredictionContext(trace, data, hp).predict(x_new, rng);
}

/// Directed edge from -> to, i.e. B(to, from) != 0.
struct Edge {
  int from = 0;
  int to = 0;
  double weight = 0.0;

  friend bool operator==(const Edge& a, const Edge& b) { return a.from == b.from && a.to == b.to; }
};

struct FittedGraphs {
  std::vector<Eigen::MatrixXd> unit_prob;  // per unit: trace frequency of gamma(j, k) = 1
  std::vector<std::vector<Edge>> unit_edges;
  Eigen::MatrixXd union_freq;  // mean over units of unit_prob
  std::vector<Edge> union_edges;  // edges included for at least one unit
};

inline std::vector<Edge> edges_above(const Eigen::MatrixXd& prob, double threshold) {
  std::vector<Edge> edges;
  for (Eigen::Index to = 0; to < prob.rows(); ++to) {
    for (Eigen::Index from = 0; from < prob.cols(); ++from) {
      if (to != from && prob(to, from) > threshold) {
        edges.push_back({static_cast<int>(from), static_cast<int>(to), prob(to, from)});
      }
    }
  }
  return edges;
}

/// Per-unit posterior edge inclusion frequencies and the union graph.
inline FittedGraphs fitted_graphs(const Trace& trace, const Dataset& data, double threshold = 0.5) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw Error(Errc::InvalidConfig, "threshold must lie in (0, 1)");
  if (trace.samples.empty()) throw Error(Errc::TooSmall, "fitted graphs need a nonempty trace");
  const auto n = data.n();
  const auto p = data.p();
  FittedGraphs out;
  out.unit_prob.assign(static_cast<std::size_t>(n), Eigen::MatrixXd::Zero(p, p));
  for (const auto& sample : trace.samples) {
    std::vector<Eigen::MatrixXd> as_double;
    as_double.reserve(sample.clusters.size());
    for (const auto& c : sample.clusters) as_double.push_back(c.gamma.cast<double>());
    for (Eigen::Index i = 0; i < n; ++i) out.unit_prob[i] += as_double[sample.xi[i]];
  }
  const auto T = static_cast<double>(trace.samples.size());
  out.union_freq = Eigen::MatrixXd::Zero(p, p);
  Eigen::MatrixXd any_included = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.unit_prob[i] /= T;
    out.unit_prob[i].diagonal().setZero();
    out.union_freq += out.unit_prob[i];
    auto edges = edges_above(out.unit_prob[i], threshold);
    for (const auto& e : edges) any_included(e.to, e.from) = 1.0;
    out.unit_edges.push_back(std::move(edges));
  }
  out.union_freq /= static_cast<double>(n);
  for (Eigen::Index to = 0; to < p; ++to) {
    for (Eigen::Index from = 0; from < p; ++from) {
      if (any_included(to, from) > 0.0) {
        out.union_edges.push_back({static_cast<int>(from), static_cast<int>(to), out.union_freq(to, from)});
      }
    }
  }
  return out;
}

}  // namespace dcgx
