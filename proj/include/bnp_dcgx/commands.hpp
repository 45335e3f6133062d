#pragma once

// Command implementations behind the bnp_dcgx executable. Each command
// returns a process exit code: 0 ok, 2 config/validation, 3 I/O, 4 sampler
// failure.

#include <Eigen/Dense>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "error.hpp"
#include "evaluate.hpp"
#include "io.hpp"
#include "model.hpp"
#include "predict.hpp"
#include "simulate.hpp"
#include "stability.hpp"
#include "tempering.hpp"

namespace dcgx {

namespace fs = std::filesystem;

inline constexpr std::uint64_t kPredictStreamBase = 1ULL << 32;

enum class GraphSource { Predictions, Trace };

struct RunConfig {
  Hyperparams hp;
  fs::path out_dir = ".";
  std::optional<fs::path> expr_csv;
  std::optional<fs::path> coords_csv;
  std::optional<fs::path> trace_path;
  std::optional<fs::path> truth_path;
  std::optional<fs::path> predictions_path;
  int scenario = 1;
  int n = 0;  // simulate: units per cluster (scenario 1) or total units (scenario 2); 0 = benchmark default
  double threshold = 0.5;
  std::vector<std::string> grids;
  std::vector<std::vector<double>> points;
  GraphSource graph_source = GraphSource::Predictions;
  std::vector<int> units;  // export-graph from a trace, 1-based
  int threads = 0;
  bool record_wall_time = false;
  bool quiet = true;

  fs::path expr() const { return expr_csv.value_or(out_dir / "expr.csv"); }
  fs::path coords() const { return coords_csv.value_or(out_dir / "coords.csv"); }
  fs::path trace() const { return trace_path.value_or(out_dir / "trace.jsonl"); }
  fs::path truth() const { return truth_path.value_or(out_dir / "truth.json"); }
  fs::path predictions() const { return predictions_path.value_or(out_dir / "predictions.json"); }
};

/// Applies a JSON config document: hyperparameter keys go to hp, the rest
/// are run settings.
inline void apply_config(RunConfig& cfg, const io::json& j) {
  if (!j.is_object()) throw Error(Errc::InvalidConfig, "config must be a JSON object");
  io::json hp_keys = io::json::object();
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "out_dir") cfg.out_dir = value.get<std::string>();
      else if (key == "expr_csv") cfg.expr_csv = value.get<std::string>();
      else if (key == "coords_csv") cfg.coords_csv = value.get<std::string>();
      else if (key == "trace") cfg.trace_path = value.get<std::string>();
      else if (key == "truth") cfg.truth_path = value.get<std::string>();
      else if (key == "predictions") cfg.predictions_path = value.get<std::string>();
      else if (key == "scenario") cfg.scenario = value.get<int>();
      else if (key == "n") cfg.n = value.get<int>();
      else if (key == "threshold") cfg.threshold = value.get<double>();
      else if (key == "grids") cfg.grids = value.get<std::vector<std::string>>();
      else if (key == "points") cfg.points = value.get<std::vector<std::vector<double>>>();
      else if (key == "units") cfg.units = value.get<std::vector<int>>();
      else if (key == "threads") cfg.threads = value.get<int>();
      else if (key == "record_wall_time") cfg.record_wall_time = value.get<bool>();
      else if (key == "graph_source") {
        const auto s = value.get<std::string>();
        if (s == "predictions") cfg.graph_source = GraphSource::Predictions;
        else if (s == "trace") cfg.graph_source = GraphSource::Trace;
        else throw Error(Errc::InvalidConfig, "graph_source must be 'predictions' or 'trace'");
      } else hp_keys[key] = value;
    }
  } catch (const io::json::exception& e) {
    throw Error(Errc::InvalidConfig, std::string("config: ") + e.what());
  }
  io::apply_json(cfg.hp, hp_keys);
}

inline RunConfig load_config(const fs::path& path) {
  RunConfig cfg;
  io::json j;
  try {
    j = io::json::parse(io::read_text(path));
  } catch (const io::json::exception& e) {
    throw Error(Errc::InvalidConfig, path.string() + ": " + e.what());
  }
  apply_config(cfg, j);
  return cfg;
}

inline int exit_code(Errc code) {
  switch (code) {
    case Errc::Io:
      return 3;
    case Errc::EigenFailure:
    case Errc::NegativeChi:
    case Errc::NotPD:
    case Errc::NonPositiveSigma:
    case Errc::StabilityRejectionExhausted:
    case Errc::SingularJacobian:
    case Errc::UnstableTruth:
      return 4;
    default:
      return 2;
  }
}

/// Runs a command body and maps failures to exit codes.
template <class F>
int guarded(const char* name, F&& body) {
  try {
    body();
    return 0;
  } catch (const Error& e) {
    std::cerr << name << ": " << to_string(e.code()) << ": " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::bad_alloc&) {
    std::cerr << name << ": out of memory\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << name << ": " << e.what() << '\n';
    return 2;
  }
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

inline int cmd_simulate(const RunConfig& cfg) {
  return guarded("simulate", [&] {
    std::pair<Dataset, GroundTruth> sim;
    if (cfg.scenario == 1) sim = gen_scenario1(cfg.n > 0 ? cfg.n : 250, cfg.hp.seed);
    else if (cfg.scenario == 2) sim = gen_scenario2(cfg.n > 0 ? cfg.n : 800, cfg.hp.seed);
    else throw Error(Errc::InvalidConfig, "scenario must be 1 or 2");
    io::write_dataset(sim.first, cfg.expr(), cfg.coords());
    io::write_text(cfg.truth(), io::truth_to_json(sim.second).dump(2) + "\n");
  });
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

inline io::json fit_meta(const Trace& trace, const Dataset& data) {
  return io::json{{"hyperparams", io::to_json(trace.hp)},
                  {"n", data.n()},
                  {"p", data.p()},
                  {"q", data.q()},
                  {"genes", data.gene_names},
                  {"retained_samples", trace.samples.size()},
                  {"swaps", io::swaps_to_json(trace.swaps)},
                  {"b_acceptance", trace.b_acceptance}};
}

inline int cmd_fit(const RunConfig& cfg) {
  Dataset data;
  const int early = guarded("fit", [&] {
    cfg.hp.validate();
    data = io::read_dataset(cfg.expr(), cfg.coords());
  });
  if (early != 0) return early;

  Trace trace;
  double seconds = 0.0;
  try {
    TemperingOptions options;
    options.threads = cfg.threads;
    options.keep_tau = false;
    if (!cfg.quiet) {
      options.progress = [](int done, int total) {
        if (done % 100 == 0 || done == total) std::cerr << "fit: iteration " << done << "/" << total << '\n';
      };
    }
    const auto start = std::chrono::steady_clock::now();
    trace = run_tempered(data, cfg.hp, options);
    seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  } catch (const Error& e) {
    std::cerr << "fit: " << to_string(e.code()) << ": " << e.what() << '\n';
    return e.code() == Errc::InvalidConfig ? 2 : 4;
  } catch (const std::exception& e) {
    std::cerr << "fit: sampler failure: " << e.what() << '\n';
    return 4;
  }
  std::cerr << "fit: wall time " << seconds << " s\n";

  return guarded("fit", [&] {
    io::write_text(cfg.trace(), io::format_trace(trace));
    io::json meta = fit_meta(trace, data);
    if (cfg.record_wall_time) meta["wall_time_seconds"] = seconds;
    io::write_text(cfg.trace().parent_path() / "meta.json", meta.dump(2) + "\n");
  });
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

inline std::vector<Eigen::VectorXd> prediction_points(const RunConfig& cfg, Eigen::Index q) {
  std::vector<Eigen::VectorXd> points;
  for (const auto& spec : cfg.grids) {
    auto grid = io::parse_grid_spec(spec, q);
    points.insert(points.end(), grid.begin(), grid.end());
  }
  for (const auto& pt : cfg.points) {
    if (static_cast<Eigen::Index>(pt.size()) != q) throw Error(Errc::InvalidConfig, "point dimension differs from q");
    points.push_back(Eigen::Map<const Eigen::VectorXd>(pt.data(), q));
  }
  if (points.empty()) throw Error(Errc::InvalidConfig, "no prediction points (use --grid or --point)");
  return points;
}

/// Predictions at each point, with an independent stream per point so the
/// result does not depend on the worker count.
inline std::vector<GraphPrediction> predict_points(const PredictionContext& context,
                                                   const std::vector<Eigen::VectorXd>& points, std::uint64_t seed,
                                                   int threads) {
  std::vector<GraphPrediction> out(points.size());
  const int workers = worker_count(threads, points.size());
  auto run = [&](int w) {
    for (std::size_t g = static_cast<std::size_t>(w); g < points.size(); g += static_cast<std::size_t>(workers)) {
      Rng rng = make_stream(seed, kPredictStreamBase + g);
      out[g] = context.predict(points[g], rng);
    }
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(run, w);
    for (auto& t : pool) t.join();
  }
  return out;
}

inline int cmd_predict(const RunConfig& cfg) {
  return guarded("predict", [&] {
    const Dataset data = io::read_dataset(cfg.expr(), cfg.coords());
    Trace trace = io::read_trace(cfg.trace());
    const auto points = prediction_points(cfg, data.q());
    Hyperparams hp = trace.hp;
    hp.seed = cfg.hp.seed;
    const PredictionContext context(trace, data, hp);
    const auto preds = predict_points(context, points, hp.seed, cfg.threads);
    io::json records = io::json::array();
    for (std::size_t g = 0; g < points.size(); ++g) {
      records.push_back(io::prediction_to_json(points[g], preds[g]));
    }
    io::json doc{{"genes", data.gene_names}, {"seed", hp.seed}, {"records", std::move(records)}};
    io::write_text(cfg.predictions(), doc.dump(2) + "\n");
  });
}

// ---------------------------------------------------------------------------
// export-graph
// ---------------------------------------------------------------------------

/// Union over records: edges above threshold in at least one record,
/// weighted by the mean inclusion probability.
inline std::vector<Edge> union_edges(const std::vector<Eigen::MatrixXd>& probs, double threshold) {
  if (probs.empty()) return {};
  const auto p = probs.front().rows();
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(p, p);
  Eigen::MatrixXi any = Eigen::MatrixXi::Zero(p, p);
  for (const auto& pr : probs) {
    mean += pr;
    for (const auto& e : edges_above(pr, threshold)) any(e.to, e.from) = 1;
  }
  mean /= static_cast<double>(probs.size());
  std::vector<Edge> edges;
  for (Eigen::Index to = 0; to < p; ++to) {
    for (Eigen::Index from = 0; from < p; ++from) {
      if (any(to, from)) edges.push_back({static_cast<int>(from), static_cast<int>(to), mean(to, from)});
    }
  }
  return edges;
}

inline int cmd_export_graph(const RunConfig& cfg) {
  return guarded("export-graph", [&] {
    if (!(cfg.threshold > 0.0 && cfg.threshold < 1.0)) {
      throw Error(Errc::InvalidConfig, "threshold must lie in (0, 1)");
    }
    const fs::path dir = cfg.out_dir / "graphs";
    if (cfg.graph_source == GraphSource::Predictions) {
      io::json doc;
      try {
        doc = io::json::parse(io::read_text(cfg.predictions()));
      } catch (const io::json::exception& e) {
        throw Error(Errc::Parse, std::string("predictions: ") + e.what());
      }
      const auto genes = doc.at("genes").get<std::vector<std::string>>();
      std::vector<Eigen::MatrixXd> probs;
      for (const auto& rec : doc.at("records")) probs.push_back(io::matrix_from_json(rec.at("edge_prob")));
      for (std::size_t k = 0; k < probs.size(); ++k) {
        const std::string name = "point_" + std::to_string(k + 1);
        io::write_text(dir / (name + ".dot"), io::format_dot(name, genes, probs[k], cfg.threshold));
      }
      io::write_text(dir / "union.dot", io::format_dot("union", genes, union_edges(probs, cfg.threshold)));
    } else {
      const Dataset data = io::read_dataset(cfg.expr(), cfg.coords());
      const Trace trace = io::read_trace(cfg.trace());
      const FittedGraphs graphs = fitted_graphs(trace, data, cfg.threshold);
      for (int unit : cfg.units) {
        if (unit < 1 || unit > data.n()) throw Error(Errc::InvalidConfig, "unit index out of range");
        const std::string name = "unit_" + std::to_string(unit);
        io::write_text(dir / (name + ".dot"), io::format_dot(name, data.gene_names, graphs.unit_edges[unit - 1]));
      }
      io::write_text(dir / "union.dot", io::format_dot("union", data.gene_names, graphs.union_edges));
    }
  });
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

inline io::json metrics_to_json(const StructureMetrics& m) {
  return io::json{{"tpr", m.tpr}, {"fdr", m.fdr}, {"mcc", m.mcc}};
}

/// Metrics document for a fitted trace against the simulation truth.
inline io::json evaluate_trace(const Trace& trace, const Dataset& data, const GroundTruth& truth, double threshold,
                               std::uint64_t seed, int threads) {
  const auto p = static_cast<int>(data.p());
  io::json out{{"scenario", truth.scenario},
               {"threshold", threshold},
               {"mcc_definition", "standard Matthews correlation with square-root denominator"},
               {"samples", trace.samples.size()}};
  std::vector<int> true_xi = truth.true_xi;
  if (true_xi.empty()) true_xi.assign(static_cast<std::size_t>(data.n()), 0);
  if (static_cast<Eigen::Index>(true_xi.size()) != data.n()) {
    throw Error(Errc::ShapeMismatch, "truth labels do not match the dataset");
  }
  std::vector<Eigen::MatrixXi> true_edges;
  for (const auto& sk : truth.skeletons) true_edges.push_back(skeleton_matrix(sk, p));

  const FittedGraphs graphs = fitted_graphs(trace, data, threshold);
  const auto per_cluster = cluster_structure_metrics(graphs, true_xi, true_edges, threshold);
  io::json clusters = io::json::array();
  StructureMetrics mean;
  for (std::size_t l = 0; l < per_cluster.size(); ++l) {
    io::json c = metrics_to_json(per_cluster[l]);
    c["cluster"] = l + 1;
    clusters.push_back(std::move(c));
    mean.tpr += per_cluster[l].tpr / per_cluster.size();
    mean.fdr += per_cluster[l].fdr / per_cluster.size();
    mean.mcc += per_cluster[l].mcc / per_cluster.size();
  }
  out["clusters"] = std::move(clusters);
  out["mean"] = metrics_to_json(mean);

  if (!truth.true_xi.empty()) {
    double accuracy = 0.0;
    std::vector<double> counts;
    for (const auto& s : trace.samples) {
      accuracy += align_clusters(s.xi, truth.true_xi).accuracy;
      counts.push_back(static_cast<double>(s.clusters.size()));
    }
    const auto T = static_cast<double>(trace.samples.size());
    out["clustering_accuracy"] = accuracy / T;
    double mean_k = 0.0;
    for (double k : counts) mean_k += k / T;
    out["mean_clusters"] = mean_k;
  }

  bool stable = true;
  for (const auto& s : trace.samples) {
    for (const auto& c : s.clusters) stable = stable && is_stable_or_reject(c.B, trace.hp.eps_stab);
  }
  out["all_stable"] = stable;

  if (truth.scenario == 2) {
    Hyperparams hp = trace.hp;
    const PredictionContext context(trace, data, hp);
    const auto grid = scenario2_slice_grid();
    const auto preds = predict_points(context, grid, seed, threads);
    const std::vector<std::pair<int, int>> entries{{1, 0}, {0, 2}, {2, 1}};
    const auto rec = curve_recovery(preds, grid, [](const Eigen::VectorXd& x) { return scenario2_B(x(0), x(1)); },
                                    entries);
    io::json curves = io::json::array();
    for (const auto& r : rec) {
      curves.push_back({{"to", r.to + 1}, {"from", r.from + 1}, {"rmse", r.rmse}, {"coverage", r.coverage}});
    }
    bool pred_stable = true;
    for (const auto& pr : preds) pred_stable = pred_stable && pr.all_stable;
    out["curves"] = std::move(curves);
    out["grid_points"] = grid.size();
    out["predictions_all_stable"] = pred_stable;
  }
  return out;
}

inline int cmd_evaluate(const RunConfig& cfg) {
  return guarded("evaluate", [&] {
    const Dataset data = io::read_dataset(cfg.expr(), cfg.coords());
    const Trace trace = io::read_trace(cfg.trace());
    if (trace.samples.empty()) throw Error(Errc::TooSmall, "trace has no samples");
    io::json truth_doc;
    try {
      truth_doc = io::json::parse(io::read_text(cfg.truth()));
    } catch (const io::json::exception& e) {
      throw Error(Errc::Parse, std::string("truth: ") + e.what());
    }
    const GroundTruth truth = io::truth_from_json(truth_doc);
    const io::json metrics = evaluate_trace(trace, data, truth, cfg.threshold, cfg.hp.seed, cfg.threads);
    io::write_text(cfg.out_dir / "metrics.json", metrics.dump(2) + "\n");
  });
}

}  // namespace dcgx
