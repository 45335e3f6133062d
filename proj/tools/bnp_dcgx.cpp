#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "bnp_dcgx/bnp_dcgx.hpp"

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> scenario;
  std::optional<double> threshold;
  std::optional<std::string> out_dir;
  std::optional<std::string> expr_csv;
  std::optional<std::string> coords_csv;
  std::optional<std::string> trace;
  std::optional<std::string> truth;
  std::optional<std::string> predictions;
  std::optional<int> n;
  std::optional<int> n_iter;
  std::optional<int> n_burn;
  std::optional<int> threads;
  std::vector<std::string> grids;
  std::vector<std::string> points;
  std::vector<int> units;
  std::optional<std::string> source;
  bool strict_paper_det = false;
  bool include_x_in_swap = false;
  bool paper_y_predictive = false;
  bool record_wall_time = false;
  bool verbose = false;
};

std::vector<double> parse_point(const std::string& text) {
  std::vector<double> values;
  for (const auto& cell : dcgx::io::split(text, ',')) {
    try {
      values.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw dcgx::Error(dcgx::Errc::InvalidConfig, "bad point '" + text + "'");
    }
  }
  return values;
}

dcgx::RunConfig build_config(const Flags& f) {
  dcgx::RunConfig cfg = f.config.empty() ? dcgx::RunConfig{} : dcgx::load_config(f.config);
  if (f.seed) cfg.hp.seed = *f.seed;
  if (f.scenario) cfg.scenario = *f.scenario;
  if (f.threshold) cfg.threshold = *f.threshold;
  if (f.out_dir) cfg.out_dir = *f.out_dir;
  if (f.expr_csv) cfg.expr_csv = *f.expr_csv;
  if (f.coords_csv) cfg.coords_csv = *f.coords_csv;
  if (f.trace) cfg.trace_path = *f.trace;
  if (f.truth) cfg.truth_path = *f.truth;
  if (f.predictions) cfg.predictions_path = *f.predictions;
  if (f.n) cfg.n = *f.n;
  if (f.n_iter) cfg.hp.n_iter = *f.n_iter;
  if (f.n_burn) cfg.hp.n_burn = *f.n_burn;
  if (f.threads) cfg.threads = *f.threads;
  if (!f.grids.empty()) cfg.grids = f.grids;
  for (const auto& pt : f.points) cfg.points.push_back(parse_point(pt));
  if (!f.units.empty()) cfg.units = f.units;
  if (f.source) cfg.graph_source = *f.source == "trace" ? dcgx::GraphSource::Trace : dcgx::GraphSource::Predictions;
  if (f.strict_paper_det) cfg.hp.strict_paper_det = true;
  if (f.include_x_in_swap) cfg.hp.include_x_in_swap = true;
  if (f.paper_y_predictive) cfg.hp.paper_y_predictive = true;
  if (f.record_wall_time) cfg.record_wall_time = true;
  cfg.quiet = !f.verbose;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Covariate-dependent cyclic gene-network inference"};
  app.require_subcommand(1);
  Flags f;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", f.seed, "random seed");
    sub->add_option("--out-dir", f.out_dir, "output directory");
    sub->add_option("--expr", f.expr_csv, "expression CSV (default OUT/expr.csv)");
    sub->add_option("--coords", f.coords_csv, "covariate CSV (default OUT/coords.csv)");
    sub->add_option("--threads", f.threads, "worker threads");
    sub->add_flag("--verbose", f.verbose, "progress on stderr");
  };

  auto* simulate = app.add_subcommand("simulate", "generate a benchmark dataset");
  common(simulate);
  simulate->add_option("--scenario", f.scenario, "1 or 2")->check(CLI::IsMember({1, 2}));
  simulate->add_option("--n", f.n, "units per cluster (scenario 1) or units (scenario 2)");
  simulate->add_option("--truth", f.truth, "truth JSON path");

  auto* fit = app.add_subcommand("fit", "run the tempered sampler");
  common(fit);
  fit->add_option("--trace", f.trace, "trace output (default OUT/trace.jsonl)");
  fit->add_option("--n-iter", f.n_iter, "iterations");
  fit->add_option("--n-burn", f.n_burn, "burn-in iterations");
  fit->add_flag("--strict-paper-det", f.strict_paper_det, "signed determinant in the Jacobian");
  fit->add_flag("--include-x-in-swap", f.include_x_in_swap, "covariate marginal in swap ratios");
  fit->add_flag("--paper-y-predictive", f.paper_y_predictive, "literal Y predictive in label updates");
  fit->add_flag("--record-wall-time", f.record_wall_time, "store wall time in meta.json");

  auto* predict = app.add_subcommand("predict", "partition-averaged B(x) at new covariates");
  common(predict);
  predict->add_option("--trace", f.trace, "trace input");
  predict->add_option("--predictions", f.predictions, "output (default OUT/predictions.json)");
  predict->add_option("--grid", f.grids, "grid spec, e.g. \"x1=0:1:0.1 at x2=0.5\"");
  predict->add_option("--point", f.points, "comma-separated covariate point");

  auto* export_graph = app.add_subcommand("export-graph", "write DOT graphs");
  common(export_graph);
  export_graph->add_option("--source", f.source, "predictions or trace")
      ->check(CLI::IsMember({"predictions", "trace"}));
  export_graph->add_option("--predictions", f.predictions, "predictions input");
  export_graph->add_option("--trace", f.trace, "trace input");
  export_graph->add_option("--unit", f.units, "1-based unit index (trace source)");
  export_graph->add_option("--threshold", f.threshold, "edge inclusion threshold");

  auto* evaluate = app.add_subcommand("evaluate", "score a trace against simulation truth");
  common(evaluate);
  evaluate->add_option("--trace", f.trace, "trace input");
  evaluate->add_option("--truth", f.truth, "truth JSON");
  evaluate->add_option("--threshold", f.threshold, "edge inclusion threshold");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  dcgx::RunConfig cfg;
  try {
    cfg = build_config(f);
  } catch (const dcgx::Error& e) {
    std::cerr << "config: " << e.what() << '\n';
    return dcgx::exit_code(e.code());
  }

  if (*simulate) return dcgx::cmd_simulate(cfg);
  if (*fit) return dcgx::cmd_fit(cfg);
  if (*predict) return dcgx::cmd_predict(cfg);
  if (*export_graph) return dcgx::cmd_export_graph(cfg);
  if (*evaluate) return dcgx::cmd_evaluate(cfg);
  return 2;
}
