#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "bnp_dcgx/commands.hpp"

using namespace dcgx;
using Eigen::MatrixXd;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("bnp_dcgx_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

RunConfig quick_config(const fs::path& dir) {
  RunConfig cfg;
  cfg.out_dir = dir;
  cfg.scenario = 2;
  cfg.n = 60;
  cfg.hp.seed = 5;
  cfg.hp.n_iter = 20;
  cfg.hp.n_burn = 10;
  cfg.hp.init_clusters = 3;
  cfg.threads = 1;
  return cfg;
}

}  // namespace

TEST(Csv, RoundTripIsExact) {
  Rng rng = make_stream(1, 0);
  MatrixXd Y(7, 3), X(7, 2);
  for (int i = 0; i < 7; ++i) {
    for (int j = 0; j < 3; ++j) Y(i, j) = std_normal(rng) * std::pow(10.0, j * 3 - 4);
    for (int d = 0; d < 2; ++d) X(i, d) = uniform_open(rng);
  }
  Y(0, 0) = 1.0 / 3.0;
  Y(1, 1) = -std::numeric_limits<double>::denorm_min();
  const auto data = validate_dataset(Y, X, {"a", "b", "c"});
  const fs::path dir = fresh_dir("csv");
  io::write_dataset(data, dir / "expr.csv", dir / "coords.csv");
  const auto back = io::read_dataset(dir / "expr.csv", dir / "coords.csv");
  EXPECT_EQ(back.Y, data.Y);
  EXPECT_EQ(back.X, data.X);
  EXPECT_EQ(back.gene_names, data.gene_names);
}

TEST(Csv, MalformedInputRaisesParse) {
  try {
    io::parse_csv("a,b\n1,2\n3\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::Parse);
  }
  EXPECT_THROW(io::parse_csv("a,b\n1,x\n"), Error);
}

TEST(Csv, MissingFileRaisesIo) {
  try {
    io::read_csv("/nonexistent/path/expr.csv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::Io);
  }
}

TEST(Trace, RoundTripToleratesTrailingNewline) {
  Snapshot s;
  s.iteration = 12;
  s.xi = {0, 1, 0};
  for (int l = 0; l < 2; ++l) {
    ClusterParams c;
    c.B = MatrixXd::Zero(2, 2);
    c.B(0, 1) = 0.1 + l / 3.0;
    c.gamma = Eigen::MatrixXi::Zero(2, 2);
    c.gamma(0, 1) = l;
    c.M = Eigen::VectorXd::Constant(2, -0.25);
    c.sigma = Eigen::VectorXd::Constant(2, 1.0 / 7.0);
    c.eta = 0.3;
    c.phi = 0.6;
    s.clusters.push_back(c);
  }
  s.loglik = -12.5;
  Trace trace;
  trace.samples = {s, s};
  const std::string text = io::format_trace(trace) + "\n";
  const auto back = io::parse_trace(text);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].xi, s.xi);
  EXPECT_EQ(back[1].clusters[1].B, s.clusters[1].B);
  EXPECT_EQ(back[1].clusters[1].sigma, s.clusters[1].sigma);
  EXPECT_EQ(back[0].clusters[1].gamma, s.clusters[1].gamma);
  EXPECT_EQ(back[0].loglik, -12.5);
  const auto j = io::json::parse(io::format_trace(trace).substr(0, io::format_trace(trace).find('\n')));
  EXPECT_EQ(j.at("xi")[1].get<int>(), 2);
}

TEST(Trace, BadLineRaisesParse) { EXPECT_THROW(io::parse_trace("{\"iteration\": 1}\n"), Error); }

TEST(Hyperparams, JsonRoundTripAndUnknownKey) {
  Hyperparams hp;
  hp.alpha = 2.5;
  hp.temperatures = {3.0, 1.0};
  const auto back = io::hyperparams_from_json(io::to_json(hp));
  EXPECT_EQ(back.alpha, 2.5);
  EXPECT_EQ(back.temperatures, hp.temperatures);
  io::json bad = {{"alphaa", 1.0}};
  try {
    io::apply_json(hp, bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::InvalidConfig);
  }
}

TEST(Truth, JsonRoundTrip) {
  const auto [data, truth] = gen_scenario1(4, 2);
  const auto back = io::truth_from_json(io::truth_to_json(truth));
  EXPECT_EQ(back.true_xi, truth.true_xi);
  EXPECT_EQ(back.skeletons, truth.skeletons);
  EXPECT_EQ(back.true_B[1], truth.true_B[1]);
}

TEST(Grid, SpecArithmetic) {
  const auto points = io::parse_grid_spec("x1=0:1:0.1 at x2=0.5", 2);
  ASSERT_EQ(points.size(), 11u);
  EXPECT_NEAR(points[10](0), 1.0, 1e-12);
  EXPECT_EQ(points[3](1), 0.5);
  EXPECT_EQ(io::parse_grid_spec("x2=0.2 at x1=0.7", 2).size(), 1u);
  EXPECT_THROW(io::parse_grid_spec("x1=0:1:0.1", 2), Error);
  EXPECT_THROW(io::parse_grid_spec("x1=0:1:0 at x2=1", 2), Error);
  EXPECT_THROW(io::parse_grid_spec("x3=1 at x1=0 at x2=0", 2), Error);
}

TEST(Dot, EmptyGraphHasNodesOnly) {
  const std::vector<std::string> genes{"a", "b", "c"};
  const std::string dot = io::format_dot("g", genes, MatrixXd::Constant(3, 3, 0.2), 0.5);
  EXPECT_TRUE(io::parse_dot_edges(dot).empty());
  for (const auto& g : genes) EXPECT_NE(dot.find("\"" + g + "\";"), std::string::npos);
}

TEST(Dot, CertainEdgeHasMaximumPenwidth) {
  const std::vector<std::string> genes{"a", "b"};
  MatrixXd prob = MatrixXd::Zero(2, 2);
  prob(1, 0) = 1.0;
  const auto edges = io::parse_dot_edges(io::format_dot("g", genes, prob, 0.5));
  ASSERT_EQ(edges.size(), 1u);
  EXPECT_EQ(edges[0].from, "a");
  EXPECT_EQ(edges[0].to, "b");
  EXPECT_EQ(edges[0].penwidth, io::kMaxPenwidth);
}

TEST(Config, RunKeysAndHyperparams) {
  RunConfig cfg;
  apply_config(cfg, io::json{{"scenario", 2}, {"threshold", 0.7}, {"alpha", 3.0}, {"n_iter", 50}});
  EXPECT_EQ(cfg.scenario, 2);
  EXPECT_EQ(cfg.threshold, 0.7);
  EXPECT_EQ(cfg.hp.alpha, 3.0);
  EXPECT_EQ(cfg.hp.n_iter, 50);
  EXPECT_THROW(apply_config(cfg, io::json{{"bogus", 1}}), Error);
}

TEST(ExitCodes, Mapping) {
  EXPECT_EQ(exit_code(Errc::InvalidConfig), 2);
  EXPECT_EQ(exit_code(Errc::NonFinite), 2);
  EXPECT_EQ(exit_code(Errc::Io), 3);
  EXPECT_EQ(exit_code(Errc::StabilityRejectionExhausted), 4);
  EXPECT_EQ(exit_code(Errc::NegativeChi), 4);
}

TEST(Commands, SimulateDefaultsAndDeterminism) {
  const fs::path a = fresh_dir("sim_a");
  const fs::path b = fresh_dir("sim_b");
  RunConfig cfg;
  cfg.hp.seed = 3;
  cfg.out_dir = a;
  ASSERT_EQ(cmd_simulate(cfg), 0);
  cfg.out_dir = b;
  ASSERT_EQ(cmd_simulate(cfg), 0);
  EXPECT_EQ(io::read_csv(a / "expr.csv").values.rows(), 750);
  EXPECT_EQ(io::read_text(a / "expr.csv"), io::read_text(b / "expr.csv"));
  EXPECT_EQ(io::read_text(a / "coords.csv"), io::read_text(b / "coords.csv"));
  EXPECT_EQ(io::read_text(a / "truth.json"), io::read_text(b / "truth.json"));
  cfg.scenario = 2;
  ASSERT_EQ(cmd_simulate(cfg), 0);
  EXPECT_EQ(io::read_csv(b / "coords.csv").values.rows(), 800);
}

TEST(Commands, PipelineIsDeterministicAndConsistent) {
  const fs::path dir = fresh_dir("pipeline");
  RunConfig cfg = quick_config(dir);
  ASSERT_EQ(cmd_simulate(cfg), 0);
  ASSERT_EQ(cmd_fit(cfg), 0);
  const std::string trace_text = io::read_text(cfg.trace());
  EXPECT_EQ(io::parse_trace(trace_text).size(), 10u);
  ASSERT_EQ(cmd_fit(cfg), 0);
  EXPECT_EQ(io::read_text(cfg.trace()), trace_text);

  cfg.grids = {"x1=0:1:0.1 at x2=0.5"};
  ASSERT_EQ(cmd_predict(cfg), 0);
  const std::string pred_text = io::read_text(cfg.predictions());
  const auto doc = io::json::parse(pred_text);
  EXPECT_EQ(doc.at("records").size(), 11u);
  ASSERT_EQ(cmd_predict(cfg), 0);
  EXPECT_EQ(io::read_text(cfg.predictions()), pred_text);

  ASSERT_EQ(cmd_export_graph(cfg), 0);
  EXPECT_TRUE(fs::exists(dir / "graphs" / "point_11.dot"));
  EXPECT_TRUE(fs::exists(dir / "graphs" / "union.dot"));

  ASSERT_EQ(cmd_evaluate(cfg), 0);
  const auto metrics = io::json::parse(io::read_text(dir / "metrics.json"));
  const auto data = io::read_dataset(cfg.expr(), cfg.coords());
  const auto truth = io::truth_from_json(io::json::parse(io::read_text(cfg.truth())));
  const auto in_memory = evaluate_trace(io::read_trace(cfg.trace()), data, truth, cfg.threshold, cfg.hp.seed, 1);
  EXPECT_EQ(metrics, in_memory);
  EXPECT_TRUE(metrics.contains("curves"));
}

TEST(Commands, MissingInputGivesIoExit) {
  const fs::path dir = fresh_dir("missing");
  RunConfig cfg = quick_config(dir);
  EXPECT_EQ(cmd_fit(cfg), 3);
}

TEST(Commands, InvalidHyperparamsGiveConfigExit) {
  const fs::path dir = fresh_dir("badcfg");
  RunConfig cfg = quick_config(dir);
  ASSERT_EQ(cmd_simulate(cfg), 0);
  cfg.hp.n_burn = cfg.hp.n_iter;
  EXPECT_EQ(cmd_fit(cfg), 2);
}
