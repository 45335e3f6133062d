#pragma once

// File formats: CSV datasets, JSON configuration and ground truth, the
// JSON-lines trace, prediction records and Graphviz DOT graphs.
//
// Cluster labels are written 1-based. Doubles go through nlohmann/json's
// shortest round-trip formatting, and CSV cells use 17 significant digits.

#include <Eigen/Dense>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "error.hpp"
#include "model.hpp"
#include "predict.hpp"
#include "simulate.hpp"

namespace dcgx::io {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Text files
// ---------------------------------------------------------------------------

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out << text;
  out.flush();
  if (!out) throw Error(Errc::Io, "write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

struct Table {
  std::vector<std::string> header;
  Eigen::MatrixXd values;
};

inline std::string format_csv(const std::vector<std::string>& header, const Eigen::MatrixXd& values) {
  std::ostringstream out;
  out << std::setprecision(17);
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
  out << '\n';
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    for (Eigen::Index c = 0; c < values.cols(); ++c) out << (c ? "," : "") << values(r, c);
    out << '\n';
  }
  return out.str();
}

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, sep)) cells.push_back(cell);
  if (!line.empty() && line.back() == sep) cells.emplace_back();
  return cells;
}

inline std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n\"");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n\"");
  return s.substr(first, last - first + 1);
}

inline Table parse_csv(const std::string& text, const std::string& name = "csv") {
  std::istringstream in(text);
  std::string line;
  Table table;
  if (!std::getline(in, line)) throw Error(Errc::Parse, name + ": missing header");
  for (auto& cell : split(line, ',')) table.header.push_back(trim(cell));
  std::vector<std::vector<double>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != table.header.size()) {
      throw Error(Errc::Parse, name + ": line " + std::to_string(line_no) + " has " +
                                   std::to_string(cells.size()) + " cells, expected " +
                                   std::to_string(table.header.size()));
    }
    std::vector<double> row;
    for (const auto& cell : cells) {
      const std::string t = trim(cell);
      char* end = nullptr;
      const double value = t.empty() ? 0.0 : std::strtod(t.c_str(), &end);
      if (t.empty() || end != t.c_str() + t.size()) {
        throw Error(Errc::Parse, name + ": bad number '" + t + "' on line " + std::to_string(line_no));
      }
      row.push_back(value);
    }
    rows.push_back(std::move(row));
  }
  table.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(table.header.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) table.values(r, c) = rows[r][c];
  }
  return table;
}

inline Table read_csv(const std::filesystem::path& path) { return parse_csv(read_text(path), path.string()); }

inline void write_dataset(const Dataset& data, const std::filesystem::path& expr_csv,
                          const std::filesystem::path& coords_csv) {
  write_text(expr_csv, format_csv(data.gene_names, data.Y));
  std::vector<std::string> coords_header;
  for (Eigen::Index d = 0; d < data.q(); ++d) coords_header.push_back("x" + std::to_string(d + 1));
  write_text(coords_csv, format_csv(coords_header, data.X));
}

inline Dataset read_dataset(const std::filesystem::path& expr_csv, const std::filesystem::path& coords_csv) {
  Table expr = read_csv(expr_csv);
  Table coords = read_csv(coords_csv);
  return validate_dataset(std::move(expr.values), std::move(coords.values), std::move(expr.header));
}

// ---------------------------------------------------------------------------
// JSON helpers
// ---------------------------------------------------------------------------

inline json to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json to_json(const Eigen::MatrixXi& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

inline Eigen::MatrixXd matrix_from_json(const json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(j.at(0).size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (static_cast<Eigen::Index>(j.at(r).size()) != cols) throw Error(Errc::Parse, "ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j.at(r).at(c).get<double>();
  }
  return m;
}

inline Eigen::MatrixXi imatrix_from_json(const json& j) { return matrix_from_json(j).cast<int>(); }

inline Eigen::VectorXd vector_from_json(const json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = j.at(i).get<double>();
  return v;
}

// ---------------------------------------------------------------------------
// Hyperparameters
// ---------------------------------------------------------------------------

inline json to_json(const Hyperparams& hp) {
  return json{{"lambda", hp.lambda},
              {"a_sigma", hp.a_sigma},
              {"b_sigma", hp.b_sigma},
              {"a_phi", hp.a_phi},
              {"b_phi", hp.b_phi},
              {"a_eta", hp.a_eta},
              {"b_eta", hp.b_eta},
              {"nu0", hp.nu0},
              {"omega", hp.omega},
              {"alpha", hp.alpha},
              {"tau_prop", hp.tau_prop},
              {"temperatures", hp.temperatures},
              {"swap_interval", hp.swap_interval},
              {"n_iter", hp.n_iter},
              {"n_burn", hp.n_burn},
              {"m_aux", hp.m_aux},
              {"init_clusters", hp.init_clusters},
              {"eps_stab", hp.eps_stab},
              {"seed", hp.seed},
              {"max_stability_tries", hp.max_stability_tries},
              {"adapt_tau_prop", hp.adapt_tau_prop},
              {"likelihood_only_b_ratio", hp.likelihood_only_b_ratio},
              {"pair_moves", hp.pair_moves},
              {"strict_paper_det", hp.strict_paper_det},
              {"include_x_in_swap", hp.include_x_in_swap},
              {"paper_y_predictive", hp.paper_y_predictive},
              {"temper_xi", hp.temper_xi}};
}

/// Overwrites the fields present in `j`; unknown keys are rejected.
inline void apply_json(Hyperparams& hp, const json& j) {
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "lambda") hp.lambda = value.get<double>();
      else if (key == "a_sigma") hp.a_sigma = value.get<double>();
      else if (key == "b_sigma") hp.b_sigma = value.get<double>();
      else if (key == "a_phi") hp.a_phi = value.get<double>();
      else if (key == "b_phi") hp.b_phi = value.get<double>();
      else if (key == "a_eta") hp.a_eta = value.get<double>();
      else if (key == "b_eta") hp.b_eta = value.get<double>();
      else if (key == "nu0") hp.nu0 = value.get<double>();
      else if (key == "omega") hp.omega = value.get<double>();
      else if (key == "alpha") hp.alpha = value.get<double>();
      else if (key == "tau_prop") hp.tau_prop = value.get<double>();
      else if (key == "temperatures") hp.temperatures = value.get<std::vector<double>>();
      else if (key == "swap_interval") hp.swap_interval = value.get<int>();
      else if (key == "n_iter") hp.n_iter = value.get<int>();
      else if (key == "n_burn") hp.n_burn = value.get<int>();
      else if (key == "m_aux") hp.m_aux = value.get<int>();
      else if (key == "init_clusters") hp.init_clusters = value.get<int>();
      else if (key == "eps_stab") hp.eps_stab = value.get<double>();
      else if (key == "seed") hp.seed = value.get<std::uint64_t>();
      else if (key == "max_stability_tries") hp.max_stability_tries = value.get<int>();
      else if (key == "adapt_tau_prop") hp.adapt_tau_prop = value.get<bool>();
      else if (key == "likelihood_only_b_ratio") hp.likelihood_only_b_ratio = value.get<bool>();
      else if (key == "pair_moves") hp.pair_moves = value.get<bool>();
      else if (key == "strict_paper_det") hp.strict_paper_det = value.get<bool>();
      else if (key == "include_x_in_swap") hp.include_x_in_swap = value.get<bool>();
      else if (key == "paper_y_predictive") hp.paper_y_predictive = value.get<bool>();
      else if (key == "temper_xi") hp.temper_xi = value.get<bool>();
      else throw Error(Errc::InvalidConfig, "unknown hyperparameter '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidConfig, e.what());
  }
}

inline Hyperparams hyperparams_from_json(const json& j) {
  Hyperparams hp;
  apply_json(hp, j);
  return hp;
}

// ---------------------------------------------------------------------------
// Trace (JSON lines)
// ---------------------------------------------------------------------------

inline json cluster_to_json(const ClusterParams& c) {
  return json{{"B", to_json(c.B)},   {"M", to_json(c.M)},     {"sigma", to_json(c.sigma)},
              {"gamma", to_json(c.gamma)}, {"eta", c.eta}, {"phi", c.phi}};
}

inline ClusterParams cluster_from_json(const json& j) {
  ClusterParams c;
  c.B = matrix_from_json(j.at("B"));
  c.M = vector_from_json(j.at("M"));
  c.sigma = vector_from_json(j.at("sigma"));
  c.gamma = imatrix_from_json(j.at("gamma"));
  c.eta = j.at("eta").get<double>();
  c.phi = j.at("phi").get<double>();
  return c;
}

inline json snapshot_to_json(const Snapshot& s) {
  json xi = json::array();
  for (int label : s.xi) xi.push_back(label + 1);
  json clusters = json::array();
  for (const auto& c : s.clusters) clusters.push_back(cluster_to_json(c));
  return json{{"iteration", s.iteration}, {"xi", std::move(xi)}, {"clusters", std::move(clusters)},
              {"loglik", s.loglik}};
}

inline Snapshot snapshot_from_json(const json& j) {
  Snapshot s;
  s.iteration = j.at("iteration").get<int>();
  for (const auto& label : j.at("xi")) s.xi.push_back(label.get<int>() - 1);
  for (const auto& c : j.at("clusters")) s.clusters.push_back(cluster_from_json(c));
  s.loglik = j.at("loglik").get<double>();
  for (int label : s.xi) {
    if (label < 0 || label >= static_cast<int>(s.clusters.size())) {
      throw Error(Errc::Parse, "trace label out of range");
    }
  }
  return s;
}

inline std::string format_trace(const Trace& trace) {
  std::string out;
  for (const auto& s : trace.samples) {
    out += snapshot_to_json(s).dump();
    out += '\n';
  }
  return out;
}

inline std::vector<Snapshot> parse_trace(const std::string& text) {
  std::vector<Snapshot> samples;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      samples.push_back(snapshot_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw Error(Errc::Parse, "trace line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return samples;
}

inline json swaps_to_json(const std::vector<SwapRecord>& swaps) {
  json arr = json::array();
  for (const auto& s : swaps) {
    arr.push_back({{"t_low", s.t_low}, {"t_high", s.t_high}, {"attempts", s.attempts},
                   {"accepts", s.accepts}, {"rate", s.rate()}});
  }
  return arr;
}

inline std::vector<SwapRecord> swaps_from_json(const json& j) {
  std::vector<SwapRecord> swaps;
  for (const auto& s : j) {
    swaps.push_back({s.at("t_low").get<double>(), s.at("t_high").get<double>(), s.at("attempts").get<int>(),
                     s.at("accepts").get<int>()});
  }
  return swaps;
}

/// Loads trace.jsonl together with meta.json when it sits next to it.
inline Trace read_trace(const std::filesystem::path& trace_path) {
  Trace trace;
  trace.samples = parse_trace(read_text(trace_path));
  const auto meta_path = trace_path.parent_path() / "meta.json";
  if (std::filesystem::exists(meta_path)) {
    try {
      const json meta = json::parse(read_text(meta_path));
      if (meta.contains("hyperparams")) trace.hp = hyperparams_from_json(meta.at("hyperparams"));
      if (meta.contains("swaps")) trace.swaps = swaps_from_json(meta.at("swaps"));
      if (meta.contains("b_acceptance")) trace.b_acceptance = meta.at("b_acceptance").get<double>();
    } catch (const json::exception& e) {
      throw Error(Errc::Parse, "meta.json: " + std::string(e.what()));
    }
  }
  return trace;
}

// ---------------------------------------------------------------------------
// Ground truth
// ---------------------------------------------------------------------------

inline json skeleton_to_json(const Skeleton& sk) {
  json arr = json::array();
  for (auto [from, to] : sk) arr.push_back({from + 1, to + 1});
  return arr;
}

inline Skeleton skeleton_from_json(const json& j) {
  Skeleton sk;
  for (const auto& e : j) sk.emplace_back(e.at(0).get<int>() - 1, e.at(1).get<int>() - 1);
  return sk;
}

inline json truth_to_json(const GroundTruth& truth) {
  json j{{"scenario", truth.scenario}, {"true_sigma", truth.true_sigma}};
  json skeletons = json::array();
  for (const auto& sk : truth.skeletons) skeletons.push_back(skeleton_to_json(sk));
  j["skeletons"] = std::move(skeletons);
  json M = json::array();
  for (const auto& m : truth.true_M) M.push_back(to_json(m));
  j["true_M"] = std::move(M);
  j["spectral_radius"] = truth.spectral_radius;
  if (truth.scenario == 1) {
    json xi = json::array();
    for (int l : truth.true_xi) xi.push_back(l + 1);
    j["true_xi"] = std::move(xi);
    json B = json::array();
    for (const auto& b : truth.true_B) B.push_back(to_json(b));
    j["true_B"] = std::move(B);
  } else {
    j["function"] = "f(z) = (exp(3z) - exp(3(1-z))) / (exp(3z) + exp(3(1-z))) + 0.1";
    j["entries"] = json::array({{{"to", 2}, {"from", 1}, {"argument", "sqrt(x1*x2)"}},
                                {{"to", 1}, {"from", 3}, {"argument", "sqrt((x1^2+x2^2)/2)"}},
                                {{"to", 3}, {"from", 2}, {"argument", "(x1+x2)/2"}}});
  }
  return j;
}

inline GroundTruth truth_from_json(const json& j) {
  try {
    GroundTruth t;
    t.scenario = j.at("scenario").get<int>();
    t.true_sigma = j.value("true_sigma", 0.1);
    for (const auto& sk : j.at("skeletons")) t.skeletons.push_back(skeleton_from_json(sk));
    if (j.contains("true_M")) {
      for (const auto& m : j.at("true_M")) t.true_M.push_back(vector_from_json(m));
    }
    if (j.contains("spectral_radius")) t.spectral_radius = j.at("spectral_radius").get<std::vector<double>>();
    if (j.contains("true_xi")) {
      for (const auto& l : j.at("true_xi")) t.true_xi.push_back(l.get<int>() - 1);
    }
    if (j.contains("true_B")) {
      for (const auto& b : j.at("true_B")) t.true_B.push_back(matrix_from_json(b));
    }
    return t;
  } catch (const json::exception& e) {
    throw Error(Errc::Parse, std::string("truth.json: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Prediction grids
// ---------------------------------------------------------------------------

/// Parses "x1=0:1:0.1 at x2=0.5": one ranged coordinate and fixed values for
/// the others. Every coordinate x1..xq must be named exactly once.
inline std::vector<Eigen::VectorXd> parse_grid_spec(const std::string& spec, Eigen::Index q) {
  static const std::regex term(R"(\s*x(\d+)\s*=\s*([^\s]+)\s*)");
  std::vector<std::string> parts;
  {
    std::string rest = spec;
    const std::string sep = " at ";
    std::size_t pos;
    while ((pos = rest.find(sep)) != std::string::npos) {
      parts.push_back(rest.substr(0, pos));
      rest = rest.substr(pos + sep.size());
    }
    parts.push_back(rest);
  }
  std::vector<double> start(static_cast<std::size_t>(q)), stop(static_cast<std::size_t>(q)),
      step(static_cast<std::size_t>(q), 0.0);
  std::vector<bool> seen(static_cast<std::size_t>(q), false);
  int ranged = -1;
  for (const auto& part : parts) {
    std::smatch m;
    if (!std::regex_match(part, m, term)) throw Error(Errc::InvalidConfig, "bad grid term '" + part + "'");
    const int axis = std::stoi(m[1].str()) - 1;
    if (axis < 0 || axis >= q || seen[axis]) throw Error(Errc::InvalidConfig, "bad grid axis in '" + spec + "'");
    seen[axis] = true;
    const auto fields = split(m[2].str(), ':');
    try {
      if (fields.size() == 1) {
        start[axis] = stop[axis] = std::stod(fields[0]);
      } else if (fields.size() == 3) {
        if (ranged >= 0) throw Error(Errc::InvalidConfig, "only one ranged axis per grid spec");
        ranged = axis;
        start[axis] = std::stod(fields[0]);
        stop[axis] = std::stod(fields[1]);
        step[axis] = std::stod(fields[2]);
        if (!(step[axis] > 0.0) || stop[axis] < start[axis]) {
          throw Error(Errc::InvalidConfig, "grid range needs step > 0 and stop >= start");
        }
      } else {
        throw Error(Errc::InvalidConfig, "grid value must be v or start:stop:step");
      }
    } catch (const std::invalid_argument&) {
      throw Error(Errc::InvalidConfig, "bad number in grid spec '" + spec + "'");
    }
  }
  for (bool s : seen) {
    if (!s) throw Error(Errc::InvalidConfig, "grid spec must fix every covariate: '" + spec + "'");
  }
  std::vector<Eigen::VectorXd> points;
  const long count = ranged < 0 ? 1 : static_cast<long>(std::floor((stop[ranged] - start[ranged]) / step[ranged] + 1e-9)) + 1;
  for (long s = 0; s < count; ++s) {
    Eigen::VectorXd x(q);
    for (Eigen::Index d = 0; d < q; ++d) x(d) = start[d];
    if (ranged >= 0) x(ranged) = start[ranged] + static_cast<double>(s) * step[ranged];
    points.push_back(std::move(x));
  }
  return points;
}

// ---------------------------------------------------------------------------
// DOT
// ---------------------------------------------------------------------------

inline constexpr double kMaxPenwidth = 5.0;

inline std::string format_dot(const std::string& name, const std::vector<std::string>& genes,
                              const std::vector<Edge>& edges) {
  std::ostringstream out;
  out << "digraph \"" << name << "\" {\n";
  for (const auto& g : genes) out << "  \"" << g << "\";\n";
  char buf[128];
  for (const auto& e : edges) {
    std::snprintf(buf, sizeof buf, " [penwidth=%.4f, label=\"%.3f\"];\n", kMaxPenwidth * e.weight, e.weight);
    out << "  \"" << genes.at(e.from) << "\" -> \"" << genes.at(e.to) << "\"" << buf;
  }
  out << "}\n";
  return out.str();
}

/// One node per gene and one edge per entry with prob > threshold.
inline std::string format_dot(const std::string& name, const std::vector<std::string>& genes,
                              const Eigen::MatrixXd& prob, double threshold) {
  return format_dot(name, genes, edges_above(prob, threshold));
}

struct DotEdge {
  std::string from;
  std::string to;
  double penwidth = 0.0;
};

/// Minimal reader for the DOT files written above.
inline std::vector<DotEdge> parse_dot_edges(const std::string& text) {
  static const std::regex edge(R"re("([^"]+)"\s*->\s*"([^"]+)"\s*\[penwidth=([0-9.eE+-]+))re");
  std::vector<DotEdge> edges;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), edge); it != std::sregex_iterator(); ++it) {
    edges.push_back({(*it)[1].str(), (*it)[2].str(), std::stod((*it)[3].str())});
  }
  return edges;
}

// ---------------------------------------------------------------------------
// Predictions
// ---------------------------------------------------------------------------

inline json prediction_to_json(const Eigen::VectorXd& x, const GraphPrediction& pred) {
  return json{{"x", to_json(x)},
              {"B_mean", to_json(pred.B_mean)},
              {"B_sd", to_json(pred.B_sd)},
              {"edge_prob", to_json(pred.edge_prob)},
              {"all_stable", pred.all_stable},
              {"samples", pred.B_samples.size()}};
}

}  // namespace dcgx::io
