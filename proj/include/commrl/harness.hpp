#pragma once

// Experiment orchestration: config ingestion (JSON or built-in presets), seeded multi-cell
// execution with a worker pool, CSV/JSON persistence, and plot-ready aggregate curves.
//
// A cell is one (strategy, seed) pair (for the static-game and congestion experiments) or one
// seed (for the Markov cooperative game pipeline). Every cell derives its own RNG stream from
// (seed, strategy tag), so adding strategies or seeds never perturbs other cells' randomness.
//
// Experiment documents:
//   {"preset": "fig-pg"}                               built-in preset, optionally overridden
//   {"kind": "pg" | "congestion" | "mcg",
//    "name": "my-exp", "seeds": [0, 1], "workers": 2, "out_dir": "out",
//    "emit": {"csv": true, "summary_json": true, "plot_data": true},
//    "strategies": ["bpp", "naive-is", "no-is", "full-comm"],
//    "game": {...game doc...},                          kind pg: see game_json.hpp
//    "congestion": {"n": 8, "weights_safe": [...], ...} kind congestion
//    "mcg_game": {...mcg doc...},                       kind mcg
//    "pg": {"episodes": 5000, "eta": 0.1, ...},
//    "markov": {"episodes": 500, "interval": 30, ...},
//    "mcg": {"episodes": 256, "selection_epsilon": 0.05, ...}}
// Any field present overrides the preset's value; missing fields keep defaults.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "commrl/game_json.hpp"
#include "commrl/markov_pg.hpp"
#include "commrl/mcg_solver.hpp"
#include "commrl/metrics.hpp"
#include "commrl/pg_solver.hpp"

namespace commrl {

enum class ExperimentKind { pg, congestion, mcg };

inline std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::pg: return "pg";
    case ExperimentKind::congestion: return "congestion";
    case ExperimentKind::mcg: return "mcg";
  }
  throw std::logic_error("unknown experiment kind");
}

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::pg;
  std::string name = "experiment";

  PotentialGameModel game;      ///< kind == pg
  CongestionConfig congestion;  ///< kind == congestion
  MCGModel mcg_game;            ///< kind == mcg

  std::vector<Strategy> strategies = {Strategy::full_comm, Strategy::no_is, Strategy::naive_is,
                                      Strategy::bpp};
  PGRunConfig pg;
  MarkovPGConfig markov;
  MCGRunConfig mcg;

  std::vector<std::uint64_t> seeds = {0};
  std::string out_dir = "out";
  bool emit_csv = true;
  bool emit_summary = true;
  bool emit_plot_data = true;
  int workers = 1;

  void validate() const {
    require_arg(!seeds.empty(), "need at least one seed");
    require_arg(workers >= 1, "workers must be >= 1");
    require_arg(!name.empty(), "experiment name must be non-empty");
    if (kind != ExperimentKind::mcg)
      require_arg(!strategies.empty(), "need at least one strategy");
    if (kind == ExperimentKind::pg) game.validate();
    if (kind == ExperimentKind::congestion) congestion.validate();
    if (kind == ExperimentKind::mcg) mcg_game.validate();
  }
};

// ---------------------------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------------------------

/// Static cooperative game experiment: 3 agents, 10 actions each, shared rewards U[0, 0.2]
/// behind a Bernoulli reward channel; 5000 episodes with a 500-episode communication interval
/// and 5 predicted base policies; 5 seeds.
inline ExperimentConfig preset_fig_pg() {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::pg;
  cfg.name = "fig-pg";
  cfg.game = make_random_cooperative_game(3, {10, 10, 10}, 0.0, 0.2, 1);
  cfg.game.noise.kind = NoiseKind::bernoulli_scaled;
  cfg.pg.mode = PGMode::practical;
  cfg.pg.episodes = 5000;
  cfg.pg.eta = 0.1;
  cfg.pg.epsilon = 0.1;
  cfg.pg.interval = 500;
  cfg.pg.bases = 5;
  cfg.pg.samples_per_probe = 20;
  cfg.seeds = {0, 1, 2, 3, 4};
  return cfg;
}

/// Two-state congestion experiment: 8 agents over 4 facilities with narrowly separated
/// weights, Bernoulli reward channel, 500 episodes, 30-episode interval, 6 predicted bases
/// (one per 5 episodes); 4 seeds.
inline ExperimentConfig preset_fig_congestion() {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::congestion;
  cfg.name = "fig-congestion";
  cfg.congestion.n = 8;
  cfg.congestion.weights_safe = {0.28, 0.32, 0.36, 0.40};
  cfg.congestion.distancing_multiplier = 0.5;
  cfg.markov.episodes = 500;
  cfg.markov.eta = 0.05;
  cfg.markov.epsilon = 0.1;
  cfg.markov.interval = 30;
  cfg.markov.bases = 6;
  cfg.markov.samples_per_probe = 8;
  cfg.markov.noise = NoiseKind::bernoulli_scaled;
  cfg.seeds = {3, 4, 5, 6};
  return cfg;
}

/// Markov cooperative game pipeline on the two-state congestion MCG at oracle-checkable size.
inline ExperimentConfig preset_mcg_demo() {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::mcg;
  cfg.name = "mcg-demo";
  CongestionConfig small;
  small.n = 2;
  small.weights_safe = {0.4, 0.8};
  small.distancing_multiplier = 0.5;
  cfg.mcg_game = make_congestion_mcg(small, 2);
  cfg.mcg.episodes = 1024;
  cfg.mcg.selection_epsilon = 0.05;
  cfg.mcg.delta = 0.05;
  cfg.seeds = {0, 1};
  return cfg;
}

inline ExperimentConfig preset_by_name(const std::string& name) {
  if (name == "fig-pg") return preset_fig_pg();
  if (name == "fig-congestion") return preset_fig_congestion();
  if (name == "mcg-demo") return preset_mcg_demo();
  throw std::invalid_argument("unknown preset '" + name +
                              "' (available: fig-pg, fig-congestion, mcg-demo)");
}

// ---------------------------------------------------------------------------------------------
// Config ingestion
// ---------------------------------------------------------------------------------------------

inline PGMode parse_pg_mode(const std::string& s, const std::string& path) {
  if (s == "practical") return PGMode::practical;
  if (s == "theory") return PGMode::theory;
  jsonio::fail(path, "unknown mode '" + s + "' (expected 'practical' or 'theory')");
}

inline void apply_pg_json(PGRunConfig& pg, const json& doc, const std::string& path) {
  if (doc.contains("mode")) pg.mode = parse_pg_mode(jsonio::need_string(doc, "mode", path), path + ".mode");
  pg.episodes = jsonio::integer_or(doc, "episodes", pg.episodes, path);
  pg.eta = jsonio::number_or(doc, "eta", pg.eta, path);
  pg.epsilon = jsonio::number_or(doc, "epsilon", pg.epsilon, path);
  pg.interval = static_cast<int>(jsonio::integer_or(doc, "interval", pg.interval, path));
  pg.bases = static_cast<int>(jsonio::integer_or(doc, "bases", pg.bases, path));
  pg.samples_per_probe =
      static_cast<int>(jsonio::integer_or(doc, "samples_per_probe", pg.samples_per_probe, path));
  pg.dedup_tol = jsonio::number_or(doc, "dedup_tol", pg.dedup_tol, path);
  pg.exact_marginals = jsonio::bool_or(doc, "exact_marginals", pg.exact_marginals, path);
  pg.metrics_eval_cap =
      jsonio::integer_or(doc, "metrics_eval_cap", pg.metrics_eval_cap, path);
}

inline void apply_markov_json(MarkovPGConfig& mk, const json& doc, const std::string& path) {
  mk.episodes = jsonio::integer_or(doc, "episodes", mk.episodes, path);
  mk.eta = jsonio::number_or(doc, "eta", mk.eta, path);
  mk.epsilon = jsonio::number_or(doc, "epsilon", mk.epsilon, path);
  mk.interval = static_cast<int>(jsonio::integer_or(doc, "interval", mk.interval, path));
  mk.bases = static_cast<int>(jsonio::integer_or(doc, "bases", mk.bases, path));
  mk.samples_per_probe =
      static_cast<int>(jsonio::integer_or(doc, "samples_per_probe", mk.samples_per_probe, path));
  if (doc.contains("noise"))
    mk.noise = jsonio::parse_noise(jsonio::need_string(doc, "noise", path), path + ".noise");
}

inline void apply_mcg_json(MCGRunConfig& mc, const json& doc, const std::string& path) {
  mc.episodes = jsonio::integer_or(doc, "episodes", mc.episodes, path);
  if (doc.contains("mode")) mc.mode = parse_pg_mode(jsonio::need_string(doc, "mode", path), path + ".mode");
  mc.bonus_scale = jsonio::number_or(doc, "bonus_scale", mc.bonus_scale, path);
  mc.c = jsonio::number_or(doc, "c", mc.c, path);
  mc.gap_delta = jsonio::number_or(doc, "gap_delta", mc.gap_delta, path);
  mc.delta = jsonio::number_or(doc, "delta", mc.delta, path);
  mc.selection_epsilon = jsonio::number_or(doc, "selection_epsilon", mc.selection_epsilon, path);
  mc.probes_per_estimate =
      static_cast<int>(jsonio::integer_or(doc, "probes_per_estimate", mc.probes_per_estimate, path));
  mc.deviate_all_steps = jsonio::bool_or(doc, "deviate_all_steps", mc.deviate_all_steps, path);
  mc.eta = jsonio::number_or(doc, "eta", mc.eta, path);
}

/// Parses an experiment document, expanding "preset" first and then applying overrides.
inline ExperimentConfig experiment_from_json(const json& doc, const std::string& path = "config") {
  if (!doc.is_object()) jsonio::fail(path, "expected an object");
  ExperimentConfig cfg;
  if (doc.contains("preset")) cfg = preset_by_name(jsonio::need_string(doc, "preset", path));

  if (doc.contains("kind")) {
    const std::string kind = jsonio::need_string(doc, "kind", path);
    if (kind == "pg") {
      cfg.kind = ExperimentKind::pg;
    } else if (kind == "congestion") {
      cfg.kind = ExperimentKind::congestion;
    } else if (kind == "mcg") {
      cfg.kind = ExperimentKind::mcg;
    } else {
      jsonio::fail(path + ".kind", "unknown experiment kind '" + kind + "'");
    }
  }
  cfg.name = jsonio::string_or(doc, "name", cfg.name, path);

  if (doc.contains("game")) cfg.game = game_from_json(doc.at("game"), path + ".game");
  if (doc.contains("congestion"))
    cfg.congestion = congestion_config_from_json(doc.at("congestion"), path + ".congestion");
  if (doc.contains("mcg_game")) cfg.mcg_game = mcg_from_json(doc.at("mcg_game"), path + ".mcg_game");

  if (doc.contains("strategies")) {
    const json& arr = doc.at("strategies");
    if (!arr.is_array() || arr.empty())
      jsonio::fail(path + ".strategies", "expected a non-empty array of strategy names");
    cfg.strategies.clear();
    for (std::size_t k = 0; k < arr.size(); ++k) {
      if (!arr[k].is_string())
        jsonio::fail(path + ".strategies[" + std::to_string(k) + "]", "expected a string");
      try {
        cfg.strategies.push_back(parse_strategy(arr[k].get<std::string>()));
      } catch (const std::invalid_argument& e) {
        jsonio::fail(path + ".strategies[" + std::to_string(k) + "]", e.what());
      }
    }
  }

  if (doc.contains("pg")) apply_pg_json(cfg.pg, doc.at("pg"), path + ".pg");
  if (doc.contains("markov")) apply_markov_json(cfg.markov, doc.at("markov"), path + ".markov");
  if (doc.contains("mcg")) apply_mcg_json(cfg.mcg, doc.at("mcg"), path + ".mcg");

  if (doc.contains("seeds")) {
    const json& arr = doc.at("seeds");
    if (!arr.is_array() || arr.empty())
      jsonio::fail(path + ".seeds", "expected a non-empty array of integers");
    cfg.seeds.clear();
    for (std::size_t k = 0; k < arr.size(); ++k) {
      if (!arr[k].is_number_integer())
        jsonio::fail(path + ".seeds[" + std::to_string(k) + "]", "expected an integer");
      cfg.seeds.push_back(arr[k].get<std::uint64_t>());
    }
  }
  cfg.out_dir = jsonio::string_or(doc, "out_dir", cfg.out_dir, path);
  cfg.workers = static_cast<int>(jsonio::integer_or(doc, "workers", cfg.workers, path));
  if (doc.contains("emit")) {
    const json& emit = doc.at("emit");
    cfg.emit_csv = jsonio::bool_or(emit, "csv", cfg.emit_csv, path + ".emit");
    cfg.emit_summary = jsonio::bool_or(emit, "summary_json", cfg.emit_summary, path + ".emit");
    cfg.emit_plot_data = jsonio::bool_or(emit, "plot_data", cfg.emit_plot_data, path + ".emit");
  }
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------------------------

struct CellResult {
  std::string tag;            ///< strategy name, or "mcg"
  std::uint64_t seed = 0;      ///< the seed list entry this cell belongs to
  std::uint64_t cell_seed = 0; ///< derived stream actually fed to the run
  std::vector<MetricsRow> rows;
  CommLedger ledger;
  double final_gap_estimate = std::numeric_limits<double>::quiet_NaN();  ///< MCG cells only
  std::string csv_file;        ///< relative file name when CSVs are emitted
};

struct ExperimentOutcome {
  std::vector<CellResult> cells;
  json summary;
  std::string summary_file;
  std::string plot_file;
};

/// Column-count / monotonicity schema check applied to every emitted CSV.
inline void validate_metrics_rows(const std::vector<MetricsRow>& rows) {
  for (std::size_t k = 0; k < rows.size(); ++k) {
    require_state(rows[k].episode == static_cast<long>(k), "episodes must increase by one");
    if (k > 0) {
      require_state(rows[k].comm_rounds >= rows[k - 1].comm_rounds,
                    "comm_rounds must be non-decreasing");
      require_state(rows[k].samples >= rows[k - 1].samples, "samples must be non-decreasing");
    }
  }
}

/// Population standard deviation (n in the denominator): for two samples this equals half the
/// absolute difference.
inline double population_std(const std::vector<double>& xs) {
  if (xs.size() <= 1) return 0.0;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  return std::sqrt(var / static_cast<double>(xs.size()));
}

/// Writes per-strategy mean and std reward curves:
/// episode,<tag>_mean,<tag>_std,... with tags in first-appearance order.
inline void emit_plot_data(const std::vector<CellResult>& cells, const std::string& file_path) {
  require_arg(!cells.empty(), "plot data needs at least one cell");
  std::vector<std::string> tags;
  for (const CellResult& c : cells) {
    bool seen = false;
    for (const std::string& t : tags) seen = seen || t == c.tag;
    if (!seen) tags.push_back(c.tag);
  }
  const std::size_t episodes = cells.front().rows.size();
  for (const CellResult& c : cells)
    require_arg(c.rows.size() == episodes, "all cells must have the same episode count");

  std::string out = "episode";
  for (const std::string& t : tags) out += "," + t + "_mean," + t + "_std";
  out += "\n";
  std::vector<double> bucket;
  for (std::size_t e = 0; e < episodes; ++e) {
    out += std::to_string(e);
    for (const std::string& t : tags) {
      bucket.clear();
      for (const CellResult& c : cells)
        if (c.tag == t) bucket.push_back(c.rows[e].reward);
      double mean = 0.0;
      for (double x : bucket) mean += x;
      mean /= static_cast<double>(bucket.size());
      out += "," + format_sig12(mean) + "," + format_sig12(population_std(bucket));
    }
    out += "\n";
  }
  std::ofstream f(file_path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + file_path);
  f << out;
}

namespace detail {

inline CellResult run_cell(const ExperimentConfig& cfg, const std::string& tag,
                           Strategy strategy, std::uint64_t seed) {
  CellResult cell;
  cell.tag = tag;
  cell.seed = seed;
  cell.cell_seed = derive_seed(seed, tag, 0);
  switch (cfg.kind) {
    case ExperimentKind::pg: {
      PGRunConfig pg = cfg.pg;
      pg.strategy = strategy;
      pg.seed = cell.cell_seed;
      PGRunResult r = run_pg(cfg.game, pg);
      cell.rows = std::move(r.rows);
      cell.ledger = std::move(r.ledger);
      break;
    }
    case ExperimentKind::congestion: {
      MarkovPGConfig mk = cfg.markov;
      mk.strategy = strategy;
      mk.seed = cell.cell_seed;
      MarkovPGResult r = run_congestion_pg(cfg.congestion, mk);
      cell.rows = std::move(r.rows);
      cell.ledger = std::move(r.ledger);
      break;
    }
    case ExperimentKind::mcg: {
      MCGRunConfig mc = cfg.mcg;
      mc.seed = cell.cell_seed;
      MCGRunResult r = run_mcg(cfg.mcg_game, mc);
      cell.rows = std::move(r.rows);
      cell.ledger = std::move(r.ledger);
      cell.final_gap_estimate = r.final_gap_estimate;
      break;
    }
  }
  validate_metrics_rows(cell.rows);
  return cell;
}

}  // namespace detail

/// Executes every cell (concurrently up to cfg.workers), writes the per-cell CSVs, the
/// summary JSON, and the plot data, and returns everything in memory as well. Any cell
/// failure is collected and rethrown with the cell's identity after all cells finish.
inline ExperimentOutcome run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();

  struct CellSpec {
    std::string tag;
    Strategy strategy = Strategy::bpp;
    std::uint64_t seed = 0;
  };
  std::vector<CellSpec> specs;
  if (cfg.kind == ExperimentKind::mcg) {
    for (std::uint64_t s : cfg.seeds) specs.push_back({"mcg", Strategy::bpp, s});
  } else {
    for (Strategy strat : cfg.strategies)
      for (std::uint64_t s : cfg.seeds) specs.push_back({to_string(strat), strat, s});
  }

  ExperimentOutcome outcome;
  outcome.cells.resize(specs.size());
  std::vector<std::string> failures(specs.size());

  std::atomic<std::size_t> next{0};
  const int workers = std::min<int>(cfg.workers, static_cast<int>(specs.size()));
  auto worker = [&]() {
    while (true) {
      const std::size_t k = next.fetch_add(1);
      if (k >= specs.size()) return;
      const CellSpec& spec = specs[k];
      try {
        outcome.cells[k] = detail::run_cell(cfg, spec.tag, spec.strategy, spec.seed);
      } catch (const std::exception& e) {
        failures[k] = e.what();
      }
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  std::string failure_report;
  for (std::size_t k = 0; k < specs.size(); ++k) {
    if (!failures[k].empty()) {
      failure_report += "cell " + specs[k].tag + "-seed" + std::to_string(specs[k].seed) + ": " +
                        failures[k] + "\n";
    }
  }
  if (!failure_report.empty()) throw std::runtime_error("experiment failed:\n" + failure_report);

  namespace fs = std::filesystem;
  if (cfg.emit_csv || cfg.emit_summary || cfg.emit_plot_data) fs::create_directories(cfg.out_dir);

  if (cfg.emit_csv) {
    for (CellResult& cell : outcome.cells) {
      cell.csv_file = cfg.name + "-" + cell.tag + "-seed" + std::to_string(cell.seed) + ".csv";
      write_metrics_csv((fs::path(cfg.out_dir) / cell.csv_file).string(), cell.rows);
    }
  }

  // Summary: per-cell finals plus per-tag aggregates.
  json cells_json = json::array();
  std::map<std::string, std::vector<const CellResult*>> by_tag;
  for (const CellResult& cell : outcome.cells) {
    json c;
    c["strategy"] = cell.tag;
    c["seed"] = cell.seed;
    c["cell_seed"] = cell.cell_seed;
    c["final_reward"] = cell.rows.empty() ? 0.0 : cell.rows.back().reward;
    c["comm_rounds"] = cell.ledger.rounds;
    c["samples"] = cell.ledger.samples;
    if (!cell.csv_file.empty()) c["csv"] = cell.csv_file;
    if (std::isfinite(cell.final_gap_estimate)) c["final_gap_estimate"] = cell.final_gap_estimate;
    cells_json.push_back(std::move(c));
    by_tag[cell.tag].push_back(&cell);
  }
  json strategies_json = json::object();
  for (const auto& [tag, group] : by_tag) {
    std::vector<double> finals;
    double rounds = 0.0, samples = 0.0;
    for (const CellResult* c : group) {
      finals.push_back(c->rows.empty() ? 0.0 : c->rows.back().reward);
      rounds += static_cast<double>(c->ledger.rounds) / static_cast<double>(group.size());
      samples += static_cast<double>(c->ledger.samples) / static_cast<double>(group.size());
    }
    double mean = 0.0;
    for (double f : finals) mean += f;
    mean /= static_cast<double>(finals.size());
    json s;
    s["mean_final_reward"] = mean;
    s["std_final_reward"] = population_std(finals);
    s["mean_comm_rounds"] = rounds;
    s["mean_samples"] = samples;
    strategies_json[tag] = std::move(s);
  }
  outcome.summary["name"] = cfg.name;
  outcome.summary["kind"] = to_string(cfg.kind);
  outcome.summary["episodes"] =
      outcome.cells.empty() ? 0 : static_cast<long>(outcome.cells.front().rows.size());
  outcome.summary["cells"] = std::move(cells_json);
  outcome.summary["strategies"] = std::move(strategies_json);

  if (cfg.emit_summary) {
    outcome.summary_file = (fs::path(cfg.out_dir) / (cfg.name + "-summary.json")).string();
    std::ofstream f(outcome.summary_file, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + outcome.summary_file);
    f << outcome.summary.dump(2) << "\n";
  }
  if (cfg.emit_plot_data) {
    outcome.plot_file = (fs::path(cfg.out_dir) / (cfg.name + "-plot.csv")).string();
    emit_plot_data(outcome.cells, outcome.plot_file);
  }
  return outcome;
}

}  // namespace commrl
