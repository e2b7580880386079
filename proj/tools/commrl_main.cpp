// commrl command-line interface.
//
// Subcommands
//   run-pg            static-game policy-gradient experiment from a JSON config
//   run-congestion    two-state congestion Markov experiment from a JSON config
//   run-mcg           Markov cooperative game pipeline from a JSON config
//   verify-potential  check the exact-potential identity of a game document
//   gap               exact equilibrium gap of a policy on a game document
//   reproduce         run a built-in preset (fig-pg, fig-congestion, mcg-demo)
//
// All run subcommands accept a config document (see include/commrl/game_json.hpp and
// include/commrl/harness.hpp for the schemas) plus command-line overrides, write one
// CSV per (strategy, seed) cell, a JSON summary, and a plot-data CSV into --out, and
// exit 0 on success or 1 with a diagnostic on any failure.

#include <commrl/game_json.hpp>
#include <commrl/harness.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <optional>
#include <string>
#include <vector>

namespace {

using commrl::json;

/// Parses "N" or "N..M" (inclusive) into a seed list.
std::vector<std::uint64_t> parse_seed_range(const std::string& text) {
  const std::size_t dots = text.find("..");
  try {
    if (dots == std::string::npos) return {std::stoull(text)};
    const std::uint64_t lo = std::stoull(text.substr(0, dots));
    const std::uint64_t hi = std::stoull(text.substr(dots + 2));
    if (hi < lo) throw std::invalid_argument("range is empty");
    std::vector<std::uint64_t> seeds;
    for (std::uint64_t s = lo; s <= hi; ++s) seeds.push_back(s);
    return seeds;
  } catch (const std::exception&) {
    throw CLI::ValidationError("--seeds", "expected N or N..M with M >= N, got '" + text + "'");
  }
}

/// Shared option state collected from the command line before overrides are applied.
struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::string seed_range;
  std::string mode;
  std::string strategy;
  std::optional<long> interval;
  std::optional<int> bases;
  std::optional<long> episodes;
  std::optional<double> epsilon;
  std::optional<double> delta;
  std::optional<int> workers;
};

void add_run_options(CLI::App& cmd, CommonOpts& opts, bool with_mode, bool with_strategy,
                     bool with_delta) {
  cmd.add_option("--config", opts.config_path, "experiment JSON document")->required();
  cmd.add_option("--out", opts.out_dir, "output directory for CSV/summary files");
  cmd.add_option("--seed", opts.seed, "run a single seed");
  cmd.add_option("--seeds", opts.seed_range, "inclusive seed range N..M (or a single N)");
  cmd.add_option("--workers", opts.workers, "number of concurrent cells");
  cmd.add_option("--episodes", opts.episodes, "episode horizon T");
  cmd.add_option("--epsilon", opts.epsilon,
                 "exploration floor (pg/congestion) or selection accuracy (mcg)");
  cmd.add_option("--interval", opts.interval, "communication interval K");
  cmd.add_option("--bases", opts.bases, "predicted base policies per round");
  if (with_mode)
    cmd.add_option("--mode", opts.mode, "theory or practical")
        ->check(CLI::IsMember({"theory", "practical"}));
  if (with_strategy)
    cmd.add_option("--strategy", opts.strategy, "restrict to one strategy")
        ->check(CLI::IsMember({"bpp", "no-is", "naive-is", "full-comm"}));
  if (with_delta) cmd.add_option("--delta", opts.delta, "confidence parameter");
}

commrl::ExperimentConfig load_experiment(const CommonOpts& opts,
                                         commrl::ExperimentKind expected) {
  const json doc = commrl::load_json_file(opts.config_path);
  commrl::ExperimentConfig cfg = commrl::experiment_from_json(doc);
  if (cfg.kind != expected)
    throw std::invalid_argument("config '" + opts.config_path + "' has kind '" +
                                commrl::to_string(cfg.kind) + "' but this subcommand runs '" +
                                commrl::to_string(expected) + "' experiments");
  return cfg;
}

void apply_overrides(commrl::ExperimentConfig& cfg, const CommonOpts& opts) {
  if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
  if (opts.seed) cfg.seeds = {*opts.seed};
  if (!opts.seed_range.empty()) cfg.seeds = parse_seed_range(opts.seed_range);
  if (opts.workers) cfg.workers = *opts.workers;
  if (!opts.strategy.empty()) cfg.strategies = {commrl::parse_strategy(opts.strategy)};
  if (!opts.mode.empty()) {
    const commrl::PGMode mode =
        opts.mode == "theory" ? commrl::PGMode::theory : commrl::PGMode::practical;
    cfg.pg.mode = mode;
    cfg.mcg.mode = mode;
  }
  switch (cfg.kind) {
    case commrl::ExperimentKind::pg:
      if (opts.episodes) cfg.pg.episodes = *opts.episodes;
      if (opts.epsilon) cfg.pg.epsilon = *opts.epsilon;
      if (opts.interval) cfg.pg.interval = *opts.interval;
      if (opts.bases) cfg.pg.bases = *opts.bases;
      break;
    case commrl::ExperimentKind::congestion:
      if (opts.episodes) cfg.markov.episodes = *opts.episodes;
      if (opts.epsilon) cfg.markov.epsilon = *opts.epsilon;
      if (opts.interval) cfg.markov.interval = *opts.interval;
      if (opts.bases) cfg.markov.bases = *opts.bases;
      break;
    case commrl::ExperimentKind::mcg:
      if (opts.episodes) cfg.mcg.episodes = *opts.episodes;
      if (opts.epsilon) cfg.mcg.selection_epsilon = *opts.epsilon;
      if (opts.delta) cfg.mcg.delta = *opts.delta;
      break;
  }
}

int run_and_report(commrl::ExperimentConfig cfg) {
  cfg.validate();
  const commrl::ExperimentOutcome outcome = commrl::run_experiment(cfg);
  const json& strategies = outcome.summary.at("strategies");
  for (const auto& [tag, agg] : strategies.items())
    std::printf("%-10s mean final reward %.6f +- %.6f   comm rounds %.1f\n", tag.c_str(),
                agg.at("mean_final_reward").get<double>(),
                agg.at("std_final_reward").get<double>(),
                agg.at("mean_comm_rounds").get<double>());
  if (!outcome.summary_file.empty()) std::printf("summary: %s\n", outcome.summary_file.c_str());
  if (!outcome.plot_file.empty()) std::printf("plot data: %s\n", outcome.plot_file.c_str());
  return 0;
}

int run_verify_potential(const std::string& config_path, double tol) {
  const json doc = commrl::load_json_file(config_path);
  const commrl::PotentialGameModel game = commrl::game_from_json(doc);
  if (!game.has_potential()) {
    std::fprintf(stderr, "game document carries no potential table to verify\n");
    return 1;
  }
  const commrl::PotentialCheck check = commrl::verify_potential(game, tol);
  std::printf("max potential-identity violation: %.3e (tolerance %.3e)\n", check.max_violation,
              tol);
  if (!check.ok) {
    std::fprintf(stderr, "potential identity violated\n");
    return 1;
  }
  std::puts("potential identity holds");
  return 0;
}

/// `gap` accepts either a bare game document (uniform-policy gap), an MCG document
/// (uniform Markov policy gap), or {"game": <game doc>, "policy": [[...], ...]}.
int run_gap(const std::string& config_path) {
  const json doc = commrl::load_json_file(config_path);
  json out;
  if (doc.contains("kind") && doc.at("kind").is_string() &&
      doc.at("kind").get<std::string>().rfind("mcg-", 0) == 0) {
    const commrl::MCGModel mcg = commrl::mcg_from_json(doc);
    const commrl::ValueReport report =
        commrl::exact_mcg_gap(mcg, commrl::MCGPolicy::uniform(mcg));
    out["policy"] = "uniform";
    out["value"] = report.value;
    out["best_response"] = report.best_response;
    out["gap"] = report.gap;
  } else {
    const bool wrapped = doc.contains("game");
    const commrl::PotentialGameModel game =
        commrl::game_from_json(wrapped ? doc.at("game") : doc);
    commrl::ProductPolicy pi = commrl::ProductPolicy::uniform(game.action_sizes);
    out["policy"] = "uniform";
    if (wrapped && doc.contains("policy")) {
      pi.agents = doc.at("policy").get<std::vector<commrl::ProbVec>>();
      pi.validate();
      out["policy"] = "explicit";
    }
    const commrl::ValueReport report = commrl::exact_pg_gap(game, pi);
    out["value"] = report.value;
    out["per_agent_value"] = report.per_agent_value;
    out["best_response"] = report.best_response;
    out["gap"] = report.gap;
  }
  std::printf("%s\n", out.dump(2).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"commrl: communication-budgeted multi-agent policy gradient toolkit"};
  app.require_subcommand(1);

  CommonOpts pg_opts, cong_opts, mcg_opts, repro_opts;
  std::string verify_path, gap_path, preset_name;
  double verify_tol = 1e-9;

  CLI::App* cmd_pg = app.add_subcommand("run-pg", "static-game policy-gradient experiment");
  add_run_options(*cmd_pg, pg_opts, /*mode=*/true, /*strategy=*/true, /*delta=*/false);

  CLI::App* cmd_cong =
      app.add_subcommand("run-congestion", "two-state congestion Markov experiment");
  add_run_options(*cmd_cong, cong_opts, /*mode=*/false, /*strategy=*/true, /*delta=*/false);

  CLI::App* cmd_mcg = app.add_subcommand("run-mcg", "Markov cooperative game pipeline");
  add_run_options(*cmd_mcg, mcg_opts, /*mode=*/true, /*strategy=*/false, /*delta=*/true);

  CLI::App* cmd_verify =
      app.add_subcommand("verify-potential", "check the exact-potential identity of a game");
  cmd_verify->add_option("--config", verify_path, "game JSON document")->required();
  cmd_verify->add_option("--epsilon", verify_tol, "violation tolerance (default 1e-9)");

  CLI::App* cmd_gap =
      app.add_subcommand("gap", "exact equilibrium gap of a policy on a game document");
  cmd_gap->add_option("--config", gap_path, "game document, MCG document, or {game, policy}")
      ->required();

  CLI::App* cmd_repro = app.add_subcommand("reproduce", "run a built-in experiment preset");
  cmd_repro->add_option("preset", preset_name, "fig-pg, fig-congestion, or mcg-demo")
      ->required();
  cmd_repro->add_option("--out", repro_opts.out_dir, "output directory");
  cmd_repro->add_option("--seed", repro_opts.seed, "run a single seed");
  cmd_repro->add_option("--seeds", repro_opts.seed_range, "inclusive seed range N..M");
  cmd_repro->add_option("--workers", repro_opts.workers, "number of concurrent cells");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_pg->parsed()) {
      commrl::ExperimentConfig cfg = load_experiment(pg_opts, commrl::ExperimentKind::pg);
      apply_overrides(cfg, pg_opts);
      return run_and_report(std::move(cfg));
    }
    if (cmd_cong->parsed()) {
      commrl::ExperimentConfig cfg =
          load_experiment(cong_opts, commrl::ExperimentKind::congestion);
      apply_overrides(cfg, cong_opts);
      return run_and_report(std::move(cfg));
    }
    if (cmd_mcg->parsed()) {
      commrl::ExperimentConfig cfg = load_experiment(mcg_opts, commrl::ExperimentKind::mcg);
      apply_overrides(cfg, mcg_opts);
      return run_and_report(std::move(cfg));
    }
    if (cmd_verify->parsed()) return run_verify_potential(verify_path, verify_tol);
    if (cmd_gap->parsed()) return run_gap(gap_path);
    if (cmd_repro->parsed()) {
      commrl::ExperimentConfig cfg = commrl::preset_by_name(preset_name);
      if (!repro_opts.out_dir.empty()) cfg.out_dir = repro_opts.out_dir;
      if (repro_opts.seed) cfg.seeds = {*repro_opts.seed};
      if (!repro_opts.seed_range.empty()) cfg.seeds = parse_seed_range(repro_opts.seed_range);
      if (repro_opts.workers) cfg.workers = *repro_opts.workers;
      return run_and_report(std::move(cfg));
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  std::fprintf(stderr, "error: no subcommand selected\n");
  return 1;
}
