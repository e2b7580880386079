// Standalone acceptance suite: ten end-to-end checks over the library and the bundled
// experiment presets, printing exactly one [PASS]/[FAIL] line per check. Exit code is 0
// only when every check passes. Runs in a few minutes on a desktop machine.

#include <commrl/game_json.hpp>
#include <commrl/harness.hpp>
#include <commrl/markov_pg.hpp>
#include <commrl/mcg_solver.hpp>
#include <commrl/oracle.hpp>
#include <commrl/pg_solver.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace commrl;

namespace {

struct CheckResult {
  bool pass = false;
  std::string detail;
};

int g_failures = 0;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

template <typename Fn>
void criterion(int index, const char* label, Fn&& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  CheckResult r;
  try {
    r = fn();
  } catch (const std::exception& e) {
    r.pass = false;
    r.detail = std::string("exception: ") + e.what();
  }
  if (!r.pass) ++g_failures;
  std::printf("[%s] %2d %-38s %s (%.1fs)\n", r.pass ? "PASS" : "FAIL", index, label,
              r.detail.c_str(), seconds_since(t0));
  std::fflush(stdout);
}

std::string fmt(const char* f, ...) {
  va_list args;
  va_start(args, f);
  char buf[512];
  std::vsnprintf(buf, sizeof(buf), f, args);
  va_end(args);
  return std::string(buf);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

// -------------------------------------------------------------------------------------------
// 1. The 8-agent / 4-facility congestion stage game satisfies the exact-potential identity
//    across all 65,536 profiles and every unilateral deviation, within 1e-9, in < 10 s.
CheckResult check_congestion_potential() {
  const auto t0 = std::chrono::steady_clock::now();
  const CongestionConfig cfg;  // 8 agents, weights 0.1/0.2/0.3/0.4
  const PotentialGameModel game = make_congestion_stage_game(cfg, CongestionState::safe);
  const PotentialCheck check = verify_potential(game, 1e-9);
  const double secs = seconds_since(t0);
  const bool pass = check.ok && secs < 10.0;
  return {pass, fmt("max violation %.2e over %zu profiles", check.max_violation,
                    game.joint_count())};
}

// -------------------------------------------------------------------------------------------
// 2. Mirror-ascent with exact marginals never decreases the potential (within 1e-12) over
//    2000 steps on each of 20 random cooperative games.
CheckResult check_exact_ascent_monotone() {
  double worst = 0.0;
  for (int g = 0; g < 20; ++g) {
    const PotentialGameModel game = make_random_cooperative_game(
        3, {10, 10, 10}, 0.0, 0.2, 1000 + static_cast<std::uint64_t>(g));
    const double eta = 1.0 / (2.0 * 3.0 * game.big_m());
    ProductPolicy pi = ProductPolicy::uniform(game.action_sizes);
    double phi_prev = exact_potential_value(game, pi);
    for (int t = 0; t < 2000; ++t) {
      pi = npg_step(pi, exact_marginals_all(game, pi), eta);
      const double phi = exact_potential_value(game, pi);
      worst = std::min(worst, phi - phi_prev);
      phi_prev = phi;
    }
  }
  return {worst >= -1e-12, fmt("worst potential step %.2e over 20 games x 2000 steps", worst)};
}

// -------------------------------------------------------------------------------------------
// 3. Off-policy marginal estimates respect their Hoeffding envelope: with 1e5 probes per
//    action and importance ratios <= 5, at least 99 of 100 random (base, target) pairs land
//    within ratio_max * r_max * sqrt(ln(2/0.001) / (2N)) of the exact value.
CheckResult check_is_accuracy() {
  const long N = 100000;
  int pass_count = 0;
  double worst_margin = std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < 100; ++trial) {
    PotentialGameModel game = make_random_cooperative_game(
        2, {3, 3}, 0.0, 1.0, 5000 + static_cast<std::uint64_t>(trial));
    game.noise.kind = NoiseKind::exact;
    Rng pair_rng(derive_seed(900, "c3", static_cast<std::uint64_t>(trial)));
    const auto random_floored = [&pair_rng](const std::vector<int>& sizes) {
      ProductPolicy p = ProductPolicy::uniform(sizes);
      for (auto& row : p.agents) {
        double s = 0.0;
        for (double& v : row) {
          v = pair_rng.uniform(0.0, 1.0);
          s += v;
        }
        for (double& v : row) v /= s;
      }
      return floor_and_mix(p, 0.3);
    };
    const ProductPolicy base = random_floored(game.action_sizes);
    const ProductPolicy target_raw = random_floored(game.action_sizes);
    ProductPolicy target = base;
    for (std::size_t i = 0; i < target.agents.size(); ++i)
      for (std::size_t a = 0; a < target.agents[i].size(); ++a)
        target.agents[i][a] = 0.5 * base.agents[i][a] + 0.5 * target_raw.agents[i][a];

    Rng data_rng(derive_seed(901, "c3data", static_cast<std::uint64_t>(trial)));
    const BaseDataset ds = collect_base_dataset(game, base, static_cast<int>(N), data_rng);
    const MarginalEstimate est = estimate_marginals_is(ds, target);

    const int i = trial % 2;
    const int a = trial % 3;
    const int j = 1 - i;
    double ratio_max = 0.0;
    for (std::size_t aj = 0; aj < target.agents[static_cast<std::size_t>(j)].size(); ++aj)
      ratio_max = std::max(ratio_max, target.agents[static_cast<std::size_t>(j)][aj] /
                                          base.agents[static_cast<std::size_t>(j)][aj]);
    const double bound = ratio_max * game.r_max *
                         std::sqrt(std::log(2.0 / 0.001) / (2.0 * static_cast<double>(N)));
    const double exact = exact_marginal_reward(game, i, target)[static_cast<std::size_t>(a)];
    const double err =
        std::abs(est.marginals[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)] - exact);
    if (err <= bound) ++pass_count;
    worst_margin = std::min(worst_margin, bound - err);
  }
  return {pass_count >= 99,
          fmt("%d/100 within the envelope, worst margin %.2e", pass_count, worst_margin)};
}

// -------------------------------------------------------------------------------------------
// 4. Adaptive-recommunication mode keeps every importance ratio at or below its hard guard
//    (2 e^17) throughout a full run at exploration floor 1e-6; violations would throw.
CheckResult check_adaptive_ratio_guard() {
  PotentialGameModel game = make_random_cooperative_game(3, {3, 3, 3}, 0.0, 0.2, 77);
  game.noise.kind = NoiseKind::bernoulli_scaled;
  PGRunConfig cfg;
  cfg.strategy = Strategy::bpp;
  cfg.mode = PGMode::theory;
  cfg.episodes = 1500;
  cfg.epsilon = 1e-6;
  cfg.samples_per_probe = 5;
  cfg.seed = 4242;
  const PGRunResult res = run_pg(game, cfg);
  const double guard = 2.0 * std::exp(17.0);
  return {res.max_importance_ratio <= guard,
          fmt("max ratio %.3f <= %.3e across %llu rounds", res.max_importance_ratio, guard,
              static_cast<unsigned long long>(res.ledger.rounds))};
}

// -------------------------------------------------------------------------------------------
// 5. Static-game preset: budgeted prediction matches the per-episode communicator within 5%
//    relative final reward, beats both stale baselines, and uses exactly 10 rounds vs 5000.
CheckResult check_static_preset_ordering() {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig cfg = preset_fig_pg();
  cfg.emit_csv = cfg.emit_summary = cfg.emit_plot_data = false;
  cfg.workers = 4;
  const ExperimentOutcome out = run_experiment(cfg);
  const json& agg = out.summary.at("strategies");
  const double bpp = agg.at("bpp").at("mean_final_reward").get<double>();
  const double naive = agg.at("naive-is").at("mean_final_reward").get<double>();
  const double no_is = agg.at("no-is").at("mean_final_reward").get<double>();
  const double full = agg.at("full-comm").at("mean_final_reward").get<double>();
  bool rounds_ok = true;
  for (const CellResult& cell : out.cells) {
    if (cell.tag == "bpp" && cell.ledger.rounds != 10) rounds_ok = false;
    if (cell.tag == "full-comm" && cell.ledger.rounds != 5000) rounds_ok = false;
  }
  const double secs = seconds_since(t0);
  const bool pass = bpp >= naive && bpp >= no_is && std::abs(bpp - full) / full <= 0.05 &&
                    rounds_ok && secs < 120.0;
  return {pass, fmt("bpp %.4f vs naive %.4f / no-is %.4f / full %.4f, rel diff %.2f%%, "
                    "rounds 10 vs 5000 %s",
                    bpp, naive, no_is, full, 100.0 * std::abs(bpp - full) / full,
                    rounds_ok ? "ok" : "VIOLATED")};
}

// -------------------------------------------------------------------------------------------
// 6. Markov congestion preset: budgeted prediction strictly beats stale-anchor importance
//    sampling, and the frozen-estimate baseline converges below it.
CheckResult check_markov_preset_ordering() {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig cfg = preset_fig_congestion();
  cfg.emit_csv = cfg.emit_summary = cfg.emit_plot_data = false;
  cfg.workers = 4;
  const ExperimentOutcome out = run_experiment(cfg);
  const json& agg = out.summary.at("strategies");
  const double bpp = agg.at("bpp").at("mean_final_reward").get<double>();
  const double naive = agg.at("naive-is").at("mean_final_reward").get<double>();
  const double no_is = agg.at("no-is").at("mean_final_reward").get<double>();
  const double secs = seconds_since(t0);
  const bool pass = bpp > naive && no_is < bpp && secs < 120.0;
  return {pass,
          fmt("bpp %.4f > naive %.4f and no-is %.4f below bpp", bpp, naive, no_is)};
}

// -------------------------------------------------------------------------------------------
// 7. The first-order gap estimate brackets the exact equilibrium gap at every iterate:
//    g <= Gap + 1e-9 and Gap <= (1 + 1/(c*delta*eta)) * g + 1e-9 with c and delta taken
//    from the oracle at the current policy.
CheckResult check_gap_sandwich() {
  double worst_lower = std::numeric_limits<double>::infinity();
  double worst_upper = std::numeric_limits<double>::infinity();
  for (int g = 0; g < 10; ++g) {
    const PotentialGameModel game = make_random_cooperative_game(
        2, {4, 5}, 0.0, 1.0, 7000 + static_cast<std::uint64_t>(g));
    const double eta = 1.0 / (2.0 * 2.0 * game.big_m());
    ProductPolicy pi_hat = ProductPolicy::uniform(game.action_sizes);
    for (int t = 0; t < 200; ++t) {
      const std::vector<ProbVec> ell = exact_marginals_all(game, pi_hat);
      const ProductPolicy pi_next = npg_step(pi_hat, ell, eta);
      const double gt = estimate_nash_gap(ell, pi_next, pi_hat);
      const ValueReport rep = exact_pg_gap(game, pi_hat);
      double c = 1.0;
      double delta = std::numeric_limits<double>::infinity();
      for (const GapAssumptionParams& p : assumption_params(game, pi_hat)) {
        c = std::min(c, p.c);
        delta = std::min(delta, p.delta);
      }
      const double inv = std::isfinite(delta) ? 1.0 / (c * delta * eta) : 0.0;
      worst_lower = std::min(worst_lower, rep.gap + 1e-9 - gt);
      worst_upper = std::min(worst_upper, (1.0 + inv) * gt + 1e-9 - rep.gap);
      pi_hat = floor_and_mix(pi_next, 0.05);
    }
  }
  return {worst_lower >= 0.0 && worst_upper >= 0.0,
          fmt("slack lower %.2e upper %.2e over 10 games x 200 iterates", worst_lower,
              worst_upper)};
}

// -------------------------------------------------------------------------------------------
// 8. Flooring moves a two-agent product policy by at most 2*eps in exact joint total
//    variation, and the deduplicated predicted-base set on a fixed-margin game stays within
//    its cardinality budget 2nM log(maxA/eps) / Delta.
CheckResult check_flooring_and_base_count() {
  Rng rng(31337);
  double worst_slack = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 1000; ++k) {
    const std::vector<int> sizes = {2 + static_cast<int>(rng.uniform(0.0, 4.999)),
                                    2 + static_cast<int>(rng.uniform(0.0, 4.999))};
    ProductPolicy p = ProductPolicy::uniform(sizes);
    for (auto& row : p.agents) {
      double s = 0.0;
      for (double& v : row) {
        v = 1e-9 + rng.uniform(0.0, 1.0);
        s += v;
      }
      for (double& v : row) v /= s;
    }
    for (const double eps : {0.1, 0.01, 0.001}) {
      const ProductPolicy q = floor_and_mix(p, eps);
      double tv = 0.0;
      for_each_profile(sizes, [&](const ActionProfile& a) {
        double pp = 1.0, qq = 1.0;
        for (std::size_t i = 0; i < sizes.size(); ++i) {
          pp *= p.agents[i][static_cast<std::size_t>(a[i])];
          qq *= q.agents[i][static_cast<std::size_t>(a[i])];
        }
        tv += std::abs(pp - qq);
      });
      tv *= 0.5;
      worst_slack = std::min(worst_slack, 2.0 * eps - tv);
    }
  }

  // Own-action game with exact marginals: agent margins 0.1 and 0.2, so Delta = 0.1.
  PotentialGameModel game;
  game.n = 2;
  game.action_sizes = {3, 3};
  game.rewards.assign(2, std::vector<double>(9, 0.0));
  game.potential.assign(9, 0.0);
  const double v1[3] = {0.5, 0.4, 0.3};
  const double v2[3] = {0.5, 0.3, 0.2};
  for_each_profile(game.action_sizes, [&](const ActionProfile& a) {
    const std::size_t idx = flat_index(game.action_sizes, a);
    game.rewards[0][idx] = v1[a[0]];
    game.rewards[1][idx] = v2[a[1]];
    game.potential[idx] = v1[a[0]] + v2[a[1]];
  });
  game.r_max = 1.0;
  game.phi_max = 1.0;
  game.validate();
  const double eta = 1.0 / (2.0 * 2.0 * game.big_m());
  const double eps = 0.1;
  const double margin = 0.1;
  const int max_actions = 3;
  const ProductPolicy anchor = ProductPolicy::uniform(game.action_sizes);
  const std::vector<ProbVec> ell = exact_marginals_all(game, anchor);
  std::vector<ProductPolicy> predicted;
  for (long tp = 0; tp < 400; ++tp)
    predicted.push_back(floor_and_mix(predict_base_policy(anchor, ell, eta, tp), eps));
  const std::size_t distinct = dedup_policies(predicted, eps / max_actions).size();
  const double budget = 2.0 * 2.0 * game.big_m() * std::log(max_actions / eps) / margin;

  const bool pass = worst_slack >= 0.0 && static_cast<double>(distinct) <= budget;
  return {pass, fmt("tv slack %.2e; %zu distinct bases <= budget %.0f", worst_slack, distinct,
                    budget)};
}

// -------------------------------------------------------------------------------------------
// 9. The Markov pipeline on the two-state / two-step / two-agent congestion game returns a
//    policy whose exact gap is at most 0.1 and no worse than the uniform policy's, with
//    trigger firings within the doubling budget, in under a minute.
CheckResult check_markov_pipeline_soundness() {
  const auto t0 = std::chrono::steady_clock::now();
  CongestionConfig cc;
  cc.n = 2;
  cc.weights_safe = {0.4, 0.8};
  cc.distancing_multiplier = 0.5;
  const MCGModel mcg = make_congestion_mcg(cc, 2);

  MCGRunConfig cfg;
  cfg.episodes = 2097152;
  cfg.mode = PGMode::practical;
  cfg.selection_epsilon = 0.02;
  cfg.delta = 0.05;
  cfg.deviate_all_steps = true;
  cfg.eta = 0.5;
  cfg.seed = 0;
  const MCGRunResult res = run_mcg(mcg, cfg);

  const double uniform_gap = exact_mcg_gap(mcg, MCGPolicy::uniform(mcg)).gap;
  const double returned_gap = exact_mcg_gap(mcg, res.final_policy).gap;
  const long s_times_h = static_cast<long>(mcg.num_states) * mcg.horizon;
  const long trigger_budget = s_times_h * detail::ceil_log2(cfg.episodes) + s_times_h;
  const double secs = seconds_since(t0);
  const bool pass = returned_gap <= uniform_gap && returned_gap <= 0.1 &&
                    static_cast<long>(res.trigger_episodes.size()) <= trigger_budget &&
                    secs < 60.0;
  return {pass, fmt("returned gap %.4f (uniform %.4f), %zu triggers <= %ld", returned_gap,
                    uniform_gap, res.trigger_episodes.size(), trigger_budget)};
}

// -------------------------------------------------------------------------------------------
// 10. Reruns of the Markov congestion preset produce byte-identical CSV/summary/plot files
//     even across different worker counts, every cell ledger matches its closed form, and
//     the Markov pipeline's ledger decomposes exactly.
CheckResult check_determinism_and_ledger() {
  const fs::path dir_a = fs::temp_directory_path() / "commrl-accept-a";
  const fs::path dir_b = fs::temp_directory_path() / "commrl-accept-b";
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);

  ExperimentConfig cfg = preset_fig_congestion();
  cfg.workers = 1;
  cfg.out_dir = dir_a.string();
  const ExperimentOutcome first = run_experiment(cfg);
  cfg.workers = 4;
  cfg.out_dir = dir_b.string();
  const ExperimentOutcome second = run_experiment(cfg);

  std::size_t files_compared = 0;
  bool identical = true;
  for (const CellResult& cell : first.cells) {
    if (slurp(dir_a / cell.csv_file) != slurp(dir_b / cell.csv_file)) identical = false;
    ++files_compared;
  }
  const std::string summary_name = cfg.name + "-summary.json";
  const std::string plot_name = cfg.name + "-plot.csv";
  if (slurp(dir_a / summary_name) != slurp(dir_b / summary_name)) identical = false;
  if (slurp(dir_a / plot_name) != slurp(dir_b / plot_name)) identical = false;
  files_compared += 2;

  // Closed-form ledger audit for every cell of the preset.
  const auto episodes = static_cast<std::uint64_t>(cfg.markov.episodes);
  const auto interval = static_cast<std::uint64_t>(cfg.markov.interval);
  const auto bases = static_cast<std::uint64_t>(cfg.markov.bases);
  const auto probes = static_cast<std::uint64_t>(cfg.markov.samples_per_probe);
  const std::uint64_t sum_actions =
      static_cast<std::uint64_t>(cfg.congestion.n) *
      static_cast<std::uint64_t>(cfg.congestion.facilities());
  const std::uint64_t states = 2;
  bool ledger_ok = true;
  for (const CellResult& cell : first.cells) {
    std::uint64_t want_rounds = 0, want_samples = 0;
    if (cell.tag == "full-comm") {
      want_rounds = episodes;
      want_samples = episodes * probes * sum_actions * states;
    } else {
      want_rounds = (episodes + interval - 1) / interval;
      const std::uint64_t per_round = (cell.tag == "bpp" ? bases : 1) * probes * sum_actions;
      want_samples = want_rounds * per_round * states;
    }
    if (cell.ledger.rounds != want_rounds || cell.ledger.samples != want_samples)
      ledger_ok = false;
  }

  // The Markov pipeline's ledger decomposes into its recorded phases exactly.
  CongestionConfig cc;
  cc.n = 2;
  cc.weights_safe = {0.4, 0.8};
  cc.distancing_multiplier = 0.5;
  const MCGModel mcg = make_congestion_mcg(cc, 2);
  MCGRunConfig mcg_cfg;
  mcg_cfg.episodes = 1024;
  mcg_cfg.seed = 0;
  const MCGRunResult mres = run_mcg(mcg, mcg_cfg);
  const bool mcg_rounds_ok =
      mres.ledger.rounds == mres.breakdown.check_rounds + mres.breakdown.learner_rounds +
                                mres.breakdown.vapprox_rounds + mres.breakdown.selection_rounds;
  const bool mcg_episodes_ok =
      mres.total_env_episodes ==
      static_cast<std::uint64_t>(mcg_cfg.episodes) + mres.ledger.samples;

  fs::remove_all(dir_a);
  fs::remove_all(dir_b);

  const bool pass = identical && ledger_ok && mcg_rounds_ok && mcg_episodes_ok;
  return {pass, fmt("%zu files byte-identical %s; cell ledgers %s; pipeline decomposition %s",
                    files_compared, identical ? "yes" : "NO", ledger_ok ? "ok" : "VIOLATED",
                    (mcg_rounds_ok && mcg_episodes_ok) ? "ok" : "VIOLATED")};
}

}  // namespace

int main() {
  std::printf("acceptance suite: ten end-to-end checks\n");
  criterion(1, "congestion potential identity", check_congestion_potential);
  criterion(2, "exact-ascent monotonicity", check_exact_ascent_monotone);
  criterion(3, "importance-sampling accuracy", check_is_accuracy);
  criterion(4, "adaptive-mode ratio guard", check_adaptive_ratio_guard);
  criterion(5, "static preset strategy ordering", check_static_preset_ordering);
  criterion(6, "markov preset strategy ordering", check_markov_preset_ordering);
  criterion(7, "gap estimator two-sided bound", check_gap_sandwich);
  criterion(8, "flooring distance and base-set size", check_flooring_and_base_count);
  criterion(9, "markov pipeline soundness", check_markov_pipeline_soundness);
  criterion(10, "determinism and ledger audit", check_determinism_and_ledger);
  if (g_failures > 0) {
    std::printf("%d of 10 checks failed\n", g_failures);
    return 1;
  }
  std::printf("all 10 checks passed\n");
  return 0;
}
