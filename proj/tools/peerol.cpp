// Command-line front end: run one experiment, sweep a parameter, or check
// the library's identities and statistical contracts.
//
// Exit codes: 0 success, 1 runtime failure, 2 configuration error.

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "peerol/peerol.hpp"

namespace {

using nlohmann::json;

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

struct RunOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<long> horizon;
  std::string out_dir;
};

struct SweepOptions {
  std::string config_path;
  std::string param;
  std::vector<std::string> values;
  int n_seeds = 1;
  int threads = 1;
  std::string out_path = "sweep.csv";
  std::optional<std::uint64_t> seed;
};

struct CheckOptions {
  bool full = false;
  bool fault_f_sign = false;
  int threads = 2;
};

json load_config_json(const std::string& path) {
  const std::string text = peerol::read_text_file(path);
  return json::parse(text);  // parse_error reported with byte position
}

std::string resolve_out_dir(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("PEEROL_OUT_DIR")) return env;
  return ".";
}

void print_summary_table(const peerol::RunSummary& s) {
  auto row = [](const char* k, const std::string& v) {
    std::printf("  %-22s %s\n", k, v.c_str());
  };
  std::printf("run summary (seed %" PRIu64 ", T=%ld, N=%d)\n", s.seed, s.T, s.N);
  row("R_T", peerol::format_g17(s.ledger.regret));
  row("R_T_peer", peerol::format_g17(s.ledger.peer_regret));
  row("algo true loss", peerol::format_g17(s.ledger.algo_true_loss));
  row("best expert loss",
      peerol::format_g17(
          s.ledger.true_loss[static_cast<std::size_t>(s.ledger.a_star)]));
  row("a*", std::to_string(s.ledger.a_star));
  row("a*_peer", std::to_string(s.ledger.a_star_peer));
  row("a*_f", std::to_string(s.ledger.a_star_f));
  row("a*_g", std::to_string(s.ledger.a_star_g));
  row("terminal argmax", std::to_string(s.terminal_argmax));
  row("g gap", peerol::format_g17(s.ledger.g_gap));
  row("delta_g event", s.ledger.delta_g_event ? "1" : "0");
  if (std::isfinite(s.bound_known_rate)) row("known-rate bound", peerol::format_g17(s.bound_known_rate));
  if (std::isfinite(s.bound_estimated_rate)) row("estimated-rate bound", peerol::format_g17(s.bound_estimated_rate));
  if (std::isfinite(s.bound_competitive)) row("competitive bound", peerol::format_g17(s.bound_competitive));
  row("measured flip rate", peerol::format_g17(s.measured_flip_rate));
  if (std::isfinite(s.eta_hat_final)) {
    row("final eta estimate", peerol::format_g17(s.eta_hat_final));
  }
}

int cmd_run(const RunOptions& opt) {
  json doc = load_config_json(opt.config_path);
  if (opt.seed) doc["seed"] = *opt.seed;
  if (opt.horizon) doc["horizon"] = *opt.horizon;

  const peerol::ConfigDocument cfg = peerol::parse_config(doc);
  std::vector<peerol::TraceRecord> trace;
  trace.reserve(static_cast<std::size_t>(cfg.spec.horizon));
  const peerol::RunSummary summary = peerol::run_experiment(cfg.spec, &trace);

  const bool has_estimator =
      cfg.spec.estimator.kind != peerol::EstimatorChoice::Kind::none;
  const bool has_sym =
      cfg.spec.score.flips.kind == peerol::FlipPolicy::Kind::symmetrize;
  const bool has_hom =
      cfg.spec.score.flips.kind == peerol::FlipPolicy::Kind::homogenize;

  const std::filesystem::path out_dir = resolve_out_dir(opt.out_dir);
  std::filesystem::create_directories(out_dir);
  const auto trace_path = out_dir / cfg.output.trace_path;
  const auto summary_path = out_dir / cfg.output.summary_path;

  peerol::write_text_file(
      trace_path.string(),
      peerol::trace_to_csv(trace, summary.N, has_estimator, has_sym, has_hom,
                           cfg.hash, cfg.spec.seed));
  json sj = peerol::summary_to_json(summary, cfg.hash);
  peerol::write_text_file(summary_path.string(), sj.dump(2) + "\n");

  print_summary_table(summary);
  std::printf("trace:   %s\nsummary: %s\n", trace_path.c_str(),
              summary_path.c_str());
  return 0;
}

int cmd_sweep(const SweepOptions& opt) {
  if (opt.values.empty()) {
    std::fprintf(stderr, "config error: sweep needs a nonempty value list\n");
    return kExitConfig;
  }
  if (opt.n_seeds < 1) {
    std::fprintf(stderr, "config error: --seeds must be >= 1\n");
    return kExitConfig;
  }
  json doc = load_config_json(opt.config_path);
  if (opt.seed) doc["seed"] = *opt.seed;

  std::string param = opt.param;
  for (char& c : param) {
    if (c == '.') c = '/';
  }
  if (param.empty() || param[0] != '/') param = "/" + param;
  const json::json_pointer ptr(param);
  if (!doc.contains(ptr)) {
    std::fprintf(stderr, "config error: sweep parameter %s not in config\n",
                 param.c_str());
    return kExitConfig;
  }

  std::string csv =
      "param,value,seed,horizon,n_experts,regret,peer_regret,algo_true_loss,"
      "best_expert_loss,a_star,a_star_peer,a_star_g,terminal_argmax,g_gap,"
      "delta_g_event,bound_known_rate,bound_estimated_rate,bound_competitive,eta_hat_final,flip_rate\n";
  for (const std::string& raw : opt.values) {
    json value;
    try {
      value = json::parse(raw);
    } catch (const json::parse_error&) {
      value = raw;  // fall back to a string value
    }
    json swept = doc;
    swept[ptr] = value;
    const peerol::ConfigDocument cfg = peerol::parse_config(swept);
    const peerol::MonteCarloSummary mc =
        peerol::monte_carlo(cfg.spec, opt.n_seeds, opt.threads);
    for (const peerol::RunSummary& r : mc.runs) {
      auto opt_num = [](double x) {
        return std::isfinite(x) ? peerol::format_g17(x) : std::string("nan");
      };
      csv += param + "," + value.dump() + "," + std::to_string(r.seed) + "," +
             std::to_string(r.T) + "," + std::to_string(r.N) + "," +
             peerol::format_g17(r.ledger.regret) + "," +
             peerol::format_g17(r.ledger.peer_regret) + "," +
             peerol::format_g17(r.ledger.algo_true_loss) + "," +
             peerol::format_g17(
                 r.ledger.true_loss[static_cast<std::size_t>(r.ledger.a_star)]) +
             "," + std::to_string(r.ledger.a_star) + "," +
             std::to_string(r.ledger.a_star_peer) + "," +
             std::to_string(r.ledger.a_star_g) + "," +
             std::to_string(r.terminal_argmax) + "," +
             peerol::format_g17(r.ledger.g_gap) + "," +
             (r.ledger.delta_g_event ? "1" : "0") + "," + opt_num(r.bound_known_rate) +
             "," + opt_num(r.bound_estimated_rate) + "," + opt_num(r.bound_competitive) + "," +
             opt_num(r.eta_hat_final) + "," +
             peerol::format_g17(r.measured_flip_rate) + "\n";
    }
  }
  peerol::write_text_file(opt.out_path, csv);
  std::printf("wrote %s (%d value(s) x %d seed(s))\n", opt.out_path.c_str(),
              static_cast<int>(opt.values.size()), opt.n_seeds);
  return 0;
}

// ---------------------------------------------------------------------------
// check: exact identities plus seeded statistical contracts.

struct CheckContext {
  bool all_pass = true;

  void result(const std::string& name, bool pass, const std::string& detail) {
    std::printf("[%s] %s (%s)\n", pass ? "ok" : "FAIL", name.c_str(),
                detail.c_str());
    all_pass = all_pass && pass;
  }
};

void check_identities(CheckContext& ctx, bool fault_f_sign) {
  const peerol::IdentityReport report = peerol::identity_suite(fault_f_sign);
  for (const auto& e : report.entries) {
    ctx.result(e.name, e.pass,
               "max residual " + peerol::format_g17(e.max_residual) +
                   ", tol " + peerol::format_g17(e.tolerance));
  }
}

void check_two_group_roundtrip(CheckContext& ctx) {
  double worst = 0.0;
  for (int pi = 1; pi <= 19; ++pi) {
    const double P0 = 0.05 * pi;
    if (std::abs(P0 - 0.5) < 0.025) continue;
    for (int ai = 0; ai < 10; ++ai) {
      for (int bi = 0; bi < 10; ++bi) {
        const double etaA = 0.05 * ai;
        const double etaB = 0.05 * bi;
        const peerol::MomentCounts c = peerol::forward_moments(P0, etaA, etaB);
        const peerol::NoiseSolution sol =
            peerol::solve_noise_system(c.c1, c.c2, c.c3);
        if (sol.status != peerol::NoiseSolution::Status::ok) {
          worst = std::max(worst, 1.0);
          continue;
        }
        worst = std::max({worst, std::abs(sol.P0_hat - P0),
                          std::abs(sol.etaA_hat - etaA),
                          std::abs(sol.etaB_hat - etaB), sol.residual});
      }
    }
  }
  ctx.result("two-group moment system round-trip", worst <= 1e-9,
             "max error " + peerol::format_g17(worst));
}

void check_channel_frequency(CheckContext& ctx, long n) {
  peerol::Rng rng(11);
  const auto ch = peerol::NoiseChannel::symmetric(0.2);
  long flips = 0;
  for (long i = 0; i < n; ++i) {
    if (peerol::sample_reference(ch, 1, 1, rng) != 1) ++flips;
  }
  const double freq = static_cast<double>(flips) / static_cast<double>(n);
  const double tol = 3.0 * std::sqrt(0.2 * 0.8 / static_cast<double>(n));
  ctx.result("channel flip frequency", std::abs(freq - 0.2) <= tol,
             "freq " + peerol::format_g17(freq) + ", tol " +
                 peerol::format_g17(tol));
}

// Class-conditional rates land on (eta0+eta1)/2 when the class prior is
// balanced; the flip coin is independent of y but not of the flipped truth.
void check_symmetrization(CheckContext& ctx, long n) {
  peerol::Rng world(12), chan(13), flip(14);
  const auto ch = peerol::NoiseChannel::asymmetric(0.3, 0.1);
  long wrong[2] = {0, 0}, count[2] = {0, 0};
  for (long i = 0; i < n; ++i) {
    const int y = world.bernoulli(0.5) ? 1 : 0;
    const int y_hat = peerol::sample_reference(ch, y, 1, chan);
    peerol::RoundView round;
    round.y = y;
    round.y_hat = y_hat;
    const peerol::RoundView after = peerol::symmetrize_round(round, flip);
    ++count[after.y];
    if (after.y_hat != after.y) ++wrong[after.y];
  }
  const double r0 = static_cast<double>(wrong[0]) / std::max(1L, count[0]);
  const double r1 = static_cast<double>(wrong[1]) / std::max(1L, count[1]);
  const double tol = n >= 500000 ? 0.01 : 0.02;
  ctx.result("symmetrized class-conditional error rates",
             std::abs(r0 - 0.2) <= tol && std::abs(r1 - 0.2) <= tol,
             "rates " + peerol::format_g17(r0) + " / " + peerol::format_g17(r1));
}

void check_martingale(CheckContext& ctx, int n_seeds, long horizon) {
  // Increment sequence s(q, yhat) - s(p_t, yhat) - g(q, p_t) with a fixed
  // alternative prediction; terminal deviation beyond e_mart should be rare.
  const double eta = 0.2;
  double sigma_emp = 0.0;
  std::vector<double> terminal(static_cast<std::size_t>(n_seeds));
  for (int s = 0; s < n_seeds; ++s) {
    peerol::Rng rng(1000 + static_cast<std::uint64_t>(s));
    double sum = 0.0;
    for (long t = 0; t < horizon; ++t) {
      const double p = rng.uniform01();
      const double q = peerol::clamp01(p + 0.3);
      const double p_hat = (1.0 - 2.0 * eta) * p + eta;
      const int y_hat = rng.bernoulli(p_hat) ? 1 : 0;
      const double inc = peerol::peer_score_symmetric(q, y_hat, eta) -
                         peerol::peer_score_symmetric(p, y_hat, eta) -
                         peerol::g_symmetric(q, p, eta);
      sigma_emp = std::max(sigma_emp, std::abs(inc));
      sum += inc;
    }
    terminal[static_cast<std::size_t>(s)] = std::abs(sum);
  }
  const double gate = peerol::e_mart(0.05, sigma_emp, horizon);
  long violations = 0;
  for (double dev : terminal) {
    if (dev > gate) ++violations;
  }
  const double frac =
      static_cast<double>(violations) / static_cast<double>(n_seeds);
  ctx.result("martingale concentration", frac <= 0.05,
             "violation fraction " + peerol::format_g17(frac) + " at gate " +
                 peerol::format_g17(gate));
}

void check_hedge_regret(CheckContext& ctx, int threads) {
  peerol::ExperimentSpec spec;
  spec.world = peerol::WorldModel::iid_uniform(0.0, 1.0);
  spec.horizon = 5000;
  spec.experts = {peerol::ExpertModel::oracle(),
                  peerol::ExpertModel::perturbed(0.2),
                  peerol::ExpertModel::constant_bias(0.25),
                  peerol::ExpertModel::contrarian(),
                  peerol::ExpertModel::binary_skill(0.8)};
  spec.aggregation = peerol::AggregationRule::channel({});
  spec.channel = peerol::NoiseChannel::symmetric(0.2);
  spec.score.correction = peerol::NoiseCorrection::symmetric(0.2);
  spec.seed = 99;
  const peerol::MonteCarloSummary mc = peerol::monte_carlo(spec, 16, threads);
  double worst = -1e300;
  for (const auto& r : mc.runs) {
    const double bound =
        peerol::online_bound(r.T, r.N, r.score_range_max);
    worst = std::max(worst, r.ledger.peer_regret - bound);
  }
  ctx.result("hedge peer regret within online bound", worst <= 0.0,
             "max excess " + peerol::format_g17(worst));
}

void check_iw_estimator(CheckContext& ctx, int n_seeds, long horizon) {
  const double eta = 0.2, p_star = 0.3;
  int within = 0;
  const double bound = peerol::estimation_error_bound(horizon, 0.05, p_star);
  for (int s = 0; s < n_seeds; ++s) {
    peerol::Rng chan(500 + static_cast<std::uint64_t>(s));
    peerol::Rng reveal(900 + static_cast<std::uint64_t>(s));
    peerol::ImportanceWeightedEstimator est(p_star);
    for (long t = 0; t < horizon; ++t) {
      const int y = 1;
      const int y_hat = chan.bernoulli(eta) ? 0 : 1;
      est.update(y_hat, reveal.bernoulli(p_star) ? std::optional<int>(y)
                                                 : std::nullopt);
    }
    if (std::abs(est.estimate() - eta) <= bound) ++within;
  }
  ctx.result("importance-weighted estimate within bound",
             within >= n_seeds - n_seeds / 20 - 1,
             std::to_string(within) + "/" + std::to_string(n_seeds) +
                 " within " + peerol::format_g17(bound));
}

void check_determinism(CheckContext& ctx) {
  peerol::ExperimentSpec spec;
  spec.world = peerol::WorldModel::iid_uniform(0.0, 1.0);
  spec.horizon = 2000;
  spec.experts = {peerol::ExpertModel::oracle(),
                  peerol::ExpertModel::perturbed(0.15),
                  peerol::ExpertModel::constant_bias(-0.2)};
  spec.aggregation = peerol::AggregationRule::channel({});
  spec.channel = peerol::NoiseChannel::symmetric(0.1);
  spec.score.correction = peerol::NoiseCorrection::symmetric(0.1);
  spec.seed = 4242;
  std::vector<peerol::TraceRecord> t1, t2;
  const peerol::RunSummary r1 = peerol::run_experiment(spec, &t1);
  const peerol::RunSummary r2 = peerol::run_experiment(spec, &t2);
  const std::string csv1 = peerol::trace_to_csv(t1, r1.N, false, false, false, 0, spec.seed);
  const std::string csv2 = peerol::trace_to_csv(t2, r2.N, false, false, false, 0, spec.seed);
  ctx.result("same seed reproduces identical trace", csv1 == csv2,
             std::to_string(csv1.size()) + " bytes");
}

int cmd_check(const CheckOptions& opt) {
  CheckContext ctx;
  check_identities(ctx, opt.fault_f_sign);
  check_two_group_roundtrip(ctx);
  const long mc_n = opt.full ? 1000000 : 100000;
  check_channel_frequency(ctx, mc_n);
  check_symmetrization(ctx, mc_n);
  check_martingale(ctx, opt.full ? 1000 : 200, opt.full ? 10000 : 2000);
  check_hedge_regret(ctx, opt.threads);
  check_iw_estimator(ctx, opt.full ? 100 : 20, opt.full ? 100000 : 20000);
  check_determinism(ctx);
  std::printf("%s\n", ctx.all_pass ? "all checks passed" : "CHECK FAILURES");
  return ctx.all_pass ? 0 : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"peer-prediction online learning simulator"};
  app.require_subcommand(1);

  RunOptions run_opt;
  CLI::App* run = app.add_subcommand("run", "run one experiment from a config");
  run->add_option("-c,--config", run_opt.config_path, "config JSON path")
      ->required();
  std::uint64_t seed_override = 0;
  long horizon_override = 0;
  CLI::Option* seed_opt =
      run->add_option("--seed", seed_override, "override the root seed");
  CLI::Option* horizon_opt =
      run->add_option("--horizon", horizon_override, "override the horizon");
  run->add_option("--out-dir", run_opt.out_dir,
                  "output directory (default: PEEROL_OUT_DIR or '.')");

  SweepOptions sweep_opt;
  CLI::App* sweep =
      app.add_subcommand("sweep", "run one config across a parameter axis");
  sweep->add_option("-c,--config", sweep_opt.config_path, "config JSON path")
      ->required();
  sweep->add_option("-p,--param", sweep_opt.param,
                    "config path to sweep, e.g. channel.eta or /horizon")
      ->required();
  sweep->add_option("-v,--values", sweep_opt.values, "values for the parameter")
      ->required()
      ->delimiter(',');
  sweep->add_option("-s,--seeds", sweep_opt.n_seeds, "seeds per value");
  sweep->add_option("-j,--threads", sweep_opt.threads, "worker threads");
  sweep->add_option("-o,--out", sweep_opt.out_path, "output CSV path");
  std::uint64_t sweep_seed = 0;
  CLI::Option* sweep_seed_opt =
      sweep->add_option("--seed", sweep_seed, "override the base seed");

  CheckOptions check_opt;
  CLI::App* check =
      app.add_subcommand("check", "verify identities and seeded contracts");
  check->add_flag("--full", check_opt.full, "full sample sizes (slower)");
  check->add_flag("--fault-f-sign", check_opt.fault_f_sign,
                  "debug: negate the remainder-term sign (must fail)");
  check->add_option("-j,--threads", check_opt.threads, "worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (run->parsed()) {
      if (*seed_opt) run_opt.seed = seed_override;
      if (*horizon_opt) run_opt.horizon = horizon_override;
      return cmd_run(run_opt);
    }
    if (sweep->parsed()) {
      if (*sweep_seed_opt) sweep_opt.seed = sweep_seed;
      return cmd_sweep(sweep_opt);
    }
    if (check->parsed()) return cmd_check(check_opt);
  } catch (const peerol::ConfigurationError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const peerol::InputError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const nlohmann::json::parse_error& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "runtime error: %s\n", e.what());
    return kExitRuntime;
  }
  return 0;
}
