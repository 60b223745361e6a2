#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "peerol/aggregation.hpp"
#include "peerol/bounds.hpp"
#include "peerol/core.hpp"
#include "peerol/estimation.hpp"
#include "peerol/learner.hpp"
#include "peerol/peer_score.hpp"
#include "peerol/rng.hpp"

namespace peerol {

// Outcome-probability generator. Generators may depend on t and the seed
// only, never on realized outcomes.
struct WorldModel {
  enum class Kind { constant, iid_uniform, drift, periodic };

  static WorldModel constant(double p) {
    WorldModel w;
    w.kind = Kind::constant;
    w.p = Probability(p).value();
    return w;
  }

  static WorldModel iid_uniform(double lo, double hi) {
    if (!(lo <= hi)) throw ConfigurationError("iid world requires lo <= hi");
    WorldModel w;
    w.kind = Kind::iid_uniform;
    w.lo = Probability(lo).value();
    w.hi = Probability(hi).value();
    return w;
  }

  static WorldModel drift(double start, double end) {
    WorldModel w;
    w.kind = Kind::drift;
    w.start = Probability(start).value();
    w.end = Probability(end).value();
    return w;
  }

  static WorldModel periodic(std::vector<double> values, std::size_t period = 0) {
    if (values.empty()) {
      throw ConfigurationError("periodic world needs at least one value");
    }
    for (double& v : values) v = Probability(v).value();
    WorldModel w;
    w.kind = Kind::periodic;
    w.values = std::move(values);
    w.period = period == 0 ? w.values.size() : period;
    if (w.period < w.values.size()) {
      throw ConfigurationError("periodic world period shorter than value list");
    }
    return w;
  }

  double sample(long t, long horizon, Rng& rng) const {
    switch (kind) {
      case Kind::constant:
        return p;
      case Kind::iid_uniform:
        return rng.uniform(lo, hi);
      case Kind::drift: {
        const double frac = horizon > 1 ? static_cast<double>(t - 1) /
                                              static_cast<double>(horizon - 1)
                                        : 0.0;
        return start + (end - start) * frac;
      }
      case Kind::periodic: {
        const std::size_t pos =
            static_cast<std::size_t>((t - 1) % static_cast<long>(period));
        return values[pos * values.size() / period];
      }
    }
    return 0.5;
  }

  Kind kind = Kind::iid_uniform;
  double p = 0.5;
  double lo = 0.0, hi = 1.0;
  double start = 0.0, end = 1.0;
  std::vector<double> values;
  std::size_t period = 0;
};

// Synthetic panelists. Predictions are clamped into [0,1]; the binary kind
// calls the more likely outcome correctly with the given accuracy.
struct ExpertModel {
  enum class Kind { oracle, perturbed, constant_bias, contrarian, binary_skill };

  static ExpertModel oracle() { return {}; }

  static ExpertModel perturbed(double sigma) {
    if (!(sigma >= 0.0)) throw ConfigurationError("perturbed sigma must be >= 0");
    ExpertModel e;
    e.kind = Kind::perturbed;
    e.sigma = sigma;
    return e;
  }

  static ExpertModel constant_bias(double offset) {
    if (!(offset >= -1.0 && offset <= 1.0)) {
      throw ConfigurationError("constant_bias offset must lie in [-1, 1]");
    }
    ExpertModel e;
    e.kind = Kind::constant_bias;
    e.offset = offset;
    return e;
  }

  static ExpertModel contrarian() {
    ExpertModel e;
    e.kind = Kind::contrarian;
    return e;
  }

  static ExpertModel binary_skill(double accuracy) {
    if (!(accuracy >= 0.0 && accuracy <= 1.0)) {
      throw ConfigurationError("binary_skill accuracy must lie in [0, 1]");
    }
    ExpertModel e;
    e.kind = Kind::binary_skill;
    e.accuracy = accuracy;
    return e;
  }

  double predict(double p_t, Rng& rng) const {
    switch (kind) {
      case Kind::oracle:
        return p_t;
      case Kind::perturbed:
        return clamp01(p_t + sigma * rng.gaussian());
      case Kind::constant_bias:
        return clamp01(p_t + offset);
      case Kind::contrarian:
        return 1.0 - p_t;
      case Kind::binary_skill: {
        const int likely = p_t >= 0.5 ? 1 : 0;
        return rng.bernoulli(accuracy) ? likely : 1 - likely;
      }
    }
    return p_t;
  }

  Kind kind = Kind::oracle;
  double sigma = 0.0;
  double offset = 0.0;
  double accuracy = 0.5;
};

struct EstimatorChoice {
  enum class Kind { none, importance_weighted, two_group };

  static EstimatorChoice none() { return {}; }

  static EstimatorChoice importance_weighted(double p_star) {
    if (!(p_star > 0.0 && p_star <= 1.0)) {
      throw ConfigurationError("importance weighting requires p_star in (0, 1]");
    }
    EstimatorChoice e;
    e.kind = Kind::importance_weighted;
    e.p_star = p_star;
    return e;
  }

  static EstimatorChoice two_group() {
    EstimatorChoice e;
    e.kind = Kind::two_group;
    return e;
  }

  Kind kind = Kind::none;
  double p_star = 0.1;
};

struct LearnerConfig {
  std::optional<double> learning_rate;  // default: tuned to the horizon
};

struct BoundConfig {
  double delta = 0.05;
  double alpha = 2.1;
  double delta_g = 0.0;
};

struct ExperimentSpec {
  WorldModel world;
  long horizon = 0;
  std::vector<ExpertModel> experts;
  AggregationRule aggregation = AggregationRule::majority(0.5);
  std::optional<NoiseChannel> channel;
  PeerScoreSpec score;
  EstimatorChoice estimator;
  LearnerConfig learner;
  BoundConfig bounds;
  std::uint64_t seed = 0;

  void validate() const {
    if (horizon < 1) throw ConfigurationError("horizon must be >= 1");
    if (experts.empty()) throw ConfigurationError("expert panel is empty");
    if (aggregation.kind == AggregationRule::Kind::channel &&
        !channel.has_value()) {
      throw ConfigurationError("channel aggregation requires a noise channel");
    }
    if (score.correction.kind == NoiseCorrection::Kind::estimated &&
        estimator.kind == EstimatorChoice::Kind::none) {
      throw ConfigurationError("estimated correction requires an estimator");
    }
    if (estimator.kind == EstimatorChoice::Kind::two_group &&
        experts.size() < 2 &&
        aggregation.kind != AggregationRule::Kind::channel) {
      throw ConfigurationError("two-group estimation needs at least 2 experts");
    }
    if (!(bounds.delta > 0.0 && bounds.delta < 1.0)) {
      throw ConfigurationError("bounds delta must lie in (0, 1)");
    }
    if (!(bounds.alpha > 2.0)) {
      throw ConfigurationError("bounds alpha must exceed 2");
    }
    if (learner.learning_rate && !(*learner.learning_rate > 0.0)) {
      throw ConfigurationError("learning rate must be positive");
    }
  }
};

struct TraceRecord {
  long t = 0;
  double p_t = 0.0;
  int y = 0;
  int y_hat = 0;     // raw reference answer
  int y_scored = 0;  // label fed to the scores (after flips)
  bool sym_flip = false;
  bool hom_flip = false;
  int chosen = 0;
  double eta_hat = 0.0;  // estimate used this round (estimated correction)
  std::vector<double> scores;
  std::vector<double> losses;
  std::uint64_t weights_digest = 0;
};

struct RunSummary {
  std::uint64_t seed = 0;
  long T = 0;
  int N = 0;
  LedgerSummary ledger;

  std::vector<double> terminal_weights;
  int terminal_argmax = 0;

  // Bound evaluations (NaN when not applicable to the configuration).
  double delta = 0.05;
  double sigma_g_formula_value = std::numeric_limits<double>::quiet_NaN();
  double e_mart_g = std::numeric_limits<double>::quiet_NaN();
  double e_mart_f = std::numeric_limits<double>::quiet_NaN();
  double online_bound_value = std::numeric_limits<double>::quiet_NaN();
  double bound_known_rate = std::numeric_limits<double>::quiet_NaN();
  double bound_estimated_rate = std::numeric_limits<double>::quiet_NaN();
  double bound_competitive = std::numeric_limits<double>::quiet_NaN();
  double c_comp_value = std::numeric_limits<double>::quiet_NaN();
  double max_eta_tilde = std::numeric_limits<double>::quiet_NaN();
  double score_range_max = 0.0;

  // Measured noise accounting.
  double measured_flip_rate = 0.0;     // P(yhat != y)
  double measured_flip_rate_y0 = 0.0;  // P(yhat != y | y = 0)
  double measured_flip_rate_y1 = 0.0;  // P(yhat != y | y = 1)
  double scored_flip_rate = 0.0;       // same for the label actually scored
  double scored_flip_rate_y0 = 0.0;
  double scored_flip_rate_y1 = 0.0;
  long aggregate_ties = 0;

  double eta_hat_final = std::numeric_limits<double>::quiet_NaN();
  NoiseSolution two_group_solution;
  double cond_indep_gap = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

inline std::uint64_t hash_doubles(const std::vector<double>& values,
                                  std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (double v : values) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    for (int k = 0; k < 8; ++k) {
      h ^= (bits >> (8 * k)) & 0xffULL;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

// Conditional-independence bookkeeping for the two-group estimator.
struct PairCounters {
  long n[2] = {0, 0};
  long a1[2] = {0, 0};
  long b1[2] = {0, 0};
  long both1[2] = {0, 0};

  void add(int y, int a, int b) {
    ++n[y];
    a1[y] += a;
    b1[y] += b;
    both1[y] += a & b;
  }

  double gap() const {
    double worst = 0.0;
    for (int y = 0; y < 2; ++y) {
      if (n[y] == 0) continue;
      const double t = static_cast<double>(n[y]);
      const double pa = static_cast<double>(a1[y]) / t;
      const double pb = static_cast<double>(b1[y]) / t;
      const double pab = static_cast<double>(both1[y]) / t;
      worst = std::max(worst, std::abs(pab - pa * pb));
    }
    return worst;
  }
};

}  // namespace detail

// Runs the full round protocol: nature draws, expert predictions, reference
// aggregation, flip transforms, peer scoring, the weight update, estimator
// updates, and counterfactual regret accounting. Deterministic given the
// spec's seed. When trace is non-null one record per round is appended.
inline RunSummary run_experiment(const ExperimentSpec& spec,
                                 std::vector<TraceRecord>* trace = nullptr) {
  spec.validate();
  const int n = static_cast<int>(spec.experts.size());
  const long horizon = spec.horizon;

  Rng world_rng = Rng::stream(spec.seed, "world");
  Rng channel_rng = Rng::stream(spec.seed, "channel");
  Rng flips_rng = Rng::stream(spec.seed, "flips");
  Rng learner_rng = Rng::stream(spec.seed, "learner");
  Rng estimator_rng = Rng::stream(spec.seed, "estimator");
  Rng partition_rng = Rng::stream(spec.seed, "estimator-partition");
  std::vector<Rng> expert_rng;
  expert_rng.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    expert_rng.push_back(Rng::stream(spec.seed, "expert." + std::to_string(i)));
  }

  AggregationRule rule = spec.aggregation;
  if (rule.kind == AggregationRule::Kind::channel) rule.noise = *spec.channel;

  const double rate = spec.learner.learning_rate.value_or(
      WeightVector::tuned_rate(horizon, n));
  WeightVector weights(n, rate);
  RegretLedger ledger(n);

  const bool two_group =
      spec.estimator.kind == EstimatorChoice::Kind::two_group;
  const bool iw =
      spec.estimator.kind == EstimatorChoice::Kind::importance_weighted;
  std::optional<ImportanceWeightedEstimator> iw_est;
  if (iw) iw_est.emplace(spec.estimator.p_star);
  std::optional<TwoGroupEstimator> tg_est;
  if (two_group) {
    tg_est.emplace(TwoGroupEstimator::random_partition(std::max(n, 2),
                                                       partition_rng));
  }
  double tg_eta = 0.0;  // latest usable two-group estimate for group A

  const bool symmetrize = spec.score.flips.kind == FlipPolicy::Kind::symmetrize;
  const bool homogenize = spec.score.flips.kind == FlipPolicy::Kind::homogenize;
  const double flip_prob = spec.score.flips.flip_prob;
  const bool estimated =
      spec.score.correction.kind == NoiseCorrection::Kind::estimated;

  std::vector<double> preds(static_cast<std::size_t>(n));
  std::vector<double> scored_preds(static_cast<std::size_t>(n));
  std::vector<double> raw_scores(static_cast<std::size_t>(n));
  std::vector<double> shifted(static_cast<std::size_t>(n));
  std::vector<double> f_vals(static_cast<std::size_t>(n));
  std::vector<double> g_vals(static_cast<std::size_t>(n));
  std::vector<double> losses(static_cast<std::size_t>(n));
  std::vector<double> weights_before(static_cast<std::size_t>(n));
  std::vector<double> group_buf;

  RunSummary out;
  out.seed = spec.seed;
  out.T = horizon;
  out.N = n;
  out.delta = spec.bounds.delta;

  long flips_total = 0, flips_y[2] = {0, 0}, count_y[2] = {0, 0};
  long scored_flips_total = 0, scored_flips_y[2] = {0, 0},
       scored_count_y[2] = {0, 0};
  detail::PairCounters pair_counters;
  double score_range_max = 0.0;

  for (long t = 1; t <= horizon; ++t) {
    const double p_t = spec.world.sample(t, horizon, world_rng);
    const int y = world_rng.bernoulli(p_t) ? 1 : 0;
    for (int i = 0; i < n; ++i) {
      preds[static_cast<std::size_t>(i)] =
          spec.experts[static_cast<std::size_t>(i)].predict(
              p_t, expert_rng[static_cast<std::size_t>(i)]);
    }

    int y_hat = 0;
    int group_b_answer = 0;
    if (two_group) {
      if (rule.kind == AggregationRule::Kind::channel) {
        // Idealized setting: two independent corruptions of the same y.
        y_hat = aggregate({}, rule, y, channel_rng, t).label;
        group_b_answer = aggregate({}, rule, y, channel_rng, t).label;
      } else {
        auto group_answer = [&](const std::vector<int>& ids) {
          group_buf.clear();
          for (int id : ids) {
            group_buf.push_back(preds[static_cast<std::size_t>(id)]);
          }
          const AggregateResult r = aggregate(group_buf, rule, y, channel_rng, t);
          if (r.coin_used) ++out.aggregate_ties;
          return r.label;
        };
        y_hat = group_answer(tg_est->group_a());
        group_b_answer = group_answer(tg_est->group_b());
      }
    } else {
      const AggregateResult r = aggregate(preds, rule, y, channel_rng, t);
      if (r.coin_used) ++out.aggregate_ties;
      y_hat = r.label;
    }

    ++count_y[y];
    if (y_hat != y) {
      ++flips_total;
      ++flips_y[y];
    }

    // Flip transforms. Symmetrization complements the whole trial;
    // homogenization re-flips the reference answer(s) only.
    std::copy(preds.begin(), preds.end(), scored_preds.begin());
    int y_scored = y_hat;
    int y_true_eff = y;
    int group_b_eff = group_b_answer;
    bool sym_flip = false;
    if (symmetrize && flips_rng.bernoulli(0.5)) {
      sym_flip = true;
      for (double& p : scored_preds) p = 1.0 - p;
      y_scored = 1 - y_scored;
      y_true_eff = 1 - y_true_eff;
      group_b_eff = 1 - group_b_eff;
    }
    bool hom_flip = false;
    if (homogenize) {
      if (flips_rng.bernoulli(flip_prob)) {
        hom_flip = true;
        y_scored = 1 - y_scored;
      }
      if (two_group && flips_rng.bernoulli(flip_prob)) {
        group_b_eff = 1 - group_b_eff;
      }
    }

    ++scored_count_y[y_true_eff];
    if (y_scored != y_true_eff) {
      ++scored_flips_total;
      ++scored_flips_y[y_true_eff];
    }

    // Estimate in force for this round: whatever was available before t.
    double eta_round = 0.0;
    if (estimated) eta_round = iw ? iw_est->clamped_estimate() : tg_eta;
    const ResolvedScore score = resolve_score(spec.score, eta_round);

    for (int i = 0; i < n; ++i) {
      raw_scores[static_cast<std::size_t>(i)] =
          score.eval(scored_preds[static_cast<std::size_t>(i)], y_scored);
    }
    const ScoreBounds sb = score_bounds(score, y_scored);
    const double range = sb.range();
    score_range_max = std::max(score_range_max, range);
    for (int i = 0; i < n; ++i) {
      shifted[static_cast<std::size_t>(i)] =
          range > 1e-12
              ? (raw_scores[static_cast<std::size_t>(i)] - sb.lo) / range
              : 0.0;
    }

    // Exact conditional distribution of the scored label given p_t and the
    // realized flip coins. With a synthetic channel this is exact; under
    // majority/product aggregation the score's own noise model stands in.
    const double p_ref = sym_flip ? 1.0 - p_t : p_t;
    double p_hat;
    if (spec.channel.has_value()) {
      p_hat = reference_prob(p_t, *spec.channel, t);
    } else if (score.kind == NoiseCorrection::Kind::asymmetric) {
      p_hat = (1.0 - score.eta1) * p_t + score.eta0 * (1.0 - p_t);
    } else {
      p_hat = (1.0 - 2.0 * score.eta) * p_t + score.eta;
    }
    if (sym_flip) p_hat = 1.0 - p_hat;
    if (homogenize) p_hat = p_hat * (1.0 - flip_prob) + (1.0 - p_hat) * flip_prob;

    const double genie1 = score.eval(p_ref, 1);
    const double genie0 = score.eval(p_ref, 0);
    const double genie_mean = p_hat * genie1 + (1.0 - p_hat) * genie0;
    for (int i = 0; i < n; ++i) {
      const double q = scored_preds[static_cast<std::size_t>(i)];
      g_vals[static_cast<std::size_t>(i)] =
          p_hat * score.eval(q, 1) + (1.0 - p_hat) * score.eval(q, 0) -
          genie_mean;
      f_vals[static_cast<std::size_t>(i)] = f_divergence(
          spec.score.base_loss, preds[static_cast<std::size_t>(i)], p_t);
      losses[static_cast<std::size_t>(i)] =
          spec.score.base_loss.eval(preds[static_cast<std::size_t>(i)], y);
    }

    std::copy(weights.weights().begin(), weights.weights().end(),
              weights_before.begin());
    const int chosen = hedge_step(weights, shifted, learner_rng);

    LedgerRound round;
    round.t = t;
    round.p_t = p_t;
    round.y = y;
    round.true_losses = losses;
    round.peer_scores = raw_scores;
    round.f_values = f_vals;
    round.g_values = g_vals;
    round.weights = weights_before;
    round.chosen = chosen;
    round.genie_score = score.eval(p_ref, y_scored);
    ledger.record(round);

    if (iw) {
      const bool reveal = estimator_rng.bernoulli(spec.estimator.p_star);
      iw_est->update(y_scored,
                     reveal ? std::optional<int>(y_true_eff) : std::nullopt);
    } else if (two_group) {
      tg_est->update(y_scored, group_b_eff);
      pair_counters.add(y_true_eff, y_scored, group_b_eff);
      if (t >= 16) {
        const NoiseSolution sol = tg_est->solve();
        if (sol.status == NoiseSolution::Status::ok) {
          tg_eta = std::clamp(sol.etaA_hat, 0.0, kEtaCeiling);
          out.two_group_solution = sol;
        }
      }
    }

    if (trace != nullptr) {
      TraceRecord rec;
      rec.t = t;
      rec.p_t = p_t;
      rec.y = y;
      rec.y_hat = y_hat;
      rec.y_scored = y_scored;
      rec.sym_flip = sym_flip;
      rec.hom_flip = hom_flip;
      rec.chosen = chosen;
      rec.eta_hat = eta_round;
      rec.scores = raw_scores;
      rec.losses = losses;
      rec.weights_digest = detail::hash_doubles(weights.weights());
      trace->push_back(std::move(rec));
    }
  }

  out.ledger = ledger.summary();
  out.terminal_weights = weights.weights();
  out.terminal_argmax = weights.argmax();
  out.score_range_max = score_range_max;

  const double ht = static_cast<double>(horizon);
  out.measured_flip_rate = static_cast<double>(flips_total) / ht;
  out.measured_flip_rate_y0 =
      count_y[0] > 0 ? static_cast<double>(flips_y[0]) / count_y[0]
                     : std::numeric_limits<double>::quiet_NaN();
  out.measured_flip_rate_y1 =
      count_y[1] > 0 ? static_cast<double>(flips_y[1]) / count_y[1]
                     : std::numeric_limits<double>::quiet_NaN();
  out.scored_flip_rate = static_cast<double>(scored_flips_total) / ht;
  out.scored_flip_rate_y0 =
      scored_count_y[0] > 0
          ? static_cast<double>(scored_flips_y[0]) / scored_count_y[0]
          : std::numeric_limits<double>::quiet_NaN();
  out.scored_flip_rate_y1 =
      scored_count_y[1] > 0
          ? static_cast<double>(scored_flips_y[1]) / scored_count_y[1]
          : std::numeric_limits<double>::quiet_NaN();
  if (iw) out.eta_hat_final = iw_est->clamped_estimate();
  if (two_group) {
    out.eta_hat_final = tg_eta;
    out.cond_indep_gap = pair_counters.gap();
  }

  // Bound evaluations for the configured setup.
  const bool hetero = spec.channel.has_value() &&
                      spec.channel->kind == NoiseChannel::Kind::time_varying;
  BoundInputs bi;
  bi.delta = spec.bounds.delta;
  bi.T = horizon;
  bi.N = n;
  bi.score_range = score_range_max > 0.0 ? score_range_max : 1.0;
  bi.alpha = spec.bounds.alpha;
  bi.delta_g = spec.bounds.delta_g;

  const auto& corr = spec.score.correction;
  if (hetero) {
    double max_tilde = 0.0;
    for (double e : spec.channel->schedule) {
      max_tilde = std::max(
          max_tilde, homogenize ? homogenized_rate(e, flip_prob) : e);
    }
    out.max_eta_tilde = max_tilde;
    if (max_tilde < 0.5) {
      bi.max_eta_tilde = max_tilde;
      bi.sigma_g = sigma_g_formula(std::min(max_tilde, 0.5 - 1e-9));
      out.sigma_g_formula_value = bi.sigma_g;
      out.c_comp_value = c_comp(bi.alpha, max_tilde);
      const double delta_n = bi.delta / (2.0 * static_cast<double>(n));
      out.e_mart_g = e_mart(delta_n, bi.sigma_g, horizon);
      out.e_mart_f = e_mart(delta_n, 2.0, horizon);
      out.online_bound_value = online_bound(horizon, n, bi.score_range);
      const double l_star =
          out.ledger.true_loss[static_cast<std::size_t>(out.ledger.a_star)];
      out.bound_competitive = competitive_loss_bound(bi, l_star);
    }
  } else {
    // Resolve the symmetric rate the bounds should use: the true channel
    // when one exists, otherwise the score's configured rate.
    std::optional<PsiParams> psi;
    double sigma_eta = 0.0;
    if (spec.channel.has_value() &&
        spec.channel->kind == NoiseChannel::Kind::asymmetric) {
      psi = PsiParams::asymmetric(spec.channel->eta0, spec.channel->eta1);
      sigma_eta = std::min(0.5 * (spec.channel->eta0 + spec.channel->eta1),
                           0.5 - 1e-9);
    } else if (spec.channel.has_value()) {
      psi = PsiParams::symmetric(spec.channel->eta);
      sigma_eta = spec.channel->eta;
    } else if (corr.kind == NoiseCorrection::Kind::symmetric) {
      psi = PsiParams::symmetric(corr.eta);
      sigma_eta = corr.eta;
    } else if (corr.kind == NoiseCorrection::Kind::asymmetric) {
      psi = PsiParams::asymmetric(corr.eta0, corr.eta1);
      sigma_eta = std::min(0.5 * (corr.eta0 + corr.eta1), 0.5 - 1e-9);
    }
    if (psi.has_value() && psi->denominator() > 0.0) {
      bi.psi = *psi;
      bi.sigma_g = sigma_g_formula(sigma_eta);
      out.sigma_g_formula_value = bi.sigma_g;
      out.e_mart_g = e_mart(bi.delta, bi.sigma_g, horizon);
      out.e_mart_f = e_mart(bi.delta, 2.0, horizon);
      out.online_bound_value = online_bound(horizon, n, bi.score_range);
      out.bound_known_rate = regret_bound_known_rate(bi);
      if (estimated && psi->kind == PsiParams::Kind::symmetric) {
        if (iw) {
          bi.epsilon_series =
              iw_epsilon_series(horizon, bi.delta, spec.estimator.p_star);
        } else {
          // Two-group rate: the analysis grants O(sqrt(ln(6/delta)/2t));
          // instantiated with unit constant.
          bi.epsilon_series.resize(static_cast<std::size_t>(horizon));
          const double scale = std::sqrt(std::log(6.0 / bi.delta));
          for (long t = 1; t <= horizon; ++t) {
            bi.epsilon_series[static_cast<std::size_t>(t - 1)] =
                scale / std::sqrt(2.0 * static_cast<double>(t));
          }
        }
        out.bound_estimated_rate = regret_bound_estimated_rate(bi);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Seeded replication. Seeds are spec.seed, spec.seed+1, ... and runs are
// independent, so aggregation is a commutative merge over per-seed rows.

struct MonteCarloSummary {
  std::vector<RunSummary> runs;

  double mean_regret = 0.0;
  double median_regret = 0.0;
  double regret_q10 = 0.0;
  double regret_q90 = 0.0;
  long known_bound_violations = 0;  // R_T above the known-rate bound
  long competitive_bound_violations = 0;  // total loss above the competitive bound
  long peer_identifies_best = 0;    // a*_peer == a*
  long terminal_matches_best = 0;   // argmax weight == a*
  long delta_g_events = 0;          // a*_peer != a*_g
};

namespace detail {

inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] * (1.0 - frac) + v[hi] * frac;
}

}  // namespace detail

inline MonteCarloSummary monte_carlo(const ExperimentSpec& spec, int n_seeds,
                                     int n_threads = 1) {
  if (n_seeds < 1) throw InputError("monte_carlo requires n_seeds >= 1");
  spec.validate();
  MonteCarloSummary mc;
  mc.runs.resize(static_cast<std::size_t>(n_seeds));

  const int workers = std::max(1, std::min(n_threads, n_seeds));
  auto work = [&](int w) {
    for (int k = w; k < n_seeds; k += workers) {
      ExperimentSpec s = spec;
      s.seed = spec.seed + static_cast<std::uint64_t>(k);
      mc.runs[static_cast<std::size_t>(k)] = run_experiment(s);
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& th : pool) th.join();
  }

  std::vector<double> regrets;
  regrets.reserve(mc.runs.size());
  for (const RunSummary& r : mc.runs) {
    regrets.push_back(r.ledger.regret);
    if (std::isfinite(r.bound_known_rate) && r.ledger.regret > r.bound_known_rate) {
      ++mc.known_bound_violations;
    }
    if (std::isfinite(r.bound_competitive) &&
        r.ledger.algo_true_loss > r.bound_competitive) {
      ++mc.competitive_bound_violations;
    }
    if (r.ledger.a_star_peer == r.ledger.a_star) ++mc.peer_identifies_best;
    if (r.terminal_argmax == r.ledger.a_star) ++mc.terminal_matches_best;
    if (r.ledger.delta_g_event) ++mc.delta_g_events;
    mc.mean_regret += r.ledger.regret;
  }
  mc.mean_regret /= static_cast<double>(mc.runs.size());
  mc.median_regret = detail::quantile(regrets, 0.5);
  mc.regret_q10 = detail::quantile(regrets, 0.1);
  mc.regret_q90 = detail::quantile(regrets, 0.9);
  return mc;
}

// ---------------------------------------------------------------------------
// Exact identity checks. Each entry is an algebraic fact checked on dense
// grids with an independent closed form on one side. The negate_f_sign
// switch deliberately poisons the remainder-term reconstruction and exists
// so the check command can prove the suite has teeth.

struct IdentityReport {
  struct Entry {
    std::string name;
    double max_residual = 0.0;
    double tolerance = 1e-9;
    bool pass = true;
  };
  std::vector<Entry> entries;
  bool all_pass = true;

  void add(std::string name, double residual, double tol = 1e-9) {
    const bool ok = residual <= tol;
    entries.push_back({std::move(name), residual, tol, ok});
    all_pass = all_pass && ok;
  }
};

namespace detail {

// E_{yhat ~ p_hat}[ fn(q, yhat) - fn(p, yhat) ].
inline double expected_loss_diff(const LossFunction& fn, double q, double p,
                                 double p_hat) {
  return p_hat * (fn.eval(q, 1) - fn.eval(p, 1)) +
         (1.0 - p_hat) * (fn.eval(q, 0) - fn.eval(p, 0));
}

}  // namespace detail

inline IdentityReport identity_suite(bool negate_f_sign = false) {
  IdentityReport report;
  const LossFunction sq = LossFunction::squared();
  const LossFunction sav = LossFunction::savage(
      [](double p) { return p * p - p; }, [](double p) { return 2.0 * p - 1.0; });
  const int grid = 64;
  const double f_sign = negate_f_sign ? -1.0 : 1.0;
  std::vector<double> etas;
  for (int k = 0; k < 10; ++k) etas.push_back(0.05 * k);

  double r_f = 0.0, r_prop = 0.0, r_sav = 0.0;
  for (int a = 0; a <= grid; ++a) {
    const double q = static_cast<double>(a) / grid;
    for (int b = 0; b <= grid; ++b) {
      const double p = static_cast<double>(b) / grid;
      const double fq = f_divergence(sq, q, p);
      r_f = std::max(r_f, std::abs(fq - (p - q) * (p - q)));
      r_sav = std::max(r_sav, std::abs(f_divergence(sav, q, p) - fq));
      for (const LossFunction* fn : {&sq, &sav}) {
        const double f = f_divergence(*fn, q, p);
        if (a == b) {
          r_prop = std::max(r_prop, std::abs(f));
        } else if (f <= 0.0) {
          r_prop = std::max(r_prop, std::max(1e-6, -f));
        }
      }
    }
  }
  report.add("f_divergence squared = (p - p')^2", r_f, 1e-12);
  report.add("strict propriety of f on grid", r_prop);
  report.add("savage potential p^2 - p reproduces squared f", r_sav, 1e-12);

  // Noisy-expectation identity with the reconstructed remainder term, plus
  // the diagonal of the reconstructed g. Both must agree with the exact
  // expectation path; flipping the remainder sign breaks them.
  double r_lemma = 0.0, r_diag_recon = 0.0, r_diag = 0.0, r_mart = 0.0;
  for (double eta : etas) {
    for (int a = 0; a <= grid; ++a) {
      const double q = static_cast<double>(a) / grid;
      for (int b = 0; b <= grid; ++b) {
        const double p = static_cast<double>(b) / grid;
        const double p_hat = (1.0 - 2.0 * eta) * p + eta;
        const double ediff = detail::expected_loss_diff(sq, q, p, p_hat);
        const double remainder =
            f_sign * F_term(eta, p) -
            eta * eta * (1.0 - 2.0 * p) * (1.0 - 2.0 * p);
        const double lemma_rhs = (1.0 - 2.0 * eta) * (q - p) * (q - p) -
                                 2.0 * eta * q * (1.0 - q) + remainder;
        r_lemma = std::max(r_lemma, std::abs(ediff - lemma_rhs));
        const double g_recon = ediff + 2.0 * eta * q * (1.0 - q) - remainder;
        if (a == b) r_diag_recon = std::max(r_diag_recon, std::abs(g_recon));
        r_mart = std::max(
            r_mart, std::abs(g_symmetric(q, p, eta) -
                             (1.0 - 2.0 * eta) * (q - p) * (q - p)));
      }
      r_diag = std::max(r_diag, std::abs(g_symmetric(q, q, eta)));
    }
  }
  report.add("noisy expectation matches corrected remainder", r_lemma);
  report.add("g(p, p) = 0 via reconstructed remainder", r_diag_recon);
  report.add("g(p, p) = 0 via exact expectation", r_diag, 1e-12);
  report.add("exact conditional mean of score increment is g", r_mart, 1e-12);

  // psi-compatibility: pairwise g differences scale f differences by
  // exactly (1 - 2 eta).
  double r_pair = 0.0;
  const int coarse = 16;
  for (double eta : etas) {
    for (int a = 0; a <= coarse; ++a) {
      const double qa = static_cast<double>(a) / coarse;
      for (int b = 0; b <= coarse; ++b) {
        const double qb = static_cast<double>(b) / coarse;
        for (int c = 0; c <= coarse; ++c) {
          const double p = static_cast<double>(c) / coarse;
          const double lhs = g_symmetric(qa, p, eta) - g_symmetric(qb, p, eta);
          const double rhs = (1.0 - 2.0 * eta) *
                             ((p - qa) * (p - qa) - (p - qb) * (p - qb));
          r_pair = std::max(r_pair, std::abs(lhs - rhs));
        }
      }
    }
  }
  report.add("pairwise g difference = (1 - 2 eta) pairwise f difference",
             r_pair, 1e-12);

  // Argmin transfer over random finite panels.
  Rng rng(20240915);
  long mismatches = 0;
  for (int rep = 0; rep < 200; ++rep) {
    const double p = rng.uniform01();
    const double eta = rng.uniform(0.0, 0.49);
    int best_f = 0, best_g = 0;
    double best_f_val = std::numeric_limits<double>::infinity();
    double best_g_val = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 8; ++i) {
      const double q = rng.uniform01();
      const double fv = f_divergence(sq, q, p);
      const double gv = g_symmetric(q, p, eta);
      if (fv < best_f_val) {
        best_f_val = fv;
        best_f = i;
      }
      if (gv < best_g_val) {
        best_g_val = gv;
        best_g = i;
      }
    }
    if (best_f != best_g) ++mismatches;
  }
  report.add("argmin transfer g -> f on random panels",
             static_cast<double>(mismatches), 0.0);

  // Unbiasedness of the asymmetric surrogate, and its psi-compatibility.
  double r_nat = 0.0, r_asym_pair = 0.0;
  for (int e0 = 0; e0 < 5; ++e0) {
    for (int e1 = 0; e1 < 5; ++e1) {
      const double eta0 = 0.1 * e0;
      const double eta1 = 0.1 * e1;
      if (eta0 + eta1 >= 1.0) continue;
      for (int a = 0; a <= grid; ++a) {
        const double q = static_cast<double>(a) / grid;
        for (int y = 0; y <= 1; ++y) {
          const double keep_prob = y == 1 ? 1.0 - eta1 : 1.0 - eta0;
          const double expect =
              keep_prob * peer_score_asymmetric(q, y, eta0, eta1) +
              (1.0 - keep_prob) * peer_score_asymmetric(q, 1 - y, eta0, eta1);
          r_nat = std::max(
              r_nat, std::abs(expect - (1.0 - eta0 - eta1) * sq.eval(q, y)));
        }
      }
      for (int a = 0; a <= coarse; ++a) {
        for (int b = 0; b <= coarse; ++b) {
          for (int c = 0; c <= coarse; ++c) {
            const double qa = static_cast<double>(a) / coarse;
            const double qb = static_cast<double>(b) / coarse;
            const double p = static_cast<double>(c) / coarse;
            const double p_hat = (1.0 - eta1) * p + eta0 * (1.0 - p);
            auto g_asym = [&](double x) {
              return p_hat * peer_score_asymmetric(x, 1, eta0, eta1) +
                     (1.0 - p_hat) * peer_score_asymmetric(x, 0, eta0, eta1);
            };
            const double lhs = g_asym(qa) - g_asym(qb);
            const double rhs = (1.0 - eta0 - eta1) *
                               (f_divergence(sq, qa, p) - f_divergence(sq, qb, p));
            r_asym_pair = std::max(r_asym_pair, std::abs(lhs - rhs));
          }
        }
      }
    }
  }
  report.add("asymmetric surrogate expectation = (1 - eta0 - eta1) loss", r_nat,
             1e-12);
  report.add("asymmetric g difference = (1 - eta0 - eta1) f difference",
             r_asym_pair, 1e-12);

  // Homogenizing flip contracts rate differences by exactly (1 - 2 fp).
  double r_hom = 0.0;
  for (int fp_i = 0; fp_i < 10; ++fp_i) {
    const double fp = 0.05 * fp_i;
    for (int i = 0; i < 10; ++i) {
      for (int j = 0; j < 10; ++j) {
        const double e1 = 0.05 * i, e2 = 0.05 * j;
        const double lhs =
            homogenized_rate(e1, fp) - homogenized_rate(e2, fp);
        r_hom = std::max(r_hom, std::abs(lhs - (1.0 - 2.0 * fp) * (e1 - e2)));
      }
    }
  }
  report.add("homogenizing flip contracts rate gaps by 1 - 2 flip_prob", r_hom,
             1e-12);

  return report;
}

}  // namespace peerol
