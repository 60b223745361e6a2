#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "peerol/core.hpp"
#include "peerol/rng.hpp"

namespace peerol {

// Hedge weights in log space; weights() is always normalized. Log space
// keeps long runs from underflowing individual weights to zero.
class WeightVector {
 public:
  WeightVector(int n_experts, double learning_rate)
      : log_w_(static_cast<std::size_t>(n_experts), 0.0),
        w_(static_cast<std::size_t>(n_experts),
           1.0 / static_cast<double>(n_experts)),
        rate_(learning_rate) {
    if (n_experts < 1) throw ConfigurationError("need at least one expert");
    if (!(learning_rate > 0.0)) {
      throw ConfigurationError("learning rate must be positive");
    }
  }

  // Fixed-horizon tuning matching online_bound.
  static double tuned_rate(long T, int N) {
    if (T < 1 || N < 1) throw ConfigurationError("tuned_rate requires T, N >= 1");
    if (N == 1) return 1.0;  // single expert: rate is irrelevant
    return std::sqrt(8.0 * std::log(static_cast<double>(N)) /
                     static_cast<double>(T));
  }

  int sample(Rng& rng) const {
    const double u = rng.uniform01();
    double acc = 0.0;
    for (std::size_t i = 0; i < w_.size(); ++i) {
      acc += w_[i];
      if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(w_.size()) - 1;
  }

  void update(std::span<const double> scores) {
    if (scores.size() != log_w_.size()) {
      throw InputError("score vector size does not match expert count");
    }
    for (std::size_t i = 0; i < log_w_.size(); ++i) {
      if (!std::isfinite(scores[i])) {
        throw std::runtime_error("non-finite peer score for expert " +
                                 std::to_string(i));
      }
      log_w_[i] -= rate_ * scores[i];
    }
    renormalize();
  }

  const std::vector<double>& weights() const { return w_; }
  double learning_rate() const { return rate_; }
  int size() const { return static_cast<int>(w_.size()); }

  int argmax() const {
    return static_cast<int>(std::max_element(w_.begin(), w_.end()) - w_.begin());
  }

 private:
  void renormalize() {
    const double top = *std::max_element(log_w_.begin(), log_w_.end());
    double z = 0.0;
    for (std::size_t i = 0; i < log_w_.size(); ++i) {
      w_[i] = std::exp(log_w_[i] - top);
      z += w_[i];
    }
    for (double& w : w_) w /= z;
    // Keep log weights bounded; shifting by a constant changes nothing.
    for (double& lw : log_w_) lw -= top;
  }

  std::vector<double> log_w_;
  std::vector<double> w_;
  double rate_;
};

// Draws the round's expert from the current weights, then applies the
// multiplicative update with the given (already shifted) scores.
inline int hedge_step(WeightVector& w, std::span<const double> scores,
                      Rng& rng) {
  const int chosen = w.sample(rng);
  w.update(scores);
  return chosen;
}

// Worst-case Hedge regret for scores spanning score_range, with the
// learning rate tuned to sqrt(8 ln N / T). The expert count is continuous
// so the formula can be evaluated at analytic values of N.
inline double online_bound(long T, double n_experts, double score_range) {
  if (T < 1 || !(n_experts >= 1.0)) {
    throw InputError("online_bound requires T, N >= 1");
  }
  return score_range *
         std::sqrt(static_cast<double>(T) * std::log(n_experts) / 2.0);
}

// ---------------------------------------------------------------------------
// Regret accounting. The ledger sees the hidden p_t and every expert's
// counterfactual loss; the learner itself never reads any of this.

struct LedgerRound {
  long t = 0;
  double p_t = 0.0;
  int y = 0;
  std::span<const double> true_losses;   // vs realized y
  std::span<const double> peer_scores;   // raw (unshifted) scores
  std::span<const double> f_values;      // f(p_i(t), p_t)
  std::span<const double> g_values;      // exact-expectation g
  std::span<const double> weights;       // weights the round was played with
  int chosen = 0;
  double genie_score = 0.0;  // s(p_t, yhat), for martingale increments
};

struct LedgerSummary {
  long T = 0;
  int N = 0;
  std::vector<double> true_loss;   // L_i
  std::vector<double> peer_score;  // S_i
  std::vector<double> f_sum;
  std::vector<double> g_sum;
  std::vector<double> gap;         // Delta_i = L_i - L_{a*}
  std::vector<long> disagreements; // J_i = #{t : l_{i,t} != l_{a*,t}}
  int a_star = 0;
  int a_star_peer = 0;
  int a_star_f = 0;
  int a_star_g = 0;
  double algo_true_loss = 0.0;       // sum_t <w_t, l_t>
  double algo_true_loss_realized = 0.0;
  double algo_peer_score = 0.0;      // sum_t <w_t, s_t>
  double algo_peer_score_realized = 0.0;
  double regret = 0.0;               // R_T
  double peer_regret = 0.0;          // R_T^peer
  double g_gap = 0.0;                // second-best minus best cumulative g
  bool delta_g_event = false;        // a*_peer != a*_g
  double sigma_g_emp = 0.0;          // max |s_i - s(p_t) - g_i| observed
};

class RegretLedger {
 public:
  explicit RegretLedger(int n_experts)
      : n_(n_experts),
        true_loss_(static_cast<std::size_t>(n_experts), 0.0),
        peer_score_(static_cast<std::size_t>(n_experts), 0.0),
        f_sum_(static_cast<std::size_t>(n_experts), 0.0),
        g_sum_(static_cast<std::size_t>(n_experts), 0.0),
        disagree_(static_cast<std::size_t>(n_experts) *
                      static_cast<std::size_t>(n_experts),
                  0) {
    if (n_experts < 1) throw ConfigurationError("ledger needs >= 1 expert");
  }

  void record(const LedgerRound& round) {
    const std::size_t n = static_cast<std::size_t>(n_);
    if (round.true_losses.size() != n || round.peer_scores.size() != n ||
        round.f_values.size() != n || round.g_values.size() != n ||
        round.weights.size() != n) {
      throw InputError("ledger round data incomplete");
    }
    ++rounds_;
    for (std::size_t i = 0; i < n; ++i) {
      true_loss_[i] += round.true_losses[i];
      peer_score_[i] += round.peer_scores[i];
      f_sum_[i] += round.f_values[i];
      g_sum_[i] += round.g_values[i];
      algo_true_loss_ += round.weights[i] * round.true_losses[i];
      algo_peer_score_ += round.weights[i] * round.peer_scores[i];
      const double inc = std::abs(round.peer_scores[i] - round.genie_score -
                                  round.g_values[i]);
      sigma_g_emp_ = std::max(sigma_g_emp_, inc);
      for (std::size_t j = i + 1; j < n; ++j) {
        if (round.true_losses[i] != round.true_losses[j]) {
          ++disagree_[i * n + j];
        }
      }
    }
    algo_true_realized_ +=
        round.true_losses[static_cast<std::size_t>(round.chosen)];
    algo_peer_realized_ +=
        round.peer_scores[static_cast<std::size_t>(round.chosen)];
  }

  LedgerSummary summary() const {
    LedgerSummary s;
    s.T = rounds_;
    s.N = n_;
    s.true_loss = true_loss_;
    s.peer_score = peer_score_;
    s.f_sum = f_sum_;
    s.g_sum = g_sum_;
    s.a_star = argmin(true_loss_);
    s.a_star_peer = argmin(peer_score_);
    s.a_star_f = argmin(f_sum_);
    s.a_star_g = argmin(g_sum_);
    s.algo_true_loss = algo_true_loss_;
    s.algo_true_loss_realized = algo_true_realized_;
    s.algo_peer_score = algo_peer_score_;
    s.algo_peer_score_realized = algo_peer_realized_;
    s.regret = algo_true_loss_ - true_loss_[static_cast<std::size_t>(s.a_star)];
    s.peer_regret =
        algo_peer_score_ - peer_score_[static_cast<std::size_t>(s.a_star_peer)];
    s.gap.resize(true_loss_.size());
    for (std::size_t i = 0; i < true_loss_.size(); ++i) {
      s.gap[i] = true_loss_[i] - true_loss_[static_cast<std::size_t>(s.a_star)];
    }
    s.disagreements.resize(true_loss_.size());
    const std::size_t n = static_cast<std::size_t>(n_);
    const std::size_t best = static_cast<std::size_t>(s.a_star);
    for (std::size_t i = 0; i < n; ++i) {
      s.disagreements[i] =
          i < best ? disagree_[i * n + best]
                   : (i > best ? disagree_[best * n + i] : 0);
    }
    s.g_gap = runner_up_gap(g_sum_);
    s.delta_g_event = s.a_star_peer != s.a_star_g;
    s.sigma_g_emp = sigma_g_emp_;
    return s;
  }

  long rounds() const { return rounds_; }

 private:
  static int argmin(const std::vector<double>& v) {
    return static_cast<int>(std::min_element(v.begin(), v.end()) - v.begin());
  }

  static double runner_up_gap(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    double best = std::numeric_limits<double>::infinity();
    double second = std::numeric_limits<double>::infinity();
    for (double x : v) {
      if (x < best) {
        second = best;
        best = x;
      } else if (x < second) {
        second = x;
      }
    }
    return second - best;
  }

  int n_;
  long rounds_ = 0;
  std::vector<double> true_loss_, peer_score_, f_sum_, g_sum_;
  std::vector<long> disagree_;  // upper-triangle pairwise counts
  double algo_true_loss_ = 0.0;
  double algo_true_realized_ = 0.0;
  double algo_peer_score_ = 0.0;
  double algo_peer_realized_ = 0.0;
  double sigma_g_emp_ = 0.0;
};

inline void ledger_record(RegretLedger& ledger, const LedgerRound& round) {
  ledger.record(round);
}

inline LedgerSummary ledger_summary(const RegretLedger& ledger) {
  return ledger.summary();
}

}  // namespace peerol
