#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "peerol/core.hpp"
#include "peerol/rng.hpp"

namespace peerol {

// Corruption of the hidden outcome y into the reference answer. Symmetric
// and time-varying kinds flip with a class-independent rate; asymmetric
// flips 0->1 with eta0 and 1->0 with eta1. Time-varying schedules cycle a
// value list with a given period.
struct NoiseChannel {
  enum class Kind { symmetric, asymmetric, time_varying };

  static NoiseChannel symmetric(double eta) {
    if (!(eta >= 0.0 && eta < 0.5)) {
      throw ConfigurationError("symmetric channel requires 0 <= eta < 0.5");
    }
    NoiseChannel ch;
    ch.kind = Kind::symmetric;
    ch.eta = eta;
    return ch;
  }

  static NoiseChannel asymmetric(double eta0, double eta1) {
    if (!(eta0 >= 0.0 && eta1 >= 0.0 && eta0 + eta1 < 1.0)) {
      throw ConfigurationError(
          "asymmetric channel requires eta0, eta1 >= 0 and eta0+eta1 < 1");
    }
    NoiseChannel ch;
    ch.kind = Kind::asymmetric;
    ch.eta0 = eta0;
    ch.eta1 = eta1;
    return ch;
  }

  static NoiseChannel time_varying(std::vector<double> values,
                                   std::size_t period = 0) {
    if (values.empty()) {
      throw ConfigurationError("time_varying channel needs at least one rate");
    }
    for (double v : values) {
      if (!(v >= 0.0 && v < 0.5)) {
        throw ConfigurationError("time_varying channel requires every eta_t < 0.5");
      }
    }
    NoiseChannel ch;
    ch.kind = Kind::time_varying;
    ch.schedule = std::move(values);
    ch.period = period == 0 ? ch.schedule.size() : period;
    if (ch.period < ch.schedule.size()) {
      throw ConfigurationError("time_varying period shorter than value list");
    }
    return ch;
  }

  // Symmetric flip rate active at round t (1-based).
  double rate_at(long t) const {
    switch (kind) {
      case Kind::symmetric:
        return eta;
      case Kind::asymmetric:
        return 0.5 * (eta0 + eta1);  // class-averaged, for reporting only
      case Kind::time_varying: {
        const std::size_t pos = static_cast<std::size_t>((t - 1) % static_cast<long>(period));
        return schedule[pos * schedule.size() / period];
      }
    }
    return 0.0;
  }

  // P(reference != y | y) at round t.
  double flip_prob_given(int y, long t) const {
    if (kind == Kind::asymmetric) return y == 1 ? eta1 : eta0;
    return rate_at(t);
  }

  double max_rate() const {
    if (kind == Kind::asymmetric) return std::max(eta0, eta1);
    if (kind == Kind::symmetric) return eta;
    double m = 0.0;
    for (double v : schedule) m = std::max(m, v);
    return m;
  }

  double mean_rate() const {
    if (kind != Kind::time_varying) return rate_at(1);
    double s = 0.0;
    for (double v : schedule) s += v;
    return s / static_cast<double>(schedule.size());
  }

  Kind kind = Kind::symmetric;
  double eta = 0.0;
  double eta0 = 0.0;
  double eta1 = 0.0;
  std::vector<double> schedule;
  std::size_t period = 0;
};

// Draw the reference answer for a known outcome through the channel.
inline int sample_reference(const NoiseChannel& ch, int y, long t, Rng& rng) {
  return rng.bernoulli(ch.flip_prob_given(y, t)) ? 1 - y : y;
}

// P(reference = 1) as a function of the outcome probability p:
// symmetric (1-2eta)p + eta, asymmetric (1-eta1)p + eta0(1-p).
inline double reference_prob(double p, const NoiseChannel& ch, long t = 1) {
  if (ch.kind == NoiseChannel::Kind::asymmetric) {
    return (1.0 - ch.eta1) * p + ch.eta0 * (1.0 - p);
  }
  const double eta_t = ch.rate_at(t);
  return (1.0 - 2.0 * eta_t) * p + eta_t;
}

inline Probability reference_prob(Probability p, const NoiseChannel& ch,
                                  long t = 1) {
  return Probability(reference_prob(p.value(), ch, t));
}

// How the panel's predictions become one reference answer. The channel kind
// bypasses the panel and corrupts the hidden y directly (simulation only).
struct AggregationRule {
  enum class Kind { majority, product_likelihood, channel };

  static AggregationRule majority(double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0)) {
      throw ConfigurationError("majority threshold must lie in (0,1)");
    }
    AggregationRule r;
    r.kind = Kind::majority;
    r.threshold = threshold;
    return r;
  }

  static AggregationRule product_likelihood() {
    AggregationRule r;
    r.kind = Kind::product_likelihood;
    return r;
  }

  static AggregationRule channel(NoiseChannel ch) {
    AggregationRule r;
    r.kind = Kind::channel;
    r.noise = std::move(ch);
    return r;
  }

  Kind kind = Kind::majority;
  double threshold = 0.5;
  NoiseChannel noise;
};

struct AggregateResult {
  int label = 0;
  bool coin_used = false;  // a tie was broken by the rng
};

// Ties (even split, predictions exactly at threshold, equal products) are
// resolved by one fair coin from the caller's rng so that determinism comes
// from the seed rather than from evaluation order.
inline AggregateResult aggregate(std::span<const double> predictions,
                                 const AggregationRule& rule,
                                 std::optional<int> y, Rng& rng, long t = 1) {
  if (rule.kind != AggregationRule::Kind::channel && predictions.empty()) {
    throw InputError("aggregate: empty expert panel");
  }
  switch (rule.kind) {
    case AggregationRule::Kind::majority: {
      int ones = 0, zeros = 0;
      bool at_threshold = false;
      for (double p : predictions) {
        if (p > rule.threshold) {
          ++ones;
        } else if (p < rule.threshold) {
          ++zeros;
        } else {
          at_threshold = true;
        }
      }
      if (at_threshold || ones == zeros) {
        return {rng.bernoulli(0.5) ? 1 : 0, true};
      }
      return {ones > zeros ? 1 : 0, false};
    }
    case AggregationRule::Kind::product_likelihood: {
      // Compare prod p_i against prod (1-p_i) in log space; -inf is fine.
      double log_one = 0.0, log_zero = 0.0;
      for (double p : predictions) {
        log_one += std::log(p);
        log_zero += std::log(1.0 - p);
      }
      if (log_one == log_zero ||
          (std::isinf(log_one) && std::isinf(log_zero))) {
        return {rng.bernoulli(0.5) ? 1 : 0, true};
      }
      return {log_one > log_zero ? 1 : 0, false};
    }
    case AggregationRule::Kind::channel: {
      if (!y.has_value()) {
        throw InputError("aggregate: channel rule requires the hidden outcome");
      }
      return {sample_reference(rule.noise, *y, t, rng), false};
    }
  }
  return {0, false};
}

}  // namespace peerol
