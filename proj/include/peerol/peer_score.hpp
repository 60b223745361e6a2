#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "peerol/core.hpp"
#include "peerol/rng.hpp"

namespace peerol {

// Estimated noise rates are clamped below this before entering scores.
inline constexpr double kEtaCeiling = 0.5 - 1e-6;

// Which correction the surrogate applies to the raw loss against the
// reference answer. The estimated kind takes its eta from an online
// estimator, clamped to [0, kEtaCeiling].
struct NoiseCorrection {
  enum class Kind { symmetric, asymmetric, estimated };

  static NoiseCorrection symmetric(double eta) {
    if (!(eta >= 0.0 && eta < 0.5)) {
      throw ConfigurationError("symmetric correction requires 0 <= eta < 0.5");
    }
    NoiseCorrection c;
    c.kind = Kind::symmetric;
    c.eta = eta;
    return c;
  }

  static NoiseCorrection asymmetric(double eta0, double eta1) {
    if (!(eta0 >= 0.0 && eta1 >= 0.0 && eta0 + eta1 < 1.0)) {
      throw ConfigurationError("asymmetric correction requires eta0+eta1 < 1");
    }
    NoiseCorrection c;
    c.kind = Kind::asymmetric;
    c.eta0 = eta0;
    c.eta1 = eta1;
    return c;
  }

  static NoiseCorrection estimated() {
    NoiseCorrection c;
    c.kind = Kind::estimated;
    return c;
  }

  Kind kind = Kind::symmetric;
  double eta = 0.0;
  double eta0 = 0.0;
  double eta1 = 0.0;
};

// Optional label transforms applied before scoring: the fair-coin trial
// flip that symmetrizes class-conditional error rates, and the biased flip
// that contracts time-varying rates toward a common value.
struct FlipPolicy {
  enum class Kind { none, symmetrize, homogenize };

  static FlipPolicy none() { return {}; }

  static FlipPolicy symmetrize() {
    FlipPolicy f;
    f.kind = Kind::symmetrize;
    return f;
  }

  static FlipPolicy homogenize(double flip_prob) {
    if (!(flip_prob >= 0.0 && flip_prob < 0.5)) {
      throw ConfigurationError("homogenize flip_prob must lie in [0, 0.5)");
    }
    FlipPolicy f;
    f.kind = Kind::homogenize;
    f.flip_prob = flip_prob;
    return f;
  }

  Kind kind = Kind::none;
  double flip_prob = 0.0;
};

struct PeerScoreSpec {
  LossFunction base_loss = LossFunction::squared();
  NoiseCorrection correction = NoiseCorrection::symmetric(0.0);
  FlipPolicy flips = FlipPolicy::none();
};

// One round as the scorer sees it: panel predictions, the reference answer
// (already flipped when a flip transform is active), and the flip record.
struct RoundView {
  long t = 0;
  std::vector<double> predictions;
  int y = 0;
  int y_hat = 0;
  bool flipped = false;
};

// s(p, yhat) = loss(p, yhat) + 2 eta p (1-p). The quadratic term cancels
// the prediction-dependent bias a symmetric flip rate eta injects into the
// expected loss; for binary predictions it vanishes and s is the raw loss.
inline double peer_score_symmetric(const LossFunction& fn, double p, int y_hat,
                                   double eta) {
  if (!(eta >= 0.0 && eta < 0.5)) {
    throw ConfigurationError("peer score requires 0 <= eta < 0.5");
  }
  return fn.eval(p, y_hat) + 2.0 * eta * p * (1.0 - p);
}

inline double peer_score_symmetric(double p, int y_hat, double eta) {
  return peer_score_symmetric(LossFunction::squared(), p, y_hat, eta);
}

// s(p, yhat) = (1 - eta_{1-yhat}) loss(p, yhat) - eta_yhat loss(p, 1-yhat).
// Unbiased for class-dependent rates; may be negative.
inline double peer_score_asymmetric(const LossFunction& fn, double p, int y_hat,
                                    double eta0, double eta1) {
  if (!(eta0 >= 0.0 && eta1 >= 0.0 && eta0 + eta1 < 1.0)) {
    throw ConfigurationError("asymmetric peer score requires eta0+eta1 < 1");
  }
  const double keep = y_hat == 1 ? 1.0 - eta0 : 1.0 - eta1;
  const double cancel = y_hat == 1 ? eta1 : eta0;
  return keep * fn.eval(p, y_hat) - cancel * fn.eval(p, 1 - y_hat);
}

inline double peer_score_asymmetric(double p, int y_hat, double eta0,
                                    double eta1) {
  return peer_score_asymmetric(LossFunction::squared(), p, y_hat, eta0, eta1);
}

// Exact calibration divergence of the symmetric peer score: the two-outcome
// expectation difference under P(yhat=1) = (1-2 eta) p + eta. Defined via
// the expectation rather than the closed-form expansion so that g(p,p) = 0
// holds identically for any base loss.
inline double g_symmetric(const LossFunction& fn, double p_prime, double p,
                          double eta) {
  const double p_hat = (1.0 - 2.0 * eta) * p + eta;
  const double at_prime = p_hat * peer_score_symmetric(fn, p_prime, 1, eta) +
                          (1.0 - p_hat) * peer_score_symmetric(fn, p_prime, 0, eta);
  const double at_p = p_hat * peer_score_symmetric(fn, p, 1, eta) +
                      (1.0 - p_hat) * peer_score_symmetric(fn, p, 0, eta);
  return at_prime - at_p;
}

inline double g_symmetric(double p_prime, double p, double eta) {
  return g_symmetric(LossFunction::squared(), p_prime, p, eta);
}

// Prediction-independent remainder term, kept verbatim for the sigma_g
// recipe and for cross-checks against the expectation form.
inline double F_term(double eta, double p) {
  const double one_minus_2p = 1.0 - 2.0 * p;
  return -eta * (1.0 - eta) * one_minus_2p * one_minus_2p +
         2.0 * eta * p * p - 2.0 * eta * p + eta;
}

// With probability 1/2 complements the whole trial: predictions, outcome
// and reference answer. Afterwards the reference answer's error rates are
// class-independent with common value (eta0+eta1)/2.
inline RoundView symmetrize_round(const RoundView& round, Rng& rng) {
  if (!rng.bernoulli(0.5)) return round;
  RoundView flipped = round;
  flipped.flipped = true;
  for (double& p : flipped.predictions) p = 1.0 - p;
  flipped.y = 1 - round.y;
  flipped.y_hat = 1 - round.y_hat;
  return flipped;
}

// Complements the reference answer with probability flip_prob. A round
// rate eta_t becomes eta_t (1-flip_prob) + (1-eta_t) flip_prob, so any two
// rounds' rates move closer by the factor (1 - 2 flip_prob).
inline int homogenize_flip(int y_hat, double flip_prob, Rng& rng) {
  if (!(flip_prob >= 0.0 && flip_prob < 0.5)) {
    throw ConfigurationError("homogenize flip_prob must lie in [0, 0.5)");
  }
  return rng.bernoulli(flip_prob) ? 1 - y_hat : y_hat;
}

inline double homogenized_rate(double eta_t, double flip_prob) {
  return eta_t * (1.0 - flip_prob) + (1.0 - eta_t) * flip_prob;
}

inline double psi_inverse(double x, const PsiParams& params) {
  const double denom = params.denominator();
  if (!(denom > 0.0)) {
    throw ConfigurationError("psi_inverse denominator must be positive");
  }
  return x / denom;
}

// ---------------------------------------------------------------------------
// Per-round score evaluation with resolved parameters, plus the range used
// to shift scores into [0,1] before the weight update. The shift and scale
// depend only on round-level data, so they are identical for every expert
// and preserve argmins and weight ratios.

struct ResolvedScore {
  const LossFunction* base = nullptr;
  NoiseCorrection::Kind kind = NoiseCorrection::Kind::symmetric;
  double eta = 0.0;   // symmetric / estimated (already clamped)
  double eta0 = 0.0;  // asymmetric
  double eta1 = 0.0;

  double eval(double p, int y_hat) const {
    if (kind == NoiseCorrection::Kind::asymmetric) {
      return peer_score_asymmetric(*base, p, y_hat, eta0, eta1);
    }
    return peer_score_symmetric(*base, p, y_hat, eta);
  }
};

inline ResolvedScore resolve_score(const PeerScoreSpec& spec,
                                   double eta_estimate = 0.0) {
  ResolvedScore r;
  r.base = &spec.base_loss;
  r.kind = spec.correction.kind;
  switch (spec.correction.kind) {
    case NoiseCorrection::Kind::symmetric:
      r.eta = spec.correction.eta;
      break;
    case NoiseCorrection::Kind::asymmetric:
      r.eta0 = spec.correction.eta0;
      r.eta1 = spec.correction.eta1;
      break;
    case NoiseCorrection::Kind::estimated:
      r.eta = std::clamp(eta_estimate, 0.0, kEtaCeiling);
      break;
  }
  return r;
}

struct ScoreBounds {
  double lo = 0.0;
  double hi = 0.0;
  double range() const { return hi - lo; }
};

// Extremes of s(., y_hat) over p in [0,1]. Squared-base scores are
// quadratic in p, so endpoints plus the clamped vertex suffice; other bases
// fall back to a grid scan.
inline ScoreBounds score_bounds(const ResolvedScore& score, int y_hat) {
  const double s0 = score.eval(0.0, y_hat);
  const double s1 = score.eval(1.0, y_hat);
  double lo = std::min(s0, s1);
  double hi = std::max(s0, s1);
  if (score.base->is_squared()) {
    const double sm = score.eval(0.5, y_hat);
    const double a = 2.0 * (s1 + s0 - 2.0 * sm);
    if (std::abs(a) > 1e-15) {
      const double b = s1 - s0 - a;
      const double vertex = -b / (2.0 * a);
      if (vertex > 0.0 && vertex < 1.0) {
        const double sv = score.eval(vertex, y_hat);
        lo = std::min(lo, sv);
        hi = std::max(hi, sv);
      }
    }
    return {lo, hi};
  }
  for (int i = 1; i < kCheckGrid; ++i) {
    const double s = score.eval(static_cast<double>(i) / kCheckGrid, y_hat);
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  return {lo, hi};
}

}  // namespace peerol
