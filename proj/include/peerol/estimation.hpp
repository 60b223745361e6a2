#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "peerol/core.hpp"
#include "peerol/peer_score.hpp"
#include "peerol/rng.hpp"

namespace peerol {

// Importance-weighted error-rate estimator for the occasional-ground-truth
// setting: when the outcome is revealed (probability p_star per round) the
// disagreement indicator is weighted by 1/p_star, otherwise the round
// contributes zero. The running mean is unbiased for the error rate.
class ImportanceWeightedEstimator {
 public:
  explicit ImportanceWeightedEstimator(double p_star) : p_star_(p_star) {
    if (!(p_star > 0.0 && p_star <= 1.0)) {
      throw ConfigurationError("reveal probability p_star must lie in (0, 1]");
    }
  }

  // Returns the estimate after incorporating the round.
  double update(int y_hat, std::optional<int> revealed_y) {
    ++rounds_;
    if (revealed_y.has_value() && *revealed_y != y_hat) {
      running_sum_ += 1.0 / p_star_;
    }
    return estimate();
  }

  double estimate() const {
    return rounds_ == 0 ? 0.0 : running_sum_ / static_cast<double>(rounds_);
  }

  // Estimate as used inside peer scores.
  double clamped_estimate() const {
    return std::clamp(estimate(), 0.0, kEtaCeiling);
  }

  double p_star() const { return p_star_; }
  long rounds() const { return rounds_; }

 private:
  double p_star_;
  double running_sum_ = 0.0;
  long rounds_ = 0;
};

// High-probability bound on |estimate - eta| after t rounds at confidence
// 1 - delta: sqrt(ln(2/delta)) / (p_star sqrt(2t)).
inline double estimation_error_bound(long t, double delta, double p_star) {
  if (t < 1) throw InputError("estimation_error_bound requires t >= 1");
  if (!(delta > 0.0 && delta < 1.0)) {
    throw InputError("estimation_error_bound requires 0 < delta < 1");
  }
  if (!(p_star > 0.0)) {
    throw InputError("estimation_error_bound requires p_star > 0");
  }
  return std::sqrt(std::log(2.0 / delta)) /
         (p_star * std::sqrt(2.0 * static_cast<double>(t)));
}

struct MomentCounts {
  double c1 = 0.0;  // mean of 1(yhat_A = 1)
  double c2 = 0.0;  // mean of 1(yhat_B = 1)
  double c3 = 0.0;  // mean of 1(yhat_A = yhat_B = 1)
};

// Moments implied by (P0, etaA, etaB) under conditional independence.
inline MomentCounts forward_moments(double P0, double etaA, double etaB) {
  MomentCounts c;
  c.c1 = P0 * etaA + (1.0 - P0) * (1.0 - etaA);
  c.c2 = P0 * etaB + (1.0 - P0) * (1.0 - etaB);
  c.c3 = P0 * etaA * etaB + (1.0 - P0) * (1.0 - etaA) * (1.0 - etaB);
  return c;
}

struct NoiseSolution {
  enum class Status { ok, degenerate_P0, no_real_root };

  double P0_hat = std::numeric_limits<double>::quiet_NaN();
  double etaA_hat = std::numeric_limits<double>::quiet_NaN();
  double etaB_hat = std::numeric_limits<double>::quiet_NaN();
  Status status = Status::no_real_root;
  double residual = std::numeric_limits<double>::infinity();
};

inline double moment_residual(double P0, double etaA, double etaB,
                              const MomentCounts& c) {
  const MomentCounts f = forward_moments(P0, etaA, etaB);
  return std::max({std::abs(f.c1 - c.c1), std::abs(f.c2 - c.c2),
                   std::abs(f.c3 - c.c3)});
}

// Solves the three moment equations for (P0, etaA, etaB). Eliminating the
// rates via etaA = (c1 - 1 + P0)/(2 P0 - 1) (and likewise for B) reduces
// the system to
//
//   A P0^2 - A P0 + (c1 c2 - c3) = 0,   A = 2(c1 + c2) - 1 - 4 c3,
//
// whose two roots mirror each other around 1/2; only the root whose implied
// rates lie in [0, 0.5) is the true parameter set. Boundary roots
// (P0 at 0 or 1, e.g. from constant streams) signal insufficient samples.
inline NoiseSolution solve_noise_system(double c1, double c2, double c3) {
  const double slack = 1e-9;
  if (c1 < -slack || c1 > 1.0 + slack || c2 < -slack || c2 > 1.0 + slack ||
      c3 < -slack || c3 > 1.0 + slack) {
    throw InputError("solve_noise_system: moments must lie in [0,1]");
  }
  if (c3 > std::min(c1, c2) + slack) {
    throw InputError("solve_noise_system: c3 must not exceed min(c1, c2)");
  }
  const MomentCounts counts{c1, c2, c3};
  NoiseSolution sol;

  const double quad = 2.0 * (c1 + c2) - 1.0 - 4.0 * c3;
  if (std::abs(quad) < 1e-12) {
    // An uninformative group (rate 1/2) makes the quadratic vanish.
    sol.status = NoiseSolution::Status::no_real_root;
    return sol;
  }
  const double disc = 0.25 - (c1 * c2 - c3) / quad;
  if (disc < 0.0) {
    sol.status = NoiseSolution::Status::no_real_root;
    return sol;
  }
  const double half_width = std::sqrt(disc);

  struct Candidate {
    double P0, etaA, etaB, residual;
  };
  std::vector<Candidate> valid;
  bool saw_degenerate = false;
  double degenerate_P0 = 0.5;
  for (const double P0 : {0.5 - half_width, 0.5 + half_width}) {
    if (!(P0 > 1e-9 && P0 < 1.0 - 1e-9)) continue;
    const double denom = 2.0 * P0 - 1.0;
    if (std::abs(denom) < 1e-3) {
      // Rate recovery divides by 2 P0 - 1; the footnote fallback for this
      // regime is not implemented, so it is surfaced as a status.
      saw_degenerate = true;
      degenerate_P0 = P0;
      continue;
    }
    double etaA = (c1 - 1.0 + P0) / denom;
    double etaB = (c2 - 1.0 + P0) / denom;
    if (etaA > -slack && etaA < 0.5 && etaB > -slack && etaB < 0.5) {
      etaA = std::max(etaA, 0.0);
      etaB = std::max(etaB, 0.0);
      valid.push_back({P0, etaA, etaB, moment_residual(P0, etaA, etaB, counts)});
    }
  }
  if (valid.empty()) {
    if (saw_degenerate) {
      sol.P0_hat = degenerate_P0;
      sol.status = NoiseSolution::Status::degenerate_P0;
    } else {
      sol.status = NoiseSolution::Status::no_real_root;
    }
    return sol;
  }
  // Sampling noise can leave both roots admissible; the residual is the
  // only data-driven criterion, with |P0 - 1/2| as the tie-break.
  const Candidate& best = *std::min_element(
      valid.begin(), valid.end(), [](const Candidate& a, const Candidate& b) {
        if (std::abs(a.residual - b.residual) > 1e-15) {
          return a.residual < b.residual;
        }
        return std::abs(a.P0 - 0.5) < std::abs(b.P0 - 0.5);
      });
  sol.P0_hat = best.P0;
  sol.etaA_hat = best.etaA;
  sol.etaB_hat = best.etaB;
  sol.residual = best.residual;
  sol.status = NoiseSolution::Status::ok;
  return sol;
}

// Ground-truth-free estimator: tracks the marginal and joint frequencies of
// two conditionally independent reference answers and inverts the moment
// system. The expert partition is drawn once, uniformly from the seed.
class TwoGroupEstimator {
 public:
  TwoGroupEstimator(std::vector<int> group_a, std::vector<int> group_b)
      : group_a_(std::move(group_a)), group_b_(std::move(group_b)) {
    if (group_a_.empty() || group_b_.empty()) {
      throw ConfigurationError("two-group estimator needs two nonempty groups");
    }
  }

  static TwoGroupEstimator random_partition(int n_experts, Rng& rng) {
    if (n_experts < 2) {
      throw ConfigurationError("two-group estimator needs at least 2 experts");
    }
    std::vector<int> ids(static_cast<std::size_t>(n_experts));
    std::iota(ids.begin(), ids.end(), 0);
    for (std::size_t i = ids.size() - 1; i > 0; --i) {
      std::swap(ids[i], ids[rng.uniform_index(i + 1)]);
    }
    const std::size_t half = ids.size() / 2;
    return TwoGroupEstimator(
        std::vector<int>(ids.begin(), ids.begin() + static_cast<long>(half)),
        std::vector<int>(ids.begin() + static_cast<long>(half), ids.end()));
  }

  // Returns the running means (c1, c2, c3) after the round.
  MomentCounts update(int y_hat_a, int y_hat_b) {
    ++rounds_;
    if (y_hat_a == 1) ++ones_a_;
    if (y_hat_b == 1) ++ones_b_;
    if (y_hat_a == 1 && y_hat_b == 1) ++ones_both_;
    return counts();
  }

  MomentCounts counts() const {
    if (rounds_ == 0) return {};
    const double t = static_cast<double>(rounds_);
    return {static_cast<double>(ones_a_) / t, static_cast<double>(ones_b_) / t,
            static_cast<double>(ones_both_) / t};
  }

  NoiseSolution solve() const {
    const MomentCounts c = counts();
    return solve_noise_system(c.c1, c.c2, c.c3);
  }

  const std::vector<int>& group_a() const { return group_a_; }
  const std::vector<int>& group_b() const { return group_b_; }
  long rounds() const { return rounds_; }

 private:
  std::vector<int> group_a_, group_b_;
  long rounds_ = 0;
  long ones_a_ = 0;
  long ones_b_ = 0;
  long ones_both_ = 0;
};

}  // namespace peerol
