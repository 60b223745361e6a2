#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "peerol/core.hpp"
#include "peerol/learner.hpp"
#include "peerol/peer_score.hpp"

namespace peerol {

// Hoeffding-Azuma deviation for a martingale with increments bounded by
// sigma: sigma sqrt(2 T ln(2/delta)).
inline double e_mart(double delta, double sigma, long T) {
  if (!(delta > 0.0 && delta < 1.0)) {
    throw InputError("e_mart requires 0 < delta < 1");
  }
  if (!(sigma >= 0.0) || T < 1) {
    throw InputError("e_mart requires sigma >= 0 and T >= 1");
  }
  return sigma *
         std::sqrt(2.0 * static_cast<double>(T) * std::log(2.0 / delta));
}

// The increment-scale recipe stated alongside the symmetric-noise regret
// bound: max{4 + max F, 2 - min F} with F extremized over the p range.
inline double sigma_g_formula(double eta, double p_lo = 0.0, double p_hi = 1.0) {
  if (!(eta >= 0.0 && eta < 0.5)) {
    throw ConfigurationError("sigma_g_formula requires 0 <= eta < 0.5");
  }
  if (!(p_lo <= p_hi)) throw InputError("sigma_g_formula: empty p range");
  double f_min = F_term(eta, p_lo);
  double f_max = f_min;
  for (int i = 0; i <= kCheckGrid; ++i) {
    const double p = p_lo + (p_hi - p_lo) * i / kCheckGrid;
    const double f = F_term(eta, p);
    f_min = std::min(f_min, f);
    f_max = std::max(f_max, f);
  }
  return std::max(4.0 + f_max, 2.0 - f_min);
}

struct BoundInputs {
  double delta = 0.05;
  double sigma_g = 4.0;
  long T = 1;
  int N = 1;
  PsiParams psi = PsiParams::symmetric(0.0);
  double score_range = 1.0;               // instantiates E_online(T, N)
  std::vector<double> epsilon_series;     // |eta_hat_t - eta| bounds, per round
  double alpha = 2.1;                     // competitive-ratio knob, > 2
  double max_eta_tilde = 0.0;             // post-flip rate ceiling, < 0.5
  // The probability that the peer-best expert differs from the g-best one is
  // not given constructively; it is carried as an explicit input (default 0)
  // and the simulator reports the empirical event frequency instead.
  double delta_g = 0.0;
};

// Known homogeneous noise: T psi^{-1}((2 E_mart(d, sigma_g, T) +
// E_online(T, N)) / T) + 2 E_mart(d, 2, T).
inline double regret_bound_known_rate(const BoundInputs& in) {
  const double mart_g = e_mart(in.delta, in.sigma_g, in.T);
  const double mart_f = e_mart(in.delta, 2.0, in.T);
  const double online = online_bound(in.T, in.N, in.score_range);
  return static_cast<double>(in.T) *
             psi_inverse((2.0 * mart_g + online) / static_cast<double>(in.T),
                         in.psi) +
         2.0 * mart_f;
}

// Estimated noise rates add the cumulative estimation error inside the
// psi^{-1} numerator; psi must be the symmetric transform.
inline double regret_bound_estimated_rate(const BoundInputs& in) {
  if (in.psi.kind != PsiParams::Kind::symmetric) {
    throw ConfigurationError("regret_bound_estimated_rate uses the symmetric psi transform");
  }
  double eps_sum = 0.0;
  for (double e : in.epsilon_series) eps_sum += e;
  const double mart_g = e_mart(in.delta, in.sigma_g, in.T);
  const double mart_f = e_mart(in.delta, 2.0, in.T);
  const double online = online_bound(in.T, in.N, in.score_range);
  return (2.0 * mart_g + online + eps_sum) / (1.0 - 2.0 * in.psi.eta) +
         2.0 * mart_f;
}

inline double c_comp(double alpha, double max_eta_tilde) {
  if (!(alpha > 2.0)) throw ConfigurationError("c_comp requires alpha > 2");
  if (!(max_eta_tilde >= 0.0 && max_eta_tilde < 0.5)) {
    throw ConfigurationError("c_comp requires max eta_tilde < 0.5");
  }
  return alpha * (1.0 / (1.0 - 2.0 * max_eta_tilde) + 1.0);
}

// Heterogeneous rates: sublinear term scaled by the worst post-flip rate
// plus a competitive-ratio multiple of the best expert's loss.
inline double competitive_loss_bound(const BoundInputs& in, double L_star) {
  if (!(in.max_eta_tilde >= 0.0 && in.max_eta_tilde < 0.5)) {
    throw ConfigurationError("competitive_loss_bound requires max eta_tilde < 0.5");
  }
  const double delta_n = in.delta / (2.0 * static_cast<double>(in.N));
  const double mart_f = e_mart(delta_n, 2.0, in.T);
  const double mart_g = e_mart(delta_n, in.sigma_g, in.T);
  const double online = online_bound(in.T, in.N, in.score_range);
  return (mart_f + mart_g + online) / (1.0 - 2.0 * in.max_eta_tilde) +
         c_comp(in.alpha, in.max_eta_tilde) * L_star;
}

// Flip probability for rate homogenization: 1/2 - epsilon_eta plus a hair,
// which contracts rate heterogeneity by (1 - 2 flip_prob). Values at or
// above the 0.5 ceiling would erase the reference signal entirely.
inline double choose_flip_prob(double epsilon_eta) {
  if (!(epsilon_eta > 0.0 && epsilon_eta < 0.5)) {
    throw ConfigurationError("choose_flip_prob requires 0 < epsilon_eta < 0.5");
  }
  const double flip = std::max(0.0, 0.5 - epsilon_eta) + 1e-6;
  if (flip >= 0.5 - 1e-6) {
    throw ConfigurationError(
        "choose_flip_prob: epsilon_eta too small, flip probability would reach 0.5");
  }
  return flip;
}

// The per-round estimation-error series implied by importance weighting
// with reveal probability p_star at confidence 1 - delta.
inline std::vector<double> iw_epsilon_series(long T, double delta,
                                             double p_star) {
  std::vector<double> eps(static_cast<std::size_t>(T));
  const double scale = std::sqrt(std::log(2.0 / delta)) / p_star;
  for (long t = 1; t <= T; ++t) {
    eps[static_cast<std::size_t>(t - 1)] =
        scale / std::sqrt(2.0 * static_cast<double>(t));
  }
  return eps;
}

}  // namespace peerol
