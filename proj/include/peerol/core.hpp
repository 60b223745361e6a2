#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>

namespace peerol {

// Bad parameters (rates out of range, non-convex potentials, invalid specs).
struct ConfigurationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Bad per-call inputs (empty panels, missing labels).
struct InputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Roundoff slack absorbed when validating unit-interval values.
inline constexpr double kUnitSlack = 1e-12;

// Resolution of the grids used for convexity and property checks.
inline constexpr int kCheckGrid = 256;

inline double clamp01(double x) {
  if (x < 0.0) return 0.0;
  if (x > 1.0) return 1.0;
  return x;
}

// Unit-interval scalar, validated at system boundaries only. Interior
// arithmetic stays on raw doubles and re-enters through this type.
class Probability {
 public:
  Probability() = default;
  explicit Probability(double v) : value_(clamp01(v)) {
    if (!(v >= -kUnitSlack && v <= 1.0 + kUnitSlack)) {
      throw InputError("probability outside [0,1]: " + std::to_string(v));
    }
  }
  double value() const { return value_; }

 private:
  double value_ = 0.0;
};

// Proper binary loss: squared (Brier) or a Savage-form loss built from a
// convex potential G with caller-supplied derivative and outcome offsets.
//
//   loss(p, 1) = -G(p) - (1-p) G'(p) + phi1
//   loss(p, 0) = -G(p) +    p  G'(p) + phi0
//
// G(p) = p^2 - p with zero offsets reproduces the squared loss exactly.
class LossFunction {
 public:
  static LossFunction squared() { return LossFunction(); }

  static LossFunction savage(std::function<double(double)> potential,
                             std::function<double(double)> derivative,
                             double phi0 = 0.0, double phi1 = 0.0) {
    LossFunction fn;
    fn.squared_ = false;
    fn.potential_ = std::move(potential);
    fn.derivative_ = std::move(derivative);
    fn.phi0_ = phi0;
    fn.phi1_ = phi1;
    fn.check_convexity();
    return fn;
  }

  bool is_squared() const { return squared_; }

  // Interior evaluation on raw reals; p is assumed in [0,1].
  double eval(double p, int y) const {
    if (squared_) {
      const double d = static_cast<double>(y) - p;
      return d * d;
    }
    const double g = potential_(p);
    const double gp = derivative_(p);
    return y == 1 ? -g - (1.0 - p) * gp + phi1_ : -g + p * gp + phi0_;
  }

 private:
  LossFunction() = default;

  // Midpoint convexity of G on the 1/kCheckGrid grid.
  void check_convexity() const {
    const double step = 1.0 / kCheckGrid;
    double prev = potential_(0.0);
    double cur = potential_(step);
    for (int i = 1; i < kCheckGrid; ++i) {
      const double next = potential_((i + 1) * step);
      if (prev + next - 2.0 * cur < -1e-9) {
        throw ConfigurationError("savage potential is not convex near p=" +
                                 std::to_string(i * step));
      }
      prev = cur;
      cur = next;
    }
  }

  bool squared_ = true;
  std::function<double(double)> potential_;
  std::function<double(double)> derivative_;
  double phi0_ = 0.0;
  double phi1_ = 0.0;
};

inline double loss(const LossFunction& fn, Probability p, int y) {
  return fn.eval(p.value(), y);
}

// Divergence calibrating the loss: the expected excess loss of predicting
// p' when outcomes are drawn from p, computed exactly over both outcomes.
inline double f_divergence(const LossFunction& fn, double p_prime, double p) {
  return p * (fn.eval(p_prime, 1) - fn.eval(p, 1)) +
         (1.0 - p) * (fn.eval(p_prime, 0) - fn.eval(p, 0));
}

inline double f_divergence(const LossFunction& fn, Probability p_prime,
                           Probability p) {
  return f_divergence(fn, p_prime.value(), p.value());
}

// Parameters of the convex transform linking peer and true divergences.
struct PsiParams {
  enum class Kind { symmetric, asymmetric };

  static PsiParams symmetric(double eta) {
    if (!(eta >= 0.0 && eta < 0.5)) {
      throw ConfigurationError("symmetric psi requires 0 <= eta < 0.5");
    }
    PsiParams p;
    p.kind = Kind::symmetric;
    p.eta = eta;
    return p;
  }

  static PsiParams asymmetric(double eta0, double eta1) {
    if (!(eta0 >= 0.0 && eta1 >= 0.0 && eta0 + eta1 < 1.0)) {
      throw ConfigurationError("asymmetric psi requires eta0+eta1 < 1");
    }
    PsiParams p;
    p.kind = Kind::asymmetric;
    p.eta0 = eta0;
    p.eta1 = eta1;
    return p;
  }

  double denominator() const {
    return kind == Kind::symmetric ? 1.0 - 2.0 * eta : 1.0 - eta0 - eta1;
  }

  Kind kind = Kind::symmetric;
  double eta = 0.0;
  double eta0 = 0.0;
  double eta1 = 0.0;
};

// A divergence together with the psi transform that makes excess-g control
// excess-f. psi_inverse(0) = 0 and the map is nondecreasing on its domain.
struct CalibrationPair {
  std::function<double(double, double)> f;  // divergence(p', p)
  PsiParams psi;

  double psi_inverse(double x) const { return x / psi.denominator(); }
};

inline CalibrationPair calibration_for(const LossFunction& fn, PsiParams psi) {
  return CalibrationPair{
      [fn](double p_prime, double p) { return f_divergence(fn, p_prime, p); },
      psi};
}

}  // namespace peerol
