#pragma once

#include <limits>
#include <string>
#include <string_view>

namespace cdnsim {

enum class PenaltyFamily { kQuadratic, kLinearQuadratic, kKleinrock, kMM1Queue };

/// Curvature bounds of a penalty on [0, domain_max]: strong-convexity modulus
/// `m`, Lipschitz constant `L` of the derivative, and the marginal cost at zero.
struct PenaltyConstants {
  double m = 0.0;
  double L = 0.0;
  double d0 = 0.0;
};

/// Convex link-cost function h with its derivative and inverse derivative.
///
///   quadratic  h(x) = (a/2) x^2 + b
///   linquad    h(x) = w x + x^2 / 2
///   kleinrock  h(x) = x / (cap - x)                       0 <= x < cap
///   mm1        h(x) = k x^2 / (cap - x) + k0              0 <= x <= x_max,
///              continued past x_max by its second-order Taylor expansion.
///
/// Values are immutable; every member function is pure.
class Penalty {
 public:
  static constexpr double kUnbounded = std::numeric_limits<double>::infinity();

  static Penalty quadratic(double a, double b = 0.0);
  static Penalty linear_quadratic(double w);
  static Penalty kleinrock(double cap);
  static Penalty mm1(double k, double k0, double cap, double x_max);

  /// Parses the config form, e.g. `quadratic a=1 b=0`, `linquad w=2`,
  /// `kleinrock cap=10 dmax=5`, `mm1 k=1 k0=0 cap=10 xmax=9`.
  static Penalty parse(std::string_view text);
  std::string to_string() const;

  /// Interval end used by constants(). Unset (infinite) by default.
  Penalty with_domain_max(double domain_max) const;
  double domain_max() const { return domain_max_; }
  bool has_domain_max() const { return domain_max_ != kUnbounded; }

  PenaltyFamily family() const { return family_; }
  /// True for the families whose derivative is affine (closed-form inverse).
  bool affine_derivative() const {
    return family_ == PenaltyFamily::kQuadratic || family_ == PenaltyFamily::kLinearQuadratic;
  }

  double eval(double x) const;
  double deriv(double x) const;
  double second_deriv(double x) const;
  /// The x >= 0 with deriv(x) == g. Throws std::domain_error when g < deriv(0).
  double inv_deriv(double g) const;
  /// Marginal cost at zero, h'(0).
  double marginal_at_zero() const;

  PenaltyConstants constants() const;

 private:
  Penalty(PenaltyFamily family, double p0, double p1, double p2, double p3)
      : family_(family), p0_(p0), p1_(p1), p2_(p2), p3_(p3) {}

  void check_domain(double x, const char* op) const;

  PenaltyFamily family_;
  // quadratic: a, b | linquad: w | kleinrock: cap | mm1: k, k0, cap, x_max
  double p0_ = 0.0;
  double p1_ = 0.0;
  double p2_ = 0.0;
  double p3_ = 0.0;
  double domain_max_ = kUnbounded;
};

}  // namespace cdnsim
