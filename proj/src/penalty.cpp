#include "cdnsim/penalty.hpp"

#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "cdnsim/types.hpp"

namespace cdnsim {

namespace {

constexpr int kMaxBisection = 200;

// Monotone bisection for deriv(x) == g on [lo, hi]; runs to the resolution
// limit of double, which is well inside the 1e-9 absolute target.
template <typename Deriv>
double bisect_inverse(Deriv&& deriv, double g, double lo, double hi) {
  for (int it = 0; it < kMaxBisection; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (deriv(mid) < g) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw std::invalid_argument(fmt::format("penalty parameter {} must be positive and finite, got {}", name, v));
  }
  return v;
}

double require_nonnegative(double v, const char* name) {
  if (!(v >= 0.0) || !std::isfinite(v)) {
    throw std::invalid_argument(fmt::format("penalty parameter {} must be non-negative and finite, got {}", name, v));
  }
  return v;
}

}  // namespace

Penalty Penalty::quadratic(double a, double b) {
  // a == 0 would make the cost linear, which breaks strict convexity.
  return {PenaltyFamily::kQuadratic, require_positive(a, "a"), require_nonnegative(b, "b"), 0.0, 0.0};
}

Penalty Penalty::linear_quadratic(double w) {
  return {PenaltyFamily::kLinearQuadratic, require_nonnegative(w, "w"), 0.0, 0.0, 0.0};
}

Penalty Penalty::kleinrock(double cap) {
  return {PenaltyFamily::kKleinrock, require_positive(cap, "cap"), 0.0, 0.0, 0.0};
}

Penalty Penalty::mm1(double k, double k0, double cap, double x_max) {
  require_positive(k, "k");
  require_nonnegative(k0, "k0");
  require_positive(cap, "cap");
  require_positive(x_max, "xmax");
  if (x_max >= cap) {
    throw std::invalid_argument(fmt::format("mm1 clamp xmax={} must be below cap={}", x_max, cap));
  }
  return {PenaltyFamily::kMM1Queue, k, k0, cap, x_max};
}

Penalty Penalty::with_domain_max(double domain_max) const {
  if (!(domain_max > 0.0)) {
    throw std::invalid_argument(fmt::format("penalty domain_max must be positive, got {}", domain_max));
  }
  Penalty p = *this;
  p.domain_max_ = domain_max;
  return p;
}

Penalty Penalty::parse(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string name;
  in >> name;
  std::map<std::string, double> kv;
  std::string tok;
  while (in >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == tok.size()) {
      throw ConfigError(fmt::format("penalty '{}': expected key=value, got '{}'", text, tok));
    }
    const std::string key = tok.substr(0, eq);
    const std::string val = tok.substr(eq + 1);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(val, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != val.size()) {
      throw ConfigError(fmt::format("penalty '{}': '{}' is not a number", text, val));
    }
    kv[key] = v;
  }
  auto take = [&](const char* key, std::optional<double> fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) {
      if (!fallback) throw ConfigError(fmt::format("penalty '{}': missing parameter '{}'", text, key));
      return *fallback;
    }
    const double v = it->second;
    kv.erase(it);
    return v;
  };

  try {
    std::optional<double> dmax;
    if (auto it = kv.find("dmax"); it != kv.end()) {
      dmax = it->second;
      kv.erase(it);
    }
    Penalty p = [&] {
      if (name == "quadratic") {
        const double a = take("a", std::nullopt);
        return quadratic(a, take("b", 0.0));
      }
      if (name == "linquad") return linear_quadratic(take("w", std::nullopt));
      if (name == "kleinrock") return kleinrock(take("cap", std::nullopt));
      if (name == "mm1") {
        const double k = take("k", std::nullopt);
        const double k0 = take("k0", 0.0);
        const double cap = take("cap", std::nullopt);
        return mm1(k, k0, cap, take("xmax", std::nullopt));
      }
      throw ConfigError(fmt::format("unknown penalty family '{}' (expected quadratic|linquad|kleinrock|mm1)", name));
    }();
    if (!kv.empty()) {
      throw ConfigError(fmt::format("penalty '{}': unknown parameter '{}'", text, kv.begin()->first));
    }
    return dmax ? p.with_domain_max(*dmax) : p;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

std::string Penalty::to_string() const {
  std::string s;
  switch (family_) {
    case PenaltyFamily::kQuadratic: s = fmt::format("quadratic a={} b={}", p0_, p1_); break;
    case PenaltyFamily::kLinearQuadratic: s = fmt::format("linquad w={}", p0_); break;
    case PenaltyFamily::kKleinrock: s = fmt::format("kleinrock cap={}", p0_); break;
    case PenaltyFamily::kMM1Queue: s = fmt::format("mm1 k={} k0={} cap={} xmax={}", p0_, p1_, p2_, p3_); break;
  }
  if (has_domain_max()) s += fmt::format(" dmax={}", domain_max_);
  return s;
}

void Penalty::check_domain(double x, const char* op) const {
  if (!(x >= 0.0)) {
    throw std::domain_error(fmt::format("penalty {}: x={} is below the lower bound 0", op, x));
  }
  if (family_ == PenaltyFamily::kKleinrock && !(x < p0_)) {
    throw std::domain_error(fmt::format("penalty {}: x={} is not below the link capacity cap={}", op, x, p0_));
  }
}

double Penalty::eval(double x) const {
  check_domain(x, "eval");
  switch (family_) {
    case PenaltyFamily::kQuadratic: return 0.5 * p0_ * x * x + p1_;
    case PenaltyFamily::kLinearQuadratic: return p0_ * x + 0.5 * x * x;
    case PenaltyFamily::kKleinrock: return x / (p0_ - x);
    case PenaltyFamily::kMM1Queue: {
      const double k = p0_, k0 = p1_, c = p2_, xm = p3_;
      if (x <= xm) return k * x * x / (c - x) + k0;
      const double e = x - xm;
      const double h = k * xm * xm / (c - xm) + k0;
      return h + deriv(xm) * e + 0.5 * second_deriv(xm) * e * e;
    }
  }
  return 0.0;
}

double Penalty::deriv(double x) const {
  check_domain(x, "deriv");
  switch (family_) {
    case PenaltyFamily::kQuadratic: return p0_ * x;
    case PenaltyFamily::kLinearQuadratic: return p0_ + x;
    case PenaltyFamily::kKleinrock: {
      const double u = p0_ - x;
      return p0_ / (u * u);
    }
    case PenaltyFamily::kMM1Queue: {
      const double k = p0_, c = p2_, xm = p3_;
      const double xc = std::min(x, xm);
      const double u = c - xc;
      const double base = k * (c * c / (u * u) - 1.0);
      return x <= xm ? base : base + second_deriv(xm) * (x - xm);
    }
  }
  return 0.0;
}

double Penalty::second_deriv(double x) const {
  check_domain(x, "second_deriv");
  switch (family_) {
    case PenaltyFamily::kQuadratic: return p0_;
    case PenaltyFamily::kLinearQuadratic: return 1.0;
    case PenaltyFamily::kKleinrock: {
      const double u = p0_ - x;
      return 2.0 * p0_ / (u * u * u);
    }
    case PenaltyFamily::kMM1Queue: {
      const double k = p0_, c = p2_;
      const double u = c - std::min(x, p3_);
      return 2.0 * k * c * c / (u * u * u);
    }
  }
  return 0.0;
}

double Penalty::marginal_at_zero() const {
  switch (family_) {
    case PenaltyFamily::kQuadratic: return 0.0;
    case PenaltyFamily::kLinearQuadratic: return p0_;
    case PenaltyFamily::kKleinrock: return 1.0 / p0_;
    case PenaltyFamily::kMM1Queue: return 0.0;
  }
  return 0.0;
}

double Penalty::inv_deriv(double g) const {
  const double d0 = marginal_at_zero();
  if (!(g >= d0)) {
    throw std::domain_error(fmt::format("penalty inv_deriv: g={} is below h'(0)={}", g, d0));
  }
  if (!std::isfinite(g)) {
    throw std::domain_error("penalty inv_deriv: g must be finite");
  }
  switch (family_) {
    case PenaltyFamily::kQuadratic: return g / p0_;
    case PenaltyFamily::kLinearQuadratic: return g - p0_;
    case PenaltyFamily::kKleinrock: {
      const double cap = p0_;
      return bisect_inverse([cap](double x) { const double u = cap - x; return cap / (u * u); }, g, 0.0, cap);
    }
    case PenaltyFamily::kMM1Queue: {
      const double xm = p3_;
      const double gm = deriv(xm);
      if (g > gm) return xm + (g - gm) / second_deriv(xm);
      return bisect_inverse([this](double x) { return deriv(x); }, g, 0.0, xm);
    }
  }
  return 0.0;
}

PenaltyConstants Penalty::constants() const {
  PenaltyConstants c;
  c.d0 = marginal_at_zero();
  switch (family_) {
    case PenaltyFamily::kQuadratic:
      c.m = c.L = p0_;
      break;
    case PenaltyFamily::kLinearQuadratic:
      c.m = c.L = 1.0;
      break;
    case PenaltyFamily::kKleinrock:
      if (!has_domain_max() || domain_max_ >= p0_) {
        throw std::invalid_argument(fmt::format(
            "kleinrock cap={}: domain_max={} must be set below the capacity for a finite Lipschitz constant", p0_,
            domain_max_));
      }
      c.m = second_deriv(0.0);
      c.L = second_deriv(domain_max_);
      break;
    case PenaltyFamily::kMM1Queue:
      c.m = second_deriv(0.0);
      c.L = second_deriv(std::min(domain_max_, p3_));
      break;
  }
  if (!std::isfinite(c.L) || !(c.m > 0.0) || c.m > c.L) {
    throw std::invalid_argument(fmt::format("penalty {}: invalid curvature constants m={} L={}", to_string(), c.m, c.L));
  }
  return c;
}

}  // namespace cdnsim
