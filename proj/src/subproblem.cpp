#include "cdnsim/subproblem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

namespace cdnsim {

namespace {

constexpr int kMaxMultiplierIterations = 200;

void check_inputs(std::span<const double> prices, double capacity, double tolerance) {
  if (prices.empty()) throw std::invalid_argument("subproblem: empty price vector");
  if (!(tolerance > 0.0)) throw std::invalid_argument(fmt::format("subproblem: tolerance must be positive, got {}", tolerance));
  if (!(capacity > 0.0) || !std::isfinite(capacity)) {
    throw std::invalid_argument(fmt::format("subproblem: capacity must be positive and finite, got {}", capacity));
  }
  for (double p : prices) {
    if (!std::isfinite(p)) throw std::invalid_argument("subproblem: non-finite price");
  }
}

double clamped_total(std::span<const double> prices, const Penalty& penalty, double z, std::span<double> flows) {
  double total = 0.0;
  for (std::size_t f = 0; f < prices.size(); ++f) {
    flows[f] = std::max(0.0, unclamped_flow(penalty, prices[f], z));
    total += flows[f];
  }
  return total;
}

// Sorted active-set elimination for h'(u) = d0 + a u, where g is affine and
// the restricted capacity equation inverts in closed form.
SolveStats water_fill(std::span<const double> prices, double capacity, const Penalty& penalty,
                      std::span<double> flows) {
  const std::size_t n_files = prices.size();
  const double d0 = penalty.marginal_at_zero();
  const double a = penalty.second_deriv(0.0);

  std::vector<std::size_t> order(n_files);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
    return prices[l] < prices[r] || (prices[l] == prices[r] && l < r);
  });

  double total = 0.0;
  std::size_t k = 0;  // zero flows form a prefix of `order`
  double active_price_sum = 0.0;
  for (std::size_t pos = 0; pos < n_files; ++pos) {
    const std::size_t f = order[pos];
    flows[f] = std::max(0.0, (prices[f] - d0) / a);
    total += flows[f];
    if (flows[f] == 0.0) {
      k = pos + 1;
    } else {
      active_price_sum += prices[f];
    }
  }
  if (total <= capacity) return {0.0, false};

  while (true) {
    const std::size_t active = n_files - k;
    const double lowest = prices[order[k]];
    // rho(lowest - d0): restricted flow when the lowest active file just reaches zero.
    const double rho_at_edge = (active_price_sum - static_cast<double>(active) * lowest) / a;
    if (rho_at_edge <= capacity) {
      const double z = (active_price_sum - static_cast<double>(active) * d0 - a * capacity) / static_cast<double>(active);
      for (std::size_t pos = k; pos < n_files; ++pos) {
        const std::size_t f = order[pos];
        flows[f] = std::max(0.0, (prices[f] - z - d0) / a);
      }
      return {std::max(0.0, z), true};
    }
    flows[order[k]] = 0.0;
    active_price_sum -= lowest;
    ++k;
  }
}

SolveStats bisect_multiplier(std::span<const double> prices, double capacity, const Penalty& penalty,
                             double tolerance, std::span<double> flows) {
  if (clamped_total(prices, penalty, 0.0, flows) <= capacity) return {0.0, false};

  const double d0 = penalty.marginal_at_zero();
  double lo = 0.0;
  double hi = *std::max_element(prices.begin(), prices.end()) - d0;
  double hi_total = 0.0;  // total at hi: every flow is zero
  for (int it = 0; it < kMaxMultiplierIterations; ++it) {
    if (hi - lo <= tolerance && capacity - hi_total <= tolerance) break;
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    double total = 0.0;
    for (double p : prices) total += std::max(0.0, unclamped_flow(penalty, p, mid));
    if (total > capacity) {
      lo = mid;
    } else {
      hi = mid;
      hi_total = total;
    }
  }
  // The upper end is always feasible, so the returned flows never exceed C.
  clamped_total(prices, penalty, hi, flows);
  return {hi, true};
}

}  // namespace

double unclamped_flow(const Penalty& penalty, double price, double z) {
  const double g = price - z;
  if (penalty.affine_derivative()) {
    return (g - penalty.marginal_at_zero()) / penalty.second_deriv(0.0);
  }
  if (g < penalty.marginal_at_zero()) return -std::numeric_limits<double>::infinity();
  return penalty.inv_deriv(g);
}

SolveStats solve_into(std::span<const double> prices, double capacity, const Penalty& penalty, double tolerance,
                      std::span<double> flows, SubproblemBackend backend) {
  check_inputs(prices, capacity, tolerance);
  if (flows.size() != prices.size()) throw std::invalid_argument("subproblem: output span has the wrong length");
  switch (backend) {
    case SubproblemBackend::kAuto:
      return penalty.affine_derivative() ? water_fill(prices, capacity, penalty, flows)
                                         : bisect_multiplier(prices, capacity, penalty, tolerance, flows);
    case SubproblemBackend::kWaterFilling:
      if (!penalty.affine_derivative()) {
        throw std::invalid_argument(
            fmt::format("subproblem: water-filling needs an affine derivative, got {}", penalty.to_string()));
      }
      return water_fill(prices, capacity, penalty, flows);
    case SubproblemBackend::kBisection:
      return bisect_multiplier(prices, capacity, penalty, tolerance, flows);
  }
  return {};
}

SubproblemSolution solve(const SubproblemInstance& inst, double tolerance, SubproblemBackend backend) {
  SubproblemSolution sol;
  sol.flows.resize(inst.prices.size());
  const SolveStats stats = solve_into(inst.prices, inst.capacity, inst.penalty, tolerance, sol.flows, backend);
  sol.multiplier = stats.multiplier;
  sol.saturated = stats.saturated;
  return sol;
}

double verify_kkt(const SubproblemInstance& inst, const SubproblemSolution& sol) {
  if (sol.flows.size() != inst.prices.size()) {
    throw std::invalid_argument("verify_kkt: solution and instance sizes differ");
  }
  const double total = std::accumulate(sol.flows.begin(), sol.flows.end(), 0.0);
  const double v = sol.multiplier;
  double residual = std::max(0.0, total - inst.capacity);
  residual = std::max(residual, std::max(0.0, -v));
  residual = std::max(residual, std::abs(v * (total - inst.capacity)));

  const double d0 = inst.penalty.marginal_at_zero();
  for (std::size_t f = 0; f < sol.flows.size(); ++f) {
    const double u = sol.flows[f];
    const double lam = inst.prices[f];
    if (u < 0.0) {
      residual = std::max(residual, -u);
      continue;
    }
    if (u > 0.0) {
      double marginal = 0.0;
      try {
        marginal = inst.penalty.deriv(u);
      } catch (const std::domain_error&) {
        return std::numeric_limits<double>::infinity();
      }
      residual = std::max(residual, std::abs(marginal - lam + v));
    } else {
      // Clamped coordinate: xi = max(0, h'(0) - lambda + v) absorbs any surplus.
      const double slack = d0 - lam + v;
      residual = std::max(residual, std::max(0.0, -slack));
    }
  }
  return residual;
}

}  // namespace cdnsim
