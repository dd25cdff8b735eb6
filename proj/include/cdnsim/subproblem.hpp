#pragma once

#include <span>
#include <vector>

#include "cdnsim/penalty.hpp"

namespace cdnsim {

// Per-cache primal subproblem
//
//   minimize   sum_f h(u_f) - lambda_f u_f
//   subject to u >= 0,  sum_f u_f <= C
//
// Its solution is a water-filling: u_f = [g_f(v)]_+ with g_f(z) = h'^{-1}(lambda_f - z)
// and the multiplier v >= 0 chosen so the capacity is met whenever it binds.

struct SubproblemInstance {
  std::vector<double> prices;
  double capacity = 0.0;
  Penalty penalty = Penalty::quadratic(1.0);
};

struct SubproblemSolution {
  std::vector<double> flows;
  double multiplier = 0.0;
  bool saturated = false;
};

enum class SubproblemBackend {
  kAuto,          // water-filling for affine derivatives, bisection otherwise
  kWaterFilling,  // sorted active-set elimination; affine derivatives only
  kBisection,     // bisection on the multiplier
};

/// g_f(z) = h'^{-1}(price - z). Below h'(0) the affine families return the
/// (negative) linear extrapolation and the others return -infinity; callers
/// only ever use the positive part.
double unclamped_flow(const Penalty& penalty, double price, double z);

struct SolveStats {
  double multiplier = 0.0;
  bool saturated = false;
};

/// Writes the optimal flows into `flows` (same length as `prices`).
SolveStats solve_into(std::span<const double> prices, double capacity, const Penalty& penalty,
                      double tolerance, std::span<double> flows,
                      SubproblemBackend backend = SubproblemBackend::kAuto);

SubproblemSolution solve(const SubproblemInstance& inst, double tolerance = 1e-9,
                         SubproblemBackend backend = SubproblemBackend::kAuto);

/// Largest violation among primal feasibility, dual feasibility,
/// complementary slackness and per-file stationarity. Zero at the optimum.
double verify_kkt(const SubproblemInstance& inst, const SubproblemSolution& sol);

}  // namespace cdnsim
