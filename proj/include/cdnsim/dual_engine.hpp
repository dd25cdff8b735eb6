#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "cdnsim/penalty.hpp"
#include "cdnsim/types.hpp"

namespace cdnsim {

/// One cache server and its two links: the local (cache) path with capacity
/// C^c and cost chi, and the rerouted (root) path with capacity C^r and cost phi.
struct CacheLink {
  double storage = 0.0;         // M_i, volume the cache can hold
  double cache_capacity = 0.0;  // C^c_i, volume per slot
  double root_capacity = 0.0;   // C^r_i, volume per slot
  Penalty chi = Penalty::quadratic(1.0);
  Penalty phi = Penalty::quadratic(10.0);
};

struct NetworkConfig {
  std::vector<CacheLink> caches;
  std::size_t num_files = 0;

  /// Fills in each penalty's domain_max with its link capacity where unset and
  /// validates capacities. Throws ConfigError.
  void finalize();

  std::size_t num_caches() const { return caches.size(); }
  /// m = min over caches of min{m_chi, m_phi}.
  double strong_convexity() const;
  /// Delta_i = max{L_chi, L_phi} (C^c_i + C^r_i) + F max{chi'(0), phi'(0)}.
  double delta_cap(std::size_t cache) const;
  /// min{chi'(0), phi'(0)}.
  double price_floor(std::size_t cache) const;
};

enum class InitMode { kFloor, kUniformCap, kCustom };

struct DualState {
  Matrix lambda;  // N x F shadow prices
  double mu = 0.0;
  std::vector<double> delta_cap;
  std::vector<double> phi_floor;
  std::size_t t = 0;
};

struct AnticipatedFlows {
  Matrix x;  // cache path
  Matrix y;  // root path
};

/// Shadow-price bound breach observed after a dual step. Diagnostic only; the
/// state is never projected back.
struct BoundViolation {
  std::size_t t = 0;
  std::size_t cache = 0;
  enum class Kind { kBelowFloor, kAboveDelta } kind = Kind::kBelowFloor;
  double value = 0.0;
  double bound = 0.0;
};

/// Per-cache aggregate-demand check sum_f d_if <= C^c_i + C^r_i.
std::vector<bool> a1_feasible(const NetworkConfig& config, const Matrix& demand);

/// Builds the initial state. `mu` defaults to half the strong-convexity modulus.
/// Throws std::invalid_argument when mu is outside (0, m) or the initial
/// prices break either initialization bound.
DualState init_dual(const NetworkConfig& config, InitMode mode, std::optional<double> mu = std::nullopt,
                    const Matrix* custom = nullptr);

/// Solves both per-cache subproblems for every cache at the current prices.
AnticipatedFlows primal_step(const DualState& state, const NetworkConfig& config, double tolerance = 1e-9);

/// lambda <- lambda - mu (x + y - d). Bound breaches are appended to
/// `diagnostics` when it is non-null.
void apply_dual_step(DualState& state, const AnticipatedFlows& flows, const Matrix& demand,
                     std::vector<BoundViolation>* diagnostics = nullptr);
DualState dual_step(const DualState& state, const AnticipatedFlows& flows, const Matrix& demand,
                    std::vector<BoundViolation>* diagnostics = nullptr);

/// Running record of residuals r(t) = x(t) + y(t) - d(t) and post-update
/// prices lambda(t+1), kept as exact sums (Welford for the price spread).
class DualHistory {
 public:
  explicit DualHistory(const Matrix& initial_lambda);

  void record(const AnticipatedFlows& flows, const Matrix& demand, const Matrix& lambda_after);

  std::size_t steps() const { return steps_; }
  const Matrix& residual_sum() const { return residual_sum_; }
  const Matrix& initial_lambda() const { return initial_; }
  const Matrix& lambda_mean() const { return lambda_mean_; }
  const Matrix& lambda_m2() const { return lambda_m2_; }

 private:
  Matrix initial_;
  Matrix residual_sum_;
  Matrix lambda_mean_;
  Matrix lambda_m2_;
  std::size_t steps_ = 0;
};

struct ResidualTrace {
  Matrix average_residual;      // |1/T sum_t r_if(t)|
  double max_average_residual = 0.0;
  double mean_average_residual = 0.0;
  /// (2/T) sqrt(sum_{i,f,t} (lambda_if(t) - mean_t lambda_if)^2)
  double gradient_norm = 0.0;
  std::size_t steps = 0;
};

/// Throws std::invalid_argument on an empty history.
ResidualTrace residual_trace(const DualHistory& history);

}  // namespace cdnsim
