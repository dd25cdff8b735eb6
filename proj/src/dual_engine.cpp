#include "cdnsim/dual_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

#include "cdnsim/subproblem.hpp"

namespace cdnsim {

namespace {

constexpr double kBoundSlack = 1e-9;

double slack_for(double bound) { return kBoundSlack * std::max(1.0, std::abs(bound)); }

}  // namespace

void NetworkConfig::finalize() {
  if (caches.empty()) throw ConfigError("network: at least one cache is required");
  if (num_files == 0) throw ConfigError("network: catalog must contain at least one file");
  for (std::size_t i = 0; i < caches.size(); ++i) {
    CacheLink& c = caches[i];
    if (!(c.storage >= 0.0) || !std::isfinite(c.storage)) {
      throw ConfigError(fmt::format("cache {}: storage must be non-negative, got {}", i, c.storage));
    }
    if (!(c.cache_capacity > 0.0) || !(c.root_capacity > 0.0) || !std::isfinite(c.cache_capacity) ||
        !std::isfinite(c.root_capacity)) {
      throw ConfigError(fmt::format("cache {}: link capacities must be positive and finite (C^c={}, C^r={})", i,
                                    c.cache_capacity, c.root_capacity));
    }
    if (!c.chi.has_domain_max()) c.chi = c.chi.with_domain_max(c.cache_capacity);
    if (!c.phi.has_domain_max()) c.phi = c.phi.with_domain_max(c.root_capacity);
    try {
      (void)c.chi.constants();
      (void)c.phi.constants();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(fmt::format("cache {}: {}", i, e.what()));
    }
  }
}

double NetworkConfig::strong_convexity() const {
  double m = std::numeric_limits<double>::infinity();
  for (const CacheLink& c : caches) m = std::min({m, c.chi.constants().m, c.phi.constants().m});
  return m;
}

double NetworkConfig::delta_cap(std::size_t cache) const {
  const CacheLink& c = caches.at(cache);
  const PenaltyConstants kc = c.chi.constants();
  const PenaltyConstants kp = c.phi.constants();
  return std::max(kc.L, kp.L) * (c.cache_capacity + c.root_capacity) +
         static_cast<double>(num_files) * std::max(kc.d0, kp.d0);
}

double NetworkConfig::price_floor(std::size_t cache) const {
  const CacheLink& c = caches.at(cache);
  return std::min(c.chi.marginal_at_zero(), c.phi.marginal_at_zero());
}

std::vector<bool> a1_feasible(const NetworkConfig& config, const Matrix& demand) {
  std::vector<bool> ok(config.num_caches());
  for (std::size_t i = 0; i < config.num_caches(); ++i) {
    double total = 0.0;
    for (double d : demand.row(i)) total += d;
    ok[i] = total <= config.caches[i].cache_capacity + config.caches[i].root_capacity;
  }
  return ok;
}

DualState init_dual(const NetworkConfig& config, InitMode mode, std::optional<double> mu, const Matrix* custom) {
  const std::size_t n = config.num_caches();
  const std::size_t files = config.num_files;
  const double m = config.strong_convexity();

  DualState s;
  s.mu = mu.value_or(0.5 * m);
  if (!(s.mu > 0.0) || !(s.mu < m)) {
    throw std::invalid_argument(
        fmt::format("dual step size mu={} must lie in (0, m) with strong-convexity modulus m={}", s.mu, m));
  }
  s.delta_cap.resize(n);
  s.phi_floor.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    s.delta_cap[i] = config.delta_cap(i);
    s.phi_floor[i] = config.price_floor(i);
  }

  s.lambda = Matrix(n, files);
  switch (mode) {
    case InitMode::kFloor:
      for (std::size_t i = 0; i < n; ++i) std::fill(s.lambda.row(i).begin(), s.lambda.row(i).end(), s.phi_floor[i]);
      break;
    case InitMode::kUniformCap:
      for (std::size_t i = 0; i < n; ++i) {
        const double v = s.delta_cap[i] / static_cast<double>(files);
        if (v < s.phi_floor[i]) {
          throw std::invalid_argument(fmt::format(
              "uniform_cap init: Delta/F={} is below the price floor {} for cache {}", v, s.phi_floor[i], i));
        }
        std::fill(s.lambda.row(i).begin(), s.lambda.row(i).end(), v);
      }
      break;
    case InitMode::kCustom:
      if (custom == nullptr || custom->rows() != n || custom->cols() != files) {
        throw std::invalid_argument(fmt::format("custom init: expected a {}x{} price matrix", n, files));
      }
      s.lambda = *custom;
      break;
  }

  for (std::size_t i = 0; i < n; ++i) {
    double row_sum = 0.0;
    for (double v : s.lambda.row(i)) {
      if (!std::isfinite(v) || v < s.phi_floor[i]) {
        throw std::invalid_argument(
            fmt::format("initial price {} for cache {} is below the floor min{{chi'(0), phi'(0)}}={}", v, i,
                        s.phi_floor[i]));
      }
      row_sum += v;
    }
    if (row_sum > s.delta_cap[i] + slack_for(s.delta_cap[i])) {
      throw std::invalid_argument(
          fmt::format("initial prices for cache {} sum to {} which exceeds Delta={}", i, row_sum, s.delta_cap[i]));
    }
  }
  return s;
}

AnticipatedFlows primal_step(const DualState& state, const NetworkConfig& config, double tolerance) {
  const std::size_t n = state.lambda.rows();
  if (n != config.num_caches() || state.lambda.cols() != config.num_files) {
    throw std::invalid_argument("primal_step: dual state shape does not match the network");
  }
  AnticipatedFlows flows{Matrix(n, config.num_files), Matrix(n, config.num_files)};
  for (std::size_t i = 0; i < n; ++i) {
    const CacheLink& c = config.caches[i];
    solve_into(state.lambda.row(i), c.cache_capacity, c.chi, tolerance, flows.x.row(i));
    solve_into(state.lambda.row(i), c.root_capacity, c.phi, tolerance, flows.y.row(i));
  }
  return flows;
}

void apply_dual_step(DualState& state, const AnticipatedFlows& flows, const Matrix& demand,
                     std::vector<BoundViolation>* diagnostics) {
  if (!state.lambda.same_shape(flows.x) || !state.lambda.same_shape(flows.y) || !state.lambda.same_shape(demand)) {
    throw std::invalid_argument("dual_step: shape mismatch between prices, flows and demand");
  }
  auto& lam = state.lambda.data();
  const auto& x = flows.x.data();
  const auto& y = flows.y.data();
  const auto& d = demand.data();
  for (std::size_t k = 0; k < lam.size(); ++k) lam[k] -= state.mu * (x[k] + y[k] - d[k]);
  ++state.t;

  if (diagnostics == nullptr) return;
  for (std::size_t i = 0; i < state.lambda.rows(); ++i) {
    double row_sum = 0.0;
    double row_min = std::numeric_limits<double>::infinity();
    for (double v : state.lambda.row(i)) {
      row_sum += v;
      row_min = std::min(row_min, v);
    }
    const double floor = state.phi_floor[i];
    if (row_min < floor - slack_for(floor)) {
      diagnostics->push_back({state.t, i, BoundViolation::Kind::kBelowFloor, row_min, floor});
    }
    if (row_sum > state.delta_cap[i] + slack_for(state.delta_cap[i])) {
      diagnostics->push_back({state.t, i, BoundViolation::Kind::kAboveDelta, row_sum, state.delta_cap[i]});
    }
  }
}

DualState dual_step(const DualState& state, const AnticipatedFlows& flows, const Matrix& demand,
                    std::vector<BoundViolation>* diagnostics) {
  DualState next = state;
  apply_dual_step(next, flows, demand, diagnostics);
  return next;
}

DualHistory::DualHistory(const Matrix& initial_lambda)
    : initial_(initial_lambda),
      residual_sum_(initial_lambda.rows(), initial_lambda.cols()),
      lambda_mean_(initial_lambda.rows(), initial_lambda.cols()),
      lambda_m2_(initial_lambda.rows(), initial_lambda.cols()) {}

void DualHistory::record(const AnticipatedFlows& flows, const Matrix& demand, const Matrix& lambda_after) {
  if (!initial_.same_shape(flows.x) || !initial_.same_shape(demand) || !initial_.same_shape(lambda_after)) {
    throw std::invalid_argument("DualHistory::record: shape mismatch");
  }
  ++steps_;
  const double n = static_cast<double>(steps_);
  auto& rs = residual_sum_.data();
  auto& mean = lambda_mean_.data();
  auto& m2 = lambda_m2_.data();
  for (std::size_t k = 0; k < rs.size(); ++k) {
    rs[k] += flows.x.data()[k] + flows.y.data()[k] - demand.data()[k];
    const double v = lambda_after.data()[k];
    const double delta = v - mean[k];
    mean[k] += delta / n;
    m2[k] += delta * (v - mean[k]);
  }
}

ResidualTrace residual_trace(const DualHistory& history) {
  if (history.steps() == 0) throw std::invalid_argument("residual_trace: history is empty");
  ResidualTrace tr;
  tr.steps = history.steps();
  const double T = static_cast<double>(tr.steps);
  const Matrix& rs = history.residual_sum();
  tr.average_residual = Matrix(rs.rows(), rs.cols());
  double total = 0.0;
  for (std::size_t k = 0; k < rs.data().size(); ++k) {
    const double v = std::abs(rs.data()[k] / T);
    tr.average_residual.data()[k] = v;
    tr.max_average_residual = std::max(tr.max_average_residual, v);
    total += v;
  }
  tr.mean_average_residual = total / static_cast<double>(rs.data().size());
  double spread = 0.0;
  for (double v : history.lambda_m2().data()) spread += v;
  tr.gradient_norm = 2.0 * std::sqrt(std::max(0.0, spread)) / T;
  return tr;
}

}  // namespace cdnsim
