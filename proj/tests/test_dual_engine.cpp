#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "cdnsim/dual_engine.hpp"
#include "cdnsim/subproblem.hpp"

using namespace cdnsim;

namespace {

NetworkConfig network(std::size_t caches, std::size_t files, double cc = 10, double cr = 10,
                      Penalty chi = Penalty::quadratic(1.0), Penalty phi = Penalty::quadratic(10.0)) {
  NetworkConfig net;
  net.num_files = files;
  for (std::size_t i = 0; i < caches; ++i) {
    CacheLink l;
    l.storage = 5;
    l.cache_capacity = cc;
    l.root_capacity = cr;
    l.chi = chi;
    l.phi = phi;
    net.caches.push_back(l);
  }
  net.finalize();
  return net;
}

}  // namespace

TEST_SUITE("dual_engine") {
  TEST_CASE("network constants") {
    // L = 2, C^c + C^r = 10, F = 3, max h'(0) = 1.
    const NetworkConfig net =
        network(1, 3, 4, 6, Penalty::quadratic(2.0), Penalty::linear_quadratic(1.0));
    CHECK(net.delta_cap(0) == doctest::Approx(23.0));
    CHECK(net.strong_convexity() == 1.0);
    CHECK(net.price_floor(0) == 0.0);
    CHECK(net.caches[0].chi.domain_max() == 4.0);
    CHECK(net.caches[0].phi.domain_max() == 6.0);
  }

  TEST_CASE("finalize rejects bad networks") {
    NetworkConfig empty;
    empty.num_files = 3;
    CHECK_THROWS_AS(empty.finalize(), ConfigError);
    NetworkConfig net = network(1, 3);
    net.caches[0].cache_capacity = 0;
    CHECK_THROWS_AS(net.finalize(), ConfigError);
    NetworkConfig k = network(1, 3);
    k.caches[0].chi = Penalty::kleinrock(5.0);
    k.caches[0].cache_capacity = 5.0;
    CHECK_THROWS_AS(k.finalize(), ConfigError);
  }

  TEST_CASE("initialization") {
    const NetworkConfig net = network(2, 4);
    const DualState s = init_dual(net, InitMode::kFloor);
    CHECK(s.mu == doctest::Approx(0.5));
    for (double l : s.lambda.data()) CHECK(l == 0.0);

    const DualState u = init_dual(net, InitMode::kUniformCap, 0.3);
    CHECK(u.lambda(1, 2) == doctest::Approx(net.delta_cap(1) / 4));

    CHECK_THROWS_AS(init_dual(net, InitMode::kFloor, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(init_dual(net, InitMode::kFloor, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(init_dual(net, InitMode::kFloor, -0.1), std::invalid_argument);

    Matrix custom(2, 4, 0.0);
    custom(0, 0) = net.delta_cap(0) + 1.0;
    CHECK_THROWS_AS(init_dual(net, InitMode::kCustom, 0.3, &custom), std::invalid_argument);
    custom(0, 0) = -1.0;
    CHECK_THROWS_AS(init_dual(net, InitMode::kCustom, 0.3, &custom), std::invalid_argument);
    custom(0, 0) = 1.0;
    CHECK(init_dual(net, InitMode::kCustom, 0.3, &custom).lambda(0, 0) == 1.0);
    Matrix wrong(1, 4);
    CHECK_THROWS_AS(init_dual(net, InitMode::kCustom, 0.3, &wrong), std::invalid_argument);
    CHECK_THROWS_AS(init_dual(net, InitMode::kCustom, 0.3, nullptr), std::invalid_argument);

    // delta / F always clears the floor.
    const NetworkConfig high =
        network(1, 1000, 1, 1, Penalty::linear_quadratic(5.0), Penalty::linear_quadratic(5.0));
    CHECK(init_dual(high, InitMode::kUniformCap, 0.5).lambda(0, 0) >= 5.0);
  }

  TEST_CASE("primal step") {
    const NetworkConfig net = network(1, 2, 2, 100);
    DualState s = init_dual(net, InitMode::kFloor);
    AnticipatedFlows z = primal_step(s, net);
    for (double v : z.x.data()) CHECK(v == 0.0);

    s.lambda(0, 0) = 3;
    s.lambda(0, 1) = 1;
    const AnticipatedFlows f = primal_step(s, net);
    CHECK(f.x(0, 0) == doctest::Approx(2.0));
    CHECK(f.x(0, 1) == doctest::Approx(0.0));
    CHECK(f.y(0, 0) == doctest::Approx(0.3));
    CHECK(f.y(0, 1) == doctest::Approx(0.1));

    const NetworkConfig wide = network(1, 3, 1000, 1000, Penalty::quadratic(2.0));
    DualState e = init_dual(wide, InitMode::kFloor);
    e.lambda.fill(4.0);
    const AnticipatedFlows g = primal_step(e, wide);
    for (std::size_t k = 0; k < 3; ++k) CHECK(g.x(0, k) == doctest::Approx(2.0));
  }

  TEST_CASE("dual step") {
    const NetworkConfig net = network(1, 1);
    DualState s = init_dual(net, InitMode::kFloor, 0.5);
    s.lambda(0, 0) = 5;
    AnticipatedFlows f{Matrix(1, 1, 2.0), Matrix(1, 1, 1.0)};
    const DualState n = dual_step(s, f, Matrix(1, 1, 1.0));
    CHECK(n.lambda(0, 0) == doctest::Approx(4.0));
    CHECK(n.t == 1);
    CHECK(s.t == 0);

    const DualState same = dual_step(s, f, Matrix(1, 1, 3.0));
    CHECK(same.lambda(0, 0) == 5.0);

    CHECK_THROWS_AS(dual_step(s, f, Matrix(2, 1)), std::invalid_argument);
  }

  TEST_CASE("zero demand keeps zero prices") {
    const NetworkConfig net = network(2, 5);
    DualState s = init_dual(net, InitMode::kFloor);
    for (int t = 0; t < 50; ++t) apply_dual_step(s, primal_step(s, net), Matrix(2, 5));
    for (double l : s.lambda.data()) CHECK(l == 0.0);
  }

  TEST_CASE("raising one demand moves only that price") {
    const NetworkConfig net = network(2, 3);
    DualState s = init_dual(net, InitMode::kUniformCap, 0.2);
    const AnticipatedFlows f = primal_step(s, net);
    Matrix d(2, 3, 0.5);
    const DualState base = dual_step(s, f, d);
    d(1, 2) += 0.25;
    const DualState up = dual_step(s, f, d);
    for (std::size_t i = 0; i < 2; ++i) {
      for (std::size_t k = 0; k < 3; ++k) {
        if (i == 1 && k == 2) {
          CHECK(up.lambda(i, k) > base.lambda(i, k));
        } else {
          CHECK(up.lambda(i, k) == base.lambda(i, k));
        }
      }
    }
  }

  TEST_CASE("bound breaches are reported, not corrected") {
    const NetworkConfig net = network(1, 2, 1, 1);
    DualState s = init_dual(net, InitMode::kFloor, 0.5);
    std::vector<BoundViolation> diag;
    // Demand far above A1 drives the price sum past delta.
    for (int t = 0; t < 200; ++t) apply_dual_step(s, primal_step(s, net), Matrix(1, 2, 50.0), &diag);
    CHECK_FALSE(a1_feasible(net, Matrix(1, 2, 50.0))[0]);
    REQUIRE_FALSE(diag.empty());
    CHECK(diag.front().kind == BoundViolation::Kind::kAboveDelta);
    CHECK(s.lambda(0, 0) + s.lambda(0, 1) > net.delta_cap(0));
  }

  TEST_CASE("kkt holds at every primal step and bounds persist") {
    const NetworkConfig net = network(2, 20);
    DualState s = init_dual(net, InitMode::kFloor);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 0.9);
    const double tol = 1e-10;
    for (int t = 0; t < 500; ++t) {
      Matrix d(2, 20);
      for (double& v : d.data()) v = u(rng);
      const AnticipatedFlows f = primal_step(s, net, tol);
      for (std::size_t i = 0; i < 2; ++i) {
        SubproblemInstance xi{{s.lambda.row(i).begin(), s.lambda.row(i).end()}, 10, net.caches[i].chi};
        SubproblemSolution xs{{f.x.row(i).begin(), f.x.row(i).end()}, 0, false};
        xs.multiplier = solve(xi, tol).multiplier;
        CHECK(verify_kkt(xi, xs) <= 1e-8);
      }
      apply_dual_step(s, f, d);
      for (std::size_t i = 0; i < 2; ++i) {
        double sum = 0;
        for (double l : s.lambda.row(i)) {
          CHECK(l >= s.phi_floor[i] - 1e-7);
          sum += l;
        }
        CHECK(sum <= s.delta_cap[i] + 1e-7);
      }
    }
  }

  TEST_CASE("telescoping identity and residual trace") {
    const NetworkConfig net = network(2, 6);
    DualState s = init_dual(net, InitMode::kUniformCap, 0.25);
    DualHistory h(s.lambda);
    CHECK_THROWS_AS(residual_trace(h), std::invalid_argument);
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    const Matrix start = s.lambda;
    for (int t = 0; t < 300; ++t) {
      Matrix d(2, 6);
      for (double& v : d.data()) v = u(rng);
      const AnticipatedFlows f = primal_step(s, net);
      apply_dual_step(s, f, d);
      h.record(f, d, s.lambda);
    }
    for (std::size_t k = 0; k < start.data().size(); ++k) {
      const double lhs = s.lambda.data()[k] - start.data()[k];
      const double rhs = -s.mu * h.residual_sum().data()[k];
      CHECK(lhs == doctest::Approx(rhs).epsilon(1e-9));
    }
    const ResidualTrace rt = residual_trace(h);
    CHECK(rt.steps == 300);
    CHECK(rt.max_average_residual >= rt.mean_average_residual);
    CHECK(rt.gradient_norm >= 0.0);
  }

  TEST_CASE("single step residual equals the step") {
    const NetworkConfig net = network(1, 2);
    DualState s = init_dual(net, InitMode::kUniformCap, 0.5);
    DualHistory h(s.lambda);
    AnticipatedFlows f{Matrix(1, 2, 1.0), Matrix(1, 2, 0.5)};
    Matrix d(1, 2);
    d(0, 0) = 3.0;
    d(0, 1) = 0.5;
    const Matrix before = s.lambda;
    apply_dual_step(s, f, d);
    h.record(f, d, s.lambda);
    const ResidualTrace rt = residual_trace(h);
    CHECK(rt.average_residual(0, 0) == doctest::Approx(1.5));
    CHECK(rt.average_residual(0, 1) == doctest::Approx(1.0));
    CHECK(before(0, 0) - s.lambda(0, 0) == doctest::Approx(-0.5 * 1.5));
  }

  TEST_CASE("satisfied demand leaves zero residual") {
    const NetworkConfig net = network(1, 3);
    DualState s = init_dual(net, InitMode::kUniformCap, 0.5);
    DualHistory h(s.lambda);
    for (int t = 0; t < 10; ++t) {
      const AnticipatedFlows f = primal_step(s, net);
      Matrix d(1, 3);
      for (std::size_t k = 0; k < 3; ++k) d(0, k) = f.x(0, k) + f.y(0, k);
      apply_dual_step(s, f, d);
      h.record(f, d, s.lambda);
    }
    const ResidualTrace rt = residual_trace(h);
    CHECK(rt.max_average_residual == 0.0);
    CHECK(rt.gradient_norm == 0.0);
  }
}
