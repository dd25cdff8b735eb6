#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "cdnsim/penalty.hpp"
#include "cdnsim/types.hpp"

using namespace cdnsim;

namespace {

std::vector<Penalty> samples() {
  return {Penalty::quadratic(1.0), Penalty::quadratic(2.5, 0.7), Penalty::linear_quadratic(2.0),
          Penalty::kleinrock(10.0).with_domain_max(8.0), Penalty::mm1(1.0, 0.5, 10.0, 8.0).with_domain_max(12.0)};
}

double fd_deriv(const Penalty& h, double x, double eps = 1e-6) {
  return (h.eval(x + eps) - h.eval(x - eps)) / (2 * eps);
}

double fd_second(const Penalty& h, double x, double eps = 1e-4) {
  return (h.deriv(x + eps) - h.deriv(x - eps)) / (2 * eps);
}

}  // namespace

TEST_SUITE("penalty") {
  TEST_CASE("eval at known points") {
    CHECK(Penalty::quadratic(1.0).eval(4.0) == doctest::Approx(8.0));
    CHECK(Penalty::kleinrock(10.0).eval(5.0) == doctest::Approx(1.0));
    CHECK(Penalty::quadratic(3.0, 0.25).eval(0.0) == 0.25);
    CHECK(Penalty::linear_quadratic(2.0).eval(0.0) == 0.0);
    CHECK(Penalty::kleinrock(4.0).eval(0.0) == 0.0);
    CHECK(Penalty::mm1(2.0, 1.5, 10.0, 9.0).eval(0.0) == 1.5);
  }

  TEST_CASE("derivative at known points") {
    CHECK(Penalty::quadratic(1.0).deriv(3.0) == doctest::Approx(3.0));
    CHECK(Penalty::linear_quadratic(2.0).deriv(0.0) == 2.0);
    const Penalty k = Penalty::kleinrock(10.0);
    CHECK(k.deriv(5.0) == doctest::Approx(0.4));
    CHECK(std::abs(fd_deriv(k, 5.0) - 0.4) < 1e-6);
  }

  TEST_CASE("inverse derivative") {
    CHECK(Penalty::quadratic(2.0).inv_deriv(6.0) == doctest::Approx(3.0));
    CHECK(Penalty::linear_quadratic(1.0).inv_deriv(1.0) == 0.0);
    const Penalty k = Penalty::kleinrock(10.0);
    // Reference by plain bisection on the derivative.
    double lo = 0, hi = 10;
    for (int i = 0; i < 200; ++i) {
      const double mid = 0.5 * (lo + hi);
      (k.deriv(mid) < 0.4 ? lo : hi) = mid;
    }
    CHECK(std::abs(k.inv_deriv(0.4) - lo) < 1e-9);
    CHECK(std::abs(k.inv_deriv(0.4) - 5.0) < 1e-9);
    CHECK_THROWS_AS(Penalty::linear_quadratic(3.0).inv_deriv(1.0), std::domain_error);
    CHECK_THROWS_AS(Penalty::kleinrock(10.0).inv_deriv(0.05), std::domain_error);
  }

  TEST_CASE("mm1 inverse past the clamp uses the quadratic continuation") {
    const Penalty h = Penalty::mm1(1.0, 0.0, 10.0, 8.0);
    const double g = h.deriv(11.0);
    CHECK(h.inv_deriv(g) == doctest::Approx(11.0).epsilon(1e-12));
    CHECK(h.second_deriv(11.0) == h.second_deriv(8.0));
  }

  TEST_CASE("domain errors name the bound") {
    CHECK_THROWS_AS(Penalty::quadratic(1.0).eval(-1.0), std::domain_error);
    CHECK_THROWS_AS(Penalty::kleinrock(10.0).eval(10.0), std::domain_error);
    try {
      Penalty::kleinrock(10.0).deriv(12.0);
      FAIL("no throw");
    } catch (const std::domain_error& e) {
      CHECK(std::string(e.what()).find("cap=10") != std::string::npos);
    }
  }

  TEST_CASE("constants") {
    const PenaltyConstants q = Penalty::quadratic(1.0).constants();
    CHECK(q.m == 1.0);
    CHECK(q.L == 1.0);
    CHECK(q.d0 == 0.0);
    const PenaltyConstants lq = Penalty::linear_quadratic(3.0).constants();
    CHECK(lq.m == 1.0);
    CHECK(lq.L == 1.0);
    CHECK(lq.d0 == 3.0);

    // h'' = 2 cap / (cap - x)^3 at the two ends of [0, 5].
    const Penalty k = Penalty::kleinrock(10.0).with_domain_max(5.0);
    const PenaltyConstants kc = k.constants();
    CHECK(kc.m == doctest::Approx(0.02));
    CHECK(kc.L == doctest::Approx(0.16));
    CHECK(kc.m == doctest::Approx(fd_second(k, 1e-3)).epsilon(1e-3));
    CHECK(kc.L == doctest::Approx(fd_second(k, 5.0)).epsilon(1e-6));
    CHECK(kc.d0 == doctest::Approx(0.1));

    CHECK_THROWS_AS(Penalty::kleinrock(10.0).constants(), std::invalid_argument);
    CHECK_THROWS_AS(Penalty::kleinrock(10.0).with_domain_max(10.0).constants(), std::invalid_argument);
  }

  TEST_CASE("finite differences match the derivative") {
    std::mt19937_64 rng(1);
    for (const Penalty& h : samples()) {
      const double top = h.has_domain_max() ? h.domain_max() : 10.0;
      std::uniform_real_distribution<double> pick(0.01, top - 0.01);
      for (int i = 0; i < 200; ++i) {
        const double x = pick(rng);
        CHECK(std::abs(fd_deriv(h, x) - h.deriv(x)) < 1e-5 * std::max(1.0, std::abs(h.deriv(x))));
      }
    }
  }

  TEST_CASE("monotone derivative, sandwich bounds and round trip") {
    std::mt19937_64 rng(2);
    for (Penalty h : samples()) {
      if (!h.has_domain_max()) h = h.with_domain_max(10.0);
      const PenaltyConstants c = h.constants();
      CHECK(c.m > 0.0);
      CHECK(c.m <= c.L);
      std::uniform_real_distribution<double> pick(0.0, h.domain_max());
      for (int i = 0; i < 500; ++i) {
        double x1 = pick(rng), x2 = pick(rng);
        if (x1 < x2) std::swap(x1, x2);
        if (x1 == x2) continue;
        const double dd = h.deriv(x1) - h.deriv(x2);
        CHECK(dd > 0.0);
        CHECK(c.m * (x1 - x2) <= dd + 1e-9);
        CHECK(dd <= c.L * (x1 - x2) + 1e-9);
        CHECK(std::abs(h.inv_deriv(h.deriv(x1)) - x1) < 1e-8);
      }
    }
  }

  TEST_CASE("parse and print") {
    const Penalty q = Penalty::parse("quadratic a=2 b=0.5");
    CHECK(q.family() == PenaltyFamily::kQuadratic);
    CHECK(q.eval(2.0) == doctest::Approx(4.5));
    CHECK(Penalty::parse("quadratic a=3").eval(0.0) == 0.0);
    CHECK(Penalty::parse("linquad w=2").deriv(1.0) == 3.0);
    const Penalty k = Penalty::parse("kleinrock cap=10 dmax=5");
    CHECK(k.domain_max() == 5.0);
    CHECK(Penalty::parse(k.to_string()).to_string() == k.to_string());
    const Penalty m = Penalty::parse("mm1 k=1 k0=0 cap=10 xmax=9");
    CHECK(m.family() == PenaltyFamily::kMM1Queue);
    CHECK(Penalty::parse(m.to_string()).eval(3.0) == m.eval(3.0));

    CHECK_THROWS_AS(Penalty::parse("cubic a=1"), ConfigError);
    CHECK_THROWS_AS(Penalty::parse("quadratic"), ConfigError);
    CHECK_THROWS_AS(Penalty::parse("quadratic a=x"), ConfigError);
    CHECK_THROWS_AS(Penalty::parse("quadratic a=1 c=2"), ConfigError);
    CHECK_THROWS_AS(Penalty::parse("quadratic a=-1"), ConfigError);
    CHECK_THROWS_AS(Penalty::parse("mm1 k=1 k0=0 cap=10 xmax=10"), ConfigError);
    CHECK_THROWS_AS(Penalty::parse(""), ConfigError);
  }
}
