#include <cmath>
#include <numbers>

#include "doctest.h"
#include "treecascade/cascade.hpp"
#include "treecascade/kpz.hpp"

using namespace treecascade;

namespace {
constexpr double kLife = 2 * std::numbers::ln2;
}

TEST_CASE("phi") {
  const auto g = WeightSpec::gaussian();
  for (double t : {0.1, 0.9}) {
    CHECK(phi(g, t, 1.0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(phi(g, t, 0.0) == 0.0);
    CHECK(phi(WeightSpec::compound_poisson(), t, 1.0) == doctest::Approx(1.0).epsilon(1e-14));
  }
  CHECK(phi(g, kLife, 0.5) == doctest::Approx(0.75).epsilon(1e-14));
  for (double h = 0.0; h <= 1.0; h += 0.1) {
    const double e = 1e-6;
    const double lo = std::max(0.0, h - e), hi = std::min(1.0, h + e);
    CHECK(phi_derivative_gaussian(0.7, h) ==
          doctest::Approx((phi(g, 0.7, hi) - phi(g, 0.7, lo)) / (hi - lo)).epsilon(1e-6));
    CHECK(phi_derivative_gaussian(1.3, h) > 0.0);
  }
  CHECK_THROWS(phi(g, 0.5, 1.5));
}

TEST_CASE("closed form") {
  for (double d0 = 0.0; d0 <= 1.0; d0 += 0.125) CHECK(kpz_closed_form(d0, 0.0) == d0);
  CHECK(kpz_closed_form(0.75, kLife) == doctest::Approx(0.5).epsilon(1e-14));
  for (double d0 : {0.2, 0.6, 0.9})
    CHECK(kpz_closed_form(d0, kLife) == doctest::Approx(1 - std::sqrt(1 - d0)).epsilon(1e-13));
  const auto g = WeightSpec::gaussian();
  for (double t = 0.0; t < kLife; t += 0.1)
    for (double d0 = 0.0; d0 <= 1.0; d0 += 0.05)
      CHECK(std::abs(phi(g, t, kpz_closed_form(d0, t)) - d0) <= 1e-12);
}

TEST_CASE("ODE against the closed form") {
  for (int i = 1; i <= 9; ++i) {
    const double d0 = 0.1 * i;
    const auto path = kpz_ode_solve(d0, 0.99 * kLife, 1e-4);
    double sup = 0.0;
    for (std::size_t k = 0; k < path.times.size(); ++k) {
      sup = std::max(sup, std::abs(path.d[k] - kpz_closed_form(d0, path.times[k])));
      if (k > 0) CHECK(path.d[k] <= path.d[k - 1]);
    }
    CHECK(sup <= 1e-4);
  }
  const auto end = kpz_ode_solve(0.75, 0.99 * kLife, 1e-4);
  CHECK(std::abs(end.d.back() - kpz_closed_form(0.75, end.times.back())) <= 1e-4);
  CHECK(std::abs(kpz_ode_solve(0.75, kLife, 1e-4).d.back() - 0.5) <= 1e-4);
  for (double fixed : {0.0, 1.0})
    for (double d : kpz_ode_solve(fixed, 1.0, 0.01).d) CHECK(d == fixed);
  CHECK_THROWS(kpz_ode_solve(0.5, 0.1, 0.2));
  CHECK_THROWS(kpz_ode_solve(0.5, 2.0, 0.01));
  CHECK_THROWS(kpz_ode_solve(1.5, 1.0, 0.01));
}

TEST_CASE("rate at d = 1/2 does not depend on t") {
  for (double t : {0.0, 0.4, 1.3})
    CHECK(kpz_rate(t, 0.5) == doctest::Approx(-0.25 / kLife).epsilon(1e-15));
  CHECK_THROWS_AS(kpz_rate(kLife, 1.0), std::domain_error);
}

TEST_CASE("ray sets") {
  CHECK(parse_ray_set("EVEN_FREE") == RaySet::EvenFree);
  CHECK_THROWS(parse_ray_set("ODD"));
  CHECK(ray_set_contains(RaySet::EvenFree, 4, 0b1010));
  CHECK_FALSE(ray_set_contains(RaySet::EvenFree, 4, 0b0100));
  CHECK_FALSE(ray_set_contains(RaySet::EvenFree, 4, 0b0001));
  CHECK(ray_set_contains(RaySet::FullBoundary, 4, 0b1111));
}

TEST_CASE("box counting at t = 0") {
  std::vector<int> scales;
  for (int m = 5; m <= 14; ++m) scales.push_back(m);
  const auto even = box_dimension_estimate(uniform_flow(20), RaySet::EvenFree, scales);
  CHECK(even.estimate >= 0.45);
  CHECK(even.estimate <= 0.55);
  const auto full = box_dimension_estimate(uniform_flow(20), RaySet::FullBoundary, scales);
  CHECK(full.estimate >= 0.95);
  CHECK(full.estimate <= 1.0 + 1e-12);
  CHECK_THROWS(box_dimension_estimate(uniform_flow(8), RaySet::EvenFree, {2, 3}));
}

TEST_CASE("box counting after evolution") {
  std::vector<int> scales;
  for (int m = 5; m <= 14; ++m) scales.push_back(m);
  double total = 0.0;
  const int replicas = 3;
  for (int r = 0; r < replicas; ++r) {
    const auto p = simulate_path(uniform_flow(20), WeightSpec::gaussian(), {0.0, 0.5}, 20, 40 + r,
                                 {{1}, false});
    total += box_dimension_estimate(p.snapshots.back(), RaySet::EvenFree, scales).estimate;
  }
  CHECK(std::abs(total / replicas - kpz_closed_form(0.5, 0.5)) <= 0.1);
}
