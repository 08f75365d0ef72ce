#include <cmath>

#include "doctest.h"
#include "treecascade/cascade.hpp"
#include "treecascade/transport.hpp"
#include "treecascade/verify.hpp"

using namespace treecascade;

TEST_CASE("exact distance on hand examples") {
  NoiseStream rng(1);
  const Flow f = random_positive_flow(6, rng);
  CHECK(wasserstein_exact(f, f).value == 0.0);
  for (int n : {1, 3, 8}) {
    const Flow l = point_mass_flow({n, 0});
    const Flow r = point_mass_flow({n, (std::uint64_t{1} << n) - 1});
    const auto res = wasserstein_exact(l, r);
    CHECK(res.value == doctest::Approx(1 - std::ldexp(1.0, -n)).epsilon(1e-15));
    CHECK(res.truncation_bound == std::ldexp(1.0, -n));
  }
  CHECK_THROWS(wasserstein_exact(uniform_flow(2), uniform_flow(3)));
  CHECK_THROWS(wasserstein_exact(uniform_flow(2), Flow::from_levels({{2}, {1, 1}})));
}

TEST_CASE("depth-one transport at finite resolution") {
  const Flow mu = Flow::from_levels({{1.0}, {1.0, 0.0}});
  const Flow nu = Flow::from_levels({{1.0}, {0.0, 1.0}});
  const auto lp = wasserstein_lp_oracle(mu, nu);
  const auto ex = wasserstein_exact(mu, nu);
  // Boundary distance 1, seen through depth-1 cylinders as 1 - 2^(-1).
  CHECK(lp.value == doctest::Approx(0.5));
  CHECK(ex.value == doctest::Approx(0.5));
  CHECK(lp.value + lp.truncation_bound == doctest::Approx(1.0));
}

TEST_CASE("min-cost transport solver") {
  // Two suppliers, two consumers; optimum sends crosswise.
  CHECK(min_cost_transport({0.5, 0.5}, {0.5, 0.5}, {1, 0, 0, 1}) == doctest::Approx(0.0));
  CHECK(min_cost_transport({1.0, 0.0}, {0.3, 0.7}, {0, 2, 5, 1}) == doctest::Approx(1.4));
  // By hand: 0.3 along the cheap diagonal, 0.2 from the first row to the
  // second column, the last row's 0.5 to the first column.
  CHECK(min_cost_transport({0.2, 0.3, 0.5}, {0.5, 0.5, 0.0}, {1, 2, 9, 4, 1, 9, 3, 5, 9}) ==
        doctest::Approx(2.2).epsilon(1e-12));
    for (double a : {0.1, 0.6})
    for (double b : {0.25, 0.9}) {
      const std::vector<double> s{a, 1 - a}, d{b, 1 - b}, c{0.3, 1.1, 0.7, 0.2};
      // Linear in the free entry, so the optimum sits at an end of its range.
      double best = INFINITY;
      for (double x : {std::max(0.0, a + b - 1), std::min(a, b)}) {
        const double cost = c[0] * x + c[1] * (a - x) + c[2] * (b - x) + c[3] * (1 - a - b + x);
        best = std::min(best, cost);
      }
      CHECK(min_cost_transport(s, d, c) == doctest::Approx(best).epsilon(1e-9));
    }
}

TEST_CASE("exact distance equals the LP oracle") {
  NoiseStream rng(123);
  for (int depth = 2; depth <= 6; ++depth)
    for (int i = 0; i < 20; ++i) {
      const Flow mu = random_positive_flow(depth, rng);
      const Flow nu = random_positive_flow(depth, rng);
      const double ex = wasserstein_exact(mu, nu).value;
      CHECK(std::abs(ex - wasserstein_lp_oracle(mu, nu).value) <= 1e-9);
      CHECK(coupling_upper_bound(mu, nu).value >= ex - 1e-12);
      CHECK(ex >= 0.5 * std::abs(mu.masses()[1] - nu.masses()[1]) - 1e-15);
    }
  const Flow quarter = uniform_flow(2);
  const Flow corner = point_mass_flow({2, 0});
  CHECK(std::abs(wasserstein_exact(quarter, corner).value -
                 wasserstein_lp_oracle(quarter, corner).value) <= 1e-9);
  CHECK_THROWS(wasserstein_lp_oracle(uniform_flow(9), uniform_flow(9)));
}

TEST_CASE("metric axioms") {
  NoiseStream rng(5);
  for (int i = 0; i < 30; ++i) {
    const Flow a = random_positive_flow(7, rng), b = random_positive_flow(7, rng),
               c = random_positive_flow(7, rng);
    CHECK(wasserstein_exact(a, b).value == wasserstein_exact(b, a).value);
    CHECK(wasserstein_exact(a, b).value <=
          wasserstein_exact(a, c).value + wasserstein_exact(c, b).value + 1e-12);
  }
}

TEST_CASE("coupling bound") {
  const Flow mu = Flow::from_levels({{1.0}, {0.3, 0.7}});
  const Flow nu = Flow::from_levels({{1.0}, {0.8, 0.2}});
  CHECK(coupling_upper_bound(mu, nu).value == doctest::Approx(0.5));
  CHECK(coupling_upper_bound(mu, mu).value == 0.0);
  CHECK_THROWS_AS(coupling_upper_bound(point_mass_flow({2, 0}), uniform_flow(2)),
                  std::domain_error);
}

TEST_CASE("Hoelder fit on synthetic samples recovers the slope") {
  std::vector<LagDistance> samples;
  for (std::size_t r = 0; r < 4; ++r)
    for (int k = 0; k < 6; ++k) {
      const double lag = std::ldexp(1.0, -10 + k);
      samples.push_back({std::size_t{1} << k, lag, r, 0.7 * std::pow(lag, 0.37) * (1 + 0.01 * r)});
    }
  const auto fit = holder_fit_from_samples(samples, 4);
  CHECK(fit.slope == doctest::Approx(0.37).epsilon(1e-9));
  CHECK_FALSE(fit.degenerate);
}

TEST_CASE("Hoelder fit on a constant path is degenerate") {
  const auto path = simulate_path(uniform_flow(6), WeightSpec::gaussian(),
                                  std::vector<double>(1, 0.0), 6, 1);
  CHECK_THROWS(lag_distances(path));
  // Weights identically one across a grid: a frozen path.
  CascadePath frozen;
  frozen.depth = 6;
  frozen.grid = uniform_grid(0.5, 1.0 / 64);
  for (std::size_t k = 0; k < frozen.grid.size(); ++k) {
    frozen.snapshot_steps.push_back(k);
    frozen.snapshots.push_back(uniform_flow(6));
  }
  const auto fit = holder_exponent(frozen);
  CHECK(fit.degenerate);
  for (const auto& s : fit.samples) CHECK(s.distance == 0.0);
}

TEST_CASE("Hoelder slope is near one half and stable under grid refinement") {
  auto slope = [](int step_log2) {
    std::vector<CascadePath> paths;
    for (std::uint64_t r = 0; r < 6; ++r)
      paths.push_back(simulate_path(uniform_flow(10), WeightSpec::gaussian(),
                                    uniform_grid(0.5, std::ldexp(1.0, -step_log2)), 10, r,
                                    {{}, false}));
    return holder_exponent(paths, 32).slope;
  };
  const double coarse = slope(9), fine = slope(10);
  CHECK(coarse == doctest::Approx(0.5).epsilon(0.2));
  CHECK(std::abs(coarse - fine) < 0.05);
}
