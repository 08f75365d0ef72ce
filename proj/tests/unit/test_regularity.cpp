#include <cmath>
#include <numbers>

#include "doctest.h"
#include "treecascade/cascade.hpp"
#include "treecascade/regularity.hpp"
#include "treecascade/verify.hpp"

using namespace treecascade;

namespace {
constexpr double kLn2 = std::numbers::ln2;
}

TEST_CASE("pressure of the uniform measure") {
  const auto theta = PressureModel::theta();
  CHECK(pressure(theta, 2.0) == -kLn2);
  for (double h : {0.0, 0.3, 1.0, 2.5}) CHECK(pressure(theta, h) == (1 - h) * kLn2);
  CHECK_THROWS(pressure(theta, -0.1));
}

TEST_CASE("pressure regression on finite flows") {
  // Regression on the finite uniform flow recovers the analytic value.
  const auto fitted = pressure_fit(uniform_flow(12), 1.7);
  CHECK(fitted.value == doctest::Approx((1 - 1.7) * kLn2).epsilon(1e-12));
  CHECK_FALSE(fitted.analytic);

  NoiseStream rng(2);
  const auto model = PressureModel::from_flow(random_positive_flow(12, rng));
  CHECK(std::abs(model(1.0)) <= 1e-12);

  const auto ray = PressureModel::from_flow(point_mass_flow({10, 0b1011001110}));
  for (double h : {0.0, 0.5, 1.0, 2.0}) CHECK(std::abs(ray(h)) <= 1e-12);
  CHECK(std::abs(lifetime(ray)) <= 1e-9);

  CHECK_THROWS(pressure_fit(uniform_flow(3), 1.0));
}

TEST_CASE("alpha") {
  const auto theta = PressureModel::theta();
  const auto g = WeightSpec::gaussian();
  for (double t : {0.2, 1.0})
    for (double h : {0.5, 1.5, 3.0})
      CHECK(alpha(theta, g, t, h) ==
            doctest::Approx((1 - h) * kLn2 + t * h * (h - 1) / 2).epsilon(1e-14));
  CHECK(alpha(theta, WeightSpec::compound_poisson(), 0.8, 1.0) == doctest::Approx(0.0));
  CHECK(std::abs(alpha_right_derivative_at_one(theta, g, 2 * kLn2)) <= 1e-12);
}

TEST_CASE("critical exponent") {
  const auto theta = PressureModel::theta();
  const auto g = WeightSpec::gaussian();
  for (double t : {0.3, 0.7, 1.2}) {
    const auto hc = critical_h(theta, g, t);
    REQUIRE_FALSE(hc.infinite);
    CHECK(std::abs(hc.value - 2 * kLn2 / t) <= 1e-9);
  }
  CHECK(critical_h(theta, g, kLn2).value == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(critical_h(theta, g, 0.0).infinite);
  CHECK(critical_h(theta, g, 1.5).value == 1.0);
  // h_t decreases in t.
  double prev = INFINITY;
  for (double t = 0.1; t < 1.3; t += 0.1) {
    const double h = critical_h(theta, g, t).value;
    CHECK(h < prev);
    prev = h;
  }
}

TEST_CASE("classification") {
  const auto theta = PressureModel::theta();
  const auto g = WeightSpec::gaussian();
  CHECK(classify_regularity(theta, g, 1.0) == Regularity::Regular);
  CHECK(classify_regularity(theta, g, 2.0) == Regularity::Irregular);
  CHECK(classify_regularity(theta, g, 2 * kLn2) == Regularity::Boundary);
  CHECK(classify_regularity(theta, g, 2 * kLn2 - 1e-3) == Regularity::Regular);
  CHECK(classify_regularity(theta, g, 2 * kLn2 + 1e-3) == Regularity::Irregular);
  // Regularity at T is inherited by earlier times.
  for (double t = 0.0; t < 1.0; t += 0.05) CHECK(classify_regularity(theta, g, t) == Regularity::Regular);
}

TEST_CASE("lifetime") {
  CHECK(std::abs(lifetime(PressureModel::theta()) - 2 * kLn2) <= 1e-12);
  NoiseStream rng(14);
  for (int i = 0; i < 5; ++i) {
    const auto m = PressureModel::from_flow(random_positive_flow(12, rng));
    CHECK(lifetime(m) <= 2 * kLn2 + m.derivative_tolerance());
  }
}

TEST_CASE("submeasures inherit regularity") {
  const auto g = WeightSpec::gaussian();
  const auto path = simulate_path(uniform_flow(14), g, {0.0, 0.4}, 14, 8);
  const Flow& f = path.snapshots.back();
  const auto whole = PressureModel::from_flow(f);
  for (const auto& v : {VertexId::make(1, 0), VertexId::make(2, 3), VertexId::make(3, 5)}) {
    const auto sub = PressureModel::from_flow(f.restricted(v));
    CHECK(sub.right_derivative_at_one() <=
          whole.right_derivative_at_one() + whole.derivative_tolerance() + sub.derivative_tolerance());
  }
}

TEST_CASE("regularity propagates to the evolved measure") {
  const auto g = WeightSpec::gaussian();
  const double t = 0.5;
  int ok = 0;
  const int replicas = 8;
  for (int r = 0; r < replicas; ++r) {
    const auto path = simulate_path(uniform_flow(16), g, {0.0, t}, 16, 100 + r,
                                    {{1}, false});
    bool good = true;
    for (double h : {1.1, 1.3, 1.5}) {
      const auto est = pressure_fit(path.snapshots.back(), h);
      good = good && est.value <= (1 - h) * kLn2 + std::log(moment(g, t, h)) + 3 * est.slope_se;
    }
    ok += good;
  }
  CHECK(ok >= replicas * 95 / 100);
}

TEST_CASE("alpha is convex in h") {
  NoiseStream rng(3);
  const auto flow = PressureModel::from_flow(random_positive_flow(10, rng));
  for (const auto& m : {PressureModel::theta(), flow})
    for (double h = 0.2; h < 3.0; h += 0.1) {
      const double d2 = alpha(m, WeightSpec::gaussian(), 0.6, h - 0.1) -
                        2 * alpha(m, WeightSpec::gaussian(), 0.6, h) +
                        alpha(m, WeightSpec::gaussian(), 0.6, h + 0.1);
      CHECK(d2 >= -1e-12);
    }
}

TEST_CASE("regularity report json") {
  const auto rep = regularity_report(PressureModel::theta(), WeightSpec::gaussian(), 0.0,
                                     {0.0, 1.0, 2.0});
  const auto j = to_json(rep);
  CHECK(j["h_t"] == "inf");
  CHECK(j["classification"] == "Regular");
  CHECK(j["pressure_samples"].size() == 3);
  CHECK(rep.alpha_samples[1].second == 0.0);
}
