#include <cmath>
#include <numbers>

#include "doctest.h"
#include "treecascade/stats.hpp"
#include "treecascade/weight_process.hpp"

using namespace treecascade;

namespace {

// E[f(W_t)] for Gaussian weights by composite Simpson over the normal density.
template <class F>
double gaussian_expectation(double t, F f) {
  const int n = 4000;
  const double a = -12.0, b = 12.0, h = (b - a) / n;
  double acc = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double z = a + i * h;
    const double w = std::exp(std::sqrt(t) * z - t / 2);
    const double density = std::exp(-z * z / 2) / std::sqrt(2 * std::numbers::pi);
    const double c = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
    acc += c * f(w) * density;
  }
  return acc * h / 3;
}

// E[W_t^h] for compound Poisson weights by summing over the jump count.
double poisson_moment_series(const WeightSpec& s, double t, double h) {
  const double comp = s.rate * t * (std::exp(s.jump_mean + s.jump_sd * s.jump_sd / 2) - 1);
  double total = 0.0, pk = std::exp(-s.rate * t);
  for (int k = 0; k < 200; ++k) {
    if (k > 0) pk *= s.rate * t / k;
    total += pk * std::exp(k * (h * s.jump_mean + h * h * s.jump_sd * s.jump_sd / 2));
  }
  return total * std::exp(-h * comp);
}

}  // namespace

TEST_CASE("Gaussian moments against quadrature") {
  const auto g = WeightSpec::gaussian();
  for (double t : {0.1, 0.5, 1.0, 2.0})
    for (double h : {0.0, 0.5, 1.0, 1.5, 2.0, 3.0})
      CHECK(moment(g, t, h) ==
            doctest::Approx(gaussian_expectation(t, [h](double w) { return std::pow(w, h); }))
                .epsilon(1e-9));
  CHECK(moment(g, 1.0, 2.0) == doctest::Approx(std::exp(1.0)).epsilon(1e-14));
  CHECK(moment(g, 0.0, 7.3) == 1.0);
  CHECK(std::abs(moment(g, 3.7, 1.0) - 1.0) <= 1e-12);
  CHECK_THROWS_AS(moment(g, 1.0, INFINITY), std::domain_error);
}

TEST_CASE("compound Poisson moments against the jump-count series") {
  const auto cp = WeightSpec::compound_poisson(1.5, 0.1, 0.4);
  for (double t : {0.2, 1.0, 3.0})
    for (double h : {0.5, 1.0, 2.0, 2.5}) {
      CHECK(moment(cp, t, h) == doctest::Approx(poisson_moment_series(cp, t, h)).epsilon(1e-12));
    }
  CHECK(std::abs(moment(cp, 2.0, 1.0) - 1.0) <= 1e-12);
}

TEST_CASE("uncompensated Gaussian weights lose the unit mean") {
  const auto u = WeightSpec::gaussian_uncompensated();
  CHECK(moment(u, 0.5, 1.0) == doctest::Approx(std::exp(0.25)));
}

TEST_CASE("semigroup property of moments") {
  for (const auto& spec : {WeightSpec::gaussian(), WeightSpec::compound_poisson()})
    for (double h : {0.5, 1.7, 2.2})
      CHECK(moment(spec, 0.7, h) ==
            doctest::Approx(moment(spec, 0.3, h) * increment_moment(spec, 0.3, 0.4, h))
                .epsilon(1e-14));
}

TEST_CASE("E[W log W]") {
  const auto g = WeightSpec::gaussian();
  CHECK(w_log_w(g, 0.0) == 0.0);
  CHECK(w_log_w(g, 1.0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(w_log_w(g, 2 * std::numbers::ln2) == doctest::Approx(std::numbers::ln2).epsilon(1e-14));
  for (double t : {0.3, 1.1})
    CHECK(w_log_w(g, t) ==
          doctest::Approx(gaussian_expectation(t, [](double w) { return w * std::log(w); }))
              .epsilon(1e-9));
  const auto cp = WeightSpec::compound_poisson();
  for (double t : {0.0, 0.1, 1.0, 5.0}) CHECK(w_log_w(cp, t) >= 0.0);
  // Derivative of the series at h = 1 as an independent check.
  const double eps = 1e-5;
  const double numeric = (poisson_moment_series(cp, 1.0, 1 + eps) -
                          poisson_moment_series(cp, 1.0, 1 - eps)) / (2 * eps);
  CHECK(w_log_w(cp, 1.0) == doctest::Approx(numeric).epsilon(1e-7));
}

TEST_CASE("log-moment derivative matches finite differences") {
  for (const auto& spec : {WeightSpec::gaussian(), WeightSpec::compound_poisson()})
    for (double h : {0.5, 1.0, 2.0}) {
      const double e = 1e-6;
      const double fd = (std::log(moment(spec, 0.8, h + e)) - std::log(moment(spec, 0.8, h - e))) / (2 * e);
      CHECK(log_moment_derivative(spec, 0.8, h) == doctest::Approx(fd).epsilon(1e-7));
    }
}

TEST_CASE("sampled increments") {
  const auto g = WeightSpec::gaussian();
  const VertexNoiseKey key{7, VertexId::make(3, 5), 11};
  CHECK(sample_increment(g, 0.0, 0.5, key) == sample_increment(g, 0.0, 0.5, key));
  CHECK(sample_increment(g, 0.0, 0.5, key) !=
        sample_increment(g, 0.0, 0.5, VertexNoiseKey{7, VertexId::make(3, 5), 12}));
  CHECK(sample_log_increment(g, 0.3, 0.0, key) == 0.0);

  const std::size_t n = 1000000;
  stats::RunningStats mean, second;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = sample_increment(g, 0.0, 0.5, {99, VertexId::root(), i});
    mean.add(w);
    second.add(w * w);
  }
  CHECK(std::abs(mean.mean() - 1.0) <= 4 * mean.standard_error());
  CHECK(std::abs(second.mean() - std::exp(0.5)) <= 4 * second.standard_error());
}

TEST_CASE("compound Poisson draws have the right moments") {
  const auto cp = WeightSpec::compound_poisson();
  const std::size_t n = 400000;
  for (double h : {0.5, 1.0, 2.0}) {
    stats::RunningStats st;
    for (std::size_t i = 0; i < n; ++i)
      st.add(std::pow(sample_increment(cp, 0.0, 1.0, {5, VertexId::root(), i}), h));
    CHECK(std::abs(st.mean() - moment(cp, 1.0, h)) <= 4 * st.standard_error());
  }
}

TEST_CASE("weight spec validation") {
  CHECK_THROWS(WeightSpec::compound_poisson(-1.0).validate());
  CHECK_THROWS(WeightSpec::compound_poisson(1.0, 0.0, -0.1).validate());
  CHECK_NOTHROW(WeightSpec::gaussian().validate());
}
