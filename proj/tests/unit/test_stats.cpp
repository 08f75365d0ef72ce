#include <cmath>

#include "doctest.h"
#include "treecascade/stats.hpp"

using namespace treecascade::stats;

TEST_CASE("running stats and summaries") {
  const std::vector<double> xs{1, 2, 3, 4, 10};
  const auto s = summarize(xs);
  CHECK(s.mean() == 4.0);
  CHECK(s.variance() == doctest::Approx(12.5));
  CHECK(median(xs) == 3.0);
  CHECK(median({4, 1, 3, 2}) == 2.5);
  CHECK_THROWS(median({}));
}

TEST_CASE("linear fit") {
  const std::vector<double> x{0, 1, 2, 3, 4};
  const std::vector<double> y{1.1, 2.9, 5.05, 7.0, 8.95};
  const auto f = linear_fit(x, y);
  CHECK(f.slope == doctest::Approx(1.98));
  CHECK(f.intercept == doctest::Approx(1.04));
  CHECK(f.r2 > 0.999);
  CHECK_THROWS(linear_fit(std::vector<double>{1, 1}, std::vector<double>{1, 2}));
}

TEST_CASE("Kolmogorov tail and two-sample KS") {
  // Reference values from scipy.special.kolmogorov.
  CHECK(kolmogorov_tail(1.0) == doctest::Approx(0.26999967167735456).epsilon(1e-12));
  CHECK(kolmogorov_tail(0.5) == doctest::Approx(0.9639452436648751).epsilon(1e-12));
  CHECK(kolmogorov_tail(1.5) == doctest::Approx(0.022217962616525127).epsilon(1e-12));

  const auto r = ks_two_sample({0.1, 0.4, 0.7, 1.2, 1.5, 2.0, 2.2, 3.1},
                               {0.3, 0.5, 0.9, 1.1, 2.5, 2.8, 3.3, 3.9, 4.2, 5.0});
  CHECK(r.statistic == doctest::Approx(0.475));
  CHECK(r.p_value == doctest::Approx(0.1912346520472268).epsilon(1e-10));
  CHECK(ks_two_sample({1, 2, 3}, {1, 2, 3}).statistic == 0.0);
  CHECK(ks_critical_value(10000, 10000, 0.01) == doctest::Approx(0.022978572399443817).epsilon(1e-9));
}
