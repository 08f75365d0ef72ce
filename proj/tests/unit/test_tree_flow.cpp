#include <cmath>
#include <sstream>

#include "doctest.h"
#include "treecascade/flow.hpp"
#include "treecascade/flow_io.hpp"
#include "treecascade/verify.hpp"

using namespace treecascade;

TEST_CASE("vertex ids follow heap order") {
  const auto v = VertexId::make(3, 0b010);
  CHECK(v.heap_index() == 7 + 2);
  CHECK(VertexId::from_heap_index(v.heap_index()) == v);
  CHECK(v.parent() == VertexId::make(2, 0b01));
  CHECK(v.left() == VertexId::make(4, 0b0100));
  CHECK(v.right() == VertexId::make(4, 0b0101));
  CHECK(v.global_id() == 0b1010);
  CHECK_THROWS_AS(VertexId::make(2, 4), std::invalid_argument);
  CHECK_THROWS_AS(VertexId::root().parent(), std::invalid_argument);
  for (std::size_t i = 0; i < 200; ++i) CHECK(VertexId::from_heap_index(i).heap_index() == i);
}

TEST_CASE("common ancestor depth") {
  const auto v = VertexId::make(5, 0b10110);
  CHECK(common_ancestor_depth(VertexId::root(), v) == 0);
  CHECK(common_ancestor_depth(v, v) == 5);
  CHECK(common_ancestor_depth(VertexId::make(3, 0b010), VertexId::make(3, 0b011)) == 2);
  CHECK(common_ancestor_depth(VertexId::make(1, 1), VertexId::make(4, 0b1101)) == 1);
}

TEST_CASE("ray distance") {
  CHECK(ray_distance({10, 77}, {10, 77}) == std::ldexp(1.0, -10));
  CHECK(ray_distance({3, 0b000}, {3, 0b100}) == 1.0);
  CHECK(ray_distance({4, 0b0110}, {4, 0b0111}) == 0.125);
  CHECK_THROWS_AS(ray_distance({3, 0}, {4, 0}), std::invalid_argument);
}

TEST_CASE("ray distance is an ultrametric") {
  const int n = 5;
  for (std::uint64_t a = 0; a < 32; ++a)
    for (std::uint64_t b = 0; b < 32; ++b)
      for (std::uint64_t c = 0; c < 32; ++c) {
        const double ab = ray_distance({n, a}, {n, b});
        REQUIRE(ab <= std::max(ray_distance({n, a}, {n, c}), ray_distance({n, c}, {n, b})));
        REQUIRE(ab == ray_distance({n, b}, {n, a}));
      }
}

TEST_CASE("uniform flow") {
  CHECK(uniform_flow(0).root_mass() == 1.0);
  const Flow f = uniform_flow(2);
  for (double m : f.level(2)) CHECK(m == 0.25);
  const Flow g = uniform_flow(12);
  for (int k = 0; k <= 12; ++k) {
    double s = 0.0;
    for (double m : g.level(k)) s += m;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
  }
  CHECK(validate_flow(uniform_flow(5)).valid());
}

TEST_CASE("validate_flow reports violations") {
  const Flow bad = Flow::from_levels({{1.0}, {0.7, 0.2}});
  auto report = validate_flow(bad);
  REQUIRE(report.violations.size() == 1);
  CHECK(report.violations[0].kind == FlowViolation::Kind::FlowCondition);
  CHECK(report.violations[0].vertex == VertexId::root());

  const Flow zero = Flow::from_levels({{1.0}, {1.0, 0.0}});
  report = validate_flow(zero);
  REQUIRE_FALSE(report.valid());
  CHECK(report.violations[0].kind == FlowViolation::Kind::NonPositive);
  CHECK(report.violations[0].vertex == VertexId::make(1, 1));
  CHECK(is_consistent_measure(zero));
}

TEST_CASE("normalize") {
  const Flow f = Flow::from_levels({{2.0}, {0.5, 1.5}});
  const Flow n = normalize(f);
  CHECK(n.root_mass() == 1.0);
  CHECK(n.masses()[1] == 0.25);
  CHECK(n.masses()[2] == 0.75);
  const Flow u = uniform_flow(6);
  for (std::size_t i = 0; i < u.size(); ++i)
    CHECK(std::abs(normalize(u).masses()[i] - u.masses()[i]) <= 1e-15);
  CHECK(normalize(normalize(f)) == normalize(f));
}

TEST_CASE("from_leaves, truncation and restriction keep the flow condition") {
  NoiseStream rng(5);
  const Flow f = random_positive_flow(8, rng);
  CHECK(validate_flow(f).valid());
  const Flow t = f.truncated(4);
  CHECK(t.depth() == 4);
  CHECK(validate_flow(t).valid());
  for (std::size_t i = 0; i < t.size(); ++i) CHECK(t.masses()[i] == f.masses()[i]);
  const auto v = VertexId::make(3, 5);
  const Flow r = f.restricted(v);
  CHECK(r.depth() == 5);
  CHECK(r.root_mass() == f.mass(v));
  CHECK(r.mass(VertexId::make(2, 0b10)) == f.mass(VertexId::make(5, (5u << 2) | 0b10)));
}

TEST_CASE("sample_ray") {
  NoiseStream rng(11);
  const Flow left = point_mass_flow({7, 0});
  for (int i = 0; i < 100; ++i) CHECK(sample_ray(left, rng).bits == 0);

  const Flow u = uniform_flow(3);
  std::vector<int> hits(8, 0);
  const int n = 80000;
  for (int i = 0; i < n; ++i) ++hits[sample_ray(u, rng).bits];
  for (int h : hits) {
    const double se = std::sqrt(0.125 * 0.875 / n);
    CHECK(std::abs(h / static_cast<double>(n) - 0.125) <= 4 * se);
  }
}

TEST_CASE("sample_ray vertex frequencies match masses") {
  NoiseStream rng(3);
  const Flow f = random_positive_flow(6, rng);
  const int n = 100000;
  std::vector<int> hits(vertex_count(6), 0);
  for (int i = 0; i < n; ++i) {
    const auto leaf = sample_ray(f, rng).vertex();
    for (int d = 1; d <= 6; ++d) ++hits[leaf.ancestor(d).heap_index()];
  }
  for (std::size_t v = 1; v < hits.size(); ++v) {
    const double p = f.masses()[v];
    const double se = std::sqrt(p * (1 - p) / n);
    CHECK(std::abs(hits[v] / static_cast<double>(n) - p) <= 4 * se);
  }
}

TEST_CASE("sample_ray refuses a zero-mass vertex") {
  NoiseStream rng(1);
  Flow f(1, {0.0, 0.0, 0.0});
  CHECK_THROWS_AS(sample_ray(f, rng), std::domain_error);
}

TEST_CASE("pushforward cdf") {
  const Flow u = uniform_flow(6);
  for (std::uint64_t k = 0; k <= 64; ++k)
    CHECK(pushforward_cdf(u, k, 6) == doctest::Approx(k / 64.0).epsilon(1e-15));
  NoiseStream rng(9);
  const Flow f = random_positive_flow(6, rng);
  CHECK(pushforward_cdf(f, 1, 0) == doctest::Approx(1.0));
  CHECK(pushforward_cdf(f, 0, 0) == 0.0);
  double prev = 0.0;
  for (std::uint64_t k = 0; k <= 64; ++k) {
    const double x = pushforward_cdf(f, k, 6);
    CHECK(x >= prev);
    prev = x;
  }
  const Flow split = Flow::from_levels({{1.0}, {0.25, 0.75}});
  CHECK(pushforward_cdf(split, 1, 1) == 0.25);
  CHECK_THROWS_AS(pushforward_cdf(split, 1, 2), std::invalid_argument);
  CHECK_THROWS_AS(pushforward_cdf(split, 3, 1), std::invalid_argument);
}

TEST_CASE("flow serialization round-trips") {
  NoiseStream rng(21);
  const Flow f = random_positive_flow(5, rng);
  CHECK(flow_from_json(flow_to_json(f)) == f);
  std::stringstream csv;
  write_flow_csv(csv, f);
  CHECK(read_flow_csv(csv) == f);
  CHECK_THROWS(flow_from_json(nlohmann::json{{"depth", 1}, {"levels", {{1.0}}}}));
}
