#include "doctest.h"
#include "treecascade/verify.hpp"

using namespace treecascade;

TEST_CASE("markov marginal test") {
  const auto g = WeightSpec::gaussian();
  const auto same = test_markov_marginal(uniform_flow(6), g, 0.3, 0.0, 6, 200, 4);
  CHECK(same.verdict == Verdict::Pass);
  CHECK(same.statistic == 1.0);
  // Too few replicas to detect anything: a non-rejection is Inconclusive.
  const auto tiny = test_markov_marginal(uniform_flow(6), g, 0.3, 0.3, 6, 5, 4);
  CHECK(tiny.verdict != Verdict::Pass);
  const auto wrong = test_markov_marginal(uniform_flow(10), g, 0.3, 0.3, 10, 3000, 4, {}, 0.5);
  CHECK(wrong.verdict == Verdict::Fail);
}

TEST_CASE("martingale test") {
  const auto zero = test_martingale(uniform_flow(6), WeightSpec::gaussian(), {0.0}, 6, 50, 1);
  CHECK(zero.statistic == 0.0);
  CHECK(zero.verdict == Verdict::Pass);
  const auto ctl = test_martingale(uniform_flow(8), WeightSpec::gaussian_uncompensated(), {0.5}, 8,
                                   500, 1);
  CHECK(ctl.verdict == Verdict::Fail);
}

TEST_CASE("controls invert the verdict") {
  TestReport r;
  r.statistic = 10;
  r.threshold = 4;
  r.verdict = Verdict::Fail;
  const auto c = as_control(r, "ctl");
  CHECK(c.verdict == Verdict::Pass);
  CHECK(c.comparison == ">");
  CHECK(c.test_name == "ctl");
  r.verdict = Verdict::Pass;
  CHECK(as_control(r, "ctl").verdict == Verdict::Fail);
}

TEST_CASE("suite runs") {
  SuiteConfig cfg;
  cfg.tests = std::vector<std::string>{};
  CHECK(run_suite(cfg).empty());
  cfg.tests = std::vector<std::string>{"kpz_ode", "nope"};
  CHECK_THROWS_AS(run_suite(cfg), std::invalid_argument);

  cfg.tests = std::vector<std::string>{"regularity_analytics", "transport_oracles", "kpz_ode",
                                       "subtree_identity", "composition_control"};
  const auto a = run_suite(cfg);
  REQUIRE(a.size() == 5);
  for (const auto& r : a) CHECK_MESSAGE(r.verdict == Verdict::Pass, r.test_name);
  CHECK_FALSE(any_failed(a));
  const auto b = run_suite(cfg);
  CHECK(suite_report_json(cfg, a).dump() == suite_report_json(cfg, b).dump());
  cfg.options.threads = 3;
  CHECK(suite_report_json(cfg, run_suite(cfg)).dump() == suite_report_json(cfg, a).dump());
}

TEST_CASE("suite config json") {
  const auto cfg = suite_config_from_json(nlohmann::json::parse(
      R"({"suite": "full", "seed": 7, "tests": ["kpz_ode"], "thresholds": {"max_abs_z": 3.5}})"));
  CHECK(cfg.suite == "full");
  CHECK(cfg.seed == 7);
  CHECK(cfg.options.thresholds.max_abs_z == 3.5);
  REQUIRE(cfg.tests.has_value());
  CHECK(cfg.tests->size() == 1);
  CHECK(suite_config_from_json(to_json(cfg)).seed == 7);
  CHECK_THROWS(suite_config_from_json(nlohmann::json::parse(R"({"bogus": 1})")));
  CHECK_THROWS(suite_config_from_json(nlohmann::json::parse(R"({"suite": "huge"})")));
  CHECK_FALSE(suite_config_from_json(nlohmann::json::object()).tests.has_value());
}

TEST_CASE("every registered test name is unique") {
  auto names = registered_tests();
  std::sort(names.begin(), names.end());
  CHECK(std::adjacent_find(names.begin(), names.end()) == names.end());
}
