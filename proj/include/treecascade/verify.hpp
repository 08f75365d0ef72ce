#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "treecascade/flow.hpp"
#include "treecascade/weight_process.hpp"

namespace treecascade {

enum class Verdict { Pass, Fail, Inconclusive };
std::string to_string(Verdict v);

/// Outcome of one statistical or exact check. The verdict follows from
/// (statistic, threshold, comparison) plus the power flag, nothing else.
struct TestReport {
  std::string test_name;
  double statistic = 0.0;
  double threshold = 0.0;
  // "<=": pass when statistic <= threshold; ">": pass when statistic > threshold.
  std::string comparison = "<=";
  std::size_t replicas = 0;
  std::uint64_t seed = 0;
  Verdict verdict = Verdict::Fail;
  nlohmann::json details = nlohmann::json::object();
};

nlohmann::json to_json(const TestReport& r);

struct Thresholds {
  double ks_p_value = 0.01;
  double max_abs_z = 4.0;
  // Power guards: a non-rejecting test is Inconclusive when the smallest
  // detectable KS distance exceeds this ...
  double max_detectable_ks = 0.5;
  // ... or when the standard error of a mean exceeds this fraction of the
  // hypothesised value.
  double max_relative_se = 0.25;
};

struct HarnessOptions {
  Thresholds thresholds;
  int threads = 1;
};

/// Root-mass law at t+s from direct simulation against simulation to t
/// followed by composition with fresh increments of duration
/// duration_factor·s (1 for the real test, 0.5 for the adversarial control).
/// Independent seeds for the two samples; with s = 0 both samples come from
/// the same paths.
TestReport test_markov_marginal(const Flow& base, const WeightSpec& spec, double t,
                                double s, int depth, std::size_t replicas,
                                std::uint64_t seed, const HarnessOptions& options = {},
                                double duration_factor = 1.0);

/// Max over grid times of |z| for the replica mean of Γ_t(root) against
/// Γ_0(root).
TestReport test_martingale(const Flow& base, const WeightSpec& spec,
                           const std::vector<double>& times, int depth,
                           std::size_t replicas, std::uint64_t seed,
                           const HarnessOptions& options = {});

/// A control passes when the wrapped test fails.
TestReport as_control(TestReport raw, std::string name);

struct SuiteConfig {
  std::string suite = "default";     // "default" or "full" (acceptance budgets)
  // Absent: every registered test. Present but empty: nothing runs.
  std::optional<std::vector<std::string>> tests;
  std::uint64_t seed = 42;
  HarnessOptions options;
};

SuiteConfig suite_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SuiteConfig& c);

/// Names of every registered test, in execution order.
std::vector<std::string> registered_tests();

/// Runs one registered test; each test derives its own seed namespace from
/// (suite seed, test name).
TestReport run_named_test(const std::string& name, const SuiteConfig& config);

/// Throws std::invalid_argument for unknown test names (before running any).
std::vector<TestReport> run_suite(const SuiteConfig& config);

nlohmann::json suite_report_json(const SuiteConfig& config,
                                 const std::vector<TestReport>& reports);

bool any_failed(const std::vector<TestReport>& reports);

/// Random strictly positive normalized flow, leaves uniform on [0.05, 1)
/// before normalization.
Flow random_positive_flow(int depth, NoiseStream& rng);

}  // namespace treecascade
