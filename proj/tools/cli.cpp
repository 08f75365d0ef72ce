#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "treecascade/cascade.hpp"
#include "treecascade/flow.hpp"
#include "treecascade/flow_io.hpp"
#include "treecascade/kpz.hpp"
#include "treecascade/parallel.hpp"
#include "treecascade/regularity.hpp"
#include "treecascade/sde.hpp"
#include "treecascade/transport.hpp"
#include "treecascade/verify.hpp"

namespace treecascade::cli {

namespace {

using nlohmann::json;

constexpr double kLifetimeTheta = 2.0 * std::numbers::ln2;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Runs a setup step, reporting any failure as a configuration problem.
template <class Fn>
auto validated(Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

json typed_value(const std::string& s) {
  if (s == "true") return true;
  if (s == "false") return false;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  std::int64_t i = 0;
  if (auto r = std::from_chars(b, e, i); r.ec == std::errc() && r.ptr == e) return i;
  std::uint64_t u = 0;
  if (auto r = std::from_chars(b, e, u); r.ec == std::errc() && r.ptr == e) return u;
  double d = 0.0;
  if (auto r = std::from_chars(b, e, d); r.ec == std::errc() && r.ptr == e && std::isfinite(d))
    return d;
  return s;
}

// JSON config files: top-level keys are global options, nested objects are
// keyed by subcommand name.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
    return options_json(app, default_also).dump(2);
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    json j;
    try {
      input >> j;
    } catch (const json::exception& e) {
      throw CLI::ConversionError(std::string("config file is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("config file must hold a JSON object");
    std::vector<CLI::ConfigItem> items;
    for (const auto& [key, value] : j.items()) {
      if (value.is_object()) {
        for (const auto& [sub_key, sub_value] : value.items())
          items.push_back(item(sub_key, sub_value, {key}));
      } else {
        items.push_back(item(key, value, {}));
      }
    }
    return items;
  }

  static json options_json(const CLI::App* app, bool default_also) {
    json j = json::object();
    for (const CLI::Option* opt : app->get_options({})) {
      if (opt->get_lnames().empty() || !opt->get_configurable()) continue;
      const std::string name = opt->get_lnames()[0];
      if (name == "help") continue;
      if (opt->get_type_size() == 0) {
        if (opt->count() > 0 || default_also) j[name] = opt->count() > 0;
        continue;
      }
      const bool many = opt->get_expected_max() > 1;
      if (opt->count() > 0) {
        if (many) {
          json arr = json::array();
          for (const auto& r : opt->results()) arr.push_back(typed_value(r));
          j[name] = arr;
        } else {
          j[name] = typed_value(opt->results().back());
        }
      } else if (default_also) {
        const std::string def = opt->get_default_str();
        if (many) j[name] = json::array();
        else if (!def.empty()) j[name] = typed_value(def);
      }
    }
    return j;
  }

 private:
  static CLI::ConfigItem item(const std::string& name, const json& value,
                              std::vector<std::string> parents) {
    CLI::ConfigItem it;
    it.name = name;
    it.parents = std::move(parents);
    auto text = [&](const json& v) -> std::string {
      if (v.is_string()) return v.get<std::string>();
      if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
      if (v.is_number()) return v.dump();
      throw CLI::ConversionError("unsupported config value for " + name);
    };
    if (value.is_array()) {
      for (const auto& v : value) it.inputs.push_back(text(v));
    } else {
      it.inputs.push_back(text(value));
    }
    return it;
  }
};

// Output sink: "-" is the caller's stream, anything else a file.
void write_output(const std::string& path, std::ostream& out,
                  const std::function<void(std::ostream&)>& fn) {
  if (path == "-") {
    fn(out);
    out.flush();
    return;
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot open output file " + path);
  fn(file);
  if (!file) throw std::runtime_error("failed writing " + path);
}

constexpr const char* kCrlf = "\r\n";

std::string fmt(double x) { return format_double(x); }

// Doubles print their defaults in shortest round-trip form so that a dumped
// configuration reads back to the same values.
CLI::Option* add_real(CLI::App* app, const std::string& name, double& v, const std::string& desc) {
  return app->add_option(name, v, desc)
      ->default_function([&v] { return format_double(v); })
      ->capture_default_str();
}

struct GlobalArgs {
  int threads = 1;
  bool dump_config = false;
  int max_depth = kDefaultMaxDepth;
};

struct MeasureArgs {
  std::string measure = "theta";
  std::optional<int> depth;
  int theta_depth = 10;
};

struct WeightArgs {
  std::string kind = "gaussian";
  double rate = 1.0;
  double jump_mean = 0.0;
  double jump_sd = 0.3;
};

void add_measure_options(CLI::App* app, MeasureArgs& m, int default_depth) {
  app->add_option("--measure", m.measure,
                  "Initial measure: 'theta' (uniform) or a flow file (.json or .csv)");
  m.theta_depth = default_depth;
  app->add_option("--depth", m.depth,
                  "Tree depth in levels (default: " + std::to_string(default_depth) +
                      " for theta, a flow file's own depth otherwise)");
}

void add_weight_options(CLI::App* app, WeightArgs& w) {
  app->add_option("--weights", w.kind, "Weight process: gaussian | compound_poisson")
      ->check(CLI::IsMember({"gaussian", "compound_poisson"}));
  add_real(app, "--rate", w.rate, "Compound Poisson jump rate (per unit model time)");
  add_real(app, "--jump-mean", w.jump_mean, "Mean of the log jump size (dimensionless)");
  add_real(app, "--jump-sd", w.jump_sd, "Std. deviation of the log jump size (dimensionless)");
}

WeightSpec build_spec(const WeightArgs& w) {
  return validated([&] {
    WeightSpec s = w.kind == "compound_poisson"
                       ? WeightSpec::compound_poisson(w.rate, w.jump_mean, w.jump_sd)
                       : WeightSpec::gaussian();
    s.validate();
    return s;
  });
}

// Resolves the measure at the requested depth. `theta_depth` applies to
// theta when --depth is left unset.
Flow build_measure(const MeasureArgs& m, const GlobalArgs& g) {
  require(g.max_depth >= 0 && g.max_depth <= kHardMaxDepth,
          "--max-depth must lie in [0, " + std::to_string(kHardMaxDepth) + "]");
  if (m.measure == "theta" || m.measure == "THETA") {
    const int depth = m.depth.value_or(m.theta_depth);
    require(depth >= 0, "--depth must be >= 0");
    require(depth <= g.max_depth,
            "--depth " + std::to_string(depth) + " exceeds --max-depth " +
                std::to_string(g.max_depth));
    return uniform_flow(depth);
  }
  Flow f = validated([&] { return load_flow(m.measure); });
  require(is_consistent_measure(f), "flow file " + m.measure + " violates the flow condition");
  const int depth = m.depth.value_or(f.depth());
  require(depth >= 0, "--depth must be >= 0");
  require(depth <= f.depth(), "--depth exceeds the depth stored in " + m.measure);
  require(depth <= g.max_depth, "--depth exceeds --max-depth");
  return depth == f.depth() ? f : f.truncated(depth);
}

std::vector<double> build_grid(double t_end, double step) {
  require(std::isfinite(t_end) && t_end >= 0.0, "--t-end must be a finite time >= 0");
  require(std::isfinite(step) && step > 0.0, "--step must be a positive time");
  require(t_end == 0.0 || step <= t_end, "--step exceeds --t-end");
  require(t_end / step <= 1e7, "grid has more than 1e7 steps");
  return uniform_grid(t_end, step);
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  MeasureArgs measure;
  WeightArgs weights;
  double t_end = 0.9 * kLifetimeTheta;
  double step = 0.01;
  std::size_t replicas = 1;
  std::uint64_t seed = 42;
  std::size_t every = 1;
  std::string summary = "-";
  std::string path_out;
  int path_depth = -1;
  std::string observables;
};

void setup_simulate(CLI::App& app, SimulateArgs& a) {
  auto* sub = app.add_subcommand("simulate", "Simulate cascade paths and write CSV");
  add_measure_options(sub, a.measure, 10);
  add_weight_options(sub, a.weights);
  add_real(sub, "--t-end", a.t_end, "Horizon (model time units)");
  add_real(sub, "--step", a.step, "Grid step (model time units)");
  sub->add_option("--replicas", a.replicas, "Independent replicas (count)");
  sub->add_option("--seed", a.seed, "Master seed (64-bit integer)");
  sub->add_option("--every", a.every, "Emit every k-th grid point (count); the last is always emitted");
  sub->add_option("--summary", a.summary, "Summary CSV time,replica,root_mass ('-' = stdout)");
  sub->add_option("--path", a.path_out,
                  "Replica-0 vertex CSV time,vertex_depth,path_bits,mass (file)");
  sub->add_option("--path-depth", a.path_depth, "Deepest vertex level written to --path (levels; default min(3, depth))");
  sub->add_option("--observables", a.observables,
                  "Gaussian observables CSV time,replica,root_mass,overlap,cum_qv (file)");
}

int run_simulate(const SimulateArgs& a, const GlobalArgs& g, std::ostream& out) {
  const WeightSpec spec = build_spec(a.weights);
  const Flow base = build_measure(a.measure, g);
  const auto grid = build_grid(a.t_end, a.step);
  require(a.replicas >= 1, "--replicas must be >= 1");
  require(a.every >= 1, "--every must be >= 1");
  const int path_depth = a.path_depth < 0 ? std::min(3, base.depth()) : a.path_depth;
  require(path_depth <= base.depth(), "--path-depth out of range");
  require(a.observables.empty() || spec.kind == WeightKind::Gaussian,
          "--observables needs Gaussian weights");
  const int depth = base.depth();

  std::vector<char> emit(grid.size(), 0);
  for (std::size_t k = 0; k < grid.size(); k += a.every) emit[k] = 1;
  emit.back() = 1;
  std::vector<std::size_t> visit;
  for (std::size_t k = 0; k < grid.size(); ++k)
    if (emit[k] || !a.observables.empty()) visit.push_back(k);

  std::vector<std::string> summary(a.replicas), observables(a.replicas);
  std::string path_rows;
  parallel_for(a.replicas, g.threads, [&](std::size_t r) {
    std::ostringstream s, o, p;
    QvAccumulator qv;
    stream_path(base, spec, grid, depth, mix_seed(a.seed, r), visit,
                [&](std::size_t k, const Flow& snap, std::span<const double>) {
                  const double root = snap.root_mass();
                  double q = 0.0;
                  if (!a.observables.empty()) {
                    q = root > 0.0 ? overlap(snap) : 0.0;
                    if (root > 0.0) qv.add(grid[k], root, q);
                  }
                  if (!emit[k]) return;
                  const std::string t = fmt(grid[k]);
                  s << t << ',' << r << ',' << fmt(root) << kCrlf;
                  if (!a.observables.empty())
                    o << t << ',' << r << ',' << fmt(root) << ',' << fmt(q) << ','
                      << fmt(qv.realized()) << kCrlf;
                  if (r == 0 && !a.path_out.empty()) {
                    const auto m = snap.masses();
                    for (std::size_t v = 0; v < vertex_count(path_depth); ++v) {
                      const VertexId id = VertexId::from_heap_index(v);
                      p << t << ',' << id.depth << ',' << id.bits << ',' << fmt(m[v]) << kCrlf;
                    }
                  }
                });
    summary[r] = s.str();
    observables[r] = o.str();
    if (r == 0) path_rows = p.str();
  });

  write_output(a.summary, out, [&](std::ostream& os) {
    os << "time,replica,root_mass" << kCrlf;
    for (const auto& s : summary) os << s;
  });
  if (!a.path_out.empty())
    write_output(a.path_out, out, [&](std::ostream& os) {
      os << "time,vertex_depth,path_bits,mass" << kCrlf << path_rows;
    });
  if (!a.observables.empty())
    write_output(a.observables, out, [&](std::ostream& os) {
      os << "time,replica,root_mass,overlap,cum_qv" << kCrlf;
      for (const auto& s : observables) os << s;
    });
  return kOk;
}

// ---------------------------------------------------------------- analyze

struct AnalyzeArgs {
  MeasureArgs measure;
  WeightArgs weights;
  double t = 0.5;
  double h_min = 0.0;
  double h_max = 3.0;
  double h_step = 0.25;
  bool empirical = false;
  std::string report = "-";
  std::string curves;
};

void setup_analyze(CLI::App& app, AnalyzeArgs& a) {
  auto* sub = app.add_subcommand("analyze", "Pressure, alpha, critical exponent and regularity");
  add_measure_options(sub, a.measure, 16);
  add_weight_options(sub, a.weights);
  add_real(sub, "--t", a.t, "Time at which the weights are taken (model time units)");
  add_real(sub, "--h-min", a.h_min, "Smallest exponent sampled (dimensionless)");
  add_real(sub, "--h-max", a.h_max, "Largest exponent sampled (dimensionless)");
  add_real(sub, "--h-step", a.h_step, "Exponent spacing (dimensionless)");
  sub->add_flag("--empirical", a.empirical,
                "Fit the pressure from the finite flow even for theta");
  sub->add_option("--report", a.report, "JSON report ('-' = stdout)");
  sub->add_option("--curves", a.curves, "CSV h,pressure,alpha (file)");
}

int run_analyze(const AnalyzeArgs& a, const GlobalArgs& g, std::ostream& out) {
  const WeightSpec spec = build_spec(a.weights);
  require(std::isfinite(a.t) && a.t >= 0.0, "--t must be >= 0");
  require(a.h_min >= 0.0 && a.h_max >= a.h_min && a.h_step > 0.0, "bad exponent range");
  require((a.h_max - a.h_min) / a.h_step <= 1e5, "too many exponents requested");
  const bool theta = (a.measure.measure == "theta" || a.measure.measure == "THETA");
  PressureModel model = PressureModel::theta();
  if (!theta || a.empirical) {
    const Flow f = build_measure(a.measure, g);
    require(f.depth() >= 4, "pressure regression needs depth >= 4");
    model = PressureModel::from_flow(f);
  }
  std::vector<double> hs;
  const auto count = static_cast<std::size_t>(std::floor((a.h_max - a.h_min) / a.h_step + 1e-9));
  for (std::size_t i = 0; i <= count; ++i) hs.push_back(a.h_min + static_cast<double>(i) * a.h_step);

  const auto report = regularity_report(model, spec, a.t, hs);
  write_output(a.report, out, [&](std::ostream& os) { os << to_json(report).dump(2) << '\n'; });
  if (!a.curves.empty())
    write_output(a.curves, out, [&](std::ostream& os) {
      os << "h,pressure,alpha" << kCrlf;
      for (std::size_t i = 0; i < report.pressure_samples.size(); ++i)
        os << fmt(report.pressure_samples[i].first) << ',' << fmt(report.pressure_samples[i].second)
           << ',' << fmt(report.alpha_samples[i].second) << kCrlf;
    });
  return kOk;
}

// ---------------------------------------------------------------- transport

struct TransportArgs {
  std::string mu;
  std::string nu;
  int depth = -1;
  std::string method = "all";
  bool holder = false;
  MeasureArgs measure;
  double t_end = 0.5;
  double step = 1.0 / 1024.0;
  std::size_t replicas = 32;
  std::uint64_t seed = 42;
  std::size_t pair_budget = 64;
  std::string lags;
  std::string report = "-";
};

void setup_transport(CLI::App& app, TransportArgs& a) {
  auto* sub = app.add_subcommand(
      "transport", "Wasserstein distance between two flows, or the Hoelder exponent of paths");
  sub->add_option("--mu", a.mu, "First flow: file (.json/.csv) or 'theta'");
  sub->add_option("--nu", a.nu, "Second flow: file (.json/.csv) or 'theta'");
  sub->add_option("--method", a.method, "exact | lp | coupling | all")
      ->check(CLI::IsMember({"exact", "lp", "coupling", "all"}));
  sub->add_flag("--holder", a.holder, "Estimate the Hoelder exponent of simulated paths");
  add_measure_options(sub, a.measure, 14);
  add_real(sub, "--t-end", a.t_end, "Horizon for --holder (model time units)");
  add_real(sub, "--step", a.step, "Grid step for --holder (model time units)");
  sub->add_option("--replicas", a.replicas, "Paths for --holder (count)");
  sub->add_option("--seed", a.seed, "Master seed for --holder (64-bit integer)");
  sub->add_option("--pair-budget", a.pair_budget,
                  "Snapshot pairs per lag and path for --holder (count, 0 = all)");
  sub->add_option("--lags", a.lags, "CSV lag,replica,distance for --holder (file)");
  sub->add_option("--report", a.report, "JSON report ('-' = stdout)");
}

json result_json(const TransportResult& r) {
  return {{"method", to_string(r.method)},
          {"value", r.value},
          {"truncation_bound", r.truncation_bound}};
}

int run_transport_pair(const TransportArgs& a, const GlobalArgs& g, std::ostream& out) {
  require(!a.mu.empty() && !a.nu.empty(), "transport needs --mu and --nu (or --holder)");
  auto load = [&](const std::string& src) {
    MeasureArgs m{src, a.measure.depth, 6};
    return build_measure(m, g);
  };
  const Flow mu = load(a.mu);
  const Flow nu = load(a.nu);
  require(mu.depth() == nu.depth(), "--mu and --nu must have the same depth");
  require(std::abs(mu.root_mass() - 1.0) <= 1e-12 && std::abs(nu.root_mass() - 1.0) <= 1e-12,
          "both flows must be probability measures");
  const bool all = a.method == "all";
  require(all || a.method != "lp" || mu.depth() <= 8, "the lp oracle is limited to depth 8");
  auto positive = [](const Flow& f) {
    const auto m = f.masses();
    return std::all_of(m.begin(), m.end(), [](double x) { return x > 0.0; });
  };
  require(all || a.method != "coupling" || (positive(mu) && positive(nu)),
          "the coupling bound needs strictly positive flows");

  json j{{"depth", mu.depth()}, {"results", json::array()}};
  if (all || a.method == "exact") j["results"].push_back(result_json(wasserstein_exact(mu, nu)));
  if ((all && mu.depth() <= 8) || a.method == "lp")
    j["results"].push_back(result_json(wasserstein_lp_oracle(mu, nu)));
  if ((all && positive(mu) && positive(nu)) || a.method == "coupling")
    j["results"].push_back(result_json(coupling_upper_bound(mu, nu)));
  write_output(a.report, out, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
  return kOk;
}

int run_transport_holder(const TransportArgs& a, const GlobalArgs& g, std::ostream& out) {
  const Flow base = build_measure(a.measure, g);
  const auto grid = build_grid(a.t_end, a.step);
  require(grid.size() >= 20, "--holder needs at least 20 grid points");
  require(a.replicas >= 1, "--replicas must be >= 1");
  require(std::abs(base.root_mass() - 1.0) <= 1e-12, "--holder needs a probability measure");
  std::vector<std::vector<LagDistance>> per(a.replicas);
  PathOptions opts;
  opts.keep_weight_state = false;
  parallel_for(a.replicas, g.threads, [&](std::size_t r) {
    const auto path = simulate_path(base, WeightSpec::gaussian(), grid, base.depth(),
                                    mix_seed(a.seed, r), opts);
    per[r] = lag_distances(path, a.pair_budget, r);
  });
  std::vector<LagDistance> samples;
  for (auto& v : per) samples.insert(samples.end(), v.begin(), v.end());
  if (!a.lags.empty())
    write_output(a.lags, out, [&](std::ostream& os) {
      os << "lag,replica,distance" << kCrlf;
      for (const auto& s : samples)
        os << fmt(s.lag) << ',' << s.replica << ',' << fmt(s.distance) << kCrlf;
    });
  const auto fit = holder_fit_from_samples(std::move(samples), a.replicas);
  auto j = to_json(fit);
  j.erase("samples");
  j["depth"] = base.depth();
  j["replicas"] = a.replicas;
  j["seed"] = a.seed;
  write_output(a.report, out, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
  return kOk;
}

// ---------------------------------------------------------------- kpz

struct KpzArgs {
  double d0 = -1.0;
  double t_end = 1.0;
  double step = 1e-3;
  std::size_t every = 1;
  std::string out = "-";
  bool box = false;
  std::string ray_set = "EVEN_FREE";
  int depth = 20;
  double t = 0.5;
  int scale_min = 5;
  int scale_max = 14;
  std::uint64_t seed = 42;
  std::string box_out;
  std::string report = "-";
};

void setup_kpz(CLI::App& app, KpzArgs& a) {
  auto* sub = app.add_subcommand("kpz", "Dimension ODE, closed form and box-counting evidence");
  add_real(sub, "--d0", a.d0, "Initial dimension in [0, 1] (dimensionless)");
  add_real(sub, "--t-end", a.t_end, "ODE horizon, at most 2 ln 2 (model time units)");
  add_real(sub, "--step", a.step, "RK4 step (model time units)");
  sub->add_option("--every", a.every, "Emit every k-th ODE step (count); the last is always emitted");
  sub->add_option("--out", a.out, "CSV t,d_ode,d_closed_form ('-' = stdout)");
  sub->add_flag("--box-counting", a.box, "Estimate the image dimension of a ray set");
  sub->add_option("--ray-set", a.ray_set, "FULL | EVEN_FREE")
      ->check(CLI::IsMember({"FULL", "EVEN_FREE", "full", "even_free"}));
  sub->add_option("--depth", a.depth, "Cascade depth for box counting (levels)");
  add_real(sub, "--t", a.t, "Time of the box-counted snapshot (model time units)");
  sub->add_option("--scale-min", a.scale_min, "Coarsest box scale, boxes of side 2^-m (log2 units)");
  sub->add_option("--scale-max", a.scale_max, "Finest box scale (log2 units)");
  sub->add_option("--seed", a.seed, "Seed for the box-counted snapshot (64-bit integer)");
  sub->add_option("--box-out", a.box_out, "CSV scale,count (file)");
  sub->add_option("--report", a.report, "JSON box-counting summary ('-' = stdout)");
}

int run_kpz(const KpzArgs& a, const GlobalArgs& g, std::ostream& out) {
  require(a.d0 >= 0.0 || a.box, "kpz needs --d0 or --box-counting");
  std::vector<std::string> rows;
  if (a.d0 >= 0.0) {
    require(a.d0 <= 1.0, "--d0 must lie in [0, 1]");
    require(a.t_end >= 0.0 && a.t_end <= kLifetimeTheta * (1.0 + 1e-12),
            "--t-end must lie in [0, 2 ln 2]");
    require(a.step > 0.0 && (a.t_end == 0.0 || a.step <= a.t_end), "--step must lie in (0, t-end]");
    require(a.every >= 1, "--every must be >= 1");
  }
  RaySet set = RaySet::EvenFree;
  std::vector<int> scales;
  if (a.box) {
    set = validated([&] { return parse_ray_set(a.ray_set); });
    require(a.depth >= 1 && a.depth <= g.max_depth, "--depth out of range");
    require(a.t >= 0.0 && a.t < kLifetimeTheta, "--t must lie in [0, 2 ln 2)");
    require(a.scale_min >= 0 && a.scale_max <= a.depth && a.scale_max - a.scale_min >= 2,
            "need at least 3 scales within the depth");
    for (int m = a.scale_min; m <= a.scale_max; ++m) scales.push_back(m);
  }

  if (a.d0 >= 0.0) {
    const auto path = kpz_ode_solve(a.d0, a.t_end, a.step);
    write_output(a.out, out, [&](std::ostream& os) {
      os << "t,d_ode,d_closed_form" << kCrlf;
      for (std::size_t k = 0; k < path.times.size(); ++k) {
        if (k % a.every != 0 && k + 1 != path.times.size()) continue;
        os << fmt(path.times[k]) << ',' << fmt(path.d[k]) << ','
           << fmt(kpz_closed_form(a.d0, path.times[k])) << kCrlf;
      }
    });
  }
  if (a.box) {
    const std::vector<double> grid = a.t == 0.0 ? std::vector<double>{0.0}
                                                : std::vector<double>{0.0, a.t};
    const std::vector<std::size_t> last{grid.size() - 1};
    BoxDimension est;
    stream_path(uniform_flow(a.depth), WeightSpec::gaussian(), grid, a.depth, a.seed, last,
                [&](std::size_t, const Flow& snap, std::span<const double>) {
                  est = box_dimension_estimate(snap, set, scales);
                });
    if (!a.box_out.empty())
      write_output(a.box_out, out, [&](std::ostream& os) {
        os << "scale,count" << kCrlf;
        for (const auto& c : est.counts) os << c.scale_log2 << ',' << c.count << kCrlf;
      });
    const double d0 = ray_set_dimension(set);
    json j{{"ray_set", to_string(set)},
           {"depth", a.depth},
           {"t", a.t},
           {"seed", a.seed},
           {"estimate", est.estimate},
           {"r2", est.r2},
           {"predicted", kpz_closed_form(d0, a.t)},
           {"set_dimension", d0}};
    write_output(a.report, out, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
  }
  return kOk;
}

// ---------------------------------------------------------------- verify

struct VerifyArgs {
  std::string suite = "default";
  std::vector<std::string> tests;
  std::uint64_t seed = 42;
  double ks_p_value = 0.01;
  double max_abs_z = 4.0;
  std::string report;
  bool list = false;
};

void setup_verify(CLI::App& app, VerifyArgs& a, CLI::Option*& tests_opt) {
  auto* sub = app.add_subcommand("verify", "Run the statistical verification suite");
  sub->add_option("--suite", a.suite, "default (quick budgets) | full (acceptance budgets)")
      ->check(CLI::IsMember({"default", "full"}));
  tests_opt = sub->add_option("--tests", a.tests, "Comma-separated test names (default: all)")
                  ->delimiter(',');
  sub->add_option("--seed", a.seed, "Suite seed (64-bit integer)");
  add_real(sub, "--ks-p-value", a.ks_p_value, "KS rejection level (probability)");
  add_real(sub, "--max-abs-z", a.max_abs_z, "Largest accepted |z| (standard errors)");
  sub->add_option("--report", a.report, "JSON report (file, '-' = stdout)");
  sub->add_flag("--list", a.list, "List registered tests and exit");
}

int run_verify(const VerifyArgs& a, bool tests_given, const GlobalArgs& g, std::ostream& out) {
  if (a.list) {
    for (const auto& n : registered_tests()) out << n << '\n';
    return kOk;
  }
  SuiteConfig cfg;
  cfg.suite = a.suite;
  cfg.seed = a.seed;
  cfg.options.threads = g.threads;
  cfg.options.thresholds.ks_p_value = a.ks_p_value;
  cfg.options.thresholds.max_abs_z = a.max_abs_z;
  require(a.ks_p_value > 0.0 && a.ks_p_value < 1.0, "--ks-p-value must lie in (0, 1)");
  require(a.max_abs_z > 0.0, "--max-abs-z must be positive");
  if (tests_given) {
    std::vector<std::string> names;
    for (const auto& n : a.tests)
      if (!n.empty()) names.push_back(n);
    const auto known = registered_tests();
    for (const auto& n : names)
      require(std::find(known.begin(), known.end(), n) != known.end(), "unknown test: " + n);
    cfg.tests = names;
  }
  const auto reports = run_suite(cfg);
  for (const auto& r : reports)
    out << r.test_name << ' ' << to_string(r.verdict) << " statistic=" << fmt(r.statistic) << ' '
        << r.comparison << ' ' << fmt(r.threshold) << '\n';
  if (!a.report.empty())
    write_output(a.report, out,
                 [&](std::ostream& os) { os << suite_report_json(cfg, reports).dump(2) << '\n'; });
  return any_failed(reports) ? kTestFailure : kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Random cascade measures on the binary tree", "cascade"};
  app.option_defaults()->always_capture_default();
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON config file; command-line flags take precedence");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);
  app.fallthrough();

  GlobalArgs g;
  g.threads = default_thread_count();
  app.add_option("--threads", g.threads, "Replica worker threads (default: $CASCADE_THREADS or 1)")
      ->check(CLI::PositiveNumber);
  app.add_option("--max-depth", g.max_depth, "Refuse depths above this (levels)");
  app.add_flag("--dump-config", g.dump_config, "Print the effective configuration as JSON and exit")
      ->configurable(false);

  SimulateArgs sim;
  AnalyzeArgs ana;
  TransportArgs tra;
  KpzArgs kpz;
  VerifyArgs ver;
  CLI::Option* tests_opt = nullptr;
  setup_simulate(app, sim);
  setup_analyze(app, ana);
  setup_transport(app, tra);
  setup_kpz(app, kpz);
  setup_verify(app, ver, tests_opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInvalidConfig;
  }

  CLI::App* sub = app.get_subcommands().front();
  if (g.dump_config) {
    json j = JsonConfig::options_json(&app, true);
    j[sub->get_name()] = JsonConfig::options_json(sub, true);
    out << j.dump(2) << '\n';
    return kOk;
  }

  try {
    const std::string name = sub->get_name();
    if (name == "simulate") return run_simulate(sim, g, out);
    if (name == "analyze") return run_analyze(ana, g, out);
    if (name == "transport")
      return tra.holder ? run_transport_holder(tra, g, out) : run_transport_pair(tra, g, out);
    if (name == "kpz") return run_kpz(kpz, g, out);
    if (name == "verify") return run_verify(ver, tests_opt->count() > 0, g, out);
    err << "unknown command " << name << '\n';
    return kInvalidConfig;
  } catch (const ConfigError& e) {
    err << "invalid configuration: " << e.what() << '\n';
    return kInvalidConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeFailure;
  }
}

}  // namespace treecascade::cli
