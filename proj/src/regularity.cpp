#include "treecascade/regularity.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "treecascade/stats.hpp"

namespace treecascade {

namespace {

constexpr double kDerivativeStep = 1e-4;
constexpr double kAnalyticTolerance = 1e-6;

// log Σ_{|v|=k} Γ(v)^h for k = first..depth.
std::vector<double> log_level_powers(const Flow& f, double h, int first) {
  std::vector<double> out;
  for (int k = first; k <= f.depth(); ++k) {
    const auto level = f.level(k);
    // Factor out the level maximum so large h cannot underflow.
    double top = 0.0;
    for (double m : level) top = std::max(top, m);
    if (!(top > 0.0)) throw std::domain_error("pressure: empty level");
    double acc = 0.0;
    for (double m : level)
      if (m > 0.0) acc += std::pow(m / top, h);
    out.push_back(h * std::log(top) + std::log(acc));
  }
  return out;
}

int first_fit_level(const Flow& f) { return f.depth() / 2; }

std::vector<double> fit_levels(const Flow& f) {
  std::vector<double> ks;
  for (int k = first_fit_level(f); k <= f.depth(); ++k) ks.push_back(k);
  return ks;
}

// Derivative of the level-regression slope at h = 1 via the regression of the
// difference quotients; returns (estimate, slope standard error).
std::pair<double, double> flow_derivative(const Flow& f, double direction) {
  const int first = first_fit_level(f);
  const auto ks = fit_levels(f);
  const auto base = log_level_powers(f, 1.0, first);
  auto quotient_fit = [&](double step) {
    const auto shifted = log_level_powers(f, 1.0 + direction * step, first);
    std::vector<double> q(base.size());
    for (std::size_t i = 0; i < q.size(); ++i)
      q[i] = (shifted[i] - base[i]) / (direction * step);
    return stats::linear_fit(ks, q);
  };
  const auto coarse = quotient_fit(kDerivativeStep);
  const auto fine = quotient_fit(kDerivativeStep / 2);
  return {2.0 * fine.slope - coarse.slope, fine.slope_se};
}

}  // namespace

PressureEstimate pressure_fit(const Flow& f, double h) {
  if (!(h >= 0.0) || !std::isfinite(h))
    throw std::invalid_argument("pressure: h must be >= 0");
  if (f.depth() < 4)
    throw std::invalid_argument("pressure: flow depth < 4 is too shallow to fit");
  const auto ys = log_level_powers(f, h, first_fit_level(f));
  const auto fit = stats::linear_fit(fit_levels(f), ys);
  return {fit.slope, fit.residual_rms, fit.slope_se, false};
}

PressureModel PressureModel::theta() { return PressureModel{}; }

PressureModel PressureModel::from_flow(Flow f) {
  if (f.depth() < 4)
    throw std::invalid_argument("pressure: flow depth < 4 is too shallow to fit");
  PressureModel m;
  m.flow_ = std::make_shared<const Flow>(std::move(f));
  return m;
}

PressureEstimate PressureModel::at(double h) const {
  if (!(h >= 0.0) || !std::isfinite(h))
    throw std::invalid_argument("pressure: h must be >= 0");
  if (analytic()) return {(1.0 - h) * std::numbers::ln2, 0.0, 0.0, true};
  return pressure_fit(*flow_, h);
}

double PressureModel::right_derivative_at_one() const {
  if (analytic()) return -std::numbers::ln2;
  return flow_derivative(*flow_, +1.0).first;
}

double PressureModel::left_derivative_at_one() const {
  if (analytic()) return -std::numbers::ln2;
  return flow_derivative(*flow_, -1.0).first;
}

double PressureModel::derivative_tolerance() const {
  if (analytic()) return kAnalyticTolerance;
  const double se = std::max(flow_derivative(*flow_, +1.0).second,
                             flow_derivative(*flow_, -1.0).second);
  return std::max(kAnalyticTolerance, 3.0 * se);
}

double alpha(const PressureModel& model, const WeightSpec& spec, double t, double h) {
  return model(h) + std::log(moment(spec, t, h));
}

double alpha_right_derivative_at_one(const PressureModel& model,
                                     const WeightSpec& spec, double t) {
  return model.right_derivative_at_one() + log_moment_derivative(spec, t, 1.0);
}

CriticalExponent critical_h(const PressureModel& model, const WeightSpec& spec,
                            double t, double h_max) {
  if (!(t >= 0.0)) throw std::invalid_argument("critical_h: t must be >= 0");
  if (!(h_max > 1.0)) throw std::invalid_argument("critical_h: h_max must exceed 1");
  if (alpha_right_derivative_at_one(model, spec, t) >= 0.0) return {1.0, false};
  auto a = [&](double h) { return alpha(model, spec, t, h); };
  // α_t is convex with α_t(1) = 0 and negative just above 1, so it has at
  // most one further root. Bracket it by doubling the distance from 1.
  double lo = 1.0;
  double hi = 1.0;
  for (double gap = 0.25;; gap *= 2.0) {
    hi = std::min(1.0 + gap, h_max);
    if (a(hi) >= 0.0) break;
    if (hi >= h_max) return {h_max, true};
    lo = hi;
  }
  while (hi - lo > 1e-13 * hi) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (a(mid) < 0.0 ? lo : hi) = mid;
  }
  return {0.5 * (lo + hi), false};
}

std::string to_string(Regularity r) {
  switch (r) {
    case Regularity::Regular: return "Regular";
    case Regularity::Irregular: return "Irregular";
    case Regularity::Boundary: return "Boundary";
  }
  return "?";
}

Regularity classify_regularity(const PressureModel& model, const WeightSpec& spec,
                               double t) {
  if (!(t >= 0.0)) throw std::invalid_argument("classify_regularity: t must be >= 0");
  const double wlw = w_log_w(spec, t);
  const double tol = model.derivative_tolerance();
  if (wlw + model.right_derivative_at_one() < -tol) return Regularity::Regular;
  if (wlw + model.left_derivative_at_one() > tol) return Regularity::Irregular;
  return Regularity::Boundary;
}

double lifetime(const PressureModel& model) {
  return -2.0 * model.right_derivative_at_one();
}

RegularityReport regularity_report(const PressureModel& model, const WeightSpec& spec,
                                   double t, const std::vector<double>& h_values) {
  RegularityReport r;
  r.measure = model.name();
  r.weights = spec.name();
  r.t = t;
  for (double h : h_values) {
    const double p = model(h);
    r.pressure_samples.emplace_back(h, p);
    r.alpha_samples.emplace_back(h, p + std::log(moment(spec, t, h)));
  }
  r.h_t = critical_h(model, spec, t);
  r.lifetime = lifetime(model);
  r.classification = classify_regularity(model, spec, t);
  r.derivative_estimate = model.right_derivative_at_one();
  r.derivative_tolerance = model.derivative_tolerance();
  r.regression_estimate = !model.analytic();
  return r;
}

nlohmann::json to_json(const RegularityReport& r) {
  nlohmann::json j;
  j["measure"] = r.measure;
  j["weights"] = r.weights;
  j["t"] = r.t;
  auto pairs = [](const auto& samples) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& [h, v] : samples) arr.push_back({h, v});
    return arr;
  };
  j["pressure_samples"] = pairs(r.pressure_samples);
  j["alpha_samples"] = pairs(r.alpha_samples);
  if (r.h_t.infinite)
    j["h_t"] = "inf";
  else
    j["h_t"] = r.h_t.value;
  j["lifetime"] = r.lifetime;
  j["classification"] = to_string(r.classification);
  j["derivative_estimate"] = r.derivative_estimate;
  j["derivative_tolerance"] = r.derivative_tolerance;
  j["estimator"] = r.regression_estimate
                       ? "least-squares slope over the deepest half of levels"
                       : "closed form";
  return j;
}

}  // namespace treecascade
