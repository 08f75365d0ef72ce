#pragma once

#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "treecascade/flow.hpp"
#include "treecascade/weight_process.hpp"

namespace treecascade {

struct PressureEstimate {
  double value = 0.0;
  double residual = 0.0;  // rms residual of the level regression; 0 if analytic
  double slope_se = 0.0;
  bool analytic = false;
};

/// Regression estimate of λ_Γ(h): slope of log Σ_{|v|=k} Γ(v)^h against k over
/// the deepest half of the levels. Zero-mass vertices are left out of the sum.
PressureEstimate pressure_fit(const Flow& f, double h);

/// The pressure function of an initial measure: either the analytic uniform
/// measure θ, for which λ_θ(h) = (1 - h) log 2, or a finite flow whose
/// pressure is estimated by regression.
class PressureModel {
 public:
  static PressureModel theta();
  static PressureModel from_flow(Flow f);

  bool analytic() const { return !flow_; }
  const Flow* flow() const { return flow_.get(); }
  std::string name() const { return analytic() ? "theta" : "flow"; }

  PressureEstimate at(double h) const;
  double operator()(double h) const { return at(h).value; }

  /// One-sided derivatives at h = 1 (exact for θ; Richardson-refined finite
  /// differences with step 1e-4 otherwise).
  double right_derivative_at_one() const;
  double left_derivative_at_one() const;

  /// Band used to call a derivative-based criterion a tie: 1e-6 for analytic
  /// inputs, three standard errors of the derivative fit for flows.
  double derivative_tolerance() const;

 private:
  std::shared_ptr<const Flow> flow_;
};

inline double pressure(const PressureModel& model, double h) { return model(h); }

/// α_t(h) = λ_Γ(h) + log E[W_t^h].
double alpha(const PressureModel& model, const WeightSpec& spec, double t, double h);

/// d/dh α_t at 1+.
double alpha_right_derivative_at_one(const PressureModel& model,
                                     const WeightSpec& spec, double t);

struct CriticalExponent {
  double value = 1.0;
  bool infinite = false;
};

/// h_t = sup{h >= 1 : α_t(h) < 0}: the root of α_t above 1 by bisection,
/// +∞ if α_t stays negative up to h_max, 1 if α_t'(1+) >= 0.
CriticalExponent critical_h(const PressureModel& model, const WeightSpec& spec,
                            double t, double h_max = 64.0);

enum class Regularity { Regular, Irregular, Boundary };
std::string to_string(Regularity r);

/// Sign of E[W_t log W_t] + λ'(1+) with a tie band.
Regularity classify_regularity(const PressureModel& model, const WeightSpec& spec,
                               double t);

/// -2 λ'(1+): when the Gaussian-driven process reaches the zero measure.
double lifetime(const PressureModel& model);

struct RegularityReport {
  std::string measure;
  std::string weights;
  double t = 0.0;
  std::vector<std::pair<double, double>> pressure_samples;
  std::vector<std::pair<double, double>> alpha_samples;
  CriticalExponent h_t;
  double lifetime = 0.0;
  Regularity classification = Regularity::Boundary;
  double derivative_estimate = 0.0;
  double derivative_tolerance = 0.0;
  bool regression_estimate = false;  // pressure came from finite data
};

RegularityReport regularity_report(const PressureModel& model, const WeightSpec& spec,
                                   double t, const std::vector<double>& h_values);

nlohmann::json to_json(const RegularityReport& report);

}  // namespace treecascade
