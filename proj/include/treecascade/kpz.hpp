#pragma once

#include <string>
#include <vector>

#include "treecascade/flow.hpp"
#include "treecascade/weight_process.hpp"

namespace treecascade {

/// φ_t(h) = h - log2 E[W_t^h], the KPZ map for the time-t weights.
double phi(const WeightSpec& spec, double t, double h);

/// d/dh φ_t(h) for Gaussian weights: 1 - t(2h - 1)/(2 ln 2).
double phi_derivative_gaussian(double t, double h);

/// Right-hand side of the Gaussian dimension ODE,
/// -d(1-d) / (2 ln 2 - t(2d - 1)).
double kpz_rate(double t, double d);

struct DimensionPath {
  double d0 = 0.0;
  std::vector<double> times;
  std::vector<double> d;
};

/// Fixed-step RK4 from d(0) = d0 to t_end (the last step is shortened to land
/// on t_end). Valid for t_end up to the lifetime 2 ln 2, where the solution
/// reaches 1 - sqrt(1 - d0).
DimensionPath kpz_ode_solve(double d0, double t_end, double step);

/// The root in [0, 1] of (t/2ln2) d² - (1 + t/2ln2) d + d0 = 0, i.e. the d
/// with φ_t(d) = d0 for Gaussian weights.
double kpz_closed_form(double d0, double t);

/// Ray sets given as cylinder predicates on path bits.
enum class RaySet {
  FullBoundary,
  EvenFree,  // 0 forced at every even position (positions counted from 1)
};

RaySet parse_ray_set(const std::string& name);
std::string to_string(RaySet k);
double ray_set_dimension(RaySet k);
bool ray_set_contains(RaySet k, int depth, std::uint64_t bits);

struct BoxCount {
  int scale_log2 = 0;  // boxes of side 2^(-scale_log2)
  std::uint64_t count = 0;
};

struct BoxDimension {
  double estimate = 0.0;
  double r2 = 0.0;
  std::vector<BoxCount> counts;
};

/// Covers the image of K's depth-n cylinders under the distribution function
/// of the normalized flow with dyadic intervals at each scale and regresses
/// log N(ε) on log(1/ε). Needs >= 3 scales and a strictly positive flow.
BoxDimension box_dimension_estimate(const Flow& snapshot, RaySet k,
                                    const std::vector<int>& scales_log2);

}  // namespace treecascade
