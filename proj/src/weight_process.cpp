#include "treecascade/weight_process.hpp"

#include <cmath>
#include <stdexcept>

namespace treecascade {

std::uint64_t NoiseStream::poisson(double mean) {
  if (!(mean >= 0.0)) throw std::invalid_argument("poisson: negative mean");
  if (mean == 0.0) return 0;
  if (mean > 500.0)
    throw std::domain_error("poisson: mean too large for inversion sampler");
  const double u = uniform();
  double p = std::exp(-mean);
  double cdf = p;
  std::uint64_t k = 0;
  while (u > cdf && p > 0.0) {
    ++k;
    p *= mean / static_cast<double>(k);
    cdf += p;
  }
  return k;
}

void WeightSpec::validate() const {
  if (kind == WeightKind::CompoundPoisson) {
    if (!(rate > 0.0) || !std::isfinite(rate))
      throw std::invalid_argument("WeightSpec: rate must be positive");
    if (!std::isfinite(jump_mean))
      throw std::invalid_argument("WeightSpec: jump_mean must be finite");
    if (!(jump_sd >= 0.0) || !std::isfinite(jump_sd))
      throw std::invalid_argument("WeightSpec: jump_sd must be >= 0");
  }
}

std::string WeightSpec::name() const {
  std::string n = kind == WeightKind::Gaussian ? "gaussian" : "compound_poisson";
  if (!compensated) n += "_uncompensated";
  return n;
}

namespace {

void check_time(double t) {
  if (!(t >= 0.0) || !std::isfinite(t))
    throw std::invalid_argument("weight process: time must be finite and >= 0");
}

// log E[e^{hJ}] for the Normal jump law.
double jump_cumulant(const WeightSpec& s, double h) {
  return h * s.jump_mean + 0.5 * h * h * s.jump_sd * s.jump_sd;
}

// Per-unit-time drift subtracted from log W to make E[W_t] = 1.
double compensator(const WeightSpec& s) {
  if (!s.compensated) return 0.0;
  if (s.kind == WeightKind::Gaussian) return 0.5;
  return s.rate * std::expm1(jump_cumulant(s, 1.0));
}

// log E[W_t^h] / t.
double log_moment_rate(const WeightSpec& s, double h) {
  if (s.kind == WeightKind::Gaussian) return 0.5 * h * h - h * compensator(s);
  return s.rate * std::expm1(jump_cumulant(s, h)) - h * compensator(s);
}

}  // namespace

double moment(const WeightSpec& spec, double t, double h) {
  check_time(t);
  if (!std::isfinite(h))
    throw std::domain_error("moment: exponent outside the finite-moment domain");
  if (t == 0.0) return 1.0;
  if (spec.kind == WeightKind::Gaussian && spec.compensated)
    return std::exp(t * h * (h - 1.0) / 2.0);
  return std::exp(t * log_moment_rate(spec, h));
}

double increment_moment(const WeightSpec& spec, double t, double s, double h) {
  check_time(t);
  return moment(spec, s, h);
}

double log_moment_derivative(const WeightSpec& spec, double t, double h) {
  check_time(t);
  if (!std::isfinite(h))
    throw std::domain_error("log_moment_derivative: non-finite exponent");
  if (spec.kind == WeightKind::Gaussian) return t * (h - compensator(spec));
  const double jump_slope = spec.jump_mean + h * spec.jump_sd * spec.jump_sd;
  return t * (spec.rate * jump_slope * std::exp(jump_cumulant(spec, h)) -
              compensator(spec));
}

double w_log_w(const WeightSpec& spec, double t) {
  // d/dh E[W^h] at h = 1 equals E[W] times the log-moment slope.
  return moment(spec, t, 1.0) * log_moment_derivative(spec, t, 1.0);
}

double sample_log_increment(const WeightSpec& spec, double t, double s,
                            const VertexNoiseKey& key) {
  NoiseStream rng(key);
  return sample_log_increment(spec, t, s, rng);
}

double sample_log_increment(const WeightSpec& spec, double t, double s,
                            NoiseStream& rng) {
  check_time(t);
  if (!(s >= 0.0) || !std::isfinite(s))
    throw std::invalid_argument("sample_increment: duration must be >= 0");
  if (s == 0.0) return 0.0;
  if (spec.kind == WeightKind::Gaussian)
    return std::sqrt(s) * rng.normal() - compensator(spec) * s;
  double jumps = 0.0;
  const std::uint64_t count = rng.poisson(spec.rate * s);
  for (std::uint64_t i = 0; i < count; ++i)
    jumps += spec.jump_mean + spec.jump_sd * rng.normal();
  return jumps - compensator(spec) * s;
}

}  // namespace treecascade
