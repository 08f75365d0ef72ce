#pragma once

#include <string>

#include "treecascade/noise.hpp"

namespace treecascade {

enum class WeightKind { Gaussian, CompoundPoisson };

/// Independent-increment positive weight process W_t with W_0 = 1.
///
/// Gaussian:        W_t = exp(B_t - t/2).
/// CompoundPoisson: W_t = exp(J_1 + ... + J_{N_t} - λ t (E[e^J] - 1)), with
///                  N_t Poisson(λ t) and J ~ Normal(jump_mean, jump_sd).
///
/// `compensated = false` drops the mean-one correction. It exists only to
/// build adversarial controls; E[W_t] = 1 fails for such specs.
struct WeightSpec {
  WeightKind kind = WeightKind::Gaussian;
  double rate = 1.0;
  double jump_mean = 0.0;
  double jump_sd = 0.3;
  bool compensated = true;

  static WeightSpec gaussian() { return {}; }
  static WeightSpec compound_poisson(double rate = 1.0, double jump_mean = 0.0,
                                     double jump_sd = 0.3) {
    return {WeightKind::CompoundPoisson, rate, jump_mean, jump_sd, true};
  }
  static WeightSpec gaussian_uncompensated() {
    WeightSpec s;
    s.compensated = false;
    return s;
  }

  void validate() const;
  std::string name() const;

  friend bool operator==(const WeightSpec&, const WeightSpec&) = default;
};

/// E[W_t^h]. Both built-in kinds have all real moments finite; non-finite h
/// throws std::domain_error.
double moment(const WeightSpec& spec, double t, double h);

/// E[W_{t,t+s}^h] for the increment W_{t+s}/W_t.
double increment_moment(const WeightSpec& spec, double t, double s, double h);

/// d/dh log E[W_t^h] at h.
double log_moment_derivative(const WeightSpec& spec, double t, double h);

/// E[W_t log W_t] (nonnegative for compensated specs).
double w_log_w(const WeightSpec& spec, double t);

/// log W_{t,t+s}, drawn deterministically from the key. The law depends only
/// on s for the built-in kinds; t is part of the interface for kinds with
/// non-stationary increments.
double sample_log_increment(const WeightSpec& spec, double t, double s,
                            const VertexNoiseKey& key);

/// Draws from an already-seeded stream (the engine's per-vertex fast path).
double sample_log_increment(const WeightSpec& spec, double t, double s,
                            NoiseStream& rng);

inline double sample_increment(const WeightSpec& spec, double t, double s,
                               const VertexNoiseKey& key) {
  return std::exp(sample_log_increment(spec, t, s, key));
}

}  // namespace treecascade
