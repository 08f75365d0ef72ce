#pragma once

#include <cstdint>
#include <vector>

#include "treecascade/cascade.hpp"
#include "treecascade/flow.hpp"

namespace treecascade {

/// Q = Σ_{1<=|v|<=n} (Γ(v)/Γ(root))², the expected truncated meeting depth of
/// two independent rays drawn from Γ*. Rate of the quadratic variation of
/// log Γ_t(root).
double overlap(const Flow& f);

struct OverlapSeries {
  std::vector<double> times;
  std::vector<double> overlap;
  bool tail_flag = false;  // deepest level contributed > 1% at some time
};

OverlapSeries overlap_series(const CascadePath& path);

/// Streams (time, root mass, overlap) and accumulates the realized and the
/// predicted quadratic variation of log Γ(root) with left-point sums.
class QvAccumulator {
 public:
  void add(double time, double root_mass, double overlap);
  double realized() const { return realized_; }
  double predicted() const { return predicted_; }
  double relative_error() const;

 private:
  bool started_ = false;
  double last_time_ = 0.0;
  double last_log_mass_ = 0.0;
  double last_overlap_ = 0.0;
  double realized_ = 0.0;
  double predicted_ = 0.0;
};

struct QvComparison {
  double realized = 0.0;
  double predicted = 0.0;
  double relative_error = 0.0;  // (realized - predicted) / predicted; 0 if both 0
};

/// Requires Gaussian weights: jumps add a discontinuous bracket component.
QvComparison realized_vs_predicted_qv(const CascadePath& path);

/// Analytic covariation rate of log Γ(u) and log Γ(v) for non-nested vertices.
int bracket_rate(const VertexId& u, const VertexId& v);

/// Σ_k Δ log Γ(u) · Δ log Γ(v) / (t_end - t_0) over the path's snapshots.
double empirical_bracket(const CascadePath& path, const VertexId& u, const VertexId& v);

struct ExplosionMonitor {
  std::vector<double> times;
  std::vector<double> cumulative_overlap;  // trapezoid ∫_0^t Q_s ds
  std::vector<bool> flags;
  bool exploded = false;
};

struct ExplosionThresholds {
  double mass_fraction = 1e-6;
  double integral = 10.0;
};

/// Flags grid times where the root mass has fallen below mass_fraction of its
/// initial value while the accumulated overlap exceeds `integral`. This is a
/// qualitative monitor; finite depth cannot witness the divergence itself.
ExplosionMonitor explosion_monitor(const CascadePath& path,
                                   const ExplosionThresholds& thresholds = {});

struct GirsanovResult {
  double tilted_mean = 0.0;     // E[B_T(v) Γ_T(root)] / E[Γ_T(root)]
  double predicted_mean = 0.0;  // E[Γ_T(root) ∫ Γ_s(v)/Γ_s(root) ds] / E[Γ_T(root)]
  double standard_error = 0.0;  // of the difference
  double z = 0.0;
  std::size_t replicas = 0;
};

struct GirsanovOptions {
  double step = 1e-3;  // grid for the drift integral
  int threads = 1;
};

/// Finite-level Girsanov identity under the tilt by Γ_T(root): the drift of
/// B(v) is Γ_s(v)/Γ_s(root). `base` must be normalized; depth <= 4.
GirsanovResult girsanov_check(const Flow& base, int depth, double t_end,
                              const VertexId& v, std::size_t replicas,
                              std::uint64_t seed, const GirsanovOptions& options = {});

}  // namespace treecascade
