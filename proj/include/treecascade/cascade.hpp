#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "treecascade/flow.hpp"
#include "treecascade/weight_process.hpp"

namespace treecascade {

/// Finite-depth cascade Γ_W^(n): leaf masses Γ(v)·∏ W along the root path,
/// internal masses rebuilt by the flow condition. `weights` is heap ordered
/// with vertex_count(base.depth()) entries; the root entry is ignored.
Flow cascade_static(const Flow& base, std::span<const double> weights);

/// Same as cascade_static with the weights given as logs.
Flow cascade_log(const Flow& base, std::span<const double> log_weights);

/// 0, step, 2·step, ... up to t_end (t_end itself is included when it is a
/// multiple of step up to rounding).
std::vector<double> uniform_grid(double t_end, double step);

/// Checks that the grid starts at 0 and increases strictly.
void validate_grid(std::span<const double> grid);

/// One realization of Γ_t^(n) along a time grid.
///
/// The weight state is log W_t(v) per vertex. Grid interval k (from t_k to
/// t_{k+1}) draws its increments with noise keys (seed, v, k).
struct CascadePath {
  int depth = 0;
  WeightSpec spec;
  std::uint64_t seed = 0;
  std::vector<double> grid;
  std::vector<std::size_t> snapshot_steps;  // grid indices, increasing
  std::vector<Flow> snapshots;
  std::vector<std::vector<double>> log_weights;  // empty unless kept

  std::size_t size() const { return snapshots.size(); }
  double time(std::size_t i) const { return grid[snapshot_steps[i]]; }
  /// Position of a grid index among the snapshots; throws if not stored.
  std::size_t position_of_step(std::size_t grid_index) const;
};

struct PathOptions {
  std::vector<std::size_t> snapshot_steps;  // empty: every grid point
  bool keep_weight_state = true;
};

/// Called once per requested grid index with the snapshot and the weight
/// state log W_t(v).
using PathVisitor = std::function<void(std::size_t grid_index, const Flow& snapshot,
                                       std::span<const double> log_weights)>;

/// Evolves the weight state along the grid and hands each requested snapshot
/// to the visitor without storing it. Snapshots equal
/// cascade_log(base truncated to depth, state) exactly.
void stream_path(const Flow& base, const WeightSpec& spec,
                 std::span<const double> grid, int depth, std::uint64_t seed,
                 std::span<const std::size_t> visit_steps,
                 const PathVisitor& visit);

CascadePath simulate_path(const Flow& base, const WeightSpec& spec,
                          std::vector<double> grid, int depth,
                          std::uint64_t seed, const PathOptions& options = {});

/// Adds the draws of grid interval `step` (t_step to t_{step+1}) to `acc`.
void add_step_log_increments(const WeightSpec& spec, std::span<const double> grid,
                             int depth, std::uint64_t seed, std::size_t step,
                             std::span<double> acc);

/// log W_{t_from, t_to}(v) regenerated from the path's noise keys.
std::vector<double> path_log_increments(const WeightSpec& spec,
                                        std::span<const double> grid, int depth,
                                        std::uint64_t seed, std::size_t from,
                                        std::size_t to);

/// C(current; W) with W = exp(log_increments).
Flow compose(const Flow& current, std::span<const double> log_increments);

/// C(current; W_{t,t+s}) with one fresh increment of duration s per vertex,
/// keyed by (seed, v, step_index).
Flow compose(const Flow& current, const WeightSpec& spec, double t, double s,
             std::uint64_t seed, std::uint64_t step_index = 0);

/// Composes snapshot `from` of a path with the path's own increments up to
/// snapshot `to` (both snapshot positions).
Flow compose_along(const CascadePath& path, std::size_t from, std::size_t to);

struct ConvergenceRow {
  int level = 0;                // n: compares truncations n and n+1
  double mean_abs_pow = 0.0;    // E|Γ^(n+1)(root) - Γ^(n)(root)|^h
  double standard_error = 0.0;
  double bound_shape = 0.0;     // E[W_t^h]^(n+1) · Σ_{|v|=n+1} Γ(v)^h
  double fitted_bound = 0.0;    // fitted_constant · bound_shape
  bool flagged = false;
};

struct ConvergenceTable {
  double t = 0.0;
  double h = 0.0;
  double fitted_constant = 0.0;
  double empirical_slope = 0.0;  // per level, natural log
  double bound_slope = 0.0;
  std::vector<ConvergenceRow> rows;
};

struct ConvergenceOptions {
  double flag_factor = 4.0;   // flag when the lower 95% bound exceeds this × fit
  int threads = 1;
};

/// Empirical L^h gaps between consecutive truncations of Γ_t(root), from
/// coupled refinements (one simulation at the deepest level per replica).
ConvergenceTable convergence_probe(const Flow& base, const WeightSpec& spec,
                                   double t, std::vector<int> levels, double h,
                                   std::size_t replicas, std::uint64_t seed,
                                   const ConvergenceOptions& options = {});

}  // namespace treecascade
