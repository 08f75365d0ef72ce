#include "treecascade/cascade.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "treecascade/parallel.hpp"
#include "treecascade/stats.hpp"

namespace treecascade {

namespace {

// Leaf masses base(v)·exp(Σ log weights on the root path), then bottom-up sums.
// `scratch` receives the cumulative log path products.
void fill_cascade(std::span<const double> base, int depth,
                  std::span<const double> log_weights, std::vector<double>& out,
                  std::vector<double>& scratch) {
  const std::size_t n = vertex_count(depth);
  out.resize(n);
  scratch.resize(n);
  scratch[0] = 0.0;
  for (std::size_t i = 1; i < n; ++i)
    scratch[i] = scratch[(i - 1) / 2] + log_weights[i];
  const std::size_t first_leaf = level_offset(depth);
  for (std::size_t i = first_leaf; i < n; ++i)
    out[i] = base[i] * std::exp(scratch[i]);
  for (std::size_t i = first_leaf; i-- > 0;) out[i] = out[2 * i + 1] + out[2 * i + 2];
}

void check_weights_size(const Flow& base, std::size_t size) {
  if (size != base.size())
    throw std::invalid_argument("cascade: weight array does not match depth");
}

}  // namespace

Flow cascade_log(const Flow& base, std::span<const double> log_weights) {
  check_weights_size(base, log_weights.size());
  std::vector<double> out, scratch;
  fill_cascade(base.masses(), base.depth(), log_weights, out, scratch);
  return Flow(base.depth(), std::move(out));
}

Flow cascade_static(const Flow& base, std::span<const double> weights) {
  check_weights_size(base, weights.size());
  std::vector<double> logs(weights.size(), 0.0);
  for (std::size_t i = 1; i < weights.size(); ++i) {
    if (!(weights[i] > 0.0) || !std::isfinite(weights[i]))
      throw std::invalid_argument("cascade_static: weights must be positive");
    logs[i] = std::log(weights[i]);
  }
  return cascade_log(base, logs);
}

std::vector<double> uniform_grid(double t_end, double step) {
  if (!(t_end >= 0.0) || !std::isfinite(t_end))
    throw std::invalid_argument("uniform_grid: t_end must be >= 0");
  if (!(step > 0.0)) throw std::invalid_argument("uniform_grid: step must be > 0");
  const auto intervals =
      static_cast<std::size_t>(std::floor(t_end / step * (1.0 + 1e-12) + 1e-9));
  std::vector<double> grid(intervals + 1);
  for (std::size_t k = 0; k <= intervals; ++k) grid[k] = static_cast<double>(k) * step;
  return grid;
}

void validate_grid(std::span<const double> grid) {
  if (grid.empty() || grid.front() != 0.0)
    throw std::invalid_argument("time grid must start at 0");
  for (std::size_t k = 1; k < grid.size(); ++k)
    if (!(grid[k] > grid[k - 1]) || !std::isfinite(grid[k]))
      throw std::invalid_argument("time grid must be strictly increasing");
}

std::size_t CascadePath::position_of_step(std::size_t grid_index) const {
  const auto it =
      std::lower_bound(snapshot_steps.begin(), snapshot_steps.end(), grid_index);
  if (it == snapshot_steps.end() || *it != grid_index)
    throw std::out_of_range("CascadePath: no snapshot stored at that grid index");
  return static_cast<std::size_t>(it - snapshot_steps.begin());
}

void add_step_log_increments(const WeightSpec& spec, std::span<const double> grid,
                             int depth, std::uint64_t seed, std::size_t step,
                             std::span<double> acc) {
  if (step + 1 >= grid.size())
    throw std::out_of_range("add_step_log_increments: step beyond grid");
  const double t = grid[step];
  const double s = grid[step + 1] - grid[step];
  const std::size_t n = vertex_count(depth);
  if (acc.size() < n) throw std::invalid_argument("add_step_log_increments: short buffer");
  for (std::size_t i = 1; i < n; ++i) {
    // Heap index i has global id i + 1.
    NoiseStream rng(VertexNoiseKey::digest(seed, i + 1, step));
    acc[i] += sample_log_increment(spec, t, s, rng);
  }
}

std::vector<double> path_log_increments(const WeightSpec& spec,
                                        std::span<const double> grid, int depth,
                                        std::uint64_t seed, std::size_t from,
                                        std::size_t to) {
  if (from > to || to >= grid.size())
    throw std::out_of_range("path_log_increments: bad step range");
  std::vector<double> acc(vertex_count(depth), 0.0);
  for (std::size_t k = from; k < to; ++k)
    add_step_log_increments(spec, grid, depth, seed, k, acc);
  return acc;
}

void stream_path(const Flow& base, const WeightSpec& spec,
                 std::span<const double> grid, int depth, std::uint64_t seed,
                 std::span<const std::size_t> visit_steps,
                 const PathVisitor& visit) {
  spec.validate();
  validate_grid(grid);
  if (depth < 0 || depth > base.depth())
    throw std::invalid_argument("simulate_path: depth exceeds the base flow's depth");
  if (!std::is_sorted(visit_steps.begin(), visit_steps.end()) ||
      std::adjacent_find(visit_steps.begin(), visit_steps.end()) != visit_steps.end())
    throw std::invalid_argument("simulate_path: snapshot steps must increase");
  if (!visit_steps.empty() && visit_steps.back() >= grid.size())
    throw std::out_of_range("simulate_path: snapshot step beyond grid");

  const Flow start = depth == base.depth() ? base : base.truncated(depth);
  std::vector<double> log_w(start.size(), 0.0);
  std::vector<double> masses, scratch;
  std::size_t next = 0;
  const std::size_t last = visit_steps.empty() ? 0 : visit_steps.back();
  for (std::size_t g = 0; g <= last && next < visit_steps.size(); ++g) {
    if (g == visit_steps[next]) {
      if (g == 0) {
        visit(g, start, log_w);
      } else {
        fill_cascade(start.masses(), depth, log_w, masses, scratch);
        const Flow snapshot(depth, std::move(masses));
        visit(g, snapshot, log_w);
        masses.clear();
      }
      ++next;
    }
    if (g < last) add_step_log_increments(spec, grid, depth, seed, g, log_w);
  }
}

CascadePath simulate_path(const Flow& base, const WeightSpec& spec,
                          std::vector<double> grid, int depth,
                          std::uint64_t seed, const PathOptions& options) {
  CascadePath path;
  path.depth = depth;
  path.spec = spec;
  path.seed = seed;
  path.grid = std::move(grid);
  if (options.snapshot_steps.empty()) {
    path.snapshot_steps.resize(path.grid.size());
    for (std::size_t k = 0; k < path.grid.size(); ++k) path.snapshot_steps[k] = k;
  } else {
    path.snapshot_steps = options.snapshot_steps;
  }
  path.snapshots.reserve(path.snapshot_steps.size());
  stream_path(base, spec, path.grid, depth, seed, path.snapshot_steps,
              [&](std::size_t, const Flow& snapshot, std::span<const double> log_w) {
                path.snapshots.push_back(snapshot);
                if (options.keep_weight_state)
                  path.log_weights.emplace_back(log_w.begin(), log_w.end());
              });
  return path;
}

Flow compose(const Flow& current, std::span<const double> log_increments) {
  return cascade_log(current, log_increments);
}

Flow compose(const Flow& current, const WeightSpec& spec, double t, double s,
             std::uint64_t seed, std::uint64_t step_index) {
  spec.validate();
  if (!(s >= 0.0)) throw std::invalid_argument("compose: duration must be >= 0");
  if (s == 0.0) return current;
  std::vector<double> log_inc(current.size(), 0.0);
  for (std::size_t i = 1; i < log_inc.size(); ++i) {
    NoiseStream rng(VertexNoiseKey::digest(seed, i + 1, step_index));
    log_inc[i] = sample_log_increment(spec, t, s, rng);
  }
  return cascade_log(current, log_inc);
}

Flow compose_along(const CascadePath& path, std::size_t from, std::size_t to) {
  if (from > to || to >= path.size())
    throw std::out_of_range("compose_along: bad snapshot positions");
  const auto inc = path_log_increments(path.spec, path.grid, path.depth, path.seed,
                                       path.snapshot_steps[from],
                                       path.snapshot_steps[to]);
  return compose(path.snapshots[from], inc);
}

ConvergenceTable convergence_probe(const Flow& base, const WeightSpec& spec,
                                   double t, std::vector<int> levels, double h,
                                   std::size_t replicas, std::uint64_t seed,
                                   const ConvergenceOptions& options) {
  if (!(h > 1.0 && h <= 2.0))
    throw std::invalid_argument("convergence_probe: h must lie in (1, 2]");
  if (levels.empty()) throw std::invalid_argument("convergence_probe: no levels");
  if (replicas < 2) throw std::invalid_argument("convergence_probe: need >= 2 replicas");
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  if (levels.front() < 0) throw std::invalid_argument("convergence_probe: negative level");
  const int deepest = levels.back() + 1;
  if (deepest > base.depth())
    throw std::invalid_argument("convergence_probe: base flow too shallow");
  spec.validate();

  const Flow start = base.truncated(deepest);
  const std::vector<double> grid = t > 0.0 ? std::vector<double>{0.0, t}
                                           : std::vector<double>{0.0};
  // gaps[r][j]: |S_{n+1} - S_n|^h for levels[j] = n in replica r.
  std::vector<std::vector<double>> gaps(replicas);
  parallel_for(replicas, options.threads, [&](std::size_t r) {
    std::vector<double> log_w(start.size(), 0.0);
    if (grid.size() > 1)
      add_step_log_increments(spec, grid, deepest, mix_seed(seed, r), 0, log_w);
    std::vector<double> masses, scratch;
    fill_cascade(start.masses(), deepest, log_w, masses, scratch);
    // Γ^(k)(root) = Σ_{|v|=k} Γ(v)·X(v); scratch holds log X(v).
    std::vector<double> level_sum(static_cast<std::size_t>(deepest) + 1, 0.0);
    for (int k = 0; k <= deepest; ++k) {
      double acc = 0.0;
      for (std::size_t i = level_offset(k); i < level_offset(k + 1); ++i)
        acc += start.masses()[i] * std::exp(scratch[i]);
      level_sum[static_cast<std::size_t>(k)] = acc;
    }
    auto& row = gaps[r];
    row.reserve(levels.size());
    for (int n : levels)
      row.push_back(std::pow(std::abs(level_sum[n + 1] - level_sum[n]), h));
  });

  ConvergenceTable table;
  table.t = t;
  table.h = h;
  const double wh = moment(spec, t, h);
  std::vector<double> xs, log_emp, log_shape;
  double log_ratio_sum = 0.0;
  std::size_t ratio_count = 0;
  for (std::size_t j = 0; j < levels.size(); ++j) {
    stats::RunningStats s;
    for (std::size_t r = 0; r < replicas; ++r) s.add(gaps[r][j]);
    ConvergenceRow row;
    row.level = levels[j];
    row.mean_abs_pow = s.mean();
    row.standard_error = s.standard_error();
    double level_pow = 0.0;
    for (double m : start.level(levels[j] + 1))
      if (m > 0.0) level_pow += std::pow(m, h);
    row.bound_shape = std::pow(wh, levels[j] + 1) * level_pow;
    if (row.mean_abs_pow > 0.0 && row.bound_shape > 0.0) {
      xs.push_back(levels[j]);
      log_emp.push_back(std::log(row.mean_abs_pow));
      log_shape.push_back(std::log(row.bound_shape));
      log_ratio_sum += log_emp.back() - log_shape.back();
      ++ratio_count;
    }
    table.rows.push_back(row);
  }
  table.fitted_constant = ratio_count ? std::exp(log_ratio_sum / ratio_count) : 0.0;
  if (xs.size() >= 2) {
    table.empirical_slope = stats::linear_fit(xs, log_emp).slope;
    table.bound_slope = stats::linear_fit(xs, log_shape).slope;
  } else {
    table.empirical_slope = table.bound_slope = std::nan("");
  }
  for (auto& row : table.rows) {
    row.fitted_bound = table.fitted_constant * row.bound_shape;
    const double lower = row.mean_abs_pow - 1.96 * row.standard_error;
    row.flagged = ratio_count > 0 && lower > options.flag_factor * row.fitted_bound;
  }
  return table;
}

}  // namespace treecascade
