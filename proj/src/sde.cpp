#include "treecascade/sde.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

#include "treecascade/parallel.hpp"
#include "treecascade/stats.hpp"

namespace treecascade {

namespace {

double level_overlap(const Flow& f, int k, double inv_root) {
  double acc = 0.0;
  for (double m : f.level(k)) {
    const double r = m * inv_root;
    acc += r * r;
  }
  return acc;
}

void require_gaussian(const CascadePath& path, const char* op) {
  if (path.spec.kind != WeightKind::Gaussian)
    throw std::invalid_argument(std::string(op) + ": Gaussian weights required");
}

}  // namespace

double overlap(const Flow& f) {
  const double root = f.root_mass();
  if (!(root > 0.0)) throw std::invalid_argument("overlap: root mass must be positive");
  const double inv = 1.0 / root;
  double total = 0.0;
  for (int k = 1; k <= f.depth(); ++k) total += level_overlap(f, k, inv);
  return total;
}

OverlapSeries overlap_series(const CascadePath& path) {
  OverlapSeries s;
  for (std::size_t i = 0; i < path.size(); ++i) {
    const Flow& f = path.snapshots[i];
    const double q = overlap(f);
    s.times.push_back(path.time(i));
    s.overlap.push_back(q);
    if (f.depth() > 0 && level_overlap(f, f.depth(), 1.0 / f.root_mass()) > 0.01 * q)
      s.tail_flag = true;
  }
  return s;
}

void QvAccumulator::add(double time, double root_mass, double q) {
  const double log_mass = std::log(root_mass);
  if (started_) {
    const double d = log_mass - last_log_mass_;
    realized_ += d * d;
    predicted_ += last_overlap_ * (time - last_time_);
  }
  started_ = true;
  last_time_ = time;
  last_log_mass_ = log_mass;
  last_overlap_ = q;
}

double QvAccumulator::relative_error() const {
  if (predicted_ == 0.0) return realized_ == 0.0 ? 0.0 : std::nan("");
  return (realized_ - predicted_) / predicted_;
}

QvComparison realized_vs_predicted_qv(const CascadePath& path) {
  require_gaussian(path, "realized_vs_predicted_qv");
  QvAccumulator acc;
  for (std::size_t i = 0; i < path.size(); ++i)
    acc.add(path.time(i), path.snapshots[i].root_mass(), overlap(path.snapshots[i]));
  return {acc.realized(), acc.predicted(), acc.relative_error()};
}

int bracket_rate(const VertexId& u, const VertexId& v) {
  if (u.is_ancestor_of(v) || v.is_ancestor_of(u))
    throw std::invalid_argument("bracket_rate: vertices must not be nested");
  return common_ancestor_depth(u, v);
}

double empirical_bracket(const CascadePath& path, const VertexId& u, const VertexId& v) {
  require_gaussian(path, "empirical_bracket");
  bracket_rate(u, v);  // validates the pair
  if (path.size() < 2) throw std::invalid_argument("empirical_bracket: need 2 snapshots");
  double acc = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) {
    const Flow& a = path.snapshots[i - 1];
    const Flow& b = path.snapshots[i];
    acc += std::log(b.mass(u) / a.mass(u)) * std::log(b.mass(v) / a.mass(v));
  }
  return acc / (path.time(path.size() - 1) - path.time(0));
}

ExplosionMonitor explosion_monitor(const CascadePath& path,
                                   const ExplosionThresholds& thresholds) {
  require_gaussian(path, "explosion_monitor");
  ExplosionMonitor mon;
  if (path.size() == 0) return mon;
  const double initial = path.snapshots.front().root_mass();
  double integral = 0.0;
  double prev_q = 0.0;
  for (std::size_t i = 0; i < path.size(); ++i) {
    const double q = overlap(path.snapshots[i]);
    if (i > 0) integral += 0.5 * (q + prev_q) * (path.time(i) - path.time(i - 1));
    prev_q = q;
    mon.times.push_back(path.time(i));
    mon.cumulative_overlap.push_back(integral);
    const bool flag = path.snapshots[i].root_mass() < thresholds.mass_fraction * initial &&
                      integral > thresholds.integral;
    mon.flags.push_back(flag);
    mon.exploded = mon.exploded || flag;
  }
  return mon;
}

GirsanovResult girsanov_check(const Flow& base, int depth, double t_end,
                              const VertexId& v, std::size_t replicas,
                              std::uint64_t seed, const GirsanovOptions& options) {
  if (depth > 4)
    throw std::invalid_argument("girsanov_check: depth > 4 (importance weights degenerate)");
  if (depth < 1 || depth > base.depth())
    throw std::invalid_argument("girsanov_check: depth out of range");
  if (v.depth < 1 || v.depth > depth)
    throw std::invalid_argument("girsanov_check: test vertex must lie in levels 1..depth");
  if (std::abs(base.root_mass() - 1.0) > 1e-12)
    throw std::invalid_argument("girsanov_check: base must be a probability measure");
  if (replicas < 2) throw std::invalid_argument("girsanov_check: need >= 2 replicas");

  GirsanovResult res;
  res.replicas = replicas;
  if (t_end == 0.0) return res;
  const auto grid = uniform_grid(t_end, options.step);
  if (grid.size() < 2 || std::abs(grid.back() - t_end) > 1e-9 * t_end)
    throw std::invalid_argument("girsanov_check: t_end must be a multiple of step");
  const auto spec = WeightSpec::gaussian();
  std::vector<std::size_t> all(grid.size());
  for (std::size_t k = 0; k < all.size(); ++k) all[k] = k;
  const std::size_t vi = v.heap_index();

  // Per replica: Γ_T(root), Γ_T·B_T(v), Γ_T·∫ Γ_s(v)/Γ_s(root) ds.
  std::vector<std::array<double, 3>> parts(replicas);
  parallel_for(replicas, options.threads, [&](std::size_t r) {
    double integral = 0.0, prev_ratio = 0.0, final_root = 0.0, brownian = 0.0;
    stream_path(base, spec, grid, depth, mix_seed(seed, r), all,
                [&](std::size_t g, const Flow& snap, std::span<const double> log_w) {
                  const double ratio = snap.masses()[vi] / snap.root_mass();
                  if (g > 0) integral += 0.5 * (ratio + prev_ratio) * (grid[g] - grid[g - 1]);
                  prev_ratio = ratio;
                  if (g + 1 == grid.size()) {
                    final_root = snap.root_mass();
                    brownian = log_w[vi] + 0.5 * grid[g];  // log W = B - t/2
                  }
                });
    parts[r] = {final_root, final_root * brownian, final_root * integral};
  });

  double sg = 0.0, sa = 0.0, sp = 0.0;
  for (const auto& p : parts) {
    sg += p[0];
    sa += p[1];
    sp += p[2];
  }
  res.tilted_mean = sa / sg;
  res.predicted_mean = sp / sg;
  const double ratio = (sa - sp) / sg;
  const double mean_g = sg / static_cast<double>(replicas);
  stats::RunningStats lin;
  for (const auto& p : parts) lin.add((p[1] - p[2]) - ratio * p[0]);
  res.standard_error = lin.standard_error() / mean_g;
  res.z = res.standard_error > 0.0 ? ratio / res.standard_error : 0.0;
  return res;
}

}  // namespace treecascade
