#include "treecascade/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "treecascade/stats.hpp"

namespace treecascade {

std::string to_string(TransportMethod m) {
  switch (m) {
    case TransportMethod::TreeFormula: return "TreeFormula";
    case TransportMethod::LpOracle: return "LpOracle";
    case TransportMethod::CouplingBound: return "CouplingBound";
  }
  return "?";
}

namespace {

constexpr double kNormalizationTolerance = 1e-12;

void check_pair(const Flow& mu, const Flow& nu, const char* op) {
  if (mu.depth() != nu.depth())
    throw std::invalid_argument(std::string(op) + ": flows have different depths");
  for (const Flow* f : {&mu, &nu})
    if (std::abs(f->root_mass() - 1.0) > kNormalizationTolerance)
      throw std::invalid_argument(std::string(op) + ": flows must be normalized");
}

// Tree formula on raw masses, each side scaled by its own factor.
double tree_distance(std::span<const double> a, double scale_a,
                     std::span<const double> b, double scale_b, int depth) {
  double total = 0.0;
  for (int k = 1; k <= depth; ++k) {
    double level = 0.0;
    for (std::size_t i = level_offset(k); i < level_offset(k + 1); ++i)
      level += std::abs(a[i] * scale_a - b[i] * scale_b);
    total += std::ldexp(level, -(k + 1));
  }
  return total;
}

}  // namespace

TransportResult wasserstein_exact(const Flow& mu, const Flow& nu) {
  check_pair(mu, nu, "wasserstein_exact");
  return {tree_distance(mu.masses(), 1.0, nu.masses(), 1.0, mu.depth()),
          TransportMethod::TreeFormula, std::ldexp(1.0, -mu.depth())};
}

double min_cost_transport(const std::vector<double>& supply,
                          const std::vector<double>& demand,
                          const std::vector<double>& cost) {
  const std::size_t n = supply.size();
  const std::size_t m = demand.size();
  if (cost.size() != n * m) throw std::invalid_argument("min_cost_transport: cost shape");
  double total_supply = 0.0;
  for (double s : supply) {
    if (s < 0.0) throw std::invalid_argument("min_cost_transport: negative supply");
    total_supply += s;
  }
  for (double d : demand)
    if (d < 0.0) throw std::invalid_argument("min_cost_transport: negative demand");
  for (double c : cost)
    if (c < 0.0) throw std::invalid_argument("min_cost_transport: negative cost");
  const double eps = 1e-15 * std::max(total_supply, 1.0);

  // Successive shortest paths. Nodes: 0 = source, 1..n supplies,
  // n+1..n+m demands, n+m+1 = sink. Supply→demand arcs are uncapacitated.
  const std::size_t nodes = n + m + 2;
  const std::size_t src = 0, sink = n + m + 1;
  std::vector<double> left(supply), need(demand);
  std::vector<double> flow(n * m, 0.0);
  std::vector<double> potential(nodes, 0.0), dist(nodes);
  std::vector<std::size_t> prev(nodes);
  std::vector<char> done(nodes);
  const double inf = std::numeric_limits<double>::infinity();
  double objective = 0.0;

  for (std::size_t guard = 0; guard < 4 * (n + 1) * (m + 1); ++guard) {
    double remaining = 0.0;
    for (double l : left) remaining += l;
    if (remaining <= eps) break;

    std::fill(dist.begin(), dist.end(), inf);
    std::fill(done.begin(), done.end(), 0);
    dist[src] = 0.0;
    auto relax = [&](std::size_t u, std::size_t v, double c) {
      const double reduced = std::max(0.0, c + potential[u] - potential[v]);
      if (dist[u] + reduced < dist[v]) {
        dist[v] = dist[u] + reduced;
        prev[v] = u;
      }
    };
    for (;;) {
      std::size_t u = nodes;
      for (std::size_t v = 0; v < nodes; ++v)
        if (!done[v] && dist[v] < inf && (u == nodes || dist[v] < dist[u])) u = v;
      if (u == nodes) break;
      done[u] = 1;
      if (u == src) {
        for (std::size_t i = 0; i < n; ++i)
          if (left[i] > eps) relax(src, 1 + i, 0.0);
      } else if (u <= n) {
        const std::size_t i = u - 1;
        for (std::size_t j = 0; j < m; ++j) relax(u, 1 + n + j, cost[i * m + j]);
      } else if (u < sink) {
        const std::size_t j = u - 1 - n;
        if (need[j] > eps) relax(u, sink, 0.0);
        for (std::size_t i = 0; i < n; ++i)
          if (flow[i * m + j] > eps) relax(u, 1 + i, -cost[i * m + j]);
      }
    }
    if (dist[sink] == inf) break;
    for (std::size_t v = 0; v < nodes; ++v)
      potential[v] += std::min(dist[v], dist[sink]);

    // Bottleneck along the path.
    double push = inf;
    for (std::size_t v = sink; v != src; v = prev[v]) {
      const std::size_t u = prev[v];
      if (u == src)
        push = std::min(push, left[v - 1]);
      else if (v == sink)
        push = std::min(push, need[u - 1 - n]);
      else if (u > n)  // demand → supply: undo flow on the reverse arc
        push = std::min(push, flow[(v - 1) * m + (u - 1 - n)]);
    }
    for (std::size_t v = sink; v != src; v = prev[v]) {
      const std::size_t u = prev[v];
      if (u == src) {
        left[v - 1] -= push;
      } else if (v == sink) {
        need[u - 1 - n] -= push;
      } else if (u <= n) {
        flow[(u - 1) * m + (v - 1 - n)] += push;
        objective += push * cost[(u - 1) * m + (v - 1 - n)];
      } else {
        flow[(v - 1) * m + (u - 1 - n)] -= push;
        objective -= push * cost[(v - 1) * m + (u - 1 - n)];
      }
    }
  }
  return objective;
}

TransportResult wasserstein_lp_oracle(const Flow& mu, const Flow& nu) {
  check_pair(mu, nu, "wasserstein_lp_oracle");
  const int depth = mu.depth();
  if (depth > 8)
    throw std::invalid_argument("wasserstein_lp_oracle: depth > 8 is too large");
  const std::size_t leaves = std::size_t{1} << depth;
  std::vector<double> cost(leaves * leaves, 0.0);
  const double floor = std::ldexp(1.0, -depth);
  for (std::size_t i = 0; i < leaves; ++i)
    for (std::size_t j = 0; j < leaves; ++j)
      if (i != j)
        cost[i * leaves + j] = ray_distance({depth, i}, {depth, j}) - floor;
  const auto a = mu.leaves();
  const auto b = nu.leaves();
  const double value = min_cost_transport({a.begin(), a.end()}, {b.begin(), b.end()}, cost);
  return {value, TransportMethod::LpOracle, floor};
}

TransportResult coupling_upper_bound(const Flow& mu, const Flow& nu) {
  check_pair(mu, nu, "coupling_upper_bound");
  const auto a = mu.masses();
  const auto b = nu.masses();
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!(a[i] > 0.0) || !(b[i] > 0.0))
      throw std::domain_error(
          "coupling_upper_bound: every vertex must carry positive mass in both flows");
  double total = 0.0;
  for (int k = 1; k <= mu.depth(); ++k) {
    double level = 0.0;
    for (std::size_t i = level_offset(k - 1); i < level_offset(k); ++i)
      level += b[i] * std::abs(b[2 * i + 1] / b[i] - a[2 * i + 1] / a[i]);
    total += std::ldexp(level, -k + 1);
  }
  return {total, TransportMethod::CouplingBound, std::ldexp(1.0, -mu.depth())};
}

std::vector<LagDistance> lag_distances(const CascadePath& path,
                                       std::size_t pair_budget,
                                       std::size_t replica) {
  if (path.size() < 20)
    throw std::invalid_argument("holder_exponent: path needs at least 20 snapshots");
  const double dt = path.grid.size() > 1 ? path.grid[1] - path.grid[0] : 0.0;
  for (std::size_t k = 1; k < path.grid.size(); ++k)
    if (std::abs((path.grid[k] - path.grid[k - 1]) - dt) > 1e-9 * dt)
      throw std::invalid_argument("holder_exponent: grid must be uniform");

  std::vector<double> inverse_root(path.size());
  for (std::size_t i = 0; i < path.size(); ++i)
    inverse_root[i] = 1.0 / path.snapshots[i].root_mass();
  std::map<std::size_t, std::size_t> position;
  for (std::size_t i = 0; i < path.size(); ++i) position[path.snapshot_steps[i]] = i;

  const std::size_t span = path.snapshot_steps.back() - path.snapshot_steps.front();
  std::vector<LagDistance> out;
  for (std::size_t lag = 1; lag <= span / 4; lag *= 2) {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t a = 0; a < path.size(); ++a) {
      auto it = position.find(path.snapshot_steps[a] + lag);
      if (it != position.end()) pairs.emplace_back(a, it->second);
    }
    std::size_t stride = 1;
    if (pair_budget > 0 && pairs.size() > pair_budget)
      stride = (pairs.size() + pair_budget - 1) / pair_budget;
    for (std::size_t p = 0; p < pairs.size(); p += stride) {
      const auto [a, b] = pairs[p];
      const double d = tree_distance(path.snapshots[a].masses(), inverse_root[a],
                                     path.snapshots[b].masses(), inverse_root[b],
                                     path.depth);
      out.push_back({lag, static_cast<double>(lag) * dt, replica, d});
    }
  }
  return out;
}

namespace {

struct MedianCurve {
  std::vector<double> log_lag;
  std::vector<double> log_median;
  std::vector<double> lags;
  std::vector<double> medians;
};

MedianCurve median_curve(const std::vector<LagDistance>& samples) {
  std::map<std::size_t, std::vector<double>> by_lag;
  std::map<std::size_t, double> lag_value;
  for (const auto& s : samples) {
    if (s.distance > 0.0) by_lag[s.lag_steps].push_back(std::log(s.distance));
    lag_value[s.lag_steps] = s.lag;
  }
  MedianCurve c;
  for (auto& [steps, logs] : by_lag) {
    const double med = stats::median(logs);
    c.lags.push_back(lag_value[steps]);
    c.medians.push_back(med);
    c.log_lag.push_back(std::log(lag_value[steps]));
    c.log_median.push_back(med);
  }
  return c;
}

}  // namespace

HolderFit holder_fit_from_samples(std::vector<LagDistance> samples,
                                  std::size_t replicas) {
  HolderFit fit;
  const MedianCurve pooled = median_curve(samples);
  fit.lags = pooled.lags;
  fit.median_log_distance = pooled.medians;
  fit.samples = std::move(samples);
  if (pooled.log_lag.size() < 2) {
    fit.degenerate = true;
    fit.slope = fit.intercept = fit.r2 = std::nan("");
    fit.ci_low = fit.ci_high = std::nan("");
    return fit;
  }
  const auto lf = stats::linear_fit(pooled.log_lag, pooled.log_median);
  fit.slope = lf.slope;
  fit.intercept = lf.intercept;
  fit.r2 = lf.r2;

  double half_width = 1.96 * lf.slope_se;
  if (replicas >= 2) {
    std::vector<std::vector<LagDistance>> per(replicas);
    for (const auto& s : fit.samples)
      if (s.replica < replicas) per[s.replica].push_back(s);
    stats::RunningStats slopes;
    for (const auto& rs : per) {
      const auto c = median_curve(rs);
      if (c.log_lag.size() >= 2) slopes.add(stats::linear_fit(c.log_lag, c.log_median).slope);
    }
    if (slopes.count() >= 2) half_width = 1.96 * slopes.standard_error();
  }
  fit.ci_low = fit.slope - half_width;
  fit.ci_high = fit.slope + half_width;
  return fit;
}

HolderFit holder_exponent(const std::vector<CascadePath>& paths,
                          std::size_t pair_budget) {
  if (paths.empty()) throw std::invalid_argument("holder_exponent: no paths");
  for (const auto& p : paths)
    if (p.spec.kind != WeightKind::Gaussian)
      throw std::invalid_argument("holder_exponent: Gaussian weights required");
  std::vector<LagDistance> samples;
  for (std::size_t r = 0; r < paths.size(); ++r) {
    auto part = lag_distances(paths[r], pair_budget, r);
    samples.insert(samples.end(), part.begin(), part.end());
  }
  return holder_fit_from_samples(std::move(samples), paths.size());
}

HolderFit holder_exponent(const CascadePath& path, std::size_t pair_budget) {
  if (path.spec.kind != WeightKind::Gaussian)
    throw std::invalid_argument("holder_exponent: Gaussian weights required");
  return holder_fit_from_samples(lag_distances(path, pair_budget, 0), 1);
}

nlohmann::json to_json(const HolderFit& fit) {
  nlohmann::json j;
  auto num = [](double x) -> nlohmann::json {
    return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr);
  };
  j["slope"] = num(fit.slope);
  j["intercept"] = num(fit.intercept);
  j["r2"] = num(fit.r2);
  j["ci95"] = {num(fit.ci_low), num(fit.ci_high)};
  j["degenerate"] = fit.degenerate;
  j["lags"] = fit.lags;
  j["median_log_distance"] = fit.median_log_distance;
  j["samples"] = fit.samples.size();
  return j;
}

}  // namespace treecascade
