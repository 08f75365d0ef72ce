#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "json.hpp"

#include "treecascade/cascade.hpp"
#include "treecascade/flow.hpp"

namespace treecascade {

enum class TransportMethod { TreeFormula, LpOracle, CouplingBound };
std::string to_string(TransportMethod m);

struct TransportResult {
  double value = 0.0;
  TransportMethod method = TransportMethod::TreeFormula;
  double truncation_bound = 0.0;  // additive error ceiling from finite depth
};

/// W1 for the depth-n tree path metric with edge weight 2^(-(|v|+1)) into v:
/// Σ_{1<=|v|<=n} 2^(-(|v|+1)) |μ(v) - ν(v)|. Distinct depth-n cylinders that
/// meet at depth p are 2^(-p) - 2^(-n) apart, so the boundary distance is
/// recovered up to truncation_bound = 2^(-n).
TransportResult wasserstein_exact(const Flow& mu, const Flow& nu);

/// Discrete optimal transport between the 2^n leaf masses under the same
/// depth-n tree path metric, solved exactly as a min-cost flow. Depth <= 8.
TransportResult wasserstein_lp_oracle(const Flow& mu, const Flow& nu);

/// Finite-depth partial sum of the standard-coupling bound
/// Σ_k 2^(-k+1) Σ_{|v|=k-1} ν(v) |ν(v_L)/ν(v) - μ(v_L)/μ(v)|.
/// Requires every vertex mass of both flows to be strictly positive.
TransportResult coupling_upper_bound(const Flow& mu, const Flow& nu);

/// Minimum-cost transport between two nonnegative vectors with equal totals.
/// Exposed for testing; `cost` is row-major supply × demand.
double min_cost_transport(const std::vector<double>& supply,
                          const std::vector<double>& demand,
                          const std::vector<double>& cost);

struct LagDistance {
  std::size_t lag_steps = 0;
  double lag = 0.0;
  std::size_t replica = 0;
  double distance = 0.0;
};

struct HolderFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  double ci_low = 0.0;   // 95% interval from the spread of per-replica slopes
  double ci_high = 0.0;
  bool degenerate = false;
  std::vector<double> lags;               // distinct lags used
  std::vector<double> median_log_distance;  // per lag, pooled over replicas
  std::vector<LagDistance> samples;
};

/// Dyadic-lag distances between normalized snapshots of a path. Lags are
/// 1, 2, 4, ... grid steps; at most `pair_budget` pairs per lag (evenly
/// spaced), all pairs if 0.
std::vector<LagDistance> lag_distances(const CascadePath& path,
                                       std::size_t pair_budget = 0,
                                       std::size_t replica = 0);

/// Regression of the per-lag median log distance on log lag, pooled over the
/// given paths. Paths need at least 20 snapshots on a uniform grid.
HolderFit holder_exponent(const std::vector<CascadePath>& paths,
                          std::size_t pair_budget = 0);
HolderFit holder_exponent(const CascadePath& path, std::size_t pair_budget = 0);

/// Same estimate from precomputed samples (lets callers stream replicas).
HolderFit holder_fit_from_samples(std::vector<LagDistance> samples,
                                  std::size_t replicas);

nlohmann::json to_json(const HolderFit& fit);

}  // namespace treecascade
