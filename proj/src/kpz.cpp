#include "treecascade/kpz.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "treecascade/stats.hpp"

namespace treecascade {

namespace {
constexpr double kTwoLn2 = 2.0 * std::numbers::ln2;
}

double phi(const WeightSpec& spec, double t, double h) {
  if (!(h >= 0.0 && h <= 1.0)) throw std::domain_error("phi: h must lie in [0, 1]");
  return h - std::log2(moment(spec, t, h));
}

double phi_derivative_gaussian(double t, double h) {
  return 1.0 - t * (2.0 * h - 1.0) / kTwoLn2;
}

double kpz_rate(double t, double d) {
  const double denom = kTwoLn2 - t * (2.0 * d - 1.0);
  if (!(denom > 1e-12))
    throw std::domain_error("kpz_ode_solve: denominator vanished");
  return -d * (1.0 - d) / denom;
}

DimensionPath kpz_ode_solve(double d0, double t_end, double step) {
  if (!(d0 >= 0.0 && d0 <= 1.0)) throw std::invalid_argument("kpz_ode_solve: d0 outside [0, 1]");
  if (!(t_end >= 0.0) || t_end > kTwoLn2 * (1.0 + 1e-12))
    throw std::invalid_argument("kpz_ode_solve: t_end must lie in [0, 2 ln 2]");
  if (!(step > 0.0)) throw std::invalid_argument("kpz_ode_solve: step must be positive");
  if (t_end > 0.0 && step > t_end)
    throw std::invalid_argument("kpz_ode_solve: step exceeds t_end");
  DimensionPath path;
  path.d0 = d0;
  path.times.push_back(0.0);
  path.d.push_back(d0);
  const auto steps = static_cast<std::size_t>(std::ceil(t_end / step - 1e-9));
  double d = d0;
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * step;
    const double h = std::min(step, t_end - t);
    const double k1 = kpz_rate(t, d);
    const double k2 = kpz_rate(t + h / 2, d + h / 2 * k1);
    const double k3 = kpz_rate(t + h / 2, d + h / 2 * k2);
    const double k4 = kpz_rate(t + h, d + h * k3);
    d += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    path.times.push_back(k + 1 == steps ? t_end : t + h);
    path.d.push_back(d);
  }
  return path;
}

double kpz_closed_form(double d0, double t) {
  if (!(d0 >= 0.0 && d0 <= 1.0)) throw std::invalid_argument("kpz_closed_form: d0 outside [0, 1]");
  if (!(t >= 0.0) || t > kTwoLn2 * (1.0 + 1e-12))
    throw std::invalid_argument("kpz_closed_form: t must lie in [0, 2 ln 2]");
  const double a = t / kTwoLn2;
  const double disc = (1.0 + a) * (1.0 + a) - 4.0 * a * d0;
  if (disc < 0.0) throw std::domain_error("kpz_closed_form: negative discriminant");
  // Smaller root in the cancellation-free form; equals d0 at a = 0. The image
  // dimension never exceeds d0, which also absorbs rounding at d0 = 1.
  return std::min(d0, 2.0 * d0 / ((1.0 + a) + std::sqrt(disc)));
}

RaySet parse_ray_set(const std::string& name) {
  if (name == "FULL" || name == "full") return RaySet::FullBoundary;
  if (name == "EVEN_FREE" || name == "even_free") return RaySet::EvenFree;
  throw std::invalid_argument("unknown ray set: " + name);
}

std::string to_string(RaySet k) {
  return k == RaySet::FullBoundary ? "FULL" : "EVEN_FREE";
}

double ray_set_dimension(RaySet k) { return k == RaySet::FullBoundary ? 1.0 : 0.5; }

bool ray_set_contains(RaySet k, int depth, std::uint64_t bits) {
  if (k == RaySet::FullBoundary) return true;
  // Position p (1-based from the root) is bit depth - p.
  for (int p = 2; p <= depth; p += 2)
    if ((bits >> (depth - p)) & 1) return false;
  return true;
}

namespace {

std::vector<std::uint64_t> ray_set_leaves(RaySet k, int depth) {
  std::vector<std::uint64_t> out;
  if (k == RaySet::FullBoundary) {
    out.resize(std::size_t{1} << depth);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = i;
    return out;
  }
  const int free_bits = (depth + 1) / 2;
  out.reserve(std::size_t{1} << free_bits);
  for (std::uint64_t c = 0; c < (std::uint64_t{1} << free_bits); ++c) {
    // Free positions 1, 3, 5, ...; the first free position is the most
    // significant bit of c so the leaves come out in increasing order.
    std::uint64_t bits = 0;
    for (int j = 0; j < free_bits; ++j) {
      const int position = 2 * j + 1;
      if ((c >> (free_bits - 1 - j)) & 1) bits |= std::uint64_t{1} << (depth - position);
    }
    out.push_back(bits);
  }
  return out;
}

}  // namespace

BoxDimension box_dimension_estimate(const Flow& snapshot, RaySet k,
                                    const std::vector<int>& scales_log2) {
  if (scales_log2.size() < 3)
    throw std::invalid_argument("box_dimension_estimate: need at least 3 scales");
  for (double m : snapshot.leaves())
    if (!(m > 0.0))
      throw std::invalid_argument("box_dimension_estimate: flow must be strictly positive");
  for (int m : scales_log2)
    if (m < 0 || m > 52) throw std::invalid_argument("box_dimension_estimate: bad scale");

  const auto cdf = leaf_cdf(snapshot);
  const auto leaves = ray_set_leaves(k, snapshot.depth());
  BoxDimension out;
  std::vector<double> xs, ys;
  for (int m : scales_log2) {
    const double boxes = std::ldexp(1.0, m);
    std::uint64_t count = 0;
    std::int64_t last = -1;
    for (std::uint64_t leaf : leaves) {
      const double a = cdf[leaf] * boxes;
      const double b = cdf[leaf + 1] * boxes;
      if (!(b > a)) continue;
      auto first = static_cast<std::int64_t>(std::floor(a));
      const auto final = static_cast<std::int64_t>(std::ceil(b)) - 1;
      first = std::max(first, last + 1);
      if (final >= first) {
        count += static_cast<std::uint64_t>(final - first + 1);
        last = final;
      }
    }
    out.counts.push_back({m, count});
    xs.push_back(m * std::numbers::ln2);
    ys.push_back(std::log(static_cast<double>(count)));
  }
  const auto fit = stats::linear_fit(xs, ys);
  out.estimate = fit.slope;
  out.r2 = fit.r2;
  return out;
}

}  // namespace treecascade
