#include "treecascade/flow.hpp"

#include <cmath>
#include <stdexcept>

namespace treecascade {

Flow::Flow(int depth, std::vector<double> heap_masses)
    : depth_(depth), mass_(std::move(heap_masses)) {
  if (depth < 0 || depth > kHardMaxDepth)
    throw std::invalid_argument("Flow: depth out of range");
  if (mass_.size() != vertex_count(depth))
    throw std::invalid_argument("Flow: mass array does not match depth");
  for (double m : mass_)
    if (!std::isfinite(m)) throw std::invalid_argument("Flow: non-finite mass");
}

Flow Flow::from_levels(const std::vector<std::vector<double>>& levels) {
  if (levels.empty()) throw std::invalid_argument("Flow: no levels");
  const int depth = static_cast<int>(levels.size()) - 1;
  std::vector<double> heap;
  heap.reserve(vertex_count(depth));
  for (int k = 0; k <= depth; ++k) {
    if (levels[k].size() != (std::size_t{1} << k))
      throw std::invalid_argument("Flow: level " + std::to_string(k) +
                                  " must have 2^k entries");
    heap.insert(heap.end(), levels[k].begin(), levels[k].end());
  }
  return Flow(depth, std::move(heap));
}

Flow Flow::from_leaves(std::span<const double> leaves) {
  const std::size_t n = leaves.size();
  if (n == 0 || (n & (n - 1)) != 0)
    throw std::invalid_argument("Flow: leaf count must be a power of two");
  const int depth = std::bit_width(n) - 1;
  std::vector<double> heap(vertex_count(depth));
  std::copy(leaves.begin(), leaves.end(), heap.begin() + level_offset(depth));
  for (std::size_t i = level_offset(depth); i-- > 0;)
    heap[i] = heap[2 * i + 1] + heap[2 * i + 2];
  return Flow(depth, std::move(heap));
}

double Flow::mass(const VertexId& v) const {
  if (v.depth > depth_) throw std::out_of_range("Flow: vertex below depth");
  return mass_[v.heap_index()];
}

std::span<const double> Flow::level(int k) const {
  if (k < 0 || k > depth_) throw std::out_of_range("Flow: level out of range");
  return std::span<const double>(mass_).subspan(level_offset(k),
                                                std::size_t{1} << k);
}

Flow Flow::truncated(int depth) const {
  if (depth < 0 || depth > depth_)
    throw std::invalid_argument("Flow: truncation depth out of range");
  return Flow(depth, std::vector<double>(mass_.begin(),
                                         mass_.begin() + vertex_count(depth)));
}

Flow Flow::restricted(const VertexId& v) const {
  if (v.depth > depth_) throw std::out_of_range("Flow: vertex below depth");
  const int sub_depth = depth_ - v.depth;
  std::vector<double> heap;
  heap.reserve(vertex_count(sub_depth));
  for (int k = 0; k <= sub_depth; ++k) {
    const std::size_t width = std::size_t{1} << k;
    const std::size_t start =
        level_offset(v.depth + k) + static_cast<std::size_t>(v.bits) * width;
    heap.insert(heap.end(), mass_.begin() + start,
                mass_.begin() + start + width);
  }
  return Flow(sub_depth, std::move(heap));
}

Flow uniform_flow(int depth) {
  if (depth < 0 || depth > kHardMaxDepth)
    throw std::invalid_argument("uniform_flow: depth out of range");
  std::vector<double> heap(vertex_count(depth));
  for (int k = 0; k <= depth; ++k) {
    const double m = std::ldexp(1.0, -k);
    std::fill_n(heap.begin() + level_offset(k), std::size_t{1} << k, m);
  }
  return Flow(depth, std::move(heap));
}

Flow point_mass_flow(const Ray& ray, double total) {
  if (!(total > 0.0)) throw std::invalid_argument("point_mass_flow: total <= 0");
  const VertexId leaf = ray.vertex();
  std::vector<double> heap(vertex_count(ray.depth), 0.0);
  for (int k = 0; k <= ray.depth; ++k) heap[leaf.ancestor(k).heap_index()] = total;
  return Flow(ray.depth, std::move(heap));
}

namespace {

bool sums_match(double parent, double children, double tolerance) {
  const double scale = std::max(std::abs(parent), std::abs(children));
  return std::abs(parent - children) <= tolerance * scale;
}

}  // namespace

FlowReport validate_flow(const Flow& f, double tolerance) {
  FlowReport report;
  const auto m = f.masses();
  for (std::size_t i = 0; i < m.size(); ++i) {
    const VertexId v = VertexId::from_heap_index(i);
    if (!(m[i] > 0.0))
      report.violations.push_back(
          {FlowViolation::Kind::NonPositive, v, m[i], 0.0});
    if (v.depth < f.depth()) {
      const double children = m[2 * i + 1] + m[2 * i + 2];
      if (!sums_match(m[i], children, tolerance))
        report.violations.push_back(
            {FlowViolation::Kind::FlowCondition, v, m[i], children});
    }
  }
  return report;
}

bool is_consistent_measure(const Flow& f, double tolerance) {
  const auto m = f.masses();
  if (!(m[0] > 0.0)) return false;
  const std::size_t internal = level_offset(f.depth());
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i] < 0.0) return false;
    if (i < internal && !sums_match(m[i], m[2 * i + 1] + m[2 * i + 2], tolerance))
      return false;
  }
  return true;
}

Flow normalize(const Flow& f) {
  const double root = f.root_mass();
  if (!(root > 0.0)) throw std::invalid_argument("normalize: root mass <= 0");
  std::vector<double> heap(f.masses().begin(), f.masses().end());
  if (root == 1.0) return Flow(f.depth(), std::move(heap));
  const double inv = 1.0 / root;
  for (double& m : heap) m *= inv;
  heap[0] = 1.0;
  return Flow(f.depth(), std::move(heap));
}

Ray sample_ray(const Flow& f, NoiseStream& rng) {
  const auto m = f.masses();
  std::size_t i = 0;
  std::uint64_t bits = 0;
  for (int k = 0; k < f.depth(); ++k) {
    const double parent = m[i];
    if (!(parent > 0.0))
      throw std::domain_error("sample_ray: zero-mass vertex reached");
    const double left = m[2 * i + 1];
    const double right = m[2 * i + 2];
    // Divide by the children's sum so rounding in the parent cannot bias.
    const bool go_right = rng.uniform() * (left + right) >= left;
    bits = (bits << 1) | (go_right ? 1u : 0u);
    i = 2 * i + 1 + (go_right ? 1 : 0);
  }
  return {f.depth(), bits};
}

std::vector<double> leaf_cdf(const Flow& f) {
  const auto leaves = f.leaves();
  std::vector<double> cdf(leaves.size() + 1, 0.0);
  double total = 0.0;
  for (double m : leaves) total += m;
  if (!(total > 0.0)) throw std::invalid_argument("leaf_cdf: zero total mass");
  double acc = 0.0;
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    acc += leaves[k];
    cdf[k + 1] = acc / total;
  }
  cdf.back() = 1.0;
  return cdf;
}

double pushforward_cdf(const Flow& f, std::uint64_t numerator,
                       int denominator_log2) {
  if (denominator_log2 < 0 || denominator_log2 > f.depth())
    throw std::invalid_argument(
        "pushforward_cdf: x is finer than the flow's resolution");
  if (numerator > (std::uint64_t{1} << denominator_log2))
    throw std::invalid_argument("pushforward_cdf: x outside [0, 1]");
  const double root = f.root_mass();
  if (!(root > 0.0)) throw std::invalid_argument("pushforward_cdf: zero root");
  if (numerator == (std::uint64_t{1} << denominator_log2)) return 1.0;
  // Sum the cylinders at the coarsest sufficient level: walk the binary
  // expansion of x and add every left sibling passed on the way down.
  double below = 0.0;
  std::size_t i = 0;
  for (int k = 0; k < denominator_log2; ++k) {
    const bool right = (numerator >> (denominator_log2 - 1 - k)) & 1;
    if (right) {
      below += f.masses()[2 * i + 1];
      i = 2 * i + 2;
    } else {
      i = 2 * i + 1;
    }
  }
  return below / root;
}

}  // namespace treecascade
