#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "treecascade/noise.hpp"
#include "treecascade/vertex.hpp"

namespace treecascade {

inline constexpr double kFlowTolerance = 1e-12;

inline std::size_t vertex_count(int depth) {
  return (std::size_t{1} << (depth + 1)) - 1;
}

inline std::size_t level_offset(int level) {
  return (std::size_t{1} << level) - 1;
}

/// Finite-depth measure on the boundary of the binary tree, stored as
/// per-vertex masses in heap order (level k occupies [2^k - 1, 2^(k+1) - 1)).
///
/// A Flow is a plain container: construction checks shape and finiteness but
/// not the flow condition, so that invalid inputs can be inspected with
/// validate_flow(). Every operation in this library that returns a Flow
/// returns one satisfying the flow condition.
class Flow {
 public:
  Flow() = default;
  Flow(int depth, std::vector<double> heap_masses);

  static Flow from_levels(const std::vector<std::vector<double>>& levels);
  /// Builds internal masses bottom-up from the 2^depth leaf masses.
  static Flow from_leaves(std::span<const double> leaves);

  int depth() const { return depth_; }
  std::size_t size() const { return mass_.size(); }

  double mass(const VertexId& v) const;
  double root_mass() const { return mass_.front(); }
  std::span<const double> level(int k) const;
  std::span<const double> leaves() const { return level(depth_); }
  std::span<const double> masses() const { return mass_; }

  /// The same measure seen at a coarser resolution.
  Flow truncated(int depth) const;
  /// The subtree flow Γ_{|v}, re-rooted at v (keeps v's absolute mass).
  Flow restricted(const VertexId& v) const;

  friend bool operator==(const Flow&, const Flow&) = default;

 private:
  int depth_ = 0;
  std::vector<double> mass_ = {1.0};
};

struct FlowViolation {
  enum class Kind { NonPositive, FlowCondition };
  Kind kind;
  VertexId vertex;
  double mass;
  double children_sum;  // only meaningful for FlowCondition
};

struct FlowReport {
  std::vector<FlowViolation> violations;
  bool valid() const { return violations.empty(); }
};

/// θ truncated at `depth`: mass(v) = 2^(-|v|).
Flow uniform_flow(int depth);

/// All mass on the ray with the given bits (zero elsewhere).
Flow point_mass_flow(const Ray& ray, double total = 1.0);

/// Lists every vertex violating positivity or the flow condition (relative
/// tolerance kFlowTolerance).
FlowReport validate_flow(const Flow& f, double tolerance = kFlowTolerance);

/// Strictly positive root, nonnegative masses, flow condition. Zero-mass
/// vertices are allowed here (point masses), unlike validate_flow().
bool is_consistent_measure(const Flow& f, double tolerance = kFlowTolerance);

Flow normalize(const Flow& f);

/// Descends from the root choosing each child with probability
/// mass(child)/mass(parent).
Ray sample_ray(const Flow& f, NoiseStream& rng);

/// Normalized distribution function of the dyadic pushforward at the grid
/// points k·2^(-depth), k = 0..2^depth. Entry k is Γ*([0, k·2^(-depth)]).
std::vector<double> leaf_cdf(const Flow& f);

/// Γ*([0, x]) for x = numerator·2^(-denominator_log2); x must lie in [0, 1]
/// and resolve at the flow's depth.
double pushforward_cdf(const Flow& f, std::uint64_t numerator,
                       int denominator_log2);

}  // namespace treecascade
