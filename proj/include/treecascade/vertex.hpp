#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace treecascade {

// Hard ceiling on tree depth. Per-vertex arrays hold 2^(depth+1) - 1 doubles,
// so the practical limit is memory; the CLI exposes a lower configurable cap.
inline constexpr int kHardMaxDepth = 30;
inline constexpr int kDefaultMaxDepth = 26;

/// A vertex of the rooted binary tree: its generation and the left(0)/right(1)
/// choices from the root, most significant bit first.
struct VertexId {
  int depth = 0;
  std::uint64_t bits = 0;

  static VertexId root() { return {}; }

  static VertexId make(int depth, std::uint64_t bits) {
    if (depth < 0 || depth > kHardMaxDepth)
      throw std::invalid_argument("VertexId: depth out of range");
    if (bits >= (std::uint64_t{1} << depth))
      throw std::invalid_argument("VertexId: path bits exceed 2^depth");
    return {depth, bits};
  }

  /// Position in a heap-ordered array (root at 0, level k starts at 2^k - 1).
  static VertexId from_heap_index(std::size_t index) {
    const auto one_based = static_cast<std::uint64_t>(index) + 1;
    const int d = std::bit_width(one_based) - 1;
    return {d, one_based - (std::uint64_t{1} << d)};
  }

  std::size_t heap_index() const {
    return (std::size_t{1} << depth) - 1 + static_cast<std::size_t>(bits);
  }

  // Unique across depths; used to key per-vertex noise.
  std::uint64_t global_id() const { return (std::uint64_t{1} << depth) | bits; }

  VertexId left() const { return {depth + 1, bits << 1}; }
  VertexId right() const { return {depth + 1, (bits << 1) | 1}; }
  VertexId parent() const {
    if (depth == 0) throw std::invalid_argument("VertexId: root has no parent");
    return {depth - 1, bits >> 1};
  }
  VertexId ancestor(int at_depth) const {
    if (at_depth < 0 || at_depth > depth)
      throw std::invalid_argument("VertexId: ancestor depth out of range");
    return {at_depth, bits >> (depth - at_depth)};
  }
  bool is_ancestor_of(const VertexId& other) const {
    return depth <= other.depth && (other.bits >> (other.depth - depth)) == bits;
  }

  std::string to_string() const;

  friend bool operator==(const VertexId&, const VertexId&) = default;
};

/// A ray truncated at a finite depth; identified with the depth-n vertex it
/// passes through.
struct Ray {
  int depth = 0;
  std::uint64_t bits = 0;

  VertexId vertex() const { return VertexId::make(depth, bits); }
  friend bool operator==(const Ray&, const Ray&) = default;
};

/// Length of the longest common prefix of the two root paths, |u ∧ v|.
int common_ancestor_depth(const VertexId& u, const VertexId& v);

/// Ultrametric 2^(-|ξ∧η|) on rays of equal depth. Identical truncated rays are
/// at the resolution floor 2^(-depth) rather than 0.
double ray_distance(const Ray& a, const Ray& b);

}  // namespace treecascade
