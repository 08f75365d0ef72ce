#pragma once

#include <cstdint>
#include <numbers>
#include <cmath>
#include <string_view>

#include "treecascade/vertex.hpp"

namespace treecascade {

// Counter-based noise: every draw is a pure function of (seed, vertex, step),
// so a depth n+1 run sees exactly the depth n draws on shared vertices and
// results do not depend on scheduling.

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  return splitmix64(splitmix64(seed) ^ (salt * 0xd6e8feb86659fd93ULL + 1));
}

/// FNV-1a, used to derive per-test seed namespaces from names.
constexpr std::uint64_t hash_name(std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

struct VertexNoiseKey {
  std::uint64_t seed = 0;
  VertexId vertex;
  std::uint64_t step_index = 0;

  static std::uint64_t digest(std::uint64_t seed, std::uint64_t vertex_global_id,
                              std::uint64_t step_index) {
    return splitmix64(mix_seed(seed, vertex_global_id) ^
                      splitmix64(step_index + 0x632be59bd9b4e019ULL));
  }
  std::uint64_t digest() const {
    return digest(seed, vertex.global_id(), step_index);
  }
};

/// Small deterministic stream seeded from a key digest.
class NoiseStream {
 public:
  explicit NoiseStream(std::uint64_t state) : state_(state) {}
  explicit NoiseStream(const VertexNoiseKey& key) : state_(key.digest()) {}

  std::uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform on the open interval (0, 1).
  double uniform() {
    return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Box–Muller; the sine half is kept and returned by the next call.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_radius_ * std::sin(spare_angle_);
    }
    spare_radius_ = std::sqrt(-2.0 * std::log(uniform()));
    spare_angle_ = 2.0 * std::numbers::pi * uniform();
    has_spare_ = true;
    return spare_radius_ * std::cos(spare_angle_);
  }

  /// Poisson by sequential inversion; intended for small means.
  std::uint64_t poisson(double mean);

 private:
  std::uint64_t state_;
  double spare_radius_ = 0.0;
  double spare_angle_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace treecascade
