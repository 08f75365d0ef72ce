#include "treecascade/vertex.hpp"

#include <algorithm>
#include <cmath>

namespace treecascade {

std::string VertexId::to_string() const {
  std::string s;
  s.reserve(static_cast<std::size_t>(depth) + 1);
  if (depth == 0) return "ρ";
  for (int i = depth - 1; i >= 0; --i) s.push_back(((bits >> i) & 1) ? '1' : '0');
  return s;
}

int common_ancestor_depth(const VertexId& u, const VertexId& v) {
  const int shallow = std::min(u.depth, v.depth);
  const std::uint64_t a = u.bits >> (u.depth - shallow);
  const std::uint64_t b = v.bits >> (v.depth - shallow);
  const std::uint64_t diff = a ^ b;
  if (diff == 0) return shallow;
  // Highest differing bit, counted from the root end of the prefix.
  return shallow - std::bit_width(diff);
}

double ray_distance(const Ray& a, const Ray& b) {
  if (a.depth != b.depth)
    throw std::invalid_argument("ray_distance: rays have different depths");
  const int meet = common_ancestor_depth(a.vertex(), b.vertex());
  return std::ldexp(1.0, -meet);
}

}  // namespace treecascade
