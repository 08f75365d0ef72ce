#include "treecascade/flow_io.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace treecascade {

std::string format_double(double x) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  if (ec != std::errc()) throw std::runtime_error("format_double failed");
  return std::string(buf.data(), ptr);
}

nlohmann::json flow_to_json(const Flow& f) {
  nlohmann::json levels = nlohmann::json::array();
  for (int k = 0; k <= f.depth(); ++k) {
    const auto level = f.level(k);
    levels.push_back(std::vector<double>(level.begin(), level.end()));
  }
  return {{"depth", f.depth()}, {"levels", std::move(levels)}};
}

Flow flow_from_json(const nlohmann::json& j) {
  const auto levels = j.at("levels").get<std::vector<std::vector<double>>>();
  Flow f = Flow::from_levels(levels);
  if (j.contains("depth") && j.at("depth").get<int>() != f.depth())
    throw std::invalid_argument("flow JSON: depth does not match levels");
  return f;
}

void write_flow_csv(std::ostream& out, const Flow& f) {
  out << "depth,path_bits,mass\r\n";
  const auto m = f.masses();
  for (std::size_t i = 0; i < m.size(); ++i) {
    const VertexId v = VertexId::from_heap_index(i);
    out << v.depth << ',' << v.bits << ',' << format_double(m[i]) << "\r\n";
  }
}

Flow read_flow_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("flow CSV: empty");
  std::vector<std::vector<double>> levels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    int depth = 0;
    std::uint64_t bits = 0;
    double mass = 0.0;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    auto r1 = std::from_chars(p, end, depth);
    if (r1.ec != std::errc() || r1.ptr == end || *r1.ptr != ',')
      throw std::invalid_argument("flow CSV: bad depth on line " +
                                  std::to_string(line_no));
    auto r2 = std::from_chars(r1.ptr + 1, end, bits);
    if (r2.ec != std::errc() || r2.ptr == end || *r2.ptr != ',')
      throw std::invalid_argument("flow CSV: bad path_bits on line " +
                                  std::to_string(line_no));
    auto r3 = std::from_chars(r2.ptr + 1, end, mass);
    if (r3.ec != std::errc() || r3.ptr != end)
      throw std::invalid_argument("flow CSV: bad mass on line " +
                                  std::to_string(line_no));
    const VertexId v = VertexId::make(depth, bits);
    if (static_cast<std::size_t>(depth) >= levels.size()) {
      levels.resize(static_cast<std::size_t>(depth) + 1);
    }
    auto& level = levels[static_cast<std::size_t>(depth)];
    if (level.empty()) level.assign(std::size_t{1} << depth, std::nan(""));
    level[v.bits] = mass;
  }
  for (std::size_t k = 0; k < levels.size(); ++k)
    for (double m : levels[k])
      if (std::isnan(m))
        throw std::invalid_argument("flow CSV: missing vertex at depth " +
                                    std::to_string(k));
  return Flow::from_levels(levels);
}

Flow load_flow(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open flow file: " + path);
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv")
    return read_flow_csv(in);
  return flow_from_json(nlohmann::json::parse(in));
}

void save_flow(const std::string& path, const Flow& f) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write flow file: " + path);
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv")
    write_flow_csv(out, f);
  else
    out << flow_to_json(f).dump() << '\n';
}

}  // namespace treecascade
