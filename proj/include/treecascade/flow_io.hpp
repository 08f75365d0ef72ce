#pragma once

#include <iosfwd>
#include <string>

#include "json.hpp"

#include "treecascade/flow.hpp"

namespace treecascade {

// JSON: {"depth": n, "levels": [[root], [L, R], ...]}
nlohmann::json flow_to_json(const Flow& f);
Flow flow_from_json(const nlohmann::json& j);

// CSV: header "depth,path_bits,mass", one row per vertex in heap order.
void write_flow_csv(std::ostream& out, const Flow& f);
Flow read_flow_csv(std::istream& in);

/// Loads by extension (.json or .csv).
Flow load_flow(const std::string& path);
void save_flow(const std::string& path, const Flow& f);

/// Shortest decimal representation that round-trips to the same double.
std::string format_double(double x);

}  // namespace treecascade
