// JSON and CSV surfaces shared by the CLI and the tests. Parameter documents
// are flat: {"r", "mu", "sigma", "R", "delta"}, with an optional "sim" block.
// CSV uses '.' decimals, '\n' endings, a header row, and 17 significant digits.
#pragma once

#include <iosfwd>
#include <string>
#include <utility>

#include <json.hpp>

#include "merton/market.hpp"
#include "merton/path_engine.hpp"

namespace merton {

using ordered_json = nlohmann::ordered_json;

std::pair<MarketParams, AgentParams> params_from_json(const ordered_json& doc);
ordered_json params_to_json(const MarketParams& m, const AgentParams& a);

SimConfig sim_config_from_json(const ordered_json& doc); // defaults where absent
ordered_json sim_config_to_json(const SimConfig& cfg);

ordered_json estimate_to_json(const McEstimate& e);
ordered_json classification_to_json(const WellPosedness& cls);

// path_id,t,W,X,C rows, one per (path, grid point).
void write_paths_csv(std::ostream& os, const PathBatch& batch);

// Fixed 17-significant-digit formatting used everywhere a double reaches a file.
std::string format_double(double v);

} // namespace merton
