#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "trackpace/trajectory.hpp"

namespace trackpace {

/// Canonical 12-significant-digit decimal used in every CSV cell, so exported
/// files round-trip exactly.
std::string format_number(double v);

void write_trajectory_csv(const std::string& path, const Trajectory& traj);
Trajectory read_trajectory_csv(const std::string& path);

/// Generic table writer: one header row, then formatted cells.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

void write_json_file(const std::string& path, const nlohmann::json& doc);
nlohmann::json read_json_file(const std::string& path);

}  // namespace trackpace
