#include "trackpace/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace trackpace {

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.11e", v);
  return buf;
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "s,t,v,f,e,f_total,curvature,theta\n";
  for (const auto& p : traj.points) {
    out << format_number(p.s) << ',' << format_number(p.t) << ',' << format_number(p.v) << ','
        << format_number(p.f) << ',' << format_number(p.e) << ',' << format_number(p.f_total)
        << ',' << format_number(p.curvature) << ',' << format_number(p.theta) << '\n';
  }
}

Trajectory read_trajectory_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty trajectory file: " + path);
  Trajectory traj;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    TrajectoryPoint p;
    std::istringstream ss(line);
    std::string cell;
    double* fields[8] = {&p.s, &p.t, &p.v, &p.f, &p.e, &p.f_total, &p.curvature, &p.theta};
    for (double* field : fields) {
      if (!std::getline(ss, cell, ',')) throw std::runtime_error("short row in " + path);
      *field = std::stod(cell);
    }
    traj.points.push_back(p);
  }
  if (!traj.points.empty()) traj.final_time = traj.points.back().t;
  return traj;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (std::size_t i = 0; i < header.size(); ++i) {
    out << header[i] << (i + 1 < header.size() ? ',' : '\n');
  }
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      out << row[i] << (i + 1 < row.size() ? ',' : '\n');
    }
  }
}

void write_json_file(const std::string& path, const nlohmann::json& doc) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << doc.dump(2) << '\n';
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  nlohmann::json doc;
  in >> doc;
  return doc;
}

}  // namespace trackpace
