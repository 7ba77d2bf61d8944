#include "distlab/trajectory.hpp"

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace distlab {

TrajectoryLog::TrajectoryLog(std::vector<std::string> columns) : columns_(std::move(columns)) {
  if (columns_.empty()) throw std::invalid_argument("trajectory needs at least a time column");
}

void TrajectoryLog::append(std::span<const double> row) {
  if (row.size() != columns_.size())
    throw std::invalid_argument("trajectory row width mismatch");
  if (!data_.empty() && !(row[0] > data_.back()[0]))
    throw std::invalid_argument("trajectory time index must be increasing");
  data_.emplace_back(row.begin(), row.end());
}

int TrajectoryLog::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i)
    if (columns_[i] == name) return static_cast<int>(i);
  return -1;
}

std::vector<double> TrajectoryLog::series(const std::string& name) const {
  const int c = column_index(name);
  if (c < 0) throw std::invalid_argument("no trajectory column named " + name);
  std::vector<double> out;
  out.reserve(data_.size());
  for (const auto& r : data_) out.push_back(r[static_cast<std::size_t>(c)]);
  return out;
}

void TrajectoryLog::write_csv(std::ostream& out) const {
  for (std::size_t i = 0; i < columns_.size(); ++i)
    out << columns_[i] << (i + 1 < columns_.size() ? ',' : '\n');
  char buf[32];
  for (const auto& r : data_) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", r[i]);
      out << buf << (i + 1 < r.size() ? ',' : '\n');
    }
  }
}

TrajectoryLog TrajectoryLog::read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty trajectory csv");
  std::vector<std::string> cols;
  {
    std::istringstream header(line);
    std::string field;
    while (std::getline(header, field, ',')) cols.push_back(field);
  }
  TrajectoryLog log(cols);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string field;
    std::vector<double> vals;
    while (std::getline(row, field, ',')) vals.push_back(std::stod(field));
    log.append(vals);
  }
  return log;
}

}  // namespace distlab
