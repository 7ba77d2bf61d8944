// Time-stamped record of losses, metrics and norms along a run.
#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace distlab {

class TrajectoryLog {
 public:
  TrajectoryLog() = default;
  explicit TrajectoryLog(std::vector<std::string> columns);

  // row[0] is the time index and must exceed the previous row's.
  void append(std::span<const double> row);

  const std::vector<std::string>& columns() const { return columns_; }
  int rows() const { return static_cast<int>(data_.size()); }
  bool empty() const { return data_.empty(); }
  double at(int row, int col) const { return data_[static_cast<std::size_t>(row)][col]; }
  const std::vector<double>& row(int r) const { return data_[static_cast<std::size_t>(r)]; }

  int column_index(const std::string& name) const;  // -1 when absent
  std::vector<double> series(const std::string& name) const;

  void write_csv(std::ostream& out) const;
  static TrajectoryLog read_csv(std::istream& in);

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<double>> data_;
};

}  // namespace distlab
