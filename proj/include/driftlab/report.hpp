#pragma once

#include <map>
#include <string>
#include <vector>

namespace driftlab {

/// Deterministic CSV writer: fixed column order, %.17g numbers, no
/// timestamps, LF line endings.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> columns);
  void add_row(const std::vector<std::string>& cells);
  void add_row_numeric(const std::vector<double>& cells);
  const std::vector<std::string>& columns() const { return columns_; }
  std::string str() const;
  void write(const std::string& path) const;

  static std::string num(double v);

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<std::string>> rows_;
};

/// Minimal polyline plot; derived purely from already-written series.
struct SvgSeries {
  std::string label;
  std::vector<double> x, y;
};
void write_svg_plot(const std::string& path, const std::string& title,
                    const std::vector<SvgSeries>& series, bool log_y = false);

bool make_directories(const std::string& path);

}  // namespace driftlab
