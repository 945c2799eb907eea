#include "driftlab/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "driftlab/errors.hpp"

namespace driftlab {

CsvWriter::CsvWriter(std::vector<std::string> columns)
    : columns_(std::move(columns)) {}

std::string CsvWriter::num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void CsvWriter::add_row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_.size())
    throw ConfigInvalid("csv row width does not match header");
  rows_.push_back(cells);
}

void CsvWriter::add_row_numeric(const std::vector<double>& cells) {
  std::vector<std::string> out;
  out.reserve(cells.size());
  for (double v : cells) out.push_back(num(v));
  add_row(out);
}

std::string CsvWriter::str() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < columns_.size(); ++i)
    os << (i ? "," : "") << columns_[i];
  os << "\n";
  for (const auto& row : rows_) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i];
    os << "\n";
  }
  return os.str();
}

void CsvWriter::write(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigInvalid("cannot write " + path);
  f << str();
}

void write_svg_plot(const std::string& path, const std::string& title,
                    const std::vector<SvgSeries>& series, bool log_y) {
  const int W = 640, H = 420, M = 50;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  auto ty = [&](double y) { return log_y ? std::log10(std::max(y, 1e-300)) : y; };
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, ty(s.y[i]));
      ymax = std::max(ymax, ty(s.y[i]));
    }
  if (xmin > xmax) return;
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  auto px = [&](double x) { return M + (x - xmin) / (xmax - xmin) * (W - 2 * M); };
  auto py = [&](double y) {
    return H - M - (ty(y) - ymin) / (ymax - ymin) * (H - 2 * M);
  };
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                  "#ff7f0e", "#8c564b"};
  std::ostringstream os;
  os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='"
     << H << "'>\n";
  os << "<rect width='100%' height='100%' fill='white'/>\n";
  os << "<text x='" << W / 2 << "' y='20' text-anchor='middle' "
     << "font-family='sans-serif' font-size='14'>" << title << "</text>\n";
  os << "<line x1='" << M << "' y1='" << H - M << "' x2='" << W - M << "' y2='"
     << H - M << "' stroke='black'/>\n";
  os << "<line x1='" << M << "' y1='" << M << "' x2='" << M << "' y2='"
     << H - M << "' stroke='black'/>\n";
  int ci = 0;
  for (const auto& s : series) {
    os << "<polyline fill='none' stroke='" << kColors[ci % 6]
       << "' stroke-width='1.5' points='";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      os << px(s.x[i]) << "," << py(s.y[i]) << " ";
    os << "'/>\n";
    os << "<text x='" << W - M + 4 << "' y='" << M + 16 * ci
       << "' font-family='sans-serif' font-size='11' fill='" << kColors[ci % 6]
       << "'>" << s.label << "</text>\n";
    ++ci;
  }
  os << "</svg>\n";
  std::ofstream f(path, std::ios::binary);
  if (f) f << os.str();
}

bool make_directories(const std::string& path) {
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  return !ec;
}

}  // namespace driftlab
