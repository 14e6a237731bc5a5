#pragma once
// Byte-stable report serialization and small plot/manifest helpers.
#include <string>
#include <vector>

#include "cadeval/core.hpp"

namespace cadeval {

// %.12g, with non-finite values spelled as inf / -inf / nan.
std::string format_double(double v);

// Keys sorted, doubles at 12 significant digits, non-finite numbers emitted
// as strings. Same document, same bytes, every time.
std::string canonical_json(const Json& j);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

// format "structured": canonical JSON. format "tabular": the report's first
// array-of-objects member (preferring "points", then "rows") as a TSV, one
// row per element, columns sorted.
void write_report(const Json& report, const std::string& path, const std::string& format);

std::string fnv1a_hex(const std::string& bytes);
std::string fnv1a_file_hex(const std::string& path);

struct PlotSeries {
  std::vector<std::pair<double, double>> xy;
  std::string color = "#1f6fb4";
  std::string name;
};
struct PlotMarker {
  double x = 0, y = 0;
  std::string label;
};
void write_curve_svg(const std::string& path, const std::string& title,
                     const std::string& xlabel, const std::string& ylabel,
                     const std::vector<PlotSeries>& series,
                     const std::vector<PlotMarker>& markers);

}  // namespace cadeval
