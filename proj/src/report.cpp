#include "cadeval/report.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cadeval/error.hpp"

namespace cadeval {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

namespace {

void canon(const Json& j, std::string& out) {
  switch (j.type()) {
    case Json::value_t::object: {
      out += '{';
      bool first = true;
      for (const auto& [k, v] : j.items()) {  // nlohmann objects iterate sorted
        if (!first) out += ',';
        first = false;
        out += Json(k).dump();
        out += ':';
        canon(v, out);
      }
      out += '}';
      break;
    }
    case Json::value_t::array: {
      out += '[';
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ',';
        canon(j[i], out);
      }
      out += ']';
      break;
    }
    case Json::value_t::number_float: {
      double v = j.get<double>();
      if (std::isfinite(v))
        out += format_double(v);
      else
        out += Json(format_double(v)).dump();
      break;
    }
    default:
      out += j.dump();
  }
}

}  // namespace

std::string canonical_json(const Json& j) {
  std::string out;
  canon(j, out);
  out += '\n';
  return out;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw input_error("cannot open for writing: " + path);
  f << content;
  if (!f) throw input_error("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw input_error("cannot open: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

namespace {

std::string cell(const Json& v) {
  switch (v.type()) {
    case Json::value_t::number_float: return format_double(v.get<double>());
    case Json::value_t::string: return v.get<std::string>();
    case Json::value_t::null: return "";
    default: return v.dump();
  }
}

const Json* find_row_array(const Json& report) {
  for (const char* key : {"points", "rows"})
    if (report.contains(key) && report[key].is_array()) return &report[key];
  for (const auto& [k, v] : report.items())
    if (v.is_array() && !v.empty() && v[0].is_object()) return &v;
  return nullptr;
}

}  // namespace

void write_report(const Json& report, const std::string& path, const std::string& format) {
  if (format == "structured") {
    write_text_file(path, canonical_json(report));
    return;
  }
  if (format != "tabular") throw input_error("unknown report format: " + format);
  const Json* rows = find_row_array(report);
  if (!rows) throw input_error("report has no row array to tabulate");
  std::vector<std::string> cols;
  for (const auto& row : *rows)
    for (const auto& [k, v] : row.items()) {
      (void)v;
      if (std::find(cols.begin(), cols.end(), k) == cols.end()) cols.push_back(k);
    }
  std::sort(cols.begin(), cols.end());
  std::string out;
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (i) out += '\t';
    out += cols[i];
  }
  out += '\n';
  for (const auto& row : *rows) {
    for (std::size_t i = 0; i < cols.size(); ++i) {
      if (i) out += '\t';
      if (row.contains(cols[i])) out += cell(row[cols[i]]);
    }
    out += '\n';
  }
  write_text_file(path, out);
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string fnv1a_file_hex(const std::string& path) {
  return fnv1a_hex(read_text_file(path));
}

void write_curve_svg(const std::string& path, const std::string& title,
                     const std::string& xlabel, const std::string& ylabel,
                     const std::vector<PlotSeries>& series,
                     const std::vector<PlotMarker>& markers) {
  const double W = 480, H = 360, L = 56, B = 40, T = 28, R = 16;
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  bool first = true;
  for (const auto& s : series)
    for (auto [x, y] : s.xy) {
      if (first) {
        xmin = xmax = x;
        ymin = ymax = y;
        first = false;
      }
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  if (xmax <= xmin) xmax = xmin + 1;
  if (ymax <= ymin) ymax = ymin + 1;
  auto px = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - ymin) / (ymax - ymin) * (H - B - T); };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << W << " " << H << "\">\n";
  s << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  s << "<text x=\"" << W / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">" << title
    << "</text>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
    << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B
    << "\" stroke=\"black\"/>\n";
  s << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 10
    << "\" text-anchor=\"middle\" font-size=\"11\">" << xlabel << "</text>\n";
  s << "<text x=\"14\" y=\"" << (T + H - B) / 2 << "\" font-size=\"11\" text-anchor=\"middle\" "
    << "transform=\"rotate(-90 14 " << (T + H - B) / 2 << ")\">" << ylabel << "</text>\n";
  s << "<text x=\"" << L << "\" y=\"" << H - B + 14 << "\" font-size=\"9\" text-anchor=\"middle\">"
    << format_double(xmin) << "</text>\n";
  s << "<text x=\"" << W - R << "\" y=\"" << H - B + 14
    << "\" font-size=\"9\" text-anchor=\"middle\">" << format_double(xmax) << "</text>\n";
  s << "<text x=\"" << L - 6 << "\" y=\"" << H - B + 3 << "\" font-size=\"9\" text-anchor=\"end\">"
    << format_double(ymin) << "</text>\n";
  s << "<text x=\"" << L - 6 << "\" y=\"" << T + 3 << "\" font-size=\"9\" text-anchor=\"end\">"
    << format_double(ymax) << "</text>\n";
  for (const auto& sr : series) {
    s << "<polyline fill=\"none\" stroke=\"" << sr.color << "\" stroke-width=\"1.5\" points=\"";
    for (auto [x, y] : sr.xy) s << format_double(px(x)) << "," << format_double(py(y)) << " ";
    s << "\"/>\n";
  }
  for (const auto& m : markers) {
    s << "<circle cx=\"" << format_double(px(m.x)) << "\" cy=\"" << format_double(py(m.y))
      << "\" r=\"4\" fill=\"#d62728\"/>\n";
    if (!m.label.empty())
      s << "<text x=\"" << format_double(px(m.x) + 6) << "\" y=\"" << format_double(py(m.y) - 6)
        << "\" font-size=\"10\">" << m.label << "</text>\n";
  }
  s << "</svg>\n";
  write_text_file(path, s.str());
}

}  // namespace cadeval
