// Copyright 2026 The flowinv Authors
// SPDX-License-Identifier: Apache-2.0

#include "flowinv/report.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "flowinv/errors.hpp"

namespace flowinv {
namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

std::ofstream open_for_writing(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

void check_name(const std::string& name, const char* what) {
  if (name.empty()) throw ConfigError(std::string(what) + " name must not be empty");
  if (name.find_first_of(",\r\n\"") != std::string::npos) {
    throw ConfigError(std::string(what) + " name '" + name + "' contains a comma, quote or newline");
  }
}

std::string fixed2(double v) {
  std::array<char, 64> buf{};
  std::snprintf(buf.data(), buf.size(), "%.2f", v);
  return buf.data();
}

std::string xml_escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

constexpr double kWidth = 720.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 80.0;
constexpr double kRight = 220.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 60.0;
constexpr double kPlotW = kWidth - kLeft - kRight;
constexpr double kPlotH = kHeight - kTop - kBottom;

constexpr std::array<const char*, 8> kPalette = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                                 "#9467bd", "#8c564b", "#e377c2", "#17becf"};

double round2(double v) { return std::round(v * 100.0) / 100.0; }

struct Axes {
  std::size_t points = 0;
  int lo = 0;
  int hi = 1;

  double x(std::size_t i) const {
    if (points <= 1) return round2(kLeft + kPlotW / 2.0);
    return round2(kLeft + kPlotW * static_cast<double>(i) / static_cast<double>(points - 1));
  }
  double y(double value) const {
    const double l = std::log10(std::max(value, kChartFloor));
    return round2(kTop + kPlotH * (static_cast<double>(hi) - l) / static_cast<double>(hi - lo));
  }
};

Axes make_axes(const std::vector<ErrorSeries>& series) {
  if (series.empty()) throw ConfigError("error chart needs at least one series");
  Axes axes;
  axes.points = series.front().values.size();
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const ErrorSeries& s : series) {
    if (s.values.empty()) throw ConfigError("error series '" + s.name + "' is empty");
    if (s.values.size() != axes.points) throw ShapeError("error series differ in length");
    for (double v : s.values) {
      if (!(v >= 0.0) || !std::isfinite(v)) {
        throw ConfigError("error series '" + s.name + "' holds a negative or non-finite value");
      }
      const double l = std::log10(std::max(v, kChartFloor));
      lo = std::min(lo, l);
      hi = std::max(hi, l);
    }
  }
  axes.lo = static_cast<int>(std::floor(lo));
  axes.hi = static_cast<int>(std::ceil(hi));
  if (axes.hi <= axes.lo) axes.hi = axes.lo + 1;
  return axes;
}

}  // namespace

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value, std::chars_format::scientific);
  return std::string(buf.data(), res.ptr);
}

double parse_double(const std::string& text) {
  if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (text == "inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  double value = 0.0;
  const char* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, value);
  if (res.ec != std::errc() || res.ptr != end || text.empty()) throw FormatError("not a number: '" + text + "'");
  return value;
}

void MetricReport::add(MetricRow row) {
  check_name(row.method, "method");
  if (row.avg_step_mse > row.max_step_mse) {
    throw ConfigError("method " + row.method + ": avg step MSE exceeds max step MSE");
  }
  if (row.eval_count == 0) throw ConfigError("method " + row.method + ": eval_count must be positive");
  for (const MetricRow& existing : rows_) {
    if (existing.method == row.method) throw ConfigError("duplicate method row: " + row.method);
  }
  rows_.push_back(std::move(row));
}

const MetricRow& MetricReport::row(const std::string& method) const {
  for (const MetricRow& r : rows_) {
    if (r.method == method) return r;
  }
  throw ConfigError("no report row for method " + method);
}

const std::vector<std::string>& report_csv_columns() {
  static const std::vector<std::string> columns = {
      "method",        "latent_dim",    "avg_step_mse", "max_step_mse",      "endpoint_mse", "endpoint_psnr",
      "endpoint_ssim", "eval_count",    "lpips",        "clip_similarity",   "structure_distance"};
  return columns;
}

void write_report_csv(const MetricReport& report, const std::filesystem::path& path) {
  std::ofstream out = open_for_writing(path);
  const auto& columns = report_csv_columns();
  for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << columns[i];
  out << '\n';
  for (const MetricRow& r : report.rows()) {
    out << r.method << ',' << r.latent_dim << ',' << format_double(r.avg_step_mse) << ','
        << format_double(r.max_step_mse) << ',' << format_double(r.endpoint_mse) << ','
        << format_double(r.endpoint_psnr) << ',' << format_double(r.endpoint_ssim) << ',' << r.eval_count
        << ",,,\n";
  }
  finish(out, path);
}

MetricReport read_report_csv(const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw FormatError(path.string() + ": empty report file");
  if (split_csv_line(lines.front()) != report_csv_columns()) {
    throw FormatError(path.string() + ": unexpected report header");
  }
  MetricReport report;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto cells = split_csv_line(lines[i]);
    if (cells.size() != report_csv_columns().size()) {
      throw FormatError(path.string() + ": line " + std::to_string(i + 1) + " has " + std::to_string(cells.size()) +
                        " cells");
    }
    MetricRow row;
    try {
      row.method = cells[0];
      row.latent_dim = std::stoul(cells[1]);
      row.avg_step_mse = parse_double(cells[2]);
      row.max_step_mse = parse_double(cells[3]);
      row.endpoint_mse = parse_double(cells[4]);
      row.endpoint_psnr = parse_double(cells[5]);
      row.endpoint_ssim = parse_double(cells[6]);
      row.eval_count = std::stoull(cells[7]);
    } catch (const std::logic_error& e) {
      throw FormatError(path.string() + ": line " + std::to_string(i + 1) + ": " + e.what());
    }
    report.add(std::move(row));
  }
  return report;
}

void write_step_csv(const std::vector<ErrorSeries>& series, const std::filesystem::path& path) {
  const std::size_t steps = series.empty() ? 0 : series.front().values.size();
  for (const ErrorSeries& s : series) {
    check_name(s.name, "series");
    if (s.values.size() != steps) throw ShapeError("step CSV series differ in length");
  }
  std::ofstream out = open_for_writing(path);
  out << "step";
  for (const ErrorSeries& s : series) out << ',' << s.name;
  out << '\n';
  for (std::size_t t = 0; t < steps; ++t) {
    out << t + 1;
    for (const ErrorSeries& s : series) out << ',' << format_double(s.values[t]);
    out << '\n';
  }
  finish(out, path);
}

std::vector<ErrorSeries> read_step_csv(const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw FormatError(path.string() + ": empty step file");
  const auto header = split_csv_line(lines.front());
  if (header.empty() || header.front() != "step") throw FormatError(path.string() + ": header must start with 'step'");
  std::vector<ErrorSeries> series;
  for (std::size_t i = 1; i < header.size(); ++i) series.push_back({header[i], {}});
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto cells = split_csv_line(lines[i]);
    if (cells.size() != header.size()) {
      throw FormatError(path.string() + ": line " + std::to_string(i + 1) + " has " + std::to_string(cells.size()) +
                        " cells, expected " + std::to_string(header.size()));
    }
    if (cells.front() != std::to_string(i)) {
      throw FormatError(path.string() + ": line " + std::to_string(i + 1) + " should be step " + std::to_string(i));
    }
    for (std::size_t c = 1; c < cells.size(); ++c) series[c - 1].values.push_back(parse_double(cells[c]));
  }
  return series;
}

std::vector<std::vector<ChartPoint>> chart_coordinates(const std::vector<ErrorSeries>& series) {
  const Axes axes = make_axes(series);
  std::vector<std::vector<ChartPoint>> out;
  for (const ErrorSeries& s : series) {
    std::vector<ChartPoint> pts;
    for (std::size_t i = 0; i < s.values.size(); ++i) pts.push_back({axes.x(i), axes.y(s.values[i])});
    out.push_back(std::move(pts));
  }
  return out;
}

std::string render_error_chart_svg(const std::vector<ErrorSeries>& series) {
  const Axes axes = make_axes(series);
  const auto coords = chart_coordinates(series);
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n";
  svg << "<text x=\"" << fixed2(kLeft + kPlotW / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">"
      << "Step-level reconstruction error</text>\n";

  // Decade grid lines and labels.
  const int decades = axes.hi - axes.lo;
  const int stride = std::max(1, (decades + 9) / 10);
  svg << "<g id=\"y-axis\" stroke=\"#dddddd\">\n";
  for (int e = axes.lo; e <= axes.hi; e += stride) {
    const double y = axes.y(std::pow(10.0, e));
    svg << "<line x1=\"" << fixed2(kLeft) << "\" y1=\"" << fixed2(y) << "\" x2=\"" << fixed2(kLeft + kPlotW)
        << "\" y2=\"" << fixed2(y) << "\"/>\n";
    svg << "<text x=\"" << fixed2(kLeft - 6) << "\" y=\"" << fixed2(y + 4)
        << "\" text-anchor=\"end\" stroke=\"none\" fill=\"black\">1e" << e << "</text>\n";
  }
  svg << "</g>\n";

  const std::size_t xstride = std::max<std::size_t>(1, (axes.points + 9) / 10);
  svg << "<g id=\"x-axis\">\n";
  for (std::size_t i = 0; i < axes.points; ++i) {
    if (i % xstride != 0 && i + 1 != axes.points) continue;
    const double x = axes.x(i);
    svg << "<line x1=\"" << fixed2(x) << "\" y1=\"" << fixed2(kTop + kPlotH) << "\" x2=\"" << fixed2(x) << "\" y2=\""
        << fixed2(kTop + kPlotH + 5) << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << fixed2(x) << "\" y=\"" << fixed2(kTop + kPlotH + 18) << "\" text-anchor=\"middle\">" << i + 1
        << "</text>\n";
  }
  svg << "</g>\n";
  svg << "<rect x=\"" << fixed2(kLeft) << "\" y=\"" << fixed2(kTop) << "\" width=\"" << fixed2(kPlotW)
      << "\" height=\"" << fixed2(kPlotH) << "\" fill=\"none\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << fixed2(kLeft + kPlotW / 2) << "\" y=\"" << fixed2(kHeight - 16)
      << "\" text-anchor=\"middle\">step</text>\n";
  svg << "<text x=\"18\" y=\"" << fixed2(kTop + kPlotH / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
      << fixed2(kTop + kPlotH / 2) << ")\">step-level MSE (log scale)</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kPalette[s % kPalette.size()];
    svg << "<polyline id=\"series-" << s << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < coords[s].size(); ++i) {
      svg << (i ? " " : "") << fixed2(coords[s][i].x) << ',' << fixed2(coords[s][i].y);
    }
    svg << "\"/>\n";
  }

  svg << "<g id=\"legend\">\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const double y = kTop + 10 + 20.0 * static_cast<double>(s);
    const bool has_zero = std::any_of(series[s].values.begin(), series[s].values.end(),
                                      [](double v) { return v <= kChartFloor; });
    svg << "<rect x=\"" << fixed2(kLeft + kPlotW + 16) << "\" y=\"" << fixed2(y - 8) << "\" width=\"14\" height=\"10\" fill=\""
        << kPalette[s % kPalette.size()] << "\"/>\n";
    svg << "<text x=\"" << fixed2(kLeft + kPlotW + 36) << "\" y=\"" << fixed2(y + 1) << "\">"
        << xml_escape(series[s].name) << (has_zero ? " (zeros at 1e-20)" : "") << "</text>\n";
  }
  svg << "</g>\n</svg>\n";
  return svg.str();
}

void render_error_chart(const std::vector<ErrorSeries>& series, const std::filesystem::path& path) {
  const std::string svg = render_error_chart_svg(series);
  std::ofstream out = open_for_writing(path);
  out << svg;
  finish(out, path);
}

}  // namespace flowinv
