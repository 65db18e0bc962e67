// Copyright 2026 The flowinv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace flowinv {

/// Shortest decimal in scientific notation that parses back to the same
/// double ("1.25e-03"); "nan", "inf", "-inf" for non-finite values.
std::string format_double(double value);

/// Strict inverse of format_double (whole string must parse).
double parse_double(const std::string& text);

/// One method's fidelity summary.
struct MetricRow {
  std::string method;
  std::size_t latent_dim = 0;
  double avg_step_mse = 0.0;
  double max_step_mse = 0.0;
  double endpoint_mse = 0.0;
  double endpoint_psnr = 0.0;
  double endpoint_ssim = 0.0;
  /// Field evaluations for the whole method (inversion plus reconstruction).
  std::uint64_t eval_count = 0;
};

class MetricReport {
 public:
  /// Rejects rows with avg > max, eval_count == 0 or an empty/duplicate name.
  void add(MetricRow row);
  const std::vector<MetricRow>& rows() const { return rows_; }
  const MetricRow& row(const std::string& method) const;

 private:
  std::vector<MetricRow> rows_;
};

/// Report CSV columns, in order. The last three are always empty; they are
/// reserved for learned perceptual metrics.
const std::vector<std::string>& report_csv_columns();

void write_report_csv(const MetricReport& report, const std::filesystem::path& path);
MetricReport read_report_csv(const std::filesystem::path& path);

/// Named per-step error curve; values[i] belongs to grid step i + 1.
struct ErrorSeries {
  std::string name;
  std::vector<double> values;
};

/// Wide CSV: header `step,<name...>`, then one row per step starting at 1.
/// All series must have the same length.
void write_step_csv(const std::vector<ErrorSeries>& series, const std::filesystem::path& path);
std::vector<ErrorSeries> read_step_csv(const std::filesystem::path& path);

/// Values at or below zero are drawn at this height on the log axis.
inline constexpr double kChartFloor = 1e-20;

struct ChartPoint {
  double x = 0.0;
  double y = 0.0;
};

/// SVG pixel coordinates of every series point, as drawn by render_error_chart
/// (y grows downward, so lower error means larger y).
std::vector<std::vector<ChartPoint>> chart_coordinates(const std::vector<ErrorSeries>& series);

/// Standalone SVG: log10 y-axis with decade ticks, one polyline per series,
/// legend, axis labels. Deterministic byte for byte.
std::string render_error_chart_svg(const std::vector<ErrorSeries>& series);
void render_error_chart(const std::vector<ErrorSeries>& series, const std::filesystem::path& path);

}  // namespace flowinv
