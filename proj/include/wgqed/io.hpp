#pragma once

// Locale-independent CSV output and self-contained SVG plots.

#include <span>
#include <string>
#include <vector>

namespace wgqed {

/// Shortest representation that reads back to the same double.
std::string csv_number(double v);

struct CsvColumn {
  std::string name;
  std::vector<double> values;
};

/// Header row then one line per sample. Columns must share a length.
std::string format_csv(const std::vector<CsvColumn>& columns);

/// Matrix layout: header "row_label,col_label=v0,...", then one row per row value.
/// `values` is row-major, rows.size() x cols.size().
std::string format_matrix_csv(const std::string& row_label, std::span<const double> rows,
                              const std::string& col_label, std::span<const double> cols,
                              std::span<const double> values);

/// Reads a CSV with a header row of names and numeric cells.
std::vector<CsvColumn> parse_csv(const std::string& text);

struct PlotSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

std::string svg_line_plot(const std::string& title, const std::string& x_label,
                          const std::string& y_label, const std::vector<PlotSeries>& series);

/// Heatmap of row-major values (rows along y, columns along x); NaN cells are grey.
std::string svg_heatmap(const std::string& title, const std::string& x_label,
                        const std::string& y_label, std::span<const double> x,
                        std::span<const double> y, std::span<const double> values);

/// Writes `content` to `path`, creating parent directories.
void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

/// Lowercase hex SHA-256 of `content`.
std::string sha256_hex(const std::string& content);

}  // namespace wgqed
