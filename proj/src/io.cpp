#include "wgqed/io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace wgqed {

namespace {

std::string fixed(double v, int digits = 2) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, digits);
  return std::string(buf, res.ptr);
}

std::string label_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 4);
  return std::string(buf, res.ptr);
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

// Five-stop approximation of viridis.
std::string colour(double t) {
  static constexpr std::array<std::array<double, 3>, 5> stops{{{68, 1, 84},
                                                                {59, 82, 139},
                                                                {33, 145, 140},
                                                                {94, 201, 98},
                                                                {253, 231, 37}}};
  if (!std::isfinite(t)) return "#bbbbbb";
  t = std::clamp(t, 0.0, 1.0) * 4.0;
  const auto k = std::min(static_cast<std::size_t>(t), std::size_t{3});
  const double f = t - static_cast<double>(k);
  char buf[8];
  int rgb[3];
  for (int c = 0; c < 3; ++c) rgb[c] = static_cast<int>(std::lround(stops[k][c] + f * (stops[k + 1][c] - stops[k][c])));
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", rgb[0], rgb[1], rgb[2]);
  return buf;
}

constexpr double kW = 640, kH = 420, kLeft = 70, kRight = 20, kTop = 40, kBottom = 55;

struct Frame {
  double x0, x1, y0, y1;
  double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kW - kLeft - kRight); }
  double py(double y) const { return kH - kBottom - (y - y0) / (y1 - y0) * (kH - kTop - kBottom); }
};

void axes(std::ostringstream& os, const Frame& f, const std::string& title, const std::string& xl,
          const std::string& yl) {
  os << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << kW - kLeft - kRight
     << "\" height=\"" << kH - kTop - kBottom << "\" fill=\"none\" stroke=\"black\"/>\n";
  os << "<text x=\"" << kW / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << escape(title) << "</text>\n";
  os << "<text x=\"" << kW / 2 << "\" y=\"" << kH - 12 << "\" text-anchor=\"middle\" font-size=\"13\">" << escape(xl) << "</text>\n";
  os << "<text x=\"16\" y=\"" << kH / 2 << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 "
     << kH / 2 << ")\">" << escape(yl) << "</text>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = f.x0 + (f.x1 - f.x0) * k / 4.0, yv = f.y0 + (f.y1 - f.y0) * k / 4.0;
    os << "<text x=\"" << fixed(f.px(xv)) << "\" y=\"" << kH - kBottom + 16
       << "\" text-anchor=\"middle\" font-size=\"11\">" << label_number(xv) << "</text>\n";
    os << "<text x=\"" << kLeft - 6 << "\" y=\"" << fixed(f.py(yv) + 4)
       << "\" text-anchor=\"end\" font-size=\"11\">" << label_number(yv) << "</text>\n";
  }
}

}  // namespace

std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string format_csv(const std::vector<CsvColumn>& columns) {
  std::string out;
  for (std::size_t c = 0; c < columns.size(); ++c) out += (c ? "," : "") + columns[c].name;
  out += "\n";
  const std::size_t n = columns.empty() ? 0 : columns.front().values.size();
  for (const auto& c : columns)
    if (c.values.size() != n) throw std::invalid_argument("CSV columns differ in length");
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < columns.size(); ++c) out += (c ? "," : "") + csv_number(columns[c].values[i]);
    out += "\n";
  }
  return out;
}

std::string format_matrix_csv(const std::string& row_label, std::span<const double> rows,
                              const std::string& col_label, std::span<const double> cols,
                              std::span<const double> values) {
  if (values.size() != rows.size() * cols.size()) throw std::invalid_argument("matrix size mismatch");
  std::string out = row_label;
  for (double c : cols) out += "," + col_label + "=" + csv_number(c);
  out += "\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out += csv_number(rows[i]);
    for (std::size_t j = 0; j < cols.size(); ++j) out += "," + csv_number(values[i * cols.size() + j]);
    out += "\n";
  }
  return out;
}

std::vector<CsvColumn> parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<CsvColumn> cols;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (cols.empty()) {
      for (auto& c : cells) cols.push_back({c, {}});
      continue;
    }
    if (cells.size() != cols.size())
      throw std::invalid_argument("line " + std::to_string(line_no) + ": wrong number of columns");
    for (std::size_t c = 0; c < cells.size(); ++c) {
      double v = 0.0;
      if (cells[c] == "nan") {
        v = std::nan("");
      } else {
        const auto res = std::from_chars(cells[c].data(), cells[c].data() + cells[c].size(), v);
        if (res.ec != std::errc() || res.ptr != cells[c].data() + cells[c].size())
          throw std::invalid_argument("line " + std::to_string(line_no) + ": not a number: '" + cells[c] + "'");
      }
      cols[c].values.push_back(v);
    }
  }
  return cols;
}

std::string svg_line_plot(const std::string& title, const std::string& x_label,
                          const std::string& y_label, const std::vector<PlotSeries>& series) {
  static const char* palette[] = {"#1f77b4", "#d95f02", "#555555", "#1b9e77", "#7570b3", "#e7298a"};
  Frame f{1e300, -1e300, 1e300, -1e300};
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      f.x0 = std::min(f.x0, s.x[i]);
      f.x1 = std::max(f.x1, s.x[i]);
      f.y0 = std::min(f.y0, s.y[i]);
      f.y1 = std::max(f.y1, s.y[i]);
    }
  if (f.x0 > f.x1) f = {0, 1, 0, 1};
  if (f.x1 == f.x0) f.x1 = f.x0 + 1;
  const double pad = f.y1 > f.y0 ? 0.05 * (f.y1 - f.y0) : 0.5;
  f.y0 -= pad;
  f.y1 += pad;

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
     << "\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  axes(os, f, title, x_label, y_label);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* col = palette[k % 6];
    os << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      if (std::isfinite(s.y[i])) os << fixed(f.px(s.x[i])) << "," << fixed(f.py(s.y[i])) << " ";
    os << "\"/>\n";
    os << "<text x=\"" << kW - kRight - 8 << "\" y=\"" << kTop + 16 + 16 * k << "\" text-anchor=\"end\" font-size=\"12\" fill=\""
       << col << "\">" << escape(s.name) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string svg_heatmap(const std::string& title, const std::string& x_label,
                        const std::string& y_label, std::span<const double> x,
                        std::span<const double> y, std::span<const double> values) {
  if (values.size() != x.size() * y.size()) throw std::invalid_argument("heatmap size mismatch");
  double lo = 1e300, hi = -1e300;
  for (double v : values)
    if (std::isfinite(v)) lo = std::min(lo, v), hi = std::max(hi, v);
  if (lo > hi) lo = 0, hi = 1;
  if (hi == lo) hi = lo + 1;

  auto edges = [](std::span<const double> c) {
    std::vector<double> e(c.size() + 1);
    if (c.size() == 1) return std::vector<double>{c[0] - 0.5, c[0] + 0.5};
    for (std::size_t i = 1; i < c.size(); ++i) e[i] = 0.5 * (c[i - 1] + c[i]);
    e.front() = c.front() - (e[1] - c.front());
    e.back() = c.back() + (c.back() - e[c.size() - 1]);
    return e;
  };
  const auto ex = edges(x), ey = edges(y);
  Frame f{ex.front(), ex.back(), ey.front(), ey.back()};

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW + 60 << "\" height=\"" << kH
     << "\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t i = 0; i < y.size(); ++i) {
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double xa = f.px(ex[j]), xb = f.px(ex[j + 1]);
      const double ya = f.py(ey[i + 1]), yb = f.py(ey[i]);
      os << "<rect x=\"" << fixed(std::min(xa, xb)) << "\" y=\"" << fixed(std::min(ya, yb)) << "\" width=\""
         << fixed(std::abs(xb - xa) + 0.3) << "\" height=\"" << fixed(std::abs(yb - ya) + 0.3) << "\" fill=\""
         << colour((values[i * x.size() + j] - lo) / (hi - lo)) << "\"/>\n";
    }
  }
  axes(os, f, title, x_label, y_label);
  // colour bar
  for (int k = 0; k < 50; ++k) {
    const double y0 = kH - kBottom - (kH - kTop - kBottom) * (k + 1) / 50.0;
    os << "<rect x=\"" << kW + 5 << "\" y=\"" << fixed(y0) << "\" width=\"14\" height=\""
       << fixed((kH - kTop - kBottom) / 50.0 + 0.3) << "\" fill=\"" << colour((k + 0.5) / 50.0) << "\"/>\n";
  }
  os << "<text x=\"" << kW + 22 << "\" y=\"" << kTop + 10 << "\" font-size=\"11\">" << label_number(hi) << "</text>\n";
  os << "<text x=\"" << kW + 22 << "\" y=\"" << kH - kBottom << "\" font-size=\"11\">" << label_number(lo) << "</text>\n";
  os << "</svg>\n";
  return os.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
  if (!out) throw std::runtime_error("failed writing " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string sha256_hex(const std::string& content) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(content.data(), content.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 computation failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

}  // namespace wgqed
