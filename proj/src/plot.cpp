#include "dualaug/plot.hpp"

#include "dualaug/errors.hpp"
#include "dualaug/io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

namespace dualaug {

int CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  return it == header.end() ? -1 : static_cast<int>(it - header.begin());
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::optional<double> number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string compact(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

constexpr std::array<const char*, 8> kPalette = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                                 "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

struct Range {
  double lo = 0.0;
  double hi = 1.0;

  void widen() {
    if (hi - lo < 1e-12) {
      lo -= 0.5;
      hi += 0.5;
    }
  }
};

std::string line_chart(const CsvTable& t, const std::string& title) {
  const int xcol = t.column("step");
  std::vector<int> series;
  for (int c = 0; c < static_cast<int>(t.header.size()); ++c) {
    if (c == xcol || t.header[static_cast<std::size_t>(c)] == "epoch") continue;
    const bool any = std::any_of(t.rows.begin(), t.rows.end(),
                                 [&](const auto& r) { return number(r[static_cast<std::size_t>(c)]).has_value(); });
    if (any) series.push_back(c);
  }
  Range xr{1e300, -1e300}, yr{1e300, -1e300};
  for (const auto& r : t.rows) {
    const auto x = number(r[static_cast<std::size_t>(xcol)]);
    if (!x) continue;
    xr.lo = std::min(xr.lo, *x);
    xr.hi = std::max(xr.hi, *x);
    for (int c : series) {
      if (const auto y = number(r[static_cast<std::size_t>(c)])) {
        yr.lo = std::min(yr.lo, *y);
        yr.hi = std::max(yr.hi, *y);
      }
    }
  }
  if (xr.lo > xr.hi) xr = {0.0, 1.0};
  if (yr.lo > yr.hi) yr = {0.0, 1.0};
  xr.widen();
  yr.widen();

  const double w = 800, h = 480, left = 80, right = 200, top = 40, bottom = 50;
  const double pw = w - left - right, ph = h - top - bottom;
  const auto px = [&](double x) { return left + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
  const auto py = [&](double y) { return top + (1.0 - (y - yr.lo) / (yr.hi - yr.lo)) * ph; };

  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"480\" font-family=\"sans-serif\" "
                  "font-size=\"12\">\n<rect width=\"800\" height=\"480\" fill=\"white\"/>\n";
  s += "<text x=\"" + fmt(left) + "\" y=\"24\" font-size=\"15\">" + escape(title) + "</text>\n";
  s += "<rect x=\"" + fmt(left) + "\" y=\"" + fmt(top) + "\" width=\"" + fmt(pw) + "\" height=\"" + fmt(ph) +
       "\" fill=\"none\" stroke=\"#333\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double yv = yr.lo + (yr.hi - yr.lo) * i / 4.0;
    const double xv = xr.lo + (xr.hi - xr.lo) * i / 4.0;
    s += "<text x=\"" + fmt(left - 6) + "\" y=\"" + fmt(py(yv) + 4) + "\" text-anchor=\"end\">" + compact(yv) +
         "</text>\n";
    s += "<text x=\"" + fmt(px(xv)) + "\" y=\"" + fmt(top + ph + 18) + "\" text-anchor=\"middle\">" + compact(xv) +
         "</text>\n";
  }
  s += "<text x=\"" + fmt(left + pw / 2) + "\" y=\"" + fmt(h - 10) + "\" text-anchor=\"middle\">step</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const int c = series[k];
    const char* colour = kPalette[k % kPalette.size()];
    std::string points;
    for (const auto& r : t.rows) {
      const auto x = number(r[static_cast<std::size_t>(xcol)]);
      const auto y = number(r[static_cast<std::size_t>(c)]);
      if (!x || !y) continue;
      if (!points.empty()) points += ' ';
      points += fmt(px(*x)) + "," + fmt(py(*y));
    }
    s += "<polyline fill=\"none\" stroke=\"" + std::string(colour) + "\" stroke-width=\"1.5\" points=\"" + points +
         "\"/>\n";
    const double ly = top + 14.0 * static_cast<double>(k) + 8;
    s += "<line x1=\"" + fmt(w - right + 10) + "\" y1=\"" + fmt(ly) + "\" x2=\"" + fmt(w - right + 30) + "\" y2=\"" +
         fmt(ly) + "\" stroke=\"" + colour + "\" stroke-width=\"2\"/>\n";
    s += "<text x=\"" + fmt(w - right + 36) + "\" y=\"" + fmt(ly + 4) + "\">" +
         escape(t.header[static_cast<std::size_t>(c)]) + "</text>\n";
  }
  return s + "</svg>\n";
}

std::string bar_chart(const CsvTable& t, const std::string& title) {
  std::vector<int> labels, metrics;
  for (int c = 0; c < static_cast<int>(t.header.size()); ++c) {
    const bool numeric = std::all_of(t.rows.begin(), t.rows.end(),
                                     [&](const auto& r) { return number(r[static_cast<std::size_t>(c)]).has_value(); });
    const std::string& name = t.header[static_cast<std::size_t>(c)];
    if (!numeric) labels.push_back(c);
    else if (name != "n" && name != "seeds") metrics.push_back(c);
  }
  if (metrics.empty()) throw ParseError("no numeric columns to plot");

  std::vector<std::string> row_labels;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    std::string l;
    for (int c : labels) l += (l.empty() ? "" : " / ") + t.rows[i][static_cast<std::size_t>(c)];
    row_labels.push_back(l.empty() ? std::to_string(i) : l);
  }

  const double panel_w = 260, panel_h = 220, gap = 30, top = 50, left = 20;
  const std::size_t per_row = 3;
  const std::size_t panel_rows = (metrics.size() + per_row - 1) / per_row;
  const double legend_h = 16.0 * static_cast<double>(t.rows.size()) + 20;
  const double w = left * 2 + per_row * (panel_w + gap);
  const double h = top + panel_rows * (panel_h + gap) + legend_h;

  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(w) + "\" height=\"" + fmt(h) +
                  "\" font-family=\"sans-serif\" font-size=\"11\">\n<rect width=\"" + fmt(w) + "\" height=\"" + fmt(h) +
                  "\" fill=\"white\"/>\n";
  s += "<text x=\"" + fmt(left) + "\" y=\"24\" font-size=\"15\">" + escape(title) + "</text>\n";
  for (std::size_t m = 0; m < metrics.size(); ++m) {
    const int c = metrics[m];
    const double x0 = left + static_cast<double>(m % per_row) * (panel_w + gap);
    const double y0 = top + static_cast<double>(m / per_row) * (panel_h + gap);
    double hi = 0.0, lo = 0.0;
    for (const auto& r : t.rows) {
      const double v = *number(r[static_cast<std::size_t>(c)]);
      hi = std::max(hi, v);
      lo = std::min(lo, v);
    }
    Range yr{lo, hi};
    yr.widen();
    const double inner_h = panel_h - 40;
    const auto py = [&](double v) { return y0 + 20 + (1.0 - (v - yr.lo) / (yr.hi - yr.lo)) * inner_h; };
    s += "<text x=\"" + fmt(x0) + "\" y=\"" + fmt(y0 + 12) + "\" font-weight=\"bold\">" +
         escape(t.header[static_cast<std::size_t>(c)]) + "</text>\n";
    s += "<line x1=\"" + fmt(x0) + "\" y1=\"" + fmt(py(0.0)) + "\" x2=\"" + fmt(x0 + panel_w) + "\" y2=\"" +
         fmt(py(0.0)) + "\" stroke=\"#333\"/>\n";
    const double bw = panel_w / static_cast<double>(std::max<std::size_t>(1, t.rows.size()));
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      const double v = *number(t.rows[i][static_cast<std::size_t>(c)]);
      const double ya = py(std::max(v, 0.0)), yb = py(std::min(v, 0.0));
      s += "<rect x=\"" + fmt(x0 + bw * static_cast<double>(i) + 2) + "\" y=\"" + fmt(ya) + "\" width=\"" +
           fmt(std::max(1.0, bw - 4)) + "\" height=\"" + fmt(yb - ya) + "\" fill=\"" +
           kPalette[i % kPalette.size()] + "\"><title>" + escape(row_labels[i]) + ": " + compact(v) +
           "</title></rect>\n";
    }
    s += "<text x=\"" + fmt(x0 + panel_w) + "\" y=\"" + fmt(y0 + 12) + "\" text-anchor=\"end\">max " + compact(hi) +
         "</text>\n";
  }
  const double ly0 = top + panel_rows * (panel_h + gap);
  for (std::size_t i = 0; i < row_labels.size(); ++i) {
    const double ly = ly0 + 16.0 * static_cast<double>(i);
    s += "<rect x=\"" + fmt(left) + "\" y=\"" + fmt(ly) + "\" width=\"12\" height=\"12\" fill=\"" +
         kPalette[i % kPalette.size()] + "\"/>\n";
    s += "<text x=\"" + fmt(left + 18) + "\" y=\"" + fmt(ly + 10) + "\">" + escape(row_labels[i]) + "</text>\n";
  }
  return s + "</svg>\n";
}

}  // namespace

CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  long number_of_line = 0;
  while (std::getline(in, line)) {
    ++number_of_line;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size()) throw ParseError("row width differs from header", number_of_line);
    t.rows.push_back(std::move(cells));
  }
  if (t.header.empty()) throw ParseError("empty CSV");
  if (t.rows.empty()) throw ParseError("CSV has a header but no rows");
  return t;
}

std::string render_svg(const CsvTable& table, const std::string& title) {
  return table.column("step") >= 0 ? line_chart(table, title) : bar_chart(table, title);
}

void plot_csv(const std::string& csv_path, const std::string& svg_path) {
  const CsvTable t = parse_csv(read_text_file(csv_path));
  write_text_file_atomic(svg_path, render_svg(t, std::filesystem::path(csv_path).filename().string()));
}

}  // namespace dualaug
