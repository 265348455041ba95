#pragma once

// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The forklab authors

/**
 * @file report.hpp
 * @brief Deterministic report emission: CSV tables re-read from a run or
 * analysis directory, rendered as standalone SVG line and bar charts.
 *
 * SVGs are self-contained static documents with a fixed, seedless layout:
 * same input bytes, same output bytes. Each line chart contains exactly one
 * <polyline> data element; axes and ticks are <line> and <text> elements.
 */

#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <forklab/errors.hpp>
#include <forklab/io.hpp>

namespace forklab::report {

namespace detail {

/// Fixed two-decimal coordinate formatting keeps SVG bytes deterministic.
inline std::string fmt_coord(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return std::string(buf);
}

/// Short value label for axis ticks.
inline std::string fmt_tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return std::string(buf);
}

struct Frame {
  static constexpr double width = 640.0;
  static constexpr double height = 400.0;
  static constexpr double margin_left = 70.0;
  static constexpr double margin_right = 20.0;
  static constexpr double margin_top = 40.0;
  static constexpr double margin_bottom = 50.0;

  double x_min = 0.0, x_max = 1.0, y_min = 0.0, y_max = 1.0;

  double px(double x) const {
    const double span = x_max - x_min;
    const double t = span == 0.0 ? 0.5 : (x - x_min) / span;
    return margin_left + t * (width - margin_left - margin_right);
  }
  double py(double y) const {
    const double span = y_max - y_min;
    const double t = span == 0.0 ? 0.5 : (y - y_min) / span;
    return height - margin_bottom - t * (height - margin_top - margin_bottom);
  }
};

inline std::string svg_open(const std::string& title) {
  std::string out =
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" "
      "viewBox=\"0 0 640 400\">\n";
  out += "  <rect x=\"0\" y=\"0\" width=\"640\" height=\"400\" fill=\"white\"/>\n";
  out += "  <text x=\"320\" y=\"24\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"16\">" + title + "</text>\n";
  return out;
}

inline std::string svg_axes(const Frame& frame, const std::string& x_label,
                            const std::string& y_label) {
  std::string out;
  const double x0 = Frame::margin_left;
  const double x1 = Frame::width - Frame::margin_right;
  const double y0 = Frame::height - Frame::margin_bottom;
  const double y1 = Frame::margin_top;
  out += "  <line x1=\"" + fmt_coord(x0) + "\" y1=\"" + fmt_coord(y0) +
         "\" x2=\"" + fmt_coord(x1) + "\" y2=\"" + fmt_coord(y0) +
         "\" stroke=\"black\"/>\n";
  out += "  <line x1=\"" + fmt_coord(x0) + "\" y1=\"" + fmt_coord(y0) +
         "\" x2=\"" + fmt_coord(x0) + "\" y2=\"" + fmt_coord(y1) +
         "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = frame.x_min + (frame.x_max - frame.x_min) * i / 4.0;
    const double fy = frame.y_min + (frame.y_max - frame.y_min) * i / 4.0;
    out += "  <text x=\"" + fmt_coord(frame.px(fx)) + "\" y=\"" +
           fmt_coord(y0 + 18.0) + "\" text-anchor=\"middle\" "
           "font-family=\"sans-serif\" font-size=\"11\">" + fmt_tick(fx) +
           "</text>\n";
    out += "  <text x=\"" + fmt_coord(x0 - 8.0) + "\" y=\"" +
           fmt_coord(frame.py(fy) + 4.0) + "\" text-anchor=\"end\" "
           "font-family=\"sans-serif\" font-size=\"11\">" + fmt_tick(fy) +
           "</text>\n";
  }
  out += "  <text x=\"" + fmt_coord((x0 + x1) / 2.0) + "\" y=\"" +
         fmt_coord(Frame::height - 12.0) + "\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"12\">" + x_label + "</text>\n";
  out += "  <text x=\"16\" y=\"" + fmt_coord((y0 + y1) / 2.0) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
         "transform=\"rotate(-90 16 " + fmt_coord((y0 + y1) / 2.0) + ")\">" +
         y_label + "</text>\n";
  return out;
}

}  // namespace detail

/// Single-series line chart; exactly one <polyline> carries the data.
inline std::string svg_line_chart(const std::vector<std::pair<double, double>>& points,
                                  const std::string& title,
                                  const std::string& x_label,
                                  const std::string& y_label) {
  if (points.empty()) throw EmptyInputError("no points to plot");
  detail::Frame frame;
  frame.x_min = frame.x_max = points.front().first;
  frame.y_min = frame.y_max = points.front().second;
  for (const auto& [x, y] : points) {
    frame.x_min = std::min(frame.x_min, x);
    frame.x_max = std::max(frame.x_max, x);
    frame.y_min = std::min(frame.y_min, y);
    frame.y_max = std::max(frame.y_max, y);
  }
  if (frame.y_min == frame.y_max) {
    frame.y_min -= 0.5;
    frame.y_max += 0.5;
  }
  if (frame.x_min == frame.x_max) {
    frame.x_min -= 0.5;
    frame.x_max += 0.5;
  }

  std::string out = detail::svg_open(title);
  out += detail::svg_axes(frame, x_label, y_label);
  out += "  <polyline fill=\"none\" stroke=\"#3366cc\" stroke-width=\"1.5\" points=\"";
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (i > 0) out += " ";
    out += detail::fmt_coord(frame.px(points[i].first)) + "," +
           detail::fmt_coord(frame.py(points[i].second));
  }
  out += "\"/>\n</svg>\n";
  return out;
}

/// Paired bar chart (positive vs negative counts per bin).
inline std::string svg_bar_chart(const std::vector<double>& bin_lo,
                                 const std::vector<double>& bin_hi,
                                 const std::vector<double>& counts_pos,
                                 const std::vector<double>& counts_neg,
                                 const std::string& title,
                                 const std::string& x_label) {
  if (bin_lo.empty() || bin_lo.size() != bin_hi.size() ||
      bin_lo.size() != counts_pos.size() || bin_lo.size() != counts_neg.size()) {
    throw ShapeError("histogram columns must be non-empty and equal length");
  }
  detail::Frame frame;
  frame.x_min = bin_lo.front();
  frame.x_max = bin_hi.back();
  frame.y_min = 0.0;
  frame.y_max = 1.0;
  for (std::size_t i = 0; i < counts_pos.size(); ++i) {
    frame.y_max = std::max({frame.y_max, counts_pos[i], counts_neg[i]});
  }

  std::string out = detail::svg_open(title);
  out += detail::svg_axes(frame, x_label, "count");
  const double base_y = detail::Frame::height - detail::Frame::margin_bottom;
  for (std::size_t i = 0; i < bin_lo.size(); ++i) {
    const double x0 = frame.px(bin_lo[i]);
    const double x1 = frame.px(bin_hi[i]);
    const double w = (x1 - x0) / 2.0;
    const double hp = base_y - frame.py(counts_pos[i]);
    const double hn = base_y - frame.py(counts_neg[i]);
    out += "  <rect x=\"" + detail::fmt_coord(x0) + "\" y=\"" +
           detail::fmt_coord(base_y - hp) + "\" width=\"" + detail::fmt_coord(w) +
           "\" height=\"" + detail::fmt_coord(hp) +
           "\" fill=\"#3366cc\" fill-opacity=\"0.7\"/>\n";
    out += "  <rect x=\"" + detail::fmt_coord(x0 + w) + "\" y=\"" +
           detail::fmt_coord(base_y - hn) + "\" width=\"" + detail::fmt_coord(w) +
           "\" height=\"" + detail::fmt_coord(hn) +
           "\" fill=\"#cc3333\" fill-opacity=\"0.7\"/>\n";
  }
  out += "</svg>\n";
  return out;
}

// ============================================================================
// CSV re-ingestion
// ============================================================================

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw ParseError("missing CSV column: " + name);
  }
};

inline CsvTable parse_csv(const std::string& text) {
  CsvTable table;
  std::size_t pos = 0;
  bool first = true;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    pos = end + 1;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t cell_pos = 0;
    while (true) {
      const std::size_t comma = line.find(',', cell_pos);
      if (comma == std::string::npos) {
        cells.push_back(line.substr(cell_pos));
        break;
      }
      cells.push_back(line.substr(cell_pos, comma - cell_pos));
      cell_pos = comma + 1;
    }
    if (first) {
      table.header = std::move(cells);
      first = false;
    } else {
      if (cells.size() != table.header.size()) {
        throw ParseError("CSV row width does not match header");
      }
      table.rows.push_back(std::move(cells));
    }
  }
  if (first) throw ParseError("CSV has no header");
  return table;
}

// ============================================================================
// Report emission
// ============================================================================

/**
 * Render everything reportable found in `in_dir` into `out_dir`:
 * - metrics.csv -> solve_rate.svg, entropy.svg, loss.svg + report_metrics.csv
 * - pass_curve.csv -> pass_at_k.svg (one chart per task_set value)
 * - histogram.csv -> histogram.svg
 * A metrics.csv with a header but no rows writes the header-only copy, emits
 * no SVG, and raises EmptyInputError (the CLI exits nonzero). A directory
 * with none of the inputs raises IoError.
 */
inline void emit_report(const std::filesystem::path& in_dir,
                        const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create report directory: " + out_dir.string());

  bool found_any = false;

  const auto metrics_path = in_dir / "metrics.csv";
  if (std::filesystem::exists(metrics_path)) {
    found_any = true;
    const auto table = parse_csv(io::read_file(metrics_path));
    std::string copy;
    for (std::size_t i = 0; i < table.header.size(); ++i) {
      if (i > 0) copy += ",";
      copy += table.header[i];
    }
    copy += "\n";
    for (const auto& row : table.rows) {
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (i > 0) copy += ",";
        copy += row[i];
      }
      copy += "\n";
    }
    io::write_file_atomic(out_dir / "report_metrics.csv", copy);
    if (table.rows.empty()) {
      throw EmptyInputError("metrics series is empty; no charts emitted");
    }
    const std::size_t step_col = table.column("step");
    auto series = [&](const std::string& name) {
      std::vector<std::pair<double, double>> points;
      const std::size_t col = table.column(name);
      for (const auto& row : table.rows) {
        points.emplace_back(std::stod(row[step_col]), std::stod(row[col]));
      }
      return points;
    };
    io::write_file_atomic(out_dir / "solve_rate.svg",
                          svg_line_chart(series("solve_rate"),
                                         "training solve rate", "step",
                                         "solve rate"));
    io::write_file_atomic(out_dir / "entropy.svg",
                          svg_line_chart(series("mean_entropy"),
                                         "mean policy entropy", "step",
                                         "entropy (nats)"));
    io::write_file_atomic(out_dir / "loss.svg",
                          svg_line_chart(series("loss_total"), "training loss",
                                         "step", "loss"));
  }

  const auto pass_path = in_dir / "pass_curve.csv";
  if (std::filesystem::exists(pass_path)) {
    found_any = true;
    const auto table = parse_csv(io::read_file(pass_path));
    const std::size_t set_col = table.column("task_set");
    const std::size_t k_col = table.column("k");
    const std::size_t pass_col = table.column("pass_at_k");
    std::vector<std::string> sets;
    for (const auto& row : table.rows) {
      bool seen = false;
      for (const auto& s : sets) seen = seen || s == row[set_col];
      if (!seen) sets.push_back(row[set_col]);
    }
    for (const auto& set : sets) {
      std::vector<std::pair<double, double>> points;
      for (const auto& row : table.rows) {
        if (row[set_col] != set) continue;
        points.emplace_back(std::stod(row[k_col]), std::stod(row[pass_col]));
      }
      if (!points.empty()) {
        io::write_file_atomic(out_dir / ("pass_at_k_" + set + ".svg"),
                              svg_line_chart(points, "pass@k (" + set + ")",
                                             "k", "pass@k"));
      }
    }
  }

  const auto hist_path = in_dir / "histogram.csv";
  if (std::filesystem::exists(hist_path)) {
    found_any = true;
    const auto table = parse_csv(io::read_file(hist_path));
    const std::size_t lo = table.column("bin_lo");
    const std::size_t hi = table.column("bin_hi");
    const std::size_t cp = table.column("count_pos");
    const std::size_t cn = table.column("count_neg");
    std::vector<double> bin_lo, bin_hi, pos, neg;
    for (const auto& row : table.rows) {
      bin_lo.push_back(std::stod(row[lo]));
      bin_hi.push_back(std::stod(row[hi]));
      pos.push_back(std::stod(row[cp]));
      neg.push_back(std::stod(row[cn]));
    }
    if (!bin_lo.empty()) {
      io::write_file_atomic(
          out_dir / "histogram.svg",
          svg_bar_chart(bin_lo, bin_hi, pos, neg,
                        "token entropy by reward polarity", "entropy (nats)"));
    }
  }

  if (!found_any) {
    throw IoError("no reportable inputs (metrics.csv, pass_curve.csv, "
                  "histogram.csv) in " + in_dir.string());
  }
}

}  // namespace forklab::report
