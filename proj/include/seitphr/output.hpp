/*
 * Copyright (C) 2026 The seitphr Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#ifndef SEITPHR_OUTPUT_HPP
#define SEITPHR_OUTPUT_HPP

/**
 * @file
 * @brief CSV, manifest and SVG writers. Numbers use the shortest
 * round-trip representation, so identical runs give identical bytes.
 */

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "seitphr/errors.hpp"
#include "seitphr/ocp.hpp"

namespace seitphr {

inline constexpr std::string_view kVersion = "0.1.0";

class OutputError : public Error {
 public:
  using Error::Error;
};

/// Shortest decimal that parses back to `v`; "nan" and "inf" for non-finite values.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

/// A table rendered as comma-separated text.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) : columns_(header.size()) { add_row_text(header); }

  std::size_t columns() const { return columns_; }

  void add_row(const std::vector<double>& values, std::string_view prefix = {}) {
    std::string row(prefix);
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i > 0 || !prefix.empty()) row += ',';
      row += format_number(values[i]);
    }
    text_ += row;
    text_ += '\n';
  }

  void add_row_text(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i > 0) text_ += ',';
      text_ += cells[i];
    }
    text_ += '\n';
  }

  const std::string& text() const { return text_; }

 private:
  std::size_t columns_;
  std::string text_;
};

inline void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw OutputError("output: cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw OutputError("output: write failed for " + path.string());
}

/// One row per sample and group; aggregates repeat on every group row.
inline std::string trajectory_csv(const Trajectory& traj) {
  std::vector<std::string> header = {"t_days", "group"};
  for (auto n : kCompartmentNames) header.emplace_back(n);
  for (const char* h : {"icu_abs", "t_tot", "r_ngm"}) header.emplace_back(h);
  CsvWriter csv(header);
  const bool ngm = traj.r_ngm.size() == traj.size();
  for (std::size_t n = 0; n < traj.size(); ++n) {
    const StateVector& x = traj.states[n];
    for (std::size_t g = 0; g < x.n_groups(); ++g) {
      std::vector<double> row;
      row.reserve(header.size() - 1);
      row.push_back(static_cast<double>(g + 1));
      for (std::size_t c = 0; c < kCompartments; ++c) row.push_back(x.data()[g * kCompartments + c]);
      row.push_back(traj.icu_abs[n]);
      row.push_back(traj.t_tot[n]);
      row.push_back(ngm ? traj.r_ngm[n] : std::nan(""));
      csv.add_row(row, format_number(traj.times[n]));
    }
  }
  return csv.text();
}

/// Weekly controls: beta_i_j (row-major), theta_i, delta and the mean contact rate beta_bar.
inline std::string policy_csv(const PiecewisePolicy& policy, const ModelParameters& p, std::size_t first_week = 0) {
  const std::size_t n = p.n_groups;
  std::vector<std::string> header = {"week"};
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= n; ++j) header.push_back("beta_" + std::to_string(i) + "_" + std::to_string(j));
  }
  for (std::size_t i = 1; i <= n; ++i) header.push_back("theta_" + std::to_string(i));
  header.emplace_back("delta");
  header.emplace_back("beta_bar");
  CsvWriter csv(header);
  for (std::size_t k = 0; k < policy.size(); ++k) {
    const ControlInput& u = policy.controls[k];
    std::vector<double> row = {static_cast<double>(first_week + k)};
    for (Eigen::Index i = 0; i < u.beta.rows(); ++i) {
      for (Eigen::Index j = 0; j < u.beta.cols(); ++j) row.push_back(u.beta(i, j));
    }
    for (Eigen::Index i = 0; i < u.theta.size(); ++i) row.push_back(u.theta[i]);
    row.push_back(distancing_factor(u.beta, p));
    row.push_back(mean_contact_rate(u.beta, p.N));
    csv.add_row(row);
  }
  return csv.text();
}

/// Detected cases T^S + T^O per sample, in agents.
inline std::vector<double> detected_cases(const Trajectory& traj, const ModelParameters& p) {
  std::vector<double> out;
  out.reserve(traj.size());
  for (const auto& x : traj.states) {
    double acc = 0.0;
    for (std::size_t g = 0; g < x.n_groups(); ++g) {
      const AgeGroupState a = x.group(g);
      acc += a.t_s + a.t_o;
    }
    out.push_back(acc * p.n_pop);
  }
  return out;
}

inline nlohmann::ordered_json diagnostics_json(const SolverDiagnostics& d) {
  return {{"iterations", d.iterations},
          {"qp_iterations", d.qp_iterations},
          {"evaluations", d.evaluations},
          {"stationarity", d.stationarity},
          {"complementarity", d.complementarity},
          {"max_violation", d.max_violation},
          {"best_violation", d.best_violation},
          {"verification_violation", d.verification_violation},
          {"n_variables", d.n_variables},
          {"n_constraints", d.n_constraints}};
}

inline nlohmann::ordered_json tolerances_json(const nlp::Options& o) {
  return {{"feasibility", o.feasibility_tol},
          {"stationarity", o.stationarity_tol},
          {"complementarity", o.complementarity_tol},
          {"max_iterations", o.max_iterations}};
}

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

/**
 * Minimal line chart: axes with min/max labels, one polyline per series and
 * an optional dashed horizontal reference line.
 */
inline std::string render_svg(std::string_view title, std::string_view x_label, const std::vector<PlotSeries>& series,
                              std::optional<double> reference = std::nullopt) {
  constexpr double W = 720, H = 400, L = 70, R = 20, T = 40, B = 50;
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  bool first = true;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      if (first) {
        xmin = xmax = s.x[i];
        ymin = ymax = s.y[i];
        first = false;
      }
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  }
  if (reference) {
    ymin = std::min(ymin, *reference);
    ymax = std::max(ymax, *reference);
  }
  ymin = std::min(ymin, 0.0);
  if (xmax <= xmin) xmax = xmin + 1;
  if (ymax <= ymin) ymax = ymin + 1;
  auto px = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - ymin) / (ymax - ymin) * (H - T - B); };
  static constexpr const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"720\" height=\"400\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg += "<rect width=\"720\" height=\"400\" fill=\"white\"/>\n";
  svg += "<text x=\"360\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" + std::string(title) + "</text>\n";
  svg += "<polyline fill=\"none\" stroke=\"black\" points=\"" + format_number(L) + "," + format_number(T) + " " +
         format_number(L) + "," + format_number(H - B) + " " + format_number(W - R) + "," + format_number(H - B) + "\"/>\n";
  svg += "<text x=\"" + format_number(L - 6) + "\" y=\"" + format_number(py(ymax) + 4) + "\" text-anchor=\"end\">" +
         format_number(ymax) + "</text>\n";
  svg += "<text x=\"" + format_number(L - 6) + "\" y=\"" + format_number(py(ymin) + 4) + "\" text-anchor=\"end\">" +
         format_number(ymin) + "</text>\n";
  svg += "<text x=\"" + format_number(L) + "\" y=\"" + format_number(H - B + 16) + "\">" + format_number(xmin) + "</text>\n";
  svg += "<text x=\"" + format_number(W - R) + "\" y=\"" + format_number(H - B + 16) + "\" text-anchor=\"end\">" +
         format_number(xmax) + "</text>\n";
  svg += "<text x=\"360\" y=\"" + format_number(H - 12) + "\" text-anchor=\"middle\">" + std::string(x_label) + "</text>\n";
  if (reference) {
    svg += "<line x1=\"" + format_number(L) + "\" x2=\"" + format_number(W - R) + "\" y1=\"" + format_number(py(*reference)) +
           "\" y2=\"" + format_number(py(*reference)) + "\" stroke=\"gray\" stroke-dasharray=\"6,4\"/>\n";
  }
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = colors[s % std::size(colors)];
    std::string pts;
    for (std::size_t i = 0; i < series[s].x.size(); ++i) {
      if (!std::isfinite(series[s].y[i])) continue;
      pts += format_number(std::round(px(series[s].x[i]) * 10) / 10) + "," +
             format_number(std::round(py(series[s].y[i]) * 10) / 10) + " ";
    }
    svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
    svg += "<text x=\"" + format_number(W - R - 4) + "\" y=\"" + format_number(T + 14 * static_cast<double>(s + 1)) +
           "\" text-anchor=\"end\" fill=\"" + color + "\">" + series[s].label + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace seitphr

#endif  // SEITPHR_OUTPUT_HPP
