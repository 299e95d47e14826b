#pragma once

// Curve serialization: CSV with a fixed column schema (17 significant digits,
// so a re-read curve fits to exactly the same slope) and a JSON report that
// carries every CurvePoint field.

#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dembed/experiment.hpp"

namespace dembed {

inline const std::vector<std::string>& curve_csv_columns() {
  static const std::vector<std::string> cols = {"snr_db",     "trials",     "errors_high", "errors_low",
                                                "outage",     "p_high",     "p_low",       "ci_lo_high",
                                                "ci_hi_high", "ci_lo_low",  "ci_hi_low"};
  return cols;
}

/// Raised when a CSV does not follow the curve schema.
class schema_error : public std::runtime_error {
 public:
  schema_error(const std::string& what, std::vector<std::string> missing = {})
      : std::runtime_error(what), missing_columns(std::move(missing)) {}
  std::vector<std::string> missing_columns;
};

namespace detail {

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.16e", v);
  return buf;
}

}  // namespace detail

inline void write_curve_csv(std::ostream& os, const ErrorCurve& curve) {
  const auto& cols = curve_csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << '\n';
  for (const CurvePoint& p : curve.points) {
    const auto [lo_h, hi_h] = p.ci_high();
    const auto [lo_l, hi_l] = p.ci_low();
    os << detail::fmt17(p.snr_db) << ',' << p.trials << ',' << p.errors_high << ',' << p.errors_low << ','
       << p.outage << ',' << detail::fmt17(p.p_high()) << ',' << detail::fmt17(p.p_low()) << ','
       << detail::fmt17(lo_h) << ',' << detail::fmt17(hi_h) << ',' << detail::fmt17(lo_l) << ','
       << detail::fmt17(hi_l) << '\n';
  }
}

inline std::string curve_csv_string(const ErrorCurve& curve) {
  std::ostringstream os;
  write_curve_csv(os, curve);
  return os.str();
}

/// Reads the count columns back. Derived columns (p, ci) are recomputed from
/// the counts; extra columns are ignored.
inline ErrorCurve read_curve_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw schema_error("curve CSV is empty");
  std::map<std::string, std::size_t> pos;
  {
    std::stringstream ss(line);
    std::string cell;
    std::size_t i = 0;
    while (std::getline(ss, cell, ',')) {
      while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
      pos[cell] = i++;
    }
  }
  std::vector<std::string> missing;
  for (const auto& c : curve_csv_columns())
    if (!pos.contains(c)) missing.push_back(c);
  if (!missing.empty()) {
    std::string msg = "curve CSV is missing columns:";
    for (const auto& m : missing) msg += " " + m;
    throw schema_error(msg, missing);
  }

  ErrorCurve curve;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() < pos.size()) throw schema_error("curve CSV line " + std::to_string(line_no) + ": too few cells");
    try {
      CurvePoint p;
      p.snr_db = std::stod(cells[pos["snr_db"]]);
      p.trials = std::stoull(cells[pos["trials"]]);
      p.errors_high = std::stoull(cells[pos["errors_high"]]);
      p.errors_low = std::stoull(cells[pos["errors_low"]]);
      p.outage = std::stoull(cells[pos["outage"]]);
      if (p.errors_low > 0) curve.has_low_layer = true;
      curve.points.push_back(p);
    } catch (const std::logic_error&) {
      throw schema_error("curve CSV line " + std::to_string(line_no) + ": unparsable number");
    }
  }
  return curve;
}

inline nlohmann::json to_json(const CurvePoint& p) {
  const auto [lo_h, hi_h] = p.ci_high();
  const auto [lo_l, hi_l] = p.ci_low();
  return {{"snr_db", p.snr_db},
          {"trials", p.trials},
          {"errors_high", p.errors_high},
          {"errors_low", p.errors_low},
          {"outage", p.outage},
          {"outage_low", p.outage_low},
          {"errors_high_in_outage", p.errors_high_in_outage},
          {"errors_high_no_outage", p.errors_high_no_outage},
          {"errors_low_in_outage", p.errors_low_in_outage},
          {"errors_low_no_outage", p.errors_low_no_outage},
          {"ties", p.ties},
          {"size_high", p.size_high},
          {"size_low", p.size_low},
          {"realized_r_tilde_high", p.realized_r_tilde_high},
          {"realized_r_tilde_low", p.realized_r_tilde_low},
          {"p_high", p.p_high()},
          {"p_low", p.p_low()},
          {"ci_lo_high", lo_h},
          {"ci_hi_high", hi_h},
          {"ci_lo_low", lo_l},
          {"ci_hi_low", hi_l}};
}

inline nlohmann::json to_json(const ErrorCurve& c) {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : c.points) pts.push_back(to_json(p));
  return {{"has_low_layer", c.has_low_layer}, {"points", pts}};
}

inline nlohmann::json to_json(const DiversityEstimate& d) {
  return {{"slope", d.slope},
          {"stderr", d.std_error},
          {"fit_window_db", {d.fit_window_db.first, d.fit_window_db.second}},
          {"points_used", d.points_used}};
}

template <class T>
nlohmann::json to_json(const BoundsReport<T>& b) {
  return {{"lower", static_cast<double>(b.lower)},
          {"upper", static_cast<double>(b.upper)},
          {"rate", static_cast<double>(b.rate)},
          {"n_data", b.shape.n_data},
          {"nu", b.shape.nu},
          {"m_rx", b.shape.m_rx}};
}

}  // namespace dembed
