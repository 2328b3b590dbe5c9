#pragma once

// CSV logs with a "name [unit]" header row. Numbers are written in the
// shortest form that parses back to the same double, so every file
// round-trips exactly through the loaders below. Column order is fixed per
// schema version, which the JSON summaries record as schema_version.

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "quadloco/scenarios.hpp"
#include "quadloco/trajopt.hpp"

namespace quadloco::io {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kLegNames[kNumLegs] = {"FR", "FL", "BR", "BL"};

struct Column {
  std::string name;
  std::string unit;
};

struct CsvTable {
  std::vector<Column> columns;
  std::vector<std::vector<double>> rows;
};

inline std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

inline void write_csv(const std::string& path, const CsvTable& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Config, "cannot write '" + path + "'");
  for (std::size_t c = 0; c < t.columns.size(); ++c) {
    out << (c ? "," : "") << t.columns[c].name << " [" << t.columns[c].unit << "]";
  }
  out << "\n";
  for (const auto& row : t.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << format_double(row[c]);
    out << "\n";
  }
  if (!out) throw Error(ErrorCode::Config, "write to '" + path + "' failed");
}

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Config, "cannot read '" + path + "'");
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::Config, "'" + path + "' is empty");
  std::stringstream header(line);
  std::string cell;
  while (std::getline(header, cell, ',')) {
    const auto open = cell.rfind(" [");
    if (open == std::string::npos || cell.back() != ']') {
      throw Error(ErrorCode::Config, "'" + path + "': header cell '" + cell + "' is not 'name [unit]'");
    }
    t.columns.push_back({cell.substr(0, open), cell.substr(open + 2, cell.size() - open - 3)});
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> row;
    row.reserve(t.columns.size());
    const char* p = line.data();
    const char* end = p + line.size();
    while (p <= end) {
      const char* comma = std::find(p, end, ',');
      double v = 0.0;
      const auto r = std::from_chars(p, comma, v);
      if (r.ec != std::errc() || r.ptr != comma) {
        throw Error(ErrorCode::Config, "'" + path + "' line " + std::to_string(line_no) + ": bad number");
      }
      row.push_back(v);
      p = comma + 1;
    }
    if (row.size() != t.columns.size()) {
      throw Error(ErrorCode::Config, "'" + path + "' line " + std::to_string(line_no) + ": expected " +
                                         std::to_string(t.columns.size()) + " fields");
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

namespace detail {

inline void add3(std::vector<Column>& c, const std::string& base, const std::string& unit) {
  for (const char* ax : {"x", "y", "z"}) c.push_back({base + "_" + ax, unit});
}

inline void put(std::vector<double>& row, const Vec3& v) { row.insert(row.end(), {v.x(), v.y(), v.z()}); }

inline Vec3 take3(const std::vector<double>& row, std::size_t& i) {
  const Vec3 v(row[i], row[i + 1], row[i + 2]);
  i += 3;
  return v;
}

inline void expect_columns(const CsvTable& t, const std::vector<Column>& want, const std::string& what) {
  if (t.columns.size() != want.size()) {
    throw Error(ErrorCode::Config, what + ": expected " + std::to_string(want.size()) + " columns, found " +
                                       std::to_string(t.columns.size()));
  }
  for (std::size_t c = 0; c < want.size(); ++c) {
    if (t.columns[c].name != want[c].name || t.columns[c].unit != want[c].unit) {
      throw Error(ErrorCode::Config, what + ": column " + std::to_string(c) + " is '" + t.columns[c].name + " [" +
                                         t.columns[c].unit + "]', expected '" + want[c].name + " [" +
                                         want[c].unit + "]'");
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Scenario log (one row per control tick)

inline std::vector<Column> log_columns() {
  std::vector<Column> c{{"t", "s"}};
  detail::add3(c, "p", "m");
  detail::add3(c, "v", "m/s");
  c.insert(c.end(), {{"roll", "rad"}, {"pitch", "rad"}, {"yaw", "rad"}});
  detail::add3(c, "omega", "rad/s");
  detail::add3(c, "p_hat", "m");
  detail::add3(c, "v_hat", "m/s");
  c.insert(c.end(), {{"roll_hat", "rad"}, {"pitch_hat", "rad"}, {"yaw_hat", "rad"}});
  detail::add3(c, "p_d", "m");
  detail::add3(c, "v_d", "m/s");
  for (const char* leg : kLegNames) detail::add3(c, std::string("f_") + leg, "N");
  for (const char* leg : kLegNames) c.push_back({std::string("stance_") + leg, "bool"});
  detail::add3(c, "gyro", "rad/s");
  detail::add3(c, "accel", "m/s^2");
  for (const char* leg : kLegNames) {
    for (int j = 0; j < 3; ++j) c.push_back({"q_" + std::string(leg) + "_" + std::to_string(j), "rad"});
  }
  for (const char* leg : kLegNames) {
    for (int j = 0; j < 3; ++j) c.push_back({"qd_" + std::string(leg) + "_" + std::to_string(j), "rad/s"});
  }
  return c;
}

inline CsvTable log_table(const std::vector<LogRow>& log) {
  CsvTable t;
  t.columns = log_columns();
  t.rows.reserve(log.size());
  for (const LogRow& r : log) {
    std::vector<double> row{r.t};
    row.reserve(t.columns.size());
    for (const Vec3* v : {&r.p, &r.v, &r.rpy, &r.omega, &r.p_hat, &r.v_hat, &r.rpy_hat, &r.p_d, &r.v_d}) {
      detail::put(row, *v);
    }
    row.insert(row.end(), r.f.data(), r.f.data() + 12);
    for (bool s : r.stance) row.push_back(s ? 1.0 : 0.0);
    detail::put(row, r.gyro);
    detail::put(row, r.accel);
    for (const Vec3& q : r.q) detail::put(row, q);
    for (const Vec3& qd : r.qd) detail::put(row, qd);
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline std::vector<LogRow> log_from_table(const CsvTable& t) {
  detail::expect_columns(t, log_columns(), "scenario log");
  std::vector<LogRow> out;
  out.reserve(t.rows.size());
  for (const auto& row : t.rows) {
    LogRow r;
    std::size_t i = 0;
    r.t = row[i++];
    for (Vec3* v : {&r.p, &r.v, &r.rpy, &r.omega, &r.p_hat, &r.v_hat, &r.rpy_hat, &r.p_d, &r.v_d}) {
      *v = detail::take3(row, i);
    }
    for (int k = 0; k < 12; ++k) r.f(k) = row[i++];
    for (bool& s : r.stance) s = row[i++] != 0.0;
    r.gyro = detail::take3(row, i);
    r.accel = detail::take3(row, i);
    for (Vec3& q : r.q) q = detail::take3(row, i);
    for (Vec3& qd : r.qd) qd = detail::take3(row, i);
    out.push_back(r);
  }
  return out;
}

inline void write_log(const std::string& path, const std::vector<LogRow>& log) { write_csv(path, log_table(log)); }
inline std::vector<LogRow> read_log(const std::string& path) { return log_from_table(read_csv(path)); }

// ---------------------------------------------------------------------------
// Jump reference (t, p, v, R rows, Omega, f, stance)

inline std::vector<Column> reference_columns() {
  std::vector<Column> c{{"t", "s"}};
  detail::add3(c, "p", "m");
  detail::add3(c, "v", "m/s");
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) c.push_back({"R_" + std::to_string(i) + std::to_string(j), "1"});
  }
  detail::add3(c, "Omega", "rad/s");
  for (const char* leg : kLegNames) detail::add3(c, std::string("f_") + leg, "N");
  for (const char* leg : kLegNames) c.push_back({std::string("stance_") + leg, "bool"});
  return c;
}

inline CsvTable reference_table(const std::vector<trajopt::ReferenceSample>& ref) {
  CsvTable t;
  t.columns = reference_columns();
  for (const auto& r : ref) {
    std::vector<double> row{r.t};
    detail::put(row, r.p);
    detail::put(row, r.v);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) row.push_back(r.R(i, j));
    }
    detail::put(row, r.Omega);
    row.insert(row.end(), r.f.data(), r.f.data() + 12);
    for (bool s : r.stance) row.push_back(s ? 1.0 : 0.0);
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline std::vector<trajopt::ReferenceSample> reference_from_table(const CsvTable& t) {
  detail::expect_columns(t, reference_columns(), "jump reference");
  std::vector<trajopt::ReferenceSample> out;
  for (const auto& row : t.rows) {
    trajopt::ReferenceSample r;
    std::size_t i = 0;
    r.t = row[i++];
    r.p = detail::take3(row, i);
    r.v = detail::take3(row, i);
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) r.R(a, b) = row[i++];
    }
    r.Omega = detail::take3(row, i);
    for (int k = 0; k < 12; ++k) r.f(k) = row[i++];
    for (bool& s : r.stance) s = row[i++] != 0.0;
    out.push_back(r);
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON summaries

inline Json metrics_json(const Metrics& m) {
  Json j = Json::object();
  for (const auto& [k, v] : m) j[k] = v;
  return j;
}

inline Json summary_json(const std::string& command, const Metrics& m) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["command"] = command;
  j["status"] = "ok";
  j["metrics"] = metrics_json(m);
  return j;
}

inline Json error_json(const std::string& command, const std::string& code, const std::string& message) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["command"] = command;
  j["status"] = "error";
  j["code"] = code;
  j["message"] = message;
  return j;
}

inline Json timing_json(const trajopt::TimingSolution& s) {
  Json j;
  j["T"] = s.T;
  j["total_time"] = s.total_time();
  j["cost"] = s.cost;
  j["max_eq_violation"] = s.max_eq_violation;
  j["max_ineq_violation"] = s.max_ineq_violation;
  j["kkt_residual"] = s.kkt_residual;
  j["max_orthonormality_defect"] = s.max_orthonormality_defect;
  j["outer_iterations"] = s.outer_iterations;
  j["inner_iterations"] = s.inner_iterations;
  j["solve_time_s"] = s.solve_time_s;
  return j;
}

inline void write_json(const std::string& path, const Json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Config, "cannot write '" + path + "'");
  out << j.dump(2) << "\n";
}

}  // namespace quadloco::io
