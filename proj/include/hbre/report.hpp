#pragma once

// Byte-stable report emission: sorted keys, 17 significant digits, fixed CSV
// column order. Non-finite numbers are written as the strings "inf", "-inf"
// and "nan" since JSON has no literal for them.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hbre/errors.hpp"
#include "hbre/limitlab.hpp"
#include "hbre/population.hpp"

namespace hbre {

inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace detail {

inline void escape_into(std::string& out, const std::string& s) {
  out += nlohmann::json(s).dump();
}

inline void write_json(std::string& out, const nlohmann::json& j, int indent, int depth) {
  const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
  const std::string close_pad(static_cast<std::size_t>(indent * depth), ' ');
  const char* nl = indent > 0 ? "\n" : "";
  switch (j.type()) {
    case nlohmann::json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{";
      out += nl;
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) {
          out += ",";
          out += nl;
        }
        first = false;
        out += pad;
        escape_into(out, it.key());
        out += indent > 0 ? ": " : ":";
        write_json(out, it.value(), indent, depth + 1);
      }
      out += nl;
      out += close_pad;
      out += "}";
      return;
    }
    case nlohmann::json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      // numeric arrays stay on one line
      bool flat = true;
      for (const auto& v : j) flat = flat && v.is_primitive();
      out += "[";
      bool first = true;
      for (const auto& v : j) {
        if (!first) out += flat ? (indent > 0 ? ", " : ",") : ",";
        first = false;
        if (!flat) {
          out += nl;
          out += pad;
        }
        write_json(out, v, indent, depth + 1);
      }
      if (!flat) {
        out += nl;
        out += close_pad;
      }
      out += "]";
      return;
    }
    case nlohmann::json::value_t::number_float: {
      const double x = j.get<double>();
      if (std::isfinite(x)) {
        out += format_double(x);
      } else {
        out += "\"" + format_double(x) + "\"";
      }
      return;
    }
    default: out += j.dump();
  }
}

}  // namespace detail

/// Deterministic serialization of a JSON tree.
inline std::string to_stable_json(const nlohmann::json& j, int indent = 2) {
  std::string out;
  detail::write_json(out, j, indent, 0);
  out += "\n";
  return out;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw std::runtime_error("write failed: " + path.string());
}

inline void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
  write_text_file(path, to_stable_json(j));
}

/// Trajectory dump. Columns: replicate, n, mode, count_or_log_count, Y_n, then
/// one log_X_n@s column per configured s.
inline std::string trajectory_csv_header(const std::vector<double>& s_values) {
  std::string h = "replicate,n,mode,count_or_log_count,Y_n";
  for (double s : s_values) h += ",log_X_n@" + format_double(s);
  return h + "\n";
}

inline std::string trajectory_csv_rows(std::uint64_t replicate, const Trajectory& traj,
                                       const std::vector<double>& s_values) {
  std::string out;
  std::vector<std::vector<TailScalar>> h;
  for (double s : s_values) h.push_back(h_path(traj.env, traj.generations(), TailScalar::from_value(s)));
  for (std::size_t n = 0; n <= traj.generations(); ++n) {
    const auto& st = traj.states[n];
    out += std::to_string(replicate) + "," + std::to_string(n) + "," + to_string(mode_of(st)) + ",";
    if (auto* e = std::get_if<ExactState>(&st)) {
      out += e->count.str();
    } else {
      out += format_double(std::get<LogState>(st).log_count);
    }
    out += "," + format_double(compute_Y(traj, n));
    for (std::size_t j = 0; j < s_values.size(); ++j) {
      out += "," + format_double(compute_martingale_logX(traj.log_count_at(n), h[j][n], s_values[j], n).log_X_n);
    }
    out += "\n";
  }
  return out;
}

/// Limit-sample dump. Columns: replicate, seed, final_n, mode, stabilized, Y, T, U_over_c.
inline std::string limit_samples_csv(const std::vector<LimitSample>& samples) {
  std::string out = "replicate,seed,final_n,mode,stabilized,Y,T,U_over_c\n";
  for (const auto& s : samples) {
    out += std::to_string(s.replicate) + "," + std::to_string(s.seed) + "," + std::to_string(s.final_n) + "," +
           to_string(s.mode) + "," + (s.stabilized ? "1" : "0") + "," + format_double(s.Y) + "," +
           format_double(s.T) + "," + format_double(s.U_over_c) + "\n";
  }
  return out;
}

}  // namespace hbre
