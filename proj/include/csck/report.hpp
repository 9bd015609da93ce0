#pragma once

// report.json is built as an ordered JSON tree and written by hand so every
// floating value goes out as %.17g; non-finite values become null.

#include <cstdio>
#include <ostream>

#include "json.hpp"

#include "csck/estimates.hpp"

namespace csck {

using Json = nlohmann::ordered_json;

inline constexpr int report_schema = 1;

inline std::string format_double(double v) {
  if (!std::isfinite(v)) return "null";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s(buf);
  // keep floats recognizable as floats when read back
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

namespace detail {

inline void write_json(std::ostream& os, const Json& j, int indent) {
  const std::string pad(std::size_t(indent + 2), ' '), close(std::size_t(indent), ' ');
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        os << "{}";
        return;
      }
      os << "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        os << (first ? "" : ",\n") << pad << Json(it.key()).dump() << ": ";
        write_json(os, it.value(), indent + 2);
        first = false;
      }
      os << '\n' << close << '}';
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        os << "[]";
        return;
      }
      const bool flat = std::all_of(j.begin(), j.end(), [](const Json& e) { return e.is_primitive(); });
      if (flat) {
        os << '[';
        for (std::size_t k = 0; k < j.size(); ++k) {
          os << (k ? ", " : "");
          write_json(os, j[k], indent);
        }
        os << ']';
        return;
      }
      os << "[\n";
      for (std::size_t k = 0; k < j.size(); ++k) {
        os << (k ? ",\n" : "") << pad;
        write_json(os, j[k], indent + 2);
      }
      os << '\n' << close << ']';
      return;
    }
    case Json::value_t::number_float:
      os << format_double(j.get<double>());
      return;
    default:
      os << j.dump();
  }
}

}  // namespace detail

inline void write_json(std::ostream& os, const Json& j) {
  detail::write_json(os, j, 0);
  os << '\n';
}

inline Json num(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json to_json(const CheckResult& c) {
  Json extras = Json::object();
  for (const auto& [k, v] : c.extras) extras[k] = num(v);
  return Json{{"name", c.name},   {"anchor", c.anchor}, {"site", c.site},        {"value", num(c.value)},
              {"bound", num(c.bound)}, {"slack", num(c.slack)}, {"margin", num(c.margin)}, {"pass", c.pass},
              {"extras", extras}};
}

inline std::string describe_site(const std::vector<int>& site) {
  if (site.empty()) return "global";
  std::string s = "(";
  for (std::size_t k = 0; k < site.size(); ++k) s += (k ? "," : "") + std::to_string(site[k]);
  return s + ")";
}

inline void write_residual_history(std::ostream& os, const std::vector<std::pair<double, double>>& h) {
  os << "iteration,residual_ma,residual_scal\n";
  for (std::size_t k = 0; k < h.size(); ++k) os << k << ',' << format_double(h[k].first) << ',' << format_double(h[k].second) << '\n';
}

}  // namespace csck
