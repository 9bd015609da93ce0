#pragma once

// Run configuration: an INI-style file with sections [lattice], [background],
// [solver], [checks]. One `key = value` per line; `#` and `;` start comments.
// Unknown sections or keys and malformed values are errors carrying the line.

#include <filesystem>
#include <fstream>
#include <sstream>

#include "csck/errors.hpp"
#include "csck/estimates.hpp"
#include "csck/solver.hpp"

namespace csck {

enum class PhiSource { zero, file, random, solve };

struct BackgroundModeSpec {
  std::vector<int> m;  // 2n wave-vector entries
  double a_cos = 0.0, a_sin = 0.0;
};

struct RunConfig {
  std::string mode = "verify";
  int n = 2;
  int N = 16;
  std::uint64_t seed = 1;
  std::filesystem::path out = "out";

  // background potential: explicit modes, plus an optional random part seeded by `seed`
  std::vector<BackgroundModeSpec> modes;
  double rho_amplitude = 0.0;
  int rho_kmax = 1;
  double rho_decay = 2.0;
  bool curvature_bounds = true;

  SolverConfig solver;

  PhiSource phi = PhiSource::zero;
  std::filesystem::path phi_file;
  double phi_amplitude = 0.004;
  int phi_kmax = 2;
  double phi_decay = 2.0;

  EstimateOptions estimates;
  std::vector<std::string> identities{"gradF", "square220", "cancel222", "bochner", "yau2nd", "localG"};
  int probe_grid = 0;
  double B_prime = 0.5;
  std::vector<double> w2p_p{1.0, 2.0};
  int kenergy_steps = 16;
  double eps52 = 0.5;
  double d0 = 0.25;
  bool write_fields = true;

  double local_h = 1.0 / 64;
  int local_seeds = 10;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_words(const std::string& s, char sep = ' ') {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep || (sep == ' ' && c == '\t')) {
      if (!trim(cur).empty()) out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!trim(cur).empty()) out.push_back(trim(cur));
  return out;
}

struct ValueParser {
  int line;
  std::string key;

  [[noreturn]] void fail(const std::string& what) const { throw ConfigError(key + ": " + what, line); }

  double real(const std::string& v) const {
    std::size_t used = 0;
    double x = 0.0;
    try {
      x = std::stod(v, &used);
    } catch (const std::exception&) {
      fail("expected a number, got '" + v + "'");
    }
    if (used != v.size() || !std::isfinite(x)) fail("expected a number, got '" + v + "'");
    return x;
  }
  long long integer(const std::string& v) const {
    std::size_t used = 0;
    long long x = 0;
    try {
      x = std::stoll(v, &used);
    } catch (const std::exception&) {
      fail("expected an integer, got '" + v + "'");
    }
    if (used != v.size()) fail("expected an integer, got '" + v + "'");
    return x;
  }
  bool boolean(const std::string& v) const {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    fail("expected true or false, got '" + v + "'");
  }
  double positive(const std::string& v) const {
    double x = real(v);
    if (!(x > 0)) fail("must be positive");
    return x;
  }
};

}  // namespace detail

inline RunConfig parse_config(std::istream& is, const std::filesystem::path& base = ".") {
  RunConfig c;
  std::string raw, section;
  int line = 0;
  bool modes_seen = false;
  while (std::getline(is, raw)) {
    ++line;
    std::string s = raw.substr(0, raw.find_first_of("#;"));
    s = detail::trim(s);
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError("malformed section header '" + s + "'", line);
      section = detail::trim(s.substr(1, s.size() - 2));
      if (section != "lattice" && section != "background" && section != "solver" && section != "checks")
        throw ConfigError("unknown section [" + section + "]", line);
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key = value, got '" + s + "'", line);
    const std::string key = detail::trim(s.substr(0, eq));
    const std::string val = detail::trim(s.substr(eq + 1));
    if (key.empty()) throw ConfigError("empty key", line);
    if (section.empty()) throw ConfigError("key '" + key + "' outside any section", line);
    if (val.empty()) throw ConfigError(key + ": missing value", line);
    detail::ValueParser P{line, key};
    auto unknown = [&] { throw ConfigError("unknown key '" + key + "' in [" + section + "]", line); };

    if (section == "lattice") {
      if (key == "n") {
        auto v = P.integer(val);
        if (v != 1 && v != 2) P.fail("complex dimension must be 1 or 2");
        c.n = int(v);
      } else if (key == "N") {
        auto v = P.integer(val);
        if (v < 8 || (v & (v - 1)) != 0) P.fail("must be a power of two >= 8");
        c.N = int(v);
      } else if (key == "seed") {
        auto v = P.integer(val);
        if (v < 0) P.fail("must be nonnegative");
        c.seed = std::uint64_t(v);
      } else {
        unknown();
      }
    } else if (section == "background") {
      if (key == "mode") {
        // mode = m_1 ... m_2n a_cos a_sin
        auto w = detail::split_words(val);
        BackgroundModeSpec m;
        for (std::size_t k = 0; k + 2 < w.size(); ++k) m.m.push_back(int(P.integer(w[k])));
        if (w.size() < 4) P.fail("expected wave-vector entries followed by a_cos a_sin");
        m.a_cos = P.real(w[w.size() - 2]);
        m.a_sin = P.real(w[w.size() - 1]);
        c.modes.push_back(std::move(m));
        modes_seen = true;
      } else if (key == "amplitude") {
        c.rho_amplitude = P.real(val);
        if (c.rho_amplitude < 0) P.fail("must be nonnegative");
      } else if (key == "kmax") {
        auto v = P.integer(val);
        if (v < 1) P.fail("must be >= 1");
        c.rho_kmax = int(v);
      } else if (key == "decay") {
        c.rho_decay = P.real(val);
      } else if (key == "curvature_bounds") {
        c.curvature_bounds = P.boolean(val);
      } else {
        unknown();
      }
    } else if (section == "solver") {
      auto& S = c.solver;
      if (key == "max_iters") S.max_iters = int(P.integer(val));
      else if (key == "damping") S.damping = P.positive(val);
      else if (key == "tol_residual") S.tol_residual = P.positive(val);
      else if (key == "continuation_steps") S.continuation_steps = int(P.integer(val));
      else if (key == "linear_tol") S.linear_tol = P.positive(val);
      else if (key == "linear_max_iters") S.linear_max_iters = int(P.integer(val));
      else if (key == "init_amplitude") S.init_amplitude = P.real(val);
      else unknown();
      try {
        S.validate();
      } catch (const std::invalid_argument& e) {
        if (key != "init_amplitude") P.fail(e.what());
      }
    } else {
      auto& E = c.estimates;
      if (key == "phi") {
        auto w = detail::split_words(val, ':');
        if (w.empty()) P.fail("empty phi source");
        if (w[0] == "zero") c.phi = PhiSource::zero;
        else if (w[0] == "random") c.phi = PhiSource::random;
        else if (w[0] == "solve") c.phi = PhiSource::solve;
        else if (w[0] == "file") {
          if (w.size() != 2) P.fail("expected file:PATH");
          c.phi = PhiSource::file;
          c.phi_file = base / w[1];
          if (!std::filesystem::exists(c.phi_file)) P.fail("file not found: " + c.phi_file.string());
        } else {
          P.fail("expected zero, random, solve or file:PATH");
        }
      } else if (key == "phi_amplitude") c.phi_amplitude = P.real(val);
      else if (key == "phi_kmax") c.phi_kmax = int(P.integer(val));
      else if (key == "phi_decay") c.phi_decay = P.real(val);
      else if (key == "twist_correction") E.twist_correction = P.boolean(val);
      else if (key == "twist_tol") E.twist_tol = P.positive(val);
      else if (key == "slack_c") E.slack_c = P.positive(val);
      else if (key == "vol_tol") E.vol_tol = P.positive(val);
      else if (key == "l1_tol") E.l1_tol = P.positive(val);
      else if (key == "pointwise_slack") E.pointwise_slack = P.positive(val);
      else if (key == "identities") {
        c.identities = detail::split_words(val, ',');
        for (const auto& name : c.identities)
          if (std::find(identity_names().begin(), identity_names().end(), name) == identity_names().end())
            P.fail("unknown identity '" + name + "'");
      } else if (key == "probe_grid") c.probe_grid = int(P.integer(val));
      else if (key == "B_prime") c.B_prime = P.real(val);
      else if (key == "w2p_p") {
        c.w2p_p.clear();
        for (const auto& w : detail::split_words(val, ',')) c.w2p_p.push_back(P.positive(w));
      } else if (key == "kenergy_steps") {
        auto v = P.integer(val);
        if (v < 1) P.fail("must be >= 1");
        c.kenergy_steps = int(v);
      } else if (key == "eps52") c.eps52 = P.real(val);
      else if (key == "d0") c.d0 = P.positive(val);
      else if (key == "write_fields") c.write_fields = P.boolean(val);
      else if (key == "local_h") c.local_h = P.positive(val);
      else if (key == "local_seeds") c.local_seeds = int(P.integer(val));
      else unknown();
    }
  }
  if (modes_seen)
    for (const auto& m : c.modes)
      if (int(m.m.size()) != 2 * c.n)
        throw ConfigError("background mode needs " + std::to_string(2 * c.n) + " wave-vector entries");
  if (c.probe_grid != 0 && (c.probe_grid < 8 || c.probe_grid > c.N || c.N % c.probe_grid != 0))
    throw ConfigError("probe_grid must be 0 or a divisor of N that is at least 8");
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file " + path.string());
  return parse_config(is, path.parent_path());
}

template <int Dim>
FourierSeries<Dim> background_series(const RunConfig& c) {
  FourierSeries<Dim> s;
  if (c.rho_amplitude > 0) s = FourierSeries<Dim>::random(c.seed + 1000, c.rho_kmax, c.rho_decay, c.rho_amplitude);
  for (const auto& m : c.modes) {
    FourierMode<Dim> md;
    for (int a = 0; a < 2 * Dim; ++a) md.m[a] = m.m[a];
    md.a_cos = m.a_cos;
    md.a_sin = m.a_sin;
    s.modes.push_back(md);
  }
  return s;
}

}  // namespace csck
