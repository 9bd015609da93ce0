#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace csck {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// g_phi left the Kaehler cone at some lattice point.
struct NotKahler : Error {
  std::size_t site;
  double min_eig;
  NotKahler(std::size_t p, double e)
      : Error("metric not positive at point " + std::to_string(p) + " (min eigenvalue " + std::to_string(e) + ")"),
        site(p),
        min_eig(e) {}
};

struct NotSolved : Error {
  using Error::Error;
};
struct PathNotKahler : Error {
  using Error::Error;
};
struct NotPsh : Error {
  using Error::Error;
};
struct LostPositivity : Error {
  using Error::Error;
};
struct HypothesisViolated : Error {
  using Error::Error;
};

struct NotConverged : Error {
  std::vector<double> history;
  NotConverged(const std::string& what, std::vector<double> h) : Error(what), history(std::move(h)) {}
};

struct ConfigError : Error {
  int line;
  ConfigError(const std::string& what, int l = 0)
      : Error(l > 0 ? "line " + std::to_string(l) + ": " + what : what), line(l) {}
};

}  // namespace csck
