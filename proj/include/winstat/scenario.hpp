#pragma once

#include <iosfwd>
#include <string>

#include "winstat/simulator.hpp"

// Text format for simulation scenarios: one "key = value" pair per line,
// '#' comments. Keys:
//
//   n_endpoints = 3            (alias: L)
//   n_t = 200
//   n_c = 200
//   tau = 18
//   zeta = 6                   (same margin for every endpoint), or
//   margins = 6 4 2            (one per endpoint; default all zero)
//   endpoint_rho = 0.5
//   event.t.1 = exp(0.015)     (one line per endpoint and group)
//   event.c.1 = exp(0.021)
//   censoring = exp(0.02)      (shared censoring time), or
//   censoring.1 = exp(0.015)   (endpoint-specific, two endpoints)
//   censoring.2 = exp(0.02)
//   censoring.rho = 0.25
//   seed = 20240801
//
// Distributions: exp(rate), weibull(shape, scale), and
// pwexp(t1:r1, t2:r2, ...) with hazard r_k on [t_k, t_{k+1}) and t1 = 0.

namespace winstat {

DistSpec parse_dist(const std::string& text);

ScenarioSpec parse_scenario(std::istream& in, const std::string& origin);

ScenarioSpec parse_scenario_file(const std::string& path);

}  // namespace winstat
