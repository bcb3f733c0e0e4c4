#include "winstat/scenario.hpp"

#include <cctype>
#include <cstddef>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "winstat/types.hpp"

namespace winstat {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

double parse_number(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception&) {
    throw ConfigError(what + ": cannot parse number '" + t + "'");
  }
  if (used != t.size())
    throw ConfigError(what + ": cannot parse number '" + t + "'");
  return v;
}

std::uint64_t parse_seed(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  std::size_t used = 0;
  std::uint64_t v = 0;
  try {
    v = std::stoull(t, &used);
  } catch (const std::exception&) {
    throw ConfigError(what + ": cannot parse seed '" + t + "'");
  }
  if (used != t.size())
    throw ConfigError(what + ": cannot parse seed '" + t + "'");
  return v;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    if (ch == ',' || std::isspace(static_cast<unsigned char>(ch))) {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

}  // namespace

DistSpec parse_dist(const std::string& text) {
  const std::string t = trim(text);
  const std::size_t open = t.find('(');
  if (open == std::string::npos || t.back() != ')')
    throw ConfigError("cannot parse distribution '" + t +
                      "'; expected name(args)");
  const std::string name = trim(t.substr(0, open));
  const std::string args = t.substr(open + 1, t.size() - open - 2);
  const std::vector<std::string> parts = split_list(args);
  if (name == "exp" || name == "exponential") {
    if (parts.size() != 1)
      throw ConfigError("exp() takes one argument, the rate");
    return DistSpec::exponential_rate(parse_number(parts[0], "exp rate"));
  }
  if (name == "weibull") {
    if (parts.size() != 2)
      throw ConfigError("weibull() takes two arguments: shape, scale");
    return DistSpec::weibull_shape_scale(
        parse_number(parts[0], "weibull shape"),
        parse_number(parts[1], "weibull scale"));
  }
  if (name == "pwexp") {
    if (parts.empty())
      throw ConfigError("pwexp() needs at least one knot:rate pair");
    std::vector<double> knots, rates;
    for (const std::string& p : parts) {
      const std::size_t colon = p.find(':');
      if (colon == std::string::npos)
        throw ConfigError("pwexp() arguments are knot:rate pairs, got '" + p + "'");
      knots.push_back(parse_number(p.substr(0, colon), "pwexp knot"));
      rates.push_back(parse_number(p.substr(colon + 1), "pwexp rate"));
    }
    return DistSpec::piecewise(std::move(knots), std::move(rates));
  }
  throw ConfigError("unknown distribution '" + name +
                    "'; expected exp, weibull, or pwexp");
}

ScenarioSpec parse_scenario(std::istream& in, const std::string& origin) {
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + " line " + std::to_string(lineno) +
                        ": expected 'key = value'");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError(origin + " line " + std::to_string(lineno) +
                        ": expected 'key = value'");
    if (!kv.emplace(key, value).second)
      throw ConfigError(origin + ": duplicate key '" + key + "'");
  }

  auto take = [&kv](const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) return std::pair<bool, std::string>{false, ""};
    std::pair<bool, std::string> out{true, it->second};
    kv.erase(it);
    return out;
  };
  auto require = [&take, &origin](const std::string& key) {
    auto [found, value] = take(key);
    if (!found) throw ConfigError(origin + ": missing key '" + key + "'");
    return value;
  };

  ScenarioSpec spec;
  {
    auto [found, value] = take("n_endpoints");
    if (!found) std::tie(found, value) = take("L");
    if (!found) throw ConfigError(origin + ": missing key 'n_endpoints'");
    const double v = parse_number(value, "n_endpoints");
    if (v < 1.0 || v != static_cast<int>(v))
      throw ConfigError(origin + ": n_endpoints must be a positive integer");
    spec.n_endpoints = static_cast<int>(v);
  }
  const std::size_t L = static_cast<std::size_t>(spec.n_endpoints);

  const double nt = parse_number(require("n_t"), "n_t");
  const double nc = parse_number(require("n_c"), "n_c");
  if (nt < 1.0 || nt != static_cast<std::size_t>(nt) || nc < 1.0 ||
      nc != static_cast<std::size_t>(nc))
    throw ConfigError(origin + ": group sizes must be positive integers");
  spec.n_t = static_cast<std::size_t>(nt);
  spec.n_c = static_cast<std::size_t>(nc);
  spec.tau = parse_number(require("tau"), "tau");

  spec.margins.assign(L, 0.0);
  {
    auto [have_zeta, zeta] = take("zeta");
    auto [have_margins, margins] = take("margins");
    if (have_zeta && have_margins)
      throw ConfigError(origin + ": give either 'zeta' or 'margins', not both");
    if (have_zeta)
      spec.margins.assign(L, parse_number(zeta, "zeta"));
    if (have_margins) {
      const std::vector<std::string> parts = split_list(margins);
      if (parts.size() != L)
        throw ConfigError(origin + ": 'margins' needs one value per endpoint");
      for (std::size_t l = 0; l < L; ++l)
        spec.margins[l] = parse_number(parts[l], "margins");
    }
  }

  {
    auto [found, value] = take("endpoint_rho");
    if (found) spec.endpoint_rho = parse_number(value, "endpoint_rho");
  }

  spec.event_t.resize(L);
  spec.event_c.resize(L);
  for (std::size_t l = 0; l < L; ++l) {
    const std::string n = std::to_string(l + 1);
    spec.event_t[l] = parse_dist(require("event.t." + n));
    spec.event_c[l] = parse_dist(require("event.c." + n));
  }

  {
    auto [have_common, common] = take("censoring");
    auto [have_b1, b1] = take("censoring.1");
    auto [have_b2, b2] = take("censoring.2");
    auto [have_rho, rho] = take("censoring.rho");
    if (have_common) {
      if (have_b1 || have_b2 || have_rho)
        throw ConfigError(origin +
                          ": 'censoring' excludes the endpoint-specific keys");
      spec.censoring.kind = CensoringSpec::Kind::common;
      spec.censoring.common_dist = parse_dist(common);
    } else {
      if (!have_b1 || !have_b2 || !have_rho)
        throw ConfigError(origin +
                          ": censoring needs either 'censoring' or all of "
                          "'censoring.1', 'censoring.2', 'censoring.rho'");
      spec.censoring.kind = CensoringSpec::Kind::bivariate;
      spec.censoring.marginal1 = parse_dist(b1);
      spec.censoring.marginal2 = parse_dist(b2);
      spec.censoring.rho = parse_number(rho, "censoring.rho");
    }
  }

  {
    auto [found, value] = take("seed");
    if (found) spec.seed = parse_seed(value, "seed");
  }

  if (!kv.empty())
    throw ConfigError(origin + ": unknown key '" + kv.begin()->first + "'");
  validate_scenario(spec);
  return spec;
}

ScenarioSpec parse_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return parse_scenario(in, path);
}

}  // namespace winstat
