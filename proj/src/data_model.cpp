#include "winstat/data_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "winstat/censoring_km.hpp"

namespace winstat {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double parse_number(const std::string& raw, std::size_t line_no, bool allow_inf) {
  const std::string s = trim(raw);
  if (allow_inf && (s == "inf" || s == "+inf" || s == "Inf")) return kInf;
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError("line " + std::to_string(line_no) + ": not a number: '" + s + "'");
  }
}

void format_number(std::string& out, double v) {
  if (std::isinf(v)) {
    out += "inf";
    return;
  }
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

}  // namespace

std::pair<std::vector<double>, std::vector<unsigned char>> apply_horizon(
    const std::vector<double>& event_times, double censor_time, double tau) {
  if (!(tau > 0.0)) throw ConfigError("tau must be positive");
  if (censor_time < 0.0) throw DataError("censoring time must be >= 0");
  std::vector<double> x(event_times.size());
  std::vector<unsigned char> d(event_times.size());
  for (std::size_t l = 0; l < event_times.size(); ++l) {
    const double t = event_times[l];
    if (!(t >= 0.0)) throw DataError("event times must be >= 0");
    const double t_tau = std::min(t, tau);
    x[l] = std::min(t_tau, censor_time);
    d[l] = t_tau <= censor_time ? 1 : 0;
  }
  return {std::move(x), std::move(d)};
}

Dataset truncate_at_horizon(const Dataset& data, double tau) {
  if (!(tau > 0.0)) throw ConfigError("tau must be positive");
  Dataset out = data;
  out.tau = tau;
  for (SubjectRecord& s : out.subjects) {
    for (std::size_t l = 0; l < s.times.size(); ++l) {
      if (s.times[l] >= tau) {
        s.times[l] = tau;
        s.events[l] = 1;
      }
    }
  }
  return out;
}

CensoringRecord derive_censoring_record(const SubjectRecord& subject) {
  CensoringRecord rec;
  rec.x_tilde = *std::max_element(subject.times.begin(), subject.times.end());
  rec.delta_c = false;
  for (unsigned char d : subject.events)
    if (d == 0) rec.delta_c = true;
  return rec;
}

std::vector<CensoringRecord> censoring_records(const Dataset& data, Group g) {
  std::vector<CensoringRecord> out;
  for (const SubjectRecord& s : data.subjects)
    if (s.group == g) out.push_back(derive_censoring_record(s));
  return out;
}

double select_tau_auto(const Dataset& data, double quantile) {
  if (!(quantile > 0.0 && quantile < 1.0))
    throw ConfigError("auto tau quantile must lie strictly between 0 and 1");
  double best = kInf;
  for (Group g : {Group::treatment, Group::control}) {
    const StepSurvival curve = fit_censoring_survival(censoring_records(data, g));
    double q_time = kInf;
    for (std::size_t k = 0; k < curve.values.size(); ++k) {
      if (curve.values[k] <= quantile) {
        q_time = curve.jump_times[k];
        break;
      }
    }
    if (std::isinf(q_time)) {
      const char* name = g == Group::treatment ? "treatment" : "control";
      throw DegenerateError(std::string("auto tau undefined: censoring survival in the ") +
                            name + " group never falls to the requested quantile");
    }
    best = std::min(best, q_time);
  }
  return best;
}

double resolve_tau(const Dataset& data, const TauSpec& tau) {
  if (tau.kind == TauSpec::Kind::fixed) {
    if (!(tau.value > 0.0)) throw ConfigError("fixed tau must be positive");
    return tau.value;
  }
  return select_tau_auto(data, tau.quantile);
}

Dataset induce_common_censoring(const Dataset& data) {
  Dataset out = data;
  for (SubjectRecord& s : out.subjects) {
    if (s.censor_times.size() != s.times.size())
      throw DataError("induced common censoring needs per-endpoint censoring times "
                      "for every subject (subject " + s.id + " lacks them)");
    const double c_star =
        *std::min_element(s.censor_times.begin(), s.censor_times.end());
    for (std::size_t l = 0; l < s.times.size(); ++l) {
      if (s.events[l] && s.times[l] > c_star) s.events[l] = 0;
      s.times[l] = std::min(s.times[l], c_star);
    }
    s.censor_times.clear();
  }
  return out;
}

std::pair<std::vector<double>, std::vector<unsigned char>>
induce_common_censoring_latent(const std::vector<double>& event_times,
                               const std::vector<double>& censor_times,
                               double tau) {
  if (censor_times.size() != event_times.size())
    throw DataError("induced common censoring needs one censoring time per endpoint");
  const double c_star = *std::min_element(censor_times.begin(), censor_times.end());
  return apply_horizon(event_times, c_star, tau);
}

Dataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");

  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty file");
  const std::vector<std::string> header = split_csv_line(line);
  if (header.size() < 4 || trim(header[0]) != "id" || trim(header[1]) != "group")
    throw DataError(path + ": header must start with id,group");

  // Header shape is id,group,x1..xL,d1..dL with optional c1..cL.
  const std::size_t rest = header.size() - 2;
  std::size_t L = 0;
  bool has_censor = false;
  if (rest % 2 == 0) {
    const std::string mid = trim(header[2 + rest / 2 - 1]);
    if (!mid.empty() && mid[0] == 'x') L = rest / 2;
  }
  if (rest % 3 == 0) {
    const std::size_t l3 = rest / 3;
    if (trim(header[2 + 2 * l3]) == "c1") {
      L = l3;
      has_censor = true;
    }
  }
  if (L == 0) throw DataError(path + ": header does not match id,group,x*,d*[,c*]");
  for (std::size_t l = 0; l < L; ++l) {
    const std::string n = std::to_string(l + 1);
    if (trim(header[2 + l]) != "x" + n || trim(header[2 + L + l]) != "d" + n ||
        (has_censor && trim(header[2 + 2 * L + l]) != "c" + n))
      throw DataError(path + ": header does not match id,group,x*,d*[,c*]");
  }

  Dataset data;
  data.n_endpoints = static_cast<int>(L);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> f = split_csv_line(line);
    if (f.size() != header.size())
      throw DataError("line " + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " fields, got " +
                      std::to_string(f.size()));
    SubjectRecord s;
    s.id = trim(f[0]);
    const std::string g = trim(f[1]);
    if (g == "t")
      s.group = Group::treatment;
    else if (g == "c")
      s.group = Group::control;
    else
      throw DataError("line " + std::to_string(line_no) + ": group must be t or c");
    for (std::size_t l = 0; l < L; ++l) {
      const double x = parse_number(f[2 + l], line_no, false);
      if (!(x >= 0.0))
        throw DataError("line " + std::to_string(line_no) + ": x must be >= 0");
      s.times.push_back(x);
      const std::string d = trim(f[2 + L + l]);
      if (d != "0" && d != "1")
        throw DataError("line " + std::to_string(line_no) + ": d must be 0 or 1");
      s.events.push_back(d == "1" ? 1 : 0);
    }
    if (has_censor) {
      for (std::size_t l = 0; l < L; ++l) {
        const double c = parse_number(f[2 + 2 * L + l], line_no, true);
        if (!(c >= 0.0))
          throw DataError("line " + std::to_string(line_no) + ": c must be >= 0");
        s.censor_times.push_back(c);
      }
    }
    data.subjects.push_back(std::move(s));
  }
  validate_dataset(data);
  return data;
}

void write_dataset_csv(const std::string& path, const Dataset& data) {
  bool has_censor = !data.subjects.empty();
  for (const SubjectRecord& s : data.subjects)
    if (s.censor_times.empty()) has_censor = false;

  std::string out = "id,group";
  const int L = data.n_endpoints;
  for (int l = 1; l <= L; ++l) out += ",x" + std::to_string(l);
  for (int l = 1; l <= L; ++l) out += ",d" + std::to_string(l);
  if (has_censor)
    for (int l = 1; l <= L; ++l) out += ",c" + std::to_string(l);
  out += "\n";

  for (const SubjectRecord& s : data.subjects) {
    out += s.id;
    out += s.group == Group::treatment ? ",t" : ",c";
    for (double x : s.times) {
      out += ',';
      format_number(out, x);
    }
    for (unsigned char d : s.events) out += d ? ",1" : ",0";
    if (has_censor) {
      for (double c : s.censor_times) {
        out += ',';
        format_number(out, c);
      }
    }
    out += '\n';
  }

  std::ofstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot open '" + path + "' for writing");
  file << out;
  if (!file) throw IoError("failed writing '" + path + "'");
}

}  // namespace winstat
