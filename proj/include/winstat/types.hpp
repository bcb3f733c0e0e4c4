#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

// Core data structures shared across the library: per-subject observed
// data, derived censoring records, analysis configuration, and the error
// taxonomy that the command-line front end maps to exit codes.

namespace winstat {

enum class Group { treatment, control };

// One subject's observed data over L prioritized time-to-event endpoints.
// Endpoint 0 is the highest priority. times[l] is the event time truncated
// at the horizon and at censoring; events[l] is 1 when the (truncated)
// event was observed, 0 when censoring cut it short. censor_times is
// optional per-endpoint censoring information (needed only to induce a
// common censoring time when endpoints are censored separately).
struct SubjectRecord {
  std::string id;
  Group group = Group::treatment;
  std::vector<double> times;
  std::vector<unsigned char> events;
  std::vector<double> censor_times;
};

// Input to the censoring Kaplan-Meier fit. x_tilde is the subject's
// latest observed time over all endpoints; delta_c marks it as a
// censoring time (true when at least one endpoint was censored, in which
// case that endpoint's observed time equals the censoring time and is
// the maximum).
struct CensoringRecord {
  double x_tilde = 0.0;
  bool delta_c = false;
};

enum class HazardMode { neg_log_km, nelson_aalen };
enum class VarianceMode { delta_method, null_variance };
// none marks the unweighted fall-through comparison, which uses no
// survival curves at all; unit runs the same kernel sums as km with
// every weight frozen at 1.
enum class WeightProvenance { km, unit, true_common, true_joint, none };

// Horizon specification: a fixed value, or the automatic rule that takes
// the smallest t where the censoring survival curve drops to <= quantile,
// minimized over the two groups.
struct TauSpec {
  enum class Kind { fixed, auto_quantile };
  Kind kind = Kind::fixed;
  double value = 0.0;
  double quantile = 0.05;

  static TauSpec fixed(double v) {
    TauSpec s;
    s.kind = Kind::fixed;
    s.value = v;
    return s;
  }
  static TauSpec auto_quantile(double q) {
    TauSpec s;
    s.kind = Kind::auto_quantile;
    s.quantile = q;
    return s;
  }
};

struct AnalysisConfig {
  int n_endpoints = 1;
  TauSpec tau;
  std::vector<double> margins;  // zeta_l per endpoint; all zero or all positive
  double alpha = 0.05;
  HazardMode hazard_mode = HazardMode::neg_log_km;
  VarianceMode variance_mode = VarianceMode::delta_method;
  bool renormalize = true;
};

// A trial dataset after horizon resolution: every stored time is <= tau.
struct Dataset {
  int n_endpoints = 0;
  double tau = 0.0;
  std::vector<SubjectRecord> subjects;

  std::size_t count(Group g) const {
    std::size_t n = 0;
    for (const auto& s : subjects)
      if (s.group == g) ++n;
    return n;
  }
};

// Error taxonomy. The CLI maps these to exit codes: ConfigError 2,
// DataError 3, DegenerateError 4, IoError 5.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DegenerateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class MarginMode { zero, positive };

// All margins exactly zero -> zero regime; all strictly positive ->
// positive regime; anything mixed or negative -> ConfigError.
MarginMode classify_margins(const std::vector<double>& margins);

void validate_config(const AnalysisConfig& config);
void validate_dataset(const Dataset& data);

}  // namespace winstat
