#include "winstat/types.hpp"

#include <cmath>

namespace winstat {

MarginMode classify_margins(const std::vector<double>& margins) {
  if (margins.empty()) throw ConfigError("margins must list one value per endpoint");
  bool any_zero = false;
  bool any_positive = false;
  for (double z : margins) {
    if (!std::isfinite(z) || z < 0.0)
      throw ConfigError("margins must be finite and nonnegative");
    (z == 0.0 ? any_zero : any_positive) = true;
  }
  if (any_zero && any_positive)
    throw ConfigError(
        "mixed margins (some zero, some positive) are not supported; "
        "use all-zero or all-positive margins");
  return any_positive ? MarginMode::positive : MarginMode::zero;
}

void validate_config(const AnalysisConfig& config) {
  if (config.n_endpoints < 1) throw ConfigError("n_endpoints must be >= 1");
  if (static_cast<int>(config.margins.size()) != config.n_endpoints)
    throw ConfigError("margins must list exactly one value per endpoint");
  classify_margins(config.margins);
  if (!(config.alpha > 0.0 && config.alpha < 1.0))
    throw ConfigError("alpha must lie strictly between 0 and 1");
  if (config.tau.kind == TauSpec::Kind::fixed) {
    if (!(config.tau.value > 0.0) || !std::isfinite(config.tau.value))
      throw ConfigError("fixed tau must be a positive finite number");
  } else {
    if (!(config.tau.quantile > 0.0 && config.tau.quantile < 1.0))
      throw ConfigError("auto tau quantile must lie strictly between 0 and 1");
  }
}

void validate_dataset(const Dataset& data) {
  if (data.n_endpoints < 1) throw DataError("dataset has no endpoints");
  bool has_t = false;
  bool has_c = false;
  const std::size_t L = static_cast<std::size_t>(data.n_endpoints);
  for (std::size_t s = 0; s < data.subjects.size(); ++s) {
    const SubjectRecord& subj = data.subjects[s];
    const std::string label =
        subj.id.empty() ? "subject " + std::to_string(s + 1) : "subject " + subj.id;
    if (subj.times.size() != L || subj.events.size() != L)
      throw DataError(label + ": expected " + std::to_string(L) + " endpoints");
    if (!subj.censor_times.empty() && subj.censor_times.size() != L)
      throw DataError(label + ": censor_times must cover all endpoints or none");
    for (std::size_t l = 0; l < L; ++l) {
      const double x = subj.times[l];
      if (!std::isfinite(x) || x < 0.0)
        throw DataError(label + ": times must be finite and >= 0");
      if (subj.events[l] != 0 && subj.events[l] != 1)
        throw DataError(label + ": event indicators must be 0 or 1");
      if (data.tau > 0.0 && x > data.tau)
        throw DataError(label + ": observed time exceeds the horizon");
    }
    (subj.group == Group::treatment ? has_t : has_c) = true;
  }
  if (!has_t || !has_c) throw DataError("dataset needs at least one subject per group");
}

}  // namespace winstat
