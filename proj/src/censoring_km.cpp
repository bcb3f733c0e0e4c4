#include "winstat/censoring_km.hpp"

#include <algorithm>
#include <cmath>

namespace winstat {

StepSurvival fit_censoring_survival(const std::vector<CensoringRecord>& records) {
  if (records.empty()) throw DataError("censoring fit needs at least one record");

  std::vector<CensoringRecord> sorted = records;
  std::sort(sorted.begin(), sorted.end(),
            [](const CensoringRecord& a, const CensoringRecord& b) {
              return a.x_tilde < b.x_tilde;
            });

  StepSurvival curve;
  const std::size_t n = sorted.size();
  double value = 1.0;
  std::size_t k = 0;
  while (k < n) {
    const double t = sorted[k].x_tilde;
    int d = 0;
    std::size_t exits = 0;
    while (k + exits < n && sorted[k + exits].x_tilde == t) {
      if (sorted[k + exits].delta_c) ++d;
      ++exits;
    }
    // Everyone with x_tilde >= t is still at risk at t; ties between
    // censoring events and endpoint-event exits resolve with the
    // censoring events happening first.
    const int at_risk = static_cast<int>(n - k);
    if (d > 0) {
      value *= 1.0 - static_cast<double>(d) / static_cast<double>(at_risk);
      curve.jump_times.push_back(t);
      curve.values.push_back(value);
      curve.n_at_risk.push_back(at_risk);
      curve.n_events.push_back(d);
    }
    k += exits;
  }
  return curve;
}

double survival_at(const StepSurvival& curve, double s, SurvivalSide side) {
  const std::vector<double>& t = curve.jump_times;
  // Index of the first jump time > s (right) or >= s (left); the value
  // in force is the one from the previous jump, or 1 before any jump.
  std::size_t idx;
  if (side == SurvivalSide::right)
    idx = static_cast<std::size_t>(std::upper_bound(t.begin(), t.end(), s) - t.begin());
  else
    idx = static_cast<std::size_t>(std::lower_bound(t.begin(), t.end(), s) - t.begin());
  if (idx == 0) return 1.0;
  return curve.values[idx - 1];
}

HazardIncrements hazard_increments(const StepSurvival& curve, HazardMode mode) {
  HazardIncrements out;
  double prev = 1.0;
  for (std::size_t k = 0; k < curve.jump_times.size(); ++k) {
    double inc;
    if (mode == HazardMode::neg_log_km) {
      if (curve.values[k] <= 0.0) break;  // -log diverges at the final drop to 0
      inc = -std::log(curve.values[k] / prev);
      prev = curve.values[k];
    } else {
      inc = static_cast<double>(curve.n_events[k]) /
            static_cast<double>(curve.n_at_risk[k]);
    }
    out.times.push_back(curve.jump_times[k]);
    out.increments.push_back(inc);
  }
  return out;
}

double at_risk_fraction(const std::vector<CensoringRecord>& records, double s) {
  if (records.empty()) throw DataError("at-risk fraction needs at least one record");
  std::size_t n = 0;
  for (const CensoringRecord& r : records)
    if (r.x_tilde >= s) ++n;
  return static_cast<double>(n) / static_cast<double>(records.size());
}

}  // namespace winstat
