#pragma once

#include <vector>

#include "winstat/types.hpp"

// Kaplan-Meier estimation of the censoring survival function (reverse
// KM: censoring is the event of interest) plus the evaluation helpers
// the estimators and the influence-function machinery need: left limits,
// cumulative-hazard increments, and the at-risk function.

namespace winstat {

// Right-continuous step function in [0, 1] starting at 1. values[k] is
// the value on [jump_times[k], jump_times[k+1]); beyond the last jump the
// last value extends as a constant. n_at_risk and n_events record the
// risk-set size and event count at each jump.
struct StepSurvival {
  std::vector<double> jump_times;
  std::vector<double> values;
  std::vector<int> n_at_risk;
  std::vector<int> n_events;
};

enum class SurvivalSide { right, left };

// Product-limit fit treating delta_c = 1 as the event. At tied times,
// censoring events are counted first and endpoint-event exits leave the
// risk set just after, so both contribute to the risk set at that time.
StepSurvival fit_censoring_survival(const std::vector<CensoringRecord>& records);

// right: the step-function value at s, estimating P(C > s).
// left: the limit from below, estimating P(C >= s).
// Negative s returns 1 (shifted weight arguments can fall below 0).
double survival_at(const StepSurvival& curve, double s, SurvivalSide side);

struct HazardIncrements {
  std::vector<double> times;
  std::vector<double> increments;
};

// Cumulative-hazard increments at the curve's jump times.
// neg_log_km: delta at jump k is -log(values[k]/values[k-1]); once the
// curve reaches 0 the increment diverges, so that jump and everything
// after are dropped (callers see the truncation through the shorter
// list). nelson_aalen: d_k / Y_k, defined at every jump.
HazardIncrements hazard_increments(const StepSurvival& curve, HazardMode mode);

// Fraction of records with x_tilde >= s.
double at_risk_fraction(const std::vector<CensoringRecord>& records, double s);

}  // namespace winstat
