#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "winstat/types.hpp"
#include "winstat/win_kernel.hpp"

// Assembly of kernel-term sums into win probabilities and win
// statistics, with pluggable IPCW weight providers: estimated
// Kaplan-Meier weights (the main method), unit weights, and true
// censoring survival functions (simulation-only comparators, including
// the joint-survival variant for two endpoints censored by correlated
// mechanisms). Also the naive baseline, which skips the kernel sums
// and compares observed times pairwise with the fall-through rule.

namespace winstat {

class WeightProvider {
 public:
  virtual ~WeightProvider() = default;
  virtual WeightProvenance provenance() const = 0;
  // Product of the two groups' survival weights for one term, fully
  // determined by the weighted subject. May return 0; the assembly
  // enforces the positivity floor only where an indicator is active.
  virtual double pair_weight(const KernelTerm& term,
                             const SubjectRecord& weighted_subject,
                             double tau) const = 0;
};

// Kaplan-Meier censoring curves fitted per group on this dataset.
std::unique_ptr<WeightProvider> make_km_provider(const Dataset& data);

std::unique_ptr<WeightProvider> make_unit_provider();

// True common-censoring survival functions, one per group.
std::unique_ptr<WeightProvider> make_true_common_provider(
    std::function<double(double)> surv_treat,
    std::function<double(double)> surv_ctrl);

// True joint survival of the two endpoint-specific censoring times
// (two endpoints only). Arguments below 0 must be treated as no
// constraint by the callables.
std::unique_ptr<WeightProvider> make_true_joint_provider(
    std::function<double(double, double)> joint_treat,
    std::function<double(double, double)> joint_ctrl);

struct WinProbEstimate {
  double pi_t = 0.0;
  double pi_c = 0.0;
  double pi_tie = 0.0;
  // Plain term-sum values before any renormalization; the reported
  // pi_* equal these unless renormalized is set.
  double raw_pi_t = 0.0;
  double raw_pi_c = 0.0;
  double raw_pi_tie = 0.0;
  bool renormalized = false;
  WeightProvenance weight_provenance = WeightProvenance::km;
  std::size_t n_t = 0;
  std::size_t n_c = 0;
  // Mean signed kernel value over all pairs, per term, in enumeration
  // order. raw_pi_t is their left-to-right sum (respectively pi_c); the
  // tie sums exclude the half coefficient.
  std::vector<double> t_term_sums;
  std::vector<double> c_term_sums;
  std::vector<double> tie_term_sums;
};

struct WinStatistics {
  std::optional<double> wr;  // empty when pi_c = 0
  std::optional<double> wo;  // empty when the odds denominator is 0
  double nb = 0.0;
};

// Scales the probability triple down by its total when wins and losses
// alone exceed 1 (only possible under estimated weights); identity
// otherwise. Throws DegenerateError when everything is 0.
void renormalize(double& pi_t, double& pi_c, double& pi_tie);

WinStatistics win_statistics(double pi_t, double pi_c);

// The estimator with a caller-chosen weight provider. The dataset must
// carry its resolved horizon (tau > 0) and already be truncated.
WinProbEstimate estimate_with_weight_provider(const Dataset& data,
                                              const AnalysisConfig& config,
                                              const WeightProvider& provider);

// Main method: estimated KM weights.
WinProbEstimate estimate_win_probabilities(const Dataset& data,
                                           const AnalysisConfig& config);

// Decides one pair on observed times alone. Walks the endpoints in
// priority order: the treatment subject wins at a level when its time
// exceeds the control time by more than that level's margin and the
// control event was observed (mirrored for a control win); an
// undecided level falls through to the next. Returns +1 for a
// treatment win, -1 for a control win, 0 when no level decides.
// margins must hold one value per endpoint.
int compare_observed_pair(const SubjectRecord& t, const SubjectRecord& c,
                          const std::vector<double>& margins);

// Naive baseline: the fall-through comparison applied to every
// treatment-control pair, with no censoring adjustment. Decisive pairs
// are counted directly, so the three probabilities always partition 1
// and weight_provenance is none.
WinProbEstimate naive_win_probabilities(const Dataset& data,
                                        const AnalysisConfig& config);

}  // namespace winstat
