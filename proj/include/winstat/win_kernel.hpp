#pragma once

#include <vector>

#include "winstat/censoring_km.hpp"
#include "winstat/types.hpp"

// Signed pairwise-comparison terms. A win-probability estimate is a sum
// over terms q and over (treatment i, control j) pairs of
//
//   sign_q * indicator_q(i, j) / (weight of the "weighted" subject),
//
// where the indicator is a product of per-endpoint comparisons plus
// event-indicator requirements, and the weight is a product of the two
// groups' censoring survival functions evaluated at arguments that
// depend only on the weighted subject. Zero margins give one term per
// priority level; positive margins give the 2^L - 1 inclusion-exclusion
// expansion over tie-shift signs, and tie probabilities get their own
// 2 * 2^L expansion (a pair of weighted-side variants averaged with
// coefficient one half, applied by the estimator assembly).

namespace winstat {

enum class ComparisonKind { strict_greater, equals_tau };

// One factor of a term's indicator: for strict_greater, the winner-side
// endpoint time must exceed the weighted-side time plus shift; for
// equals_tau, both sides must sit exactly at the horizon.
struct TermComparison {
  int endpoint = 0;
  double shift = 0.0;
  ComparisonKind kind = ComparisonKind::strict_greater;
};

enum class TermDirection { t_wins, c_wins, tie };

struct KernelTerm {
  int sign = 1;
  TermDirection direction = TermDirection::t_wins;
  Group weighted = Group::control;  // subject whose deltas and weight arguments apply
  std::vector<TermComparison> comparisons;
  std::vector<int> delta_mask;
  int priority = 1;  // 1-based priority level for win terms, 0 for tie terms
};

// weight_floor guards the IPCW denominators: a nonzero indicator paired
// with a weight this small means the positivity condition failed.
constexpr double kWeightFloor = 1e-10;

std::vector<KernelTerm> enumerate_win_terms(int n_endpoints,
                                            const std::vector<double>& margins,
                                            MarginMode mode,
                                            TermDirection direction);

// Positive margins only; zero-margin ties are the complement of wins and
// losses and have no term expansion.
std::vector<KernelTerm> enumerate_tie_terms(int n_endpoints,
                                            const std::vector<double>& margins);

// sign when every comparison and delta requirement holds, else 0.
int term_indicator(const KernelTerm& term, const SubjectRecord& treat,
                   const SubjectRecord& ctrl, double tau);

// Survival-curve arguments determined by the weighted subject: opp is
// the max of shifted endpoint times (fed to the opposite group's curve,
// right-continuously), own the max of unshifted times (fed to the
// weighted subject's own-group curve, as a left limit).
struct WeightArgs {
  double opp = 0.0;
  double own = 0.0;
};
WeightArgs term_weight_args(const KernelTerm& term,
                            const SubjectRecord& weighted_subject, double tau);

// Per-endpoint argument vectors for joint-survival weight providers:
// entry l is the shifted (opp) or unshifted (own) time for compared
// endpoints and 0 for endpoints the term does not touch.
void term_weight_args_per_endpoint(const KernelTerm& term,
                                   const SubjectRecord& weighted_subject,
                                   double tau, std::vector<double>& opp,
                                   std::vector<double>& own);

// Full evaluation under Kaplan-Meier weights: 0 when the indicator
// fails (weights are then never touched), else sign divided by the
// weight product. Throws DegenerateError when a needed weight falls at
// or below kWeightFloor.
double eval_term(const KernelTerm& term, const SubjectRecord& treat,
                 const SubjectRecord& ctrl, const StepSurvival& g_treat,
                 const StepSurvival& g_ctrl, double tau);

}  // namespace winstat
