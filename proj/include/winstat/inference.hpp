#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "winstat/estimators.hpp"
#include "winstat/types.hpp"

// Analytic inference for the win probability pair: per-pair influence
// entries that add martingale corrections for the estimated censoring
// curves, a paired two-sample covariance assembled from them, and the
// delta-method variances, tests, and confidence intervals for the three
// win statistics.

namespace winstat {

struct InfluenceDiagnostics {
  // Jumps discarded when a censoring curve reaches zero and the
  // log-based hazard increment is undefined.
  std::size_t hazard_jumps_dropped = 0;
};

struct InfluenceComponents {
  std::size_t n_t = 0;
  std::size_t n_c = 0;
  // Row-major n_t x n_c. k holds the win-probability entries, l the
  // loss-probability entries, both centered so the full sum is near 0
  // (exactly 0 without martingale corrections).
  std::vector<double> k;
  std::vector<double> l;
  std::vector<double> k_row, k_col;
  std::vector<double> l_row, l_col;
  InfluenceDiagnostics diagnostics;

  double k_at(std::size_t i, std::size_t j) const { return k[i * n_c + j]; }
  double l_at(std::size_t i, std::size_t j) const { return l[i * n_c + j]; }
};

// Influence entries for the estimate's weight scheme. Estimated KM
// weights get the full correction terms; unit and true weights make the
// estimator an exact two-sample U-statistic, so their entries are the
// centered kernels alone. True-weight schemes need the same provider
// that produced the estimate.
InfluenceComponents influence_components(const Dataset& data,
                                         const AnalysisConfig& config,
                                         const WinProbEstimate& estimate,
                                         const WeightProvider* provider =
                                             nullptr);

// Asymptotic covariance of sqrt(n) * (win, loss) probability errors,
// n = n_t + n_c.
struct CovarianceEstimate {
  double s_tt = 0.0;
  double s_cc = 0.0;
  double s_tc = 0.0;
};

CovarianceEstimate covariance(const InfluenceComponents& parts);

enum class Statistic { win_ratio, win_odds, net_benefit };

// Variance of the reporting scale: log for the two ratio statistics,
// identity for net benefit. Not scaled by n (ready for use).
double statistic_variance(Statistic kind, double pi_t, double pi_c,
                          const CovarianceEstimate& cov, std::size_t n_t,
                          std::size_t n_c);

// Variance of log WR under the no-difference null, using the tie
// probability plug-in.
double null_variance_log_wr(double pi_tie, const CovarianceEstimate& cov,
                            std::size_t n_t, std::size_t n_c);

struct StatisticInference {
  Statistic kind = Statistic::win_ratio;
  double estimate = 0.0;
  // Standard error on the reporting scale (log scale for ratios).
  double se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double z = 0.0;
  double p_two_sided = 1.0;
  double p_one_sided = 0.5;  // alternative: treatment better
};

StatisticInference test_and_ci(Statistic kind, double pi_t, double pi_c,
                               double variance, double alpha);

// One-stop analysis: estimate, influence, covariance, and per-statistic
// inference. wr and wo are absent when undefined (no losses, or a zero
// odds denominator); the null-variance test for WR is attached when it
// exists.
struct AnalysisResult {
  WinProbEstimate probs;
  CovarianceEstimate cov;
  InfluenceDiagnostics diagnostics;
  std::optional<StatisticInference> wr;
  std::optional<StatisticInference> wo;
  std::optional<StatisticInference> nb;
  std::optional<double> null_var_log_wr;
  std::optional<double> wr_null_z;
  std::optional<double> wr_null_p_two_sided;
  std::optional<double> wr_null_p_one_sided;
};

AnalysisResult analyze_dataset(const Dataset& data,
                               const AnalysisConfig& config);
AnalysisResult analyze_with_provider(const Dataset& data,
                                     const AnalysisConfig& config,
                                     const WeightProvider& provider);
// The naive baseline with its exact U-statistic covariance built from
// centered win and loss indicators.
AnalysisResult analyze_naive(const Dataset& data,
                             const AnalysisConfig& config);

}  // namespace winstat
