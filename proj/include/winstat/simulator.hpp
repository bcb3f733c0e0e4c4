#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "winstat/rng.hpp"
#include "winstat/types.hpp"

// Trial generation and operating-characteristic replication: marginal
// event-time laws coupled through a Gaussian copula, common or
// endpoint-specific censoring, large-sample truth by direct pair
// simulation, and a harness that aggregates bias, spread, coverage, and
// rejection over seeded replicates.

namespace winstat {

struct DistSpec {
  enum class Kind { exponential, weibull, piecewise_exponential };
  Kind kind = Kind::exponential;
  double rate = 0.0;
  double shape = 1.0;
  double scale = 1.0;
  std::vector<double> knots;  // interval starts; first must be 0
  std::vector<double> rates;  // hazard per interval

  double cumulative_hazard(double t) const;
  double survival(double t) const;
  double cdf(double t) const;
  double inverse_cdf(double u) const;  // u in [0, 1)

  static DistSpec exponential_rate(double r);
  static DistSpec weibull_shape_scale(double shape, double scale);
  static DistSpec piecewise(std::vector<double> knots,
                            std::vector<double> rates);
};

// Lower-triangular Cholesky factor (row-major, dim x dim) of the
// equicorrelated matrix with off-diagonal rho. Throws ConfigError when
// the matrix is not positive definite.
std::vector<double> equicorrelated_cholesky(int dim, double rho);

// One draw of dim correlated uniforms through the Gaussian copula with
// the given Cholesky factor.
void gaussian_copula_uniforms(Rng& rng, const std::vector<double>& chol,
                              int dim, std::vector<double>& out);

struct CensoringSpec {
  enum class Kind { common, bivariate };
  Kind kind = Kind::common;
  DistSpec common_dist;
  DistSpec marginal1, marginal2;  // bivariate only (two endpoints)
  double rho = 0.0;               // bivariate copula correlation
};

struct ScenarioSpec {
  int n_endpoints = 1;
  std::size_t n_t = 0;
  std::size_t n_c = 0;
  double tau = 0.0;
  std::vector<double> margins;
  double endpoint_rho = 0.5;
  std::vector<DistSpec> event_t;  // one per endpoint
  std::vector<DistSpec> event_c;
  CensoringSpec censoring;
  std::uint64_t seed = 1;
};

void validate_scenario(const ScenarioSpec& spec);

// One simulated trial. Common censoring produces horizon-truncated
// times and event flags; endpoint-specific censoring additionally
// stores the raw per-endpoint censoring draws so a common time can be
// induced downstream.
Dataset generate_trial(const ScenarioSpec& spec, Rng& rng);

// Survival functions of the scenario's censoring mechanism. The common
// form is the diagonal of the joint one under endpoint-specific
// censoring (the induced common time is the minimum).
std::function<double(double)> true_common_censoring_survival(
    const ScenarioSpec& spec);
std::function<double(double, double)> true_joint_censoring_survival(
    const ScenarioSpec& spec);

enum class PairOutcome { t_wins, c_wins, tie };

// Sequential prioritized comparison of horizon-truncated times, the
// estimand's defining rule.
PairOutcome compare_pair(const std::vector<double>& treat,
                         const std::vector<double>& ctrl, double tau,
                         const std::vector<double>& margins);

struct TrueValues {
  double pi_t = 0.0;
  double pi_c = 0.0;
  double pi_tie = 0.0;
  double se_pi_t = 0.0;  // Monte Carlo standard errors
  double se_pi_c = 0.0;
  double wr = 0.0;  // 0 when undefined
  double wo = 0.0;
  double nb = 0.0;
  std::size_t samples = 0;
};

// Truth by streaming independent uncensored (treatment, control) pairs.
TrueValues true_values_mc(const ScenarioSpec& spec, std::size_t n_pairs,
                          std::uint64_t seed);

enum class Method { ipcw, naive, logrank, true_common, true_joint };

const char* method_name(Method m);

// Rejection counting: two_sided uses p_two_sided at level alpha,
// one_sided tests the alternative that treatment is better.
enum class TestSide { two_sided, one_sided };

struct SimulationOptions {
  std::size_t reps = 0;
  std::vector<Method> methods;
  double alpha = 0.05;
  TestSide test_side = TestSide::two_sided;
  HazardMode hazard_mode = HazardMode::neg_log_km;
  VarianceMode variance_mode = VarianceMode::delta_method;
  bool renormalize = true;
  std::size_t truth_samples = 1000000;
};

struct MethodSummary {
  Method method = Method::ipcw;
  std::size_t n_used = 0;
  std::size_t n_degenerate = 0;
  std::size_t n_wr_missing = 0;
  double mean_pi_t = 0.0, mean_pi_c = 0.0, mean_pi_tie = 0.0;
  double mean_wr = 0.0, mean_log_wr = 0.0;
  double ese_log_wr = 0.0, ase_log_wr = 0.0;
  double cp_wr = 0.0, reject_wr = 0.0;
  double mean_nb = 0.0, ese_nb = 0.0, ase_nb = 0.0;
  double cp_nb = 0.0, reject_nb = 0.0;
  double mean_wo = 0.0, ese_log_wo = 0.0, ase_log_wo = 0.0;
  double cp_wo = 0.0, reject_wo = 0.0;
  double reject = 0.0;  // log-rank rejection rate
};

struct SimulationResult {
  TrueValues truth;
  std::vector<MethodSummary> methods;
  std::size_t reps = 0;
};

// Replicated operating characteristics. Replicate r uses the seed
// substream (spec.seed, r); the truth stream is separate. Aggregates
// are deterministic for any worker count.
SimulationResult run_replications(const ScenarioSpec& spec,
                                  const SimulationOptions& options);

// Analysis settings implied by a scenario.
AnalysisConfig scenario_analysis_config(const ScenarioSpec& spec,
                                        const SimulationOptions& options);

}  // namespace winstat
