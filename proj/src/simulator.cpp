#include "winstat/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "winstat/baselines.hpp"
#include "winstat/data_model.hpp"
#include "winstat/estimators.hpp"
#include "winstat/inference.hpp"
#include "winstat/normal.hpp"

namespace winstat {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Fixed substream index for the truth stream; replicate indexes stay far
// below it, so the two never collide.
constexpr std::uint64_t kTruthStream = 0x74727565ull;

void validate_dist(const DistSpec& d, const std::string& what) {
  switch (d.kind) {
    case DistSpec::Kind::exponential:
      if (!(std::isfinite(d.rate) && d.rate > 0.0))
        throw ConfigError(what + ": exponential rate must be positive");
      return;
    case DistSpec::Kind::weibull:
      if (!(std::isfinite(d.shape) && d.shape > 0.0 &&
            std::isfinite(d.scale) && d.scale > 0.0))
        throw ConfigError(what + ": weibull shape and scale must be positive");
      return;
    case DistSpec::Kind::piecewise_exponential:
      if (d.knots.empty() || d.knots.size() != d.rates.size())
        throw ConfigError(what + ": piecewise hazard needs matching knots and rates");
      if (d.knots.front() != 0.0)
        throw ConfigError(what + ": piecewise hazard must start at time 0");
      for (std::size_t i = 0; i < d.knots.size(); ++i) {
        if (!std::isfinite(d.knots[i]) ||
            (i > 0 && d.knots[i] <= d.knots[i - 1]))
          throw ConfigError(what + ": piecewise knots must be finite and increasing");
        if (!(std::isfinite(d.rates[i]) && d.rates[i] > 0.0))
          throw ConfigError(what + ": piecewise rates must be positive");
      }
      return;
  }
  throw ConfigError(what + ": unknown distribution kind");
}

double quantile_or_infinite(double p) {
  if (p <= 0.0) return -kInf;
  if (p >= 1.0) return kInf;
  return norm_quantile(p);
}

}  // namespace

double DistSpec::cumulative_hazard(double t) const {
  if (!(t > 0.0)) return 0.0;
  switch (kind) {
    case Kind::exponential:
      return rate * t;
    case Kind::weibull:
      return std::pow(t / scale, shape);
    case Kind::piecewise_exponential: {
      double h = 0.0;
      for (std::size_t i = 0; i < knots.size(); ++i) {
        if (t <= knots[i]) break;
        const double end = (i + 1 < knots.size()) ? knots[i + 1] : kInf;
        h += rates[i] * (std::min(t, end) - knots[i]);
      }
      return h;
    }
  }
  return 0.0;
}

double DistSpec::survival(double t) const {
  return std::exp(-cumulative_hazard(t));
}

double DistSpec::cdf(double t) const {
  return -std::expm1(-cumulative_hazard(t));
}

double DistSpec::inverse_cdf(double u) const {
  if (!(u >= 0.0 && u < 1.0))
    throw ConfigError("inverse_cdf needs a probability in [0, 1)");
  const double h = -std::log1p(-u);
  switch (kind) {
    case Kind::exponential:
      return h / rate;
    case Kind::weibull:
      return scale * std::pow(h, 1.0 / shape);
    case Kind::piecewise_exponential: {
      double acc = 0.0;
      for (std::size_t i = 0;; ++i) {
        const bool last = i + 1 == knots.size();
        const double seg =
            last ? kInf : rates[i] * (knots[i + 1] - knots[i]);
        if (h - acc <= seg || last)
          return knots[i] + (h - acc) / rates[i];
        acc += seg;
      }
    }
  }
  return 0.0;
}

DistSpec DistSpec::exponential_rate(double r) {
  DistSpec d;
  d.kind = Kind::exponential;
  d.rate = r;
  validate_dist(d, "distribution");
  return d;
}

DistSpec DistSpec::weibull_shape_scale(double shape, double scale) {
  DistSpec d;
  d.kind = Kind::weibull;
  d.shape = shape;
  d.scale = scale;
  validate_dist(d, "distribution");
  return d;
}

DistSpec DistSpec::piecewise(std::vector<double> knots,
                             std::vector<double> rates) {
  DistSpec d;
  d.kind = Kind::piecewise_exponential;
  d.knots = std::move(knots);
  d.rates = std::move(rates);
  validate_dist(d, "distribution");
  return d;
}

std::vector<double> equicorrelated_cholesky(int dim, double rho) {
  if (dim < 1) throw ConfigError("copula dimension must be at least 1");
  const std::size_t n = static_cast<std::size_t>(dim);
  std::vector<double> a(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a[i * n + j] = (i == j) ? 1.0 : rho;
  std::vector<double> l(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= l[i * n + k] * l[j * n + k];
      if (i == j) {
        if (!(s > 0.0))
          throw ConfigError("copula correlation matrix is not positive definite");
        l[i * n + i] = std::sqrt(s);
      } else {
        l[i * n + j] = s / l[j * n + j];
      }
    }
  }
  return l;
}

void gaussian_copula_uniforms(Rng& rng, const std::vector<double>& chol,
                              int dim, std::vector<double>& out) {
  const std::size_t n = static_cast<std::size_t>(dim);
  static thread_local std::vector<double> z;
  z.resize(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = rng.normal();
  out.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double x = 0.0;
    for (std::size_t j = 0; j <= i; ++j) x += chol[i * n + j] * z[j];
    // Guard against CDF rounding to 1, which inverse_cdf rejects.
    out[i] = std::min(norm_cdf(x), 1.0 - 0x1p-53);
  }
}

void validate_scenario(const ScenarioSpec& spec) {
  if (spec.n_endpoints < 1)
    throw ConfigError("scenario needs at least one endpoint");
  const std::size_t L = static_cast<std::size_t>(spec.n_endpoints);
  if (spec.n_t < 1 || spec.n_c < 1)
    throw ConfigError("scenario group sizes must be at least 1");
  if (!(std::isfinite(spec.tau) && spec.tau > 0.0))
    throw ConfigError("scenario horizon must be a positive finite number");
  if (spec.margins.size() != L)
    throw ConfigError("scenario needs one margin per endpoint");
  classify_margins(spec.margins);
  if (spec.event_t.size() != L || spec.event_c.size() != L)
    throw ConfigError("scenario needs one event distribution per endpoint and group");
  for (std::size_t l = 0; l < L; ++l) {
    validate_dist(spec.event_t[l], "treatment endpoint " + std::to_string(l + 1));
    validate_dist(spec.event_c[l], "control endpoint " + std::to_string(l + 1));
  }
  if (L > 1) equicorrelated_cholesky(spec.n_endpoints, spec.endpoint_rho);
  if (spec.censoring.kind == CensoringSpec::Kind::common) {
    validate_dist(spec.censoring.common_dist, "censoring");
  } else {
    if (spec.n_endpoints != 2)
      throw ConfigError("endpoint-specific censoring is defined for two endpoints");
    validate_dist(spec.censoring.marginal1, "censoring endpoint 1");
    validate_dist(spec.censoring.marginal2, "censoring endpoint 2");
    equicorrelated_cholesky(2, spec.censoring.rho);
  }
}

namespace {

// Latent event times for one subject of the given group.
void draw_event_times(const ScenarioSpec& spec, Group g, Rng& rng,
                      const std::vector<double>& chol,
                      std::vector<double>& u, std::vector<double>& t) {
  const std::vector<DistSpec>& dists =
      (g == Group::treatment) ? spec.event_t : spec.event_c;
  const std::size_t L = dists.size();
  if (L == 1) {
    u.resize(1);
    u[0] = rng.uniform();
  } else {
    gaussian_copula_uniforms(rng, chol, spec.n_endpoints, u);
  }
  t.resize(L);
  for (std::size_t l = 0; l < L; ++l) t[l] = dists[l].inverse_cdf(u[l]);
}

}  // namespace

Dataset generate_trial(const ScenarioSpec& spec, Rng& rng) {
  validate_scenario(spec);
  const std::size_t L = static_cast<std::size_t>(spec.n_endpoints);
  const bool bivariate =
      spec.censoring.kind == CensoringSpec::Kind::bivariate;
  const std::vector<double> chol_e =
      (L > 1) ? equicorrelated_cholesky(spec.n_endpoints, spec.endpoint_rho)
              : std::vector<double>{1.0};
  const std::vector<double> chol_c =
      bivariate ? equicorrelated_cholesky(2, spec.censoring.rho)
                : std::vector<double>{};

  Dataset out;
  out.n_endpoints = spec.n_endpoints;
  out.tau = spec.tau;
  out.subjects.reserve(spec.n_t + spec.n_c);

  std::vector<double> u, t, uc;
  for (int side = 0; side < 2; ++side) {
    const Group g = (side == 0) ? Group::treatment : Group::control;
    const std::size_t n = (side == 0) ? spec.n_t : spec.n_c;
    const char* prefix = (side == 0) ? "t" : "c";
    for (std::size_t i = 0; i < n; ++i) {
      draw_event_times(spec, g, rng, chol_e, u, t);
      SubjectRecord subj;
      subj.id = prefix + std::to_string(i + 1);
      subj.group = g;
      if (!bivariate) {
        const double c =
            spec.censoring.common_dist.inverse_cdf(rng.uniform());
        auto [times, events] = apply_horizon(t, c, spec.tau);
        subj.times = std::move(times);
        subj.events = std::move(events);
      } else {
        gaussian_copula_uniforms(rng, chol_c, 2, uc);
        const double c1 = spec.censoring.marginal1.inverse_cdf(uc[0]);
        const double c2 = spec.censoring.marginal2.inverse_cdf(uc[1]);
        subj.censor_times = {c1, c2};
        subj.times.resize(2);
        subj.events.resize(2);
        for (std::size_t l = 0; l < 2; ++l) {
          const double cl = subj.censor_times[l];
          const double tl = std::min(t[l], spec.tau);
          subj.times[l] = std::min(tl, cl);
          subj.events[l] = (tl <= cl) ? 1 : 0;
        }
      }
      out.subjects.push_back(std::move(subj));
    }
  }
  return out;
}

std::function<double(double)> true_common_censoring_survival(
    const ScenarioSpec& spec) {
  if (spec.censoring.kind == CensoringSpec::Kind::common) {
    const DistSpec d = spec.censoring.common_dist;
    return [d](double s) { return d.survival(s); };
  }
  const auto joint = true_joint_censoring_survival(spec);
  return [joint](double s) { return joint(s, s); };
}

std::function<double(double, double)> true_joint_censoring_survival(
    const ScenarioSpec& spec) {
  if (spec.censoring.kind == CensoringSpec::Kind::common) {
    const DistSpec d = spec.censoring.common_dist;
    return [d](double a, double b) { return d.survival(std::max(a, b)); };
  }
  const DistSpec m1 = spec.censoring.marginal1;
  const DistSpec m2 = spec.censoring.marginal2;
  const double rho = spec.censoring.rho;
  return [m1, m2, rho](double a, double b) {
    const double za = quantile_or_infinite(m1.cdf(a));
    const double zb = quantile_or_infinite(m2.cdf(b));
    return bvn_upper_tail(za, zb, rho);
  };
}

PairOutcome compare_pair(const std::vector<double>& treat,
                         const std::vector<double>& ctrl, double tau,
                         const std::vector<double>& margins) {
  const std::size_t L = treat.size();
  const MarginMode mode = classify_margins(margins);
  for (std::size_t l = 0; l < L; ++l) {
    const double a = std::min(treat[l], tau);
    const double b = std::min(ctrl[l], tau);
    if (mode == MarginMode::zero) {
      if (a == tau && b == tau) continue;
      if (a > b) return PairOutcome::t_wins;
      if (b > a) return PairOutcome::c_wins;
      return PairOutcome::tie;
    }
    const double d = a - b;
    if (d > margins[l]) return PairOutcome::t_wins;
    if (d < -margins[l]) return PairOutcome::c_wins;
  }
  return PairOutcome::tie;
}

TrueValues true_values_mc(const ScenarioSpec& spec, std::size_t n_pairs,
                          std::uint64_t seed) {
  validate_scenario(spec);
  if (n_pairs < 1) throw ConfigError("truth simulation needs at least one pair");
  const std::vector<double> chol =
      (spec.n_endpoints > 1)
          ? equicorrelated_cholesky(spec.n_endpoints, spec.endpoint_rho)
          : std::vector<double>{1.0};

  Rng rng(substream_seed(seed, kTruthStream));
  std::vector<double> u, tt, tc;
  std::size_t wins = 0, losses = 0;
  for (std::size_t m = 0; m < n_pairs; ++m) {
    draw_event_times(spec, Group::treatment, rng, chol, u, tt);
    draw_event_times(spec, Group::control, rng, chol, u, tc);
    switch (compare_pair(tt, tc, spec.tau, spec.margins)) {
      case PairOutcome::t_wins: ++wins; break;
      case PairOutcome::c_wins: ++losses; break;
      case PairOutcome::tie: break;
    }
  }

  TrueValues tv;
  tv.samples = n_pairs;
  const double m = static_cast<double>(n_pairs);
  tv.pi_t = static_cast<double>(wins) / m;
  tv.pi_c = static_cast<double>(losses) / m;
  tv.pi_tie = 1.0 - tv.pi_t - tv.pi_c;
  tv.se_pi_t = std::sqrt(tv.pi_t * (1.0 - tv.pi_t) / m);
  tv.se_pi_c = std::sqrt(tv.pi_c * (1.0 - tv.pi_c) / m);
  tv.nb = tv.pi_t - tv.pi_c;
  tv.wr = (tv.pi_c > 0.0) ? tv.pi_t / tv.pi_c : 0.0;
  tv.wo = (tv.nb < 1.0) ? (1.0 + tv.nb) / (1.0 - tv.nb) : 0.0;
  return tv;
}

const char* method_name(Method m) {
  switch (m) {
    case Method::ipcw: return "ipcw";
    case Method::naive: return "naive";
    case Method::logrank: return "logrank";
    case Method::true_common: return "true_common";
    case Method::true_joint: return "true_joint";
  }
  return "?";
}

AnalysisConfig scenario_analysis_config(const ScenarioSpec& spec,
                                        const SimulationOptions& options) {
  AnalysisConfig c;
  c.n_endpoints = spec.n_endpoints;
  c.tau = TauSpec::fixed(spec.tau);
  c.margins = spec.margins;
  c.alpha = options.alpha;
  c.hazard_mode = options.hazard_mode;
  c.variance_mode = options.variance_mode;
  c.renormalize = options.renormalize;
  return c;
}

namespace {

// Per-replicate, per-method analysis record.
struct Cell {
  bool degenerate = false;
  bool have = false;
  double pi_t = 0.0, pi_c = 0.0, pi_tie = 0.0;
  bool have_wr = false;
  double wr = 0.0, log_wr = 0.0, se_log_wr = 0.0;
  double lo_wr = 0.0, hi_wr = 0.0, p_wr = 1.0;
  bool have_nb = false;
  double nb = 0.0, se_nb = 0.0, lo_nb = 0.0, hi_nb = 0.0, p_nb = 1.0;
  bool have_wo = false;
  double wo = 0.0, se_log_wo = 0.0, lo_wo = 0.0, hi_wo = 0.0, p_wo = 1.0;
  bool have_lr = false;
  double p_lr = 1.0;
};

void fill_cell(Cell& cell, const AnalysisResult& res, VarianceMode vmode,
               TestSide side) {
  const bool one = side == TestSide::one_sided;
  cell.have = true;
  cell.pi_t = res.probs.pi_t;
  cell.pi_c = res.probs.pi_c;
  cell.pi_tie = res.probs.pi_tie;
  if (res.wr) {
    cell.have_wr = true;
    cell.wr = res.wr->estimate;
    cell.log_wr = std::log(res.wr->estimate);
    cell.se_log_wr = res.wr->se;
    cell.lo_wr = res.wr->ci_low;
    cell.hi_wr = res.wr->ci_high;
    cell.p_wr = one ? res.wr->p_one_sided : res.wr->p_two_sided;
    if (vmode == VarianceMode::null_variance) {
      if (one && res.wr_null_p_one_sided)
        cell.p_wr = *res.wr_null_p_one_sided;
      else if (!one && res.wr_null_p_two_sided)
        cell.p_wr = *res.wr_null_p_two_sided;
    }
  }
  if (res.nb) {
    cell.have_nb = true;
    cell.nb = res.nb->estimate;
    cell.se_nb = res.nb->se;
    cell.lo_nb = res.nb->ci_low;
    cell.hi_nb = res.nb->ci_high;
    cell.p_nb = one ? res.nb->p_one_sided : res.nb->p_two_sided;
  }
  if (res.wo) {
    cell.have_wo = true;
    cell.wo = res.wo->estimate;
    cell.se_log_wo = res.wo->se;
    cell.lo_wo = res.wo->ci_low;
    cell.hi_wo = res.wo->ci_high;
    cell.p_wo = one ? res.wo->p_one_sided : res.wo->p_two_sided;
  }
}

double sample_sd(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

}  // namespace

SimulationResult run_replications(const ScenarioSpec& spec,
                                  const SimulationOptions& options) {
  validate_scenario(spec);
  if (options.reps < 2)
    throw ConfigError("replication runs need at least two replicates");
  if (options.methods.empty())
    throw ConfigError("replication runs need at least one method");
  if (!(options.alpha > 0.0 && options.alpha < 1.0))
    throw ConfigError("alpha must lie strictly between 0 and 1");
  if (options.truth_samples < 100)
    throw ConfigError("truth simulation needs at least 100 pairs");
  const bool bivariate =
      spec.censoring.kind == CensoringSpec::Kind::bivariate;
  for (Method m : options.methods)
    if (m == Method::true_joint && !bivariate)
      throw ConfigError(
          "the joint-weight method needs endpoint-specific censoring");

  const AnalysisConfig config = scenario_analysis_config(spec, options);
  SimulationResult result;
  result.reps = options.reps;
  result.truth = true_values_mc(spec, options.truth_samples, spec.seed);

  const std::size_t n_methods = options.methods.size();
  std::vector<std::vector<Cell>> cells(
      n_methods, std::vector<Cell>(options.reps));

  bool need_common = false;
  for (Method m : options.methods)
    if (m != Method::true_joint) need_common = true;

  auto true_common = true_common_censoring_survival(spec);
  auto true_joint = true_joint_censoring_survival(spec);

  for (std::size_t r = 0; r < options.reps; ++r) {
    Rng rng(substream_seed(spec.seed, r));
    const Dataset raw = generate_trial(spec, rng);
    const Dataset common = (bivariate && need_common)
                               ? induce_common_censoring(raw)
                               : raw;
    for (std::size_t mi = 0; mi < n_methods; ++mi) {
      Cell& cell = cells[mi][r];
      try {
        switch (options.methods[mi]) {
          case Method::ipcw:
            fill_cell(cell, analyze_dataset(common, config),
                      options.variance_mode, options.test_side);
            break;
          case Method::naive:
            fill_cell(cell, analyze_naive(common, config),
                      options.variance_mode, options.test_side);
            break;
          case Method::true_common: {
            auto provider =
                make_true_common_provider(true_common, true_common);
            fill_cell(cell, analyze_with_provider(common, config, *provider),
                      options.variance_mode, options.test_side);
            break;
          }
          case Method::true_joint: {
            auto provider = make_true_joint_provider(true_joint, true_joint);
            fill_cell(cell, analyze_with_provider(raw, config, *provider),
                      options.variance_mode, options.test_side);
            break;
          }
          case Method::logrank: {
            const LogrankResult lr = logrank_test(common);
            cell.have = true;
            cell.have_lr = true;
            cell.p_lr = options.test_side == TestSide::one_sided
                            ? lr.p_one_sided
                            : lr.p_two_sided;
            break;
          }
        }
      } catch (const DegenerateError&) {
        cell.degenerate = true;
      }
    }
  }

  for (std::size_t mi = 0; mi < n_methods; ++mi) {
    MethodSummary s;
    s.method = options.methods[mi];
    std::vector<double> log_wrs, nbs, log_wos;
    double sum_pt = 0.0, sum_pc = 0.0, sum_tie = 0.0;
    double sum_wr = 0.0, sum_se_wr = 0.0;
    double sum_nb = 0.0, sum_se_nb = 0.0;
    double sum_wo = 0.0, sum_se_wo = 0.0;
    std::size_t n_cover_wr = 0, n_rej_wr = 0;
    std::size_t n_cover_nb = 0, n_rej_nb = 0;
    std::size_t n_cover_wo = 0, n_rej_wo = 0;
    std::size_t n_lr = 0, n_rej_lr = 0;
    for (const Cell& cell : cells[mi]) {
      if (cell.degenerate) {
        ++s.n_degenerate;
        continue;
      }
      if (!cell.have) continue;
      ++s.n_used;
      if (cell.have_lr) {
        ++n_lr;
        if (cell.p_lr <= options.alpha) ++n_rej_lr;
        continue;
      }
      sum_pt += cell.pi_t;
      sum_pc += cell.pi_c;
      sum_tie += cell.pi_tie;
      if (cell.have_wr) {
        log_wrs.push_back(cell.log_wr);
        sum_wr += cell.wr;
        sum_se_wr += cell.se_log_wr;
        if (cell.lo_wr <= result.truth.wr && result.truth.wr <= cell.hi_wr)
          ++n_cover_wr;
        if (cell.p_wr <= options.alpha) ++n_rej_wr;
      } else {
        ++s.n_wr_missing;
      }
      if (cell.have_nb) {
        nbs.push_back(cell.nb);
        sum_nb += cell.nb;
        sum_se_nb += cell.se_nb;
        if (cell.lo_nb <= result.truth.nb && result.truth.nb <= cell.hi_nb)
          ++n_cover_nb;
        if (cell.p_nb <= options.alpha) ++n_rej_nb;
      }
      if (cell.have_wo) {
        log_wos.push_back(std::log(cell.wo));
        sum_wo += cell.wo;
        sum_se_wo += cell.se_log_wo;
        if (cell.lo_wo <= result.truth.wo && result.truth.wo <= cell.hi_wo)
          ++n_cover_wo;
        if (cell.p_wo <= options.alpha) ++n_rej_wo;
      }
    }
    const double n_est = static_cast<double>(s.n_used);
    if (s.method == Method::logrank) {
      s.reject = (n_lr > 0) ? static_cast<double>(n_rej_lr) / n_lr : 0.0;
    } else if (s.n_used > 0) {
      s.mean_pi_t = sum_pt / n_est;
      s.mean_pi_c = sum_pc / n_est;
      s.mean_pi_tie = sum_tie / n_est;
      const double n_wr = static_cast<double>(log_wrs.size());
      if (!log_wrs.empty()) {
        s.mean_wr = sum_wr / n_wr;
        double m = 0.0;
        for (double x : log_wrs) m += x;
        s.mean_log_wr = m / n_wr;
        s.ese_log_wr = sample_sd(log_wrs);
        s.ase_log_wr = sum_se_wr / n_wr;
        s.cp_wr = n_cover_wr / n_wr;
        s.reject_wr = n_rej_wr / n_wr;
      }
      const double n_nb = static_cast<double>(nbs.size());
      if (!nbs.empty()) {
        s.mean_nb = sum_nb / n_nb;
        s.ese_nb = sample_sd(nbs);
        s.ase_nb = sum_se_nb / n_nb;
        s.cp_nb = n_cover_nb / n_nb;
        s.reject_nb = n_rej_nb / n_nb;
      }
      const double n_wo = static_cast<double>(log_wos.size());
      if (!log_wos.empty()) {
        s.mean_wo = sum_wo / n_wo;
        s.ese_log_wo = sample_sd(log_wos);
        s.ase_log_wo = sum_se_wo / n_wo;
        s.cp_wo = n_cover_wo / n_wo;
        s.reject_wo = n_rej_wo / n_wo;
      }
    }
    result.methods.push_back(std::move(s));
  }
  return result;
}

}  // namespace winstat
