#include "winstat/inference.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "winstat/censoring_km.hpp"
#include "winstat/data_model.hpp"
#include "winstat/normal.hpp"
#include "winstat/parallel.hpp"
#include "winstat/win_kernel.hpp"

namespace winstat {

namespace {

// Censoring-martingale machinery for one group: retained hazard jumps
// with increment-over-at-risk running sums, plus per-subject lookups.
// Jump k carries the hazard increment at the k-th censoring event time;
// log-based increments may drop a trailing jump where the curve hits 0,
// but a subject's own censoring event still contributes its counting
// part regardless.
struct GroupMartingale {
  std::vector<double> jumps;
  std::vector<double> dl_over_y;
  std::vector<double> prefix;
  std::size_t dropped = 0;

  std::vector<double> x_tilde;
  std::vector<unsigned char> delta_c;
  std::vector<double> inv_y_at_x;
  std::vector<std::ptrdiff_t> last_jump_le_x;
};

GroupMartingale build_martingale(
    const std::vector<const SubjectRecord*>& subjects, HazardMode mode) {
  std::vector<CensoringRecord> recs;
  recs.reserve(subjects.size());
  for (const auto* s : subjects) recs.push_back(derive_censoring_record(*s));

  GroupMartingale g;
  const StepSurvival curve = fit_censoring_survival(recs);
  const HazardIncrements hz = hazard_increments(curve, mode);
  g.jumps = hz.times;
  g.dropped = curve.jump_times.size() - hz.times.size();
  const double n = static_cast<double>(recs.size());
  g.dl_over_y.resize(g.jumps.size());
  g.prefix.resize(g.jumps.size());
  double run = 0.0;
  for (std::size_t k = 0; k < g.jumps.size(); ++k) {
    g.dl_over_y[k] = hz.increments[k] * n / curve.n_at_risk[k];
    run += g.dl_over_y[k];
    g.prefix[k] = run;
  }

  g.x_tilde.reserve(recs.size());
  g.delta_c.reserve(recs.size());
  g.inv_y_at_x.reserve(recs.size());
  g.last_jump_le_x.reserve(recs.size());
  for (const auto& r : recs) {
    g.x_tilde.push_back(r.x_tilde);
    g.delta_c.push_back(r.delta_c ? 1 : 0);
    g.inv_y_at_x.push_back(1.0 / at_risk_fraction(recs, r.x_tilde));
    const auto it =
        std::upper_bound(g.jumps.begin(), g.jumps.end(), r.x_tilde);
    g.last_jump_le_x.push_back(it - g.jumps.begin() - 1);
  }
  return g;
}

// One subject's martingale integral of I[u > s], with the jump index of
// the last hazard time strictly below u precomputed by the caller.
double integral_below(const GroupMartingale& g, std::size_t subject, double u,
                      std::ptrdiff_t last_jump_lt_u) {
  double v = 0.0;
  if (g.delta_c[subject] && g.x_tilde[subject] < u)
    v += g.inv_y_at_x[subject];
  const std::ptrdiff_t p =
      std::min(last_jump_lt_u, g.last_jump_le_x[subject]);
  if (p >= 0) v -= g.prefix[p];
  return v;
}

constexpr std::size_t kNoPair = std::numeric_limits<std::size_t>::max();

// Adds one term's influence entries into out, a row-major no x nw
// accumulator aligned with (other subject, weighted subject) index
// pairs. others/weighted orientation: for win terms the weighted side
// is the control group and out aligns with the k matrix; for loss terms
// the roles and the matrix are transposed by the caller.
//
// Full correction layout per pair (o, w):
//   (P_ow - P0)
//   + colmean_w * integral over o's martingale of I[a_w > s]
//   + integral over w's martingale of D_o(s), D_o(s) = rowmean over
//     weighted subjects m of P_om restricted to own-argument b_m > s.
void accumulate_term(const KernelTerm& term, double tau,
                     const std::vector<const SubjectRecord*>& others,
                     bool others_are_treatment,
                     const std::vector<const SubjectRecord*>& weighted,
                     const GroupMartingale* g_other,
                     const GroupMartingale* g_weighted,
                     const WeightProvider& provider, bool full,
                     std::vector<double>& p_buf, std::vector<double>& out) {
  const std::size_t no = others.size();
  const std::size_t nw = weighted.size();

  std::vector<double> a(nw), b(nw), inv_w(nw, 0.0);
  std::vector<unsigned char> bad(nw, 0);
  std::vector<std::ptrdiff_t> last_lt_a(nw, -1);
  for (std::size_t w = 0; w < nw; ++w) {
    const WeightArgs args = term_weight_args(term, *weighted[w], tau);
    a[w] = args.opp;
    b[w] = args.own;
    const double wt = provider.pair_weight(term, *weighted[w], tau);
    if (wt > kWeightFloor)
      inv_w[w] = 1.0 / wt;
    else
      bad[w] = 1;
    if (full) {
      const auto it = std::lower_bound(g_other->jumps.begin(),
                                       g_other->jumps.end(), a[w]);
      last_lt_a[w] = it - g_other->jumps.begin() - 1;
    }
  }

  std::vector<std::size_t> bad_col(no, kNoPair);
  parallel_for(no, [&](std::size_t o) {
    double* row = &p_buf[o * nw];
    for (std::size_t w = 0; w < nw; ++w) {
      const SubjectRecord& t = others_are_treatment ? *others[o] : *weighted[w];
      const SubjectRecord& c = others_are_treatment ? *weighted[w] : *others[o];
      const int ind = term_indicator(term, t, c, tau);
      if (ind == 0) {
        row[w] = 0.0;
      } else if (bad[w]) {
        row[w] = 0.0;
        if (bad_col[o] == kNoPair) bad_col[o] = w;
      } else {
        row[w] = static_cast<double>(ind) * inv_w[w];
      }
    }
  });
  for (std::size_t o = 0; o < no; ++o) {
    if (bad_col[o] == kNoPair) continue;
    const std::size_t w = bad_col[o];
    const auto& t = others_are_treatment ? *others[o] : *weighted[w];
    const auto& c = others_are_treatment ? *weighted[w] : *others[o];
    throw DegenerateError(
        "degenerate IPCW weight for pair (" + (t.id.empty() ? "t?" : t.id) +
        ", " + (c.id.empty() ? "c?" : c.id) +
        "); the censoring positivity condition looks violated");
  }

  std::vector<double> colmean(nw, 0.0);
  parallel_for(nw, [&](std::size_t w) {
    double s = 0.0;
    for (std::size_t o = 0; o < no; ++o) s += p_buf[o * nw + w];
    colmean[w] = s / static_cast<double>(no);
  });
  std::vector<double> rowsum(no, 0.0);
  parallel_for(no, [&](std::size_t o) {
    double s = 0.0;
    for (std::size_t w = 0; w < nw; ++w) s += p_buf[o * nw + w];
    rowsum[o] = s;
  });
  const double p0 = tree_sum(rowsum.data(), no) /
                    (static_cast<double>(no) * static_cast<double>(nw));

  if (!full) {
    parallel_for(no, [&](std::size_t o) {
      double* outrow = &out[o * nw];
      const double* prow = &p_buf[o * nw];
      for (std::size_t w = 0; w < nw; ++w) outrow[w] += prow[w] - p0;
    });
    return;
  }

  // Own-argument ordering shared across rows: cut positions mark the
  // first sorted b strictly above each hazard jump and above each
  // weighted subject's censoring record.
  std::vector<std::size_t> order(nw);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return b[x] < b[y] || (b[x] == b[y] && x < y);
  });
  std::vector<double> b_sorted(nw);
  for (std::size_t r = 0; r < nw; ++r) b_sorted[r] = b[order[r]];
  const std::size_t m = g_weighted->jumps.size();
  std::vector<std::size_t> cut_jump(m);
  for (std::size_t k = 0; k < m; ++k)
    cut_jump[k] = std::upper_bound(b_sorted.begin(), b_sorted.end(),
                                   g_weighted->jumps[k]) -
                  b_sorted.begin();
  std::vector<std::size_t> cut_x(nw);
  for (std::size_t w = 0; w < nw; ++w)
    cut_x[w] = std::upper_bound(b_sorted.begin(), b_sorted.end(),
                                g_weighted->x_tilde[w]) -
               b_sorted.begin();

  parallel_for(no, [&](std::size_t o) {
    const double* prow = &p_buf[o * nw];
    std::vector<double> suffix(nw + 1, 0.0);
    for (std::size_t r = nw; r-- > 0;)
      suffix[r] = suffix[r + 1] + prow[order[r]];
    std::vector<double> d_jump(m), compensator(m);
    double run = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      d_jump[k] = suffix[cut_jump[k]] / static_cast<double>(nw);
      run += d_jump[k] * g_weighted->dl_over_y[k];
      compensator[k] = run;
    }
    double* outrow = &out[o * nw];
    for (std::size_t w = 0; w < nw; ++w) {
      double v = prow[w] - p0;
      v += colmean[w] * integral_below(*g_other, o, a[w], last_lt_a[w]);
      if (g_weighted->delta_c[w])
        v += (suffix[cut_x[w]] / static_cast<double>(nw)) *
             g_weighted->inv_y_at_x[w];
      const std::ptrdiff_t e = g_weighted->last_jump_le_x[w];
      if (e >= 0) v -= compensator[e];
      outrow[w] += v;
    }
  });
}

void check_analysis_inputs(const Dataset& data, const AnalysisConfig& config) {
  validate_config(config);
  validate_dataset(data);
  if (config.n_endpoints != data.n_endpoints)
    throw ConfigError("config covers " + std::to_string(config.n_endpoints) +
                      " endpoints but the dataset has " +
                      std::to_string(data.n_endpoints));
  if (!(data.tau > 0.0))
    throw ConfigError("dataset has no resolved horizon; truncate it first");
}

void fill_row_col_sums(InfluenceComponents& parts) {
  const std::size_t nt = parts.n_t;
  const std::size_t nc = parts.n_c;
  parts.k_row.assign(nt, 0.0);
  parts.l_row.assign(nt, 0.0);
  parallel_for(nt, [&](std::size_t i) {
    double sk = 0.0, sl = 0.0;
    for (std::size_t j = 0; j < nc; ++j) {
      sk += parts.k[i * nc + j];
      sl += parts.l[i * nc + j];
    }
    parts.k_row[i] = sk;
    parts.l_row[i] = sl;
  });
  parts.k_col.assign(nc, 0.0);
  parts.l_col.assign(nc, 0.0);
  parallel_for(nc, [&](std::size_t j) {
    double sk = 0.0, sl = 0.0;
    for (std::size_t i = 0; i < nt; ++i) {
      sk += parts.k[i * nc + j];
      sl += parts.l[i * nc + j];
    }
    parts.k_col[j] = sk;
    parts.l_col[j] = sl;
  });
}

}  // namespace

InfluenceComponents influence_components(const Dataset& data,
                                         const AnalysisConfig& config,
                                         const WinProbEstimate& estimate,
                                         const WeightProvider* provider) {
  check_analysis_inputs(data, config);
  const MarginMode mode = classify_margins(config.margins);

  std::vector<const SubjectRecord*> ts;
  std::vector<const SubjectRecord*> cs;
  for (const auto& s : data.subjects)
    (s.group == Group::treatment ? ts : cs).push_back(&s);
  if (estimate.n_t != ts.size() || estimate.n_c != cs.size())
    throw ConfigError("estimate group sizes do not match the dataset");

  // The fall-through estimate is an exact two-sample U-statistic over
  // plain win and loss indicators, so its entries are those indicators
  // centered; no weight or martingale machinery is involved.
  if (estimate.weight_provenance == WeightProvenance::none) {
    InfluenceComponents parts;
    parts.n_t = ts.size();
    parts.n_c = cs.size();
    const std::size_t nc = parts.n_c;
    parts.k.assign(parts.n_t * nc, 0.0);
    parts.l.assign(parts.n_t * nc, 0.0);
    parallel_for(parts.n_t, [&](std::size_t i) {
      for (std::size_t j = 0; j < nc; ++j) {
        const int v = compare_observed_pair(*ts[i], *cs[j], config.margins);
        parts.k[i * nc + j] = (v > 0 ? 1.0 : 0.0) - estimate.raw_pi_t;
        parts.l[i * nc + j] = (v < 0 ? 1.0 : 0.0) - estimate.raw_pi_c;
      }
    });
    fill_row_col_sums(parts);
    return parts;
  }

  std::unique_ptr<WeightProvider> owned;
  const WeightProvider* prov = nullptr;
  bool full = false;
  switch (estimate.weight_provenance) {
    case WeightProvenance::km:
      owned = make_km_provider(data);
      prov = owned.get();
      full = true;
      break;
    case WeightProvenance::unit:
      owned = make_unit_provider();
      prov = owned.get();
      break;
    default:
      if (provider == nullptr ||
          provider->provenance() != estimate.weight_provenance)
        throw ConfigError(
            "true-weight influence entries need the provider that produced "
            "the estimate");
      prov = provider;
      break;
  }

  GroupMartingale mart_t, mart_c;
  if (full) {
    mart_t = build_martingale(ts, config.hazard_mode);
    mart_c = build_martingale(cs, config.hazard_mode);
  }

  const std::size_t nt = ts.size();
  const std::size_t nc = cs.size();
  InfluenceComponents parts;
  parts.n_t = nt;
  parts.n_c = nc;
  parts.k.assign(nt * nc, 0.0);
  parts.l.assign(nt * nc, 0.0);
  std::vector<double> p_buf(nt * nc, 0.0);

  for (const auto& term : enumerate_win_terms(data.n_endpoints, config.margins,
                                              mode, TermDirection::t_wins))
    accumulate_term(term, data.tau, ts, true, cs, full ? &mart_t : nullptr,
                    full ? &mart_c : nullptr, *prov, full, p_buf, parts.k);

  std::vector<double> l_transposed(nc * nt, 0.0);
  for (const auto& term : enumerate_win_terms(data.n_endpoints, config.margins,
                                              mode, TermDirection::c_wins))
    accumulate_term(term, data.tau, cs, false, ts, full ? &mart_c : nullptr,
                    full ? &mart_t : nullptr, *prov, full, p_buf,
                    l_transposed);
  parallel_for(nt, [&](std::size_t i) {
    for (std::size_t j = 0; j < nc; ++j)
      parts.l[i * nc + j] = l_transposed[j * nt + i];
  });

  fill_row_col_sums(parts);

  if (full)
    parts.diagnostics.hazard_jumps_dropped = mart_t.dropped + mart_c.dropped;
  return parts;
}

CovarianceEstimate covariance(const InfluenceComponents& parts) {
  const std::size_t nt = parts.n_t;
  const std::size_t nc = parts.n_c;
  if (nt < 2 || nc < 2)
    throw DegenerateError(
        "variance estimation needs at least two subjects per group");

  double skk = 0.0, sll = 0.0, skl = 0.0;
  for (std::size_t idx = 0; idx < nt * nc; ++idx) {
    skk += parts.k[idx] * parts.k[idx];
    sll += parts.l[idx] * parts.l[idx];
    skl += parts.k[idx] * parts.l[idx];
  }
  double row_kk = 0.0, row_ll = 0.0, row_kl = 0.0;
  for (std::size_t i = 0; i < nt; ++i) {
    row_kk += parts.k_row[i] * parts.k_row[i];
    row_ll += parts.l_row[i] * parts.l_row[i];
    row_kl += parts.k_row[i] * parts.l_row[i];
  }
  double col_kk = 0.0, col_ll = 0.0, col_kl = 0.0;
  for (std::size_t j = 0; j < nc; ++j) {
    col_kk += parts.k_col[j] * parts.k_col[j];
    col_ll += parts.l_col[j] * parts.l_col[j];
    col_kl += parts.k_col[j] * parts.l_col[j];
  }

  const double dnt = static_cast<double>(nt);
  const double dnc = static_cast<double>(nc);
  const double n = dnt + dnc;
  const double c1 = n / (dnt * dnt * dnc * (dnc - 1.0));
  const double c2 = n / (dnt * (dnt - 1.0) * dnc * dnc);

  CovarianceEstimate cov;
  cov.s_tt = c1 * (row_kk - skk) + c2 * (col_kk - skk);
  cov.s_cc = c1 * (row_ll - sll) + c2 * (col_ll - sll);
  cov.s_tc = c1 * (row_kl - skl) + c2 * (col_kl - skl);
  return cov;
}

double statistic_variance(Statistic kind, double pi_t, double pi_c,
                          const CovarianceEstimate& cov, std::size_t n_t,
                          std::size_t n_c) {
  const double n = static_cast<double>(n_t + n_c);
  if (!(n > 0.0)) throw ConfigError("empty sample");
  const double base = cov.s_tt + cov.s_cc - 2.0 * cov.s_tc;
  switch (kind) {
    case Statistic::net_benefit:
      return base / n;
    case Statistic::win_ratio: {
      if (!(pi_t > 0.0) || !(pi_c > 0.0))
        throw DegenerateError(
            "log win ratio variance needs positive win and loss "
            "probabilities");
      return (cov.s_tt / (pi_t * pi_t) + cov.s_cc / (pi_c * pi_c) -
              2.0 * cov.s_tc / (pi_t * pi_c)) /
             n;
    }
    case Statistic::win_odds: {
      const double spread = 1.0 - (pi_t - pi_c) * (pi_t - pi_c);
      if (!(spread > 0.0))
        throw DegenerateError(
            "log win odds variance is undefined at total net benefit");
      return 4.0 * base / (n * spread * spread);
    }
  }
  throw ConfigError("unknown statistic");
}

double null_variance_log_wr(double pi_tie, const CovarianceEstimate& cov,
                            std::size_t n_t, std::size_t n_c) {
  const double n = static_cast<double>(n_t + n_c);
  if (!(n > 0.0)) throw ConfigError("empty sample");
  const double spread = 1.0 - pi_tie;
  if (!(spread > 0.0))
    throw DegenerateError(
        "null variance of log WR is undefined when every pair ties");
  const double base = cov.s_tt + cov.s_cc - 2.0 * cov.s_tc;
  return 4.0 * base / (n * spread * spread);
}

StatisticInference test_and_ci(Statistic kind, double pi_t, double pi_c,
                               double variance, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw ConfigError("alpha must lie strictly between 0 and 1");
  if (!(variance > 0.0))
    throw DegenerateError("nonpositive variance; no usable spread");
  const double q = norm_quantile(1.0 - alpha / 2.0);

  StatisticInference r;
  r.kind = kind;
  r.se = std::sqrt(variance);
  switch (kind) {
    case Statistic::win_ratio: {
      if (!(pi_t > 0.0) || !(pi_c > 0.0))
        throw DegenerateError("win ratio needs positive wins and losses");
      r.estimate = pi_t / pi_c;
      const double lg = std::log(r.estimate);
      r.z = lg / r.se;
      r.ci_low = r.estimate * std::exp(-q * r.se);
      r.ci_high = r.estimate * std::exp(q * r.se);
      break;
    }
    case Statistic::win_odds: {
      const double half_tie = 0.5 * (1.0 - pi_t - pi_c);
      const double num = pi_t + half_tie;
      const double den = pi_c + half_tie;
      if (!(num > 0.0) || !(den > 0.0))
        throw DegenerateError("win odds undefined for this probability pair");
      r.estimate = num / den;
      const double lg = std::log(r.estimate);
      r.z = lg / r.se;
      r.ci_low = r.estimate * std::exp(-q * r.se);
      r.ci_high = r.estimate * std::exp(q * r.se);
      break;
    }
    case Statistic::net_benefit: {
      r.estimate = pi_t - pi_c;
      r.z = r.estimate / r.se;
      r.ci_low = r.estimate - q * r.se;
      r.ci_high = r.estimate + q * r.se;
      break;
    }
  }
  r.p_two_sided = 2.0 * norm_cdf_upper(std::fabs(r.z));
  r.p_one_sided = norm_cdf_upper(r.z);
  return r;
}

namespace {

// Fills nb/wr/wo and the null-variance extras from r.probs and r.cov.
// Each statistic that is degenerate on this dataset stays empty.
void attach_statistic_inferences(AnalysisResult& r,
                                 const AnalysisConfig& config) {
  const double pt = r.probs.pi_t;
  const double pc = r.probs.pi_c;
  const std::size_t nt = r.probs.n_t;
  const std::size_t nc = r.probs.n_c;
  try {
    r.nb = test_and_ci(Statistic::net_benefit, pt, pc,
                       statistic_variance(Statistic::net_benefit, pt, pc,
                                          r.cov, nt, nc),
                       config.alpha);
  } catch (const DegenerateError&) {
  }
  try {
    r.wr = test_and_ci(Statistic::win_ratio, pt, pc,
                       statistic_variance(Statistic::win_ratio, pt, pc, r.cov,
                                          nt, nc),
                       config.alpha);
  } catch (const DegenerateError&) {
  }
  try {
    r.wo = test_and_ci(Statistic::win_odds, pt, pc,
                       statistic_variance(Statistic::win_odds, pt, pc, r.cov,
                                          nt, nc),
                       config.alpha);
  } catch (const DegenerateError&) {
  }
  try {
    const double nv = null_variance_log_wr(r.probs.pi_tie, r.cov, nt, nc);
    r.null_var_log_wr = nv;
    if (r.wr && nv > 0.0) {
      const double z = std::log(r.wr->estimate) / std::sqrt(nv);
      r.wr_null_z = z;
      r.wr_null_p_two_sided = 2.0 * norm_cdf_upper(std::fabs(z));
      r.wr_null_p_one_sided = norm_cdf_upper(z);
    }
  } catch (const DegenerateError&) {
  }
}

}  // namespace

AnalysisResult analyze_with_provider(const Dataset& data,
                                     const AnalysisConfig& config,
                                     const WeightProvider& provider) {
  AnalysisResult r;
  r.probs = estimate_with_weight_provider(data, config, provider);
  const InfluenceComponents parts =
      influence_components(data, config, r.probs, &provider);
  r.cov = covariance(parts);
  r.diagnostics = parts.diagnostics;
  attach_statistic_inferences(r, config);
  return r;
}

AnalysisResult analyze_dataset(const Dataset& data,
                               const AnalysisConfig& config) {
  return analyze_with_provider(data, config, *make_km_provider(data));
}

AnalysisResult analyze_naive(const Dataset& data,
                             const AnalysisConfig& config) {
  AnalysisResult r;
  r.probs = naive_win_probabilities(data, config);
  const InfluenceComponents parts = influence_components(data, config, r.probs);
  r.cov = covariance(parts);
  r.diagnostics = parts.diagnostics;
  attach_statistic_inferences(r, config);
  return r;
}

}  // namespace winstat
