#include <cmath>
#include <cstddef>
#include <vector>

#include "doctest.h"
#include "test_util.hpp"
#include "winstat/censoring_km.hpp"
#include "winstat/data_model.hpp"
#include "winstat/estimators.hpp"
#include "winstat/inference.hpp"
#include "winstat/normal.hpp"
#include "winstat/rng.hpp"
#include "winstat/win_kernel.hpp"

using namespace winstat;

namespace {

AnalysisConfig config_for(int L, std::vector<double> margins,
                          double tau = 10.0,
                          HazardMode hm = HazardMode::neg_log_km) {
  AnalysisConfig c;
  c.n_endpoints = L;
  c.tau = TauSpec::fixed(tau);
  c.margins = std::move(margins);
  c.hazard_mode = hm;
  return c;
}

// Naive per-subject martingale integral of I[u > s], written straight
// from the definition: counting part at the subject's censoring record,
// minus every hazard increment strictly below u while the subject is
// still at risk.
struct MartOracle {
  std::vector<CensoringRecord> recs;
  HazardIncrements hz;

  double h(std::size_t i, double u) const {
    double v = 0.0;
    if (recs[i].delta_c && recs[i].x_tilde < u)
      v += 1.0 / at_risk_fraction(recs, recs[i].x_tilde);
    for (std::size_t k = 0; k < hz.times.size(); ++k)
      if (hz.times[k] < u && hz.times[k] <= recs[i].x_tilde)
        v -= hz.increments[k] / at_risk_fraction(recs, hz.times[k]);
    return v;
  }
};

MartOracle mart_oracle(const std::vector<const SubjectRecord*>& subs,
                       HazardMode mode) {
  MartOracle m;
  for (const auto* s : subs) m.recs.push_back(derive_censoring_record(*s));
  m.hz = hazard_increments(fit_censoring_survival(m.recs), mode);
  return m;
}

struct OracleMatrices {
  std::size_t nt = 0, nc = 0;
  std::vector<double> k, l;
};

// Cubic-cost transcription of the influence entries under estimated
// weights, using only the single-pair public primitives.
OracleMatrices oracle_influence(const Dataset& data,
                                const AnalysisConfig& config) {
  std::vector<const SubjectRecord*> ts, cs;
  for (const auto& s : data.subjects)
    (s.group == Group::treatment ? ts : cs).push_back(&s);
  const std::size_t nt = ts.size(), nc = cs.size();
  const double tau = data.tau;

  std::vector<CensoringRecord> rt, rc;
  for (const auto* s : ts) rt.push_back(derive_censoring_record(*s));
  for (const auto* s : cs) rc.push_back(derive_censoring_record(*s));
  const StepSurvival gt = fit_censoring_survival(rt);
  const StepSurvival gc = fit_censoring_survival(rc);
  const MartOracle mt = mart_oracle(ts, config.hazard_mode);
  const MartOracle mc = mart_oracle(cs, config.hazard_mode);
  const MarginMode mode = classify_margins(config.margins);

  OracleMatrices out;
  out.nt = nt;
  out.nc = nc;
  out.k.assign(nt * nc, 0.0);
  out.l.assign(nt * nc, 0.0);

  for (const auto& term : enumerate_win_terms(data.n_endpoints, config.margins,
                                              mode, TermDirection::t_wins)) {
    std::vector<double> p(nt * nc);
    for (std::size_t i = 0; i < nt; ++i)
      for (std::size_t j = 0; j < nc; ++j)
        p[i * nc + j] = eval_term(term, *ts[i], *cs[j], gt, gc, tau);
    double p0 = 0.0;
    for (double v : p) p0 += v;
    p0 /= static_cast<double>(nt * nc);
    std::vector<double> colmean(nc, 0.0), a(nc), b(nc);
    for (std::size_t j = 0; j < nc; ++j) {
      for (std::size_t i = 0; i < nt; ++i) colmean[j] += p[i * nc + j];
      colmean[j] /= static_cast<double>(nt);
      const WeightArgs args = term_weight_args(term, *cs[j], tau);
      a[j] = args.opp;
      b[j] = args.own;
    }
    for (std::size_t i = 0; i < nt; ++i)
      for (std::size_t j = 0; j < nc; ++j) {
        double v = p[i * nc + j] - p0 + colmean[j] * mt.h(i, a[j]);
        double d = 0.0;
        for (std::size_t m = 0; m < nc; ++m)
          d += p[i * nc + m] * mc.h(j, b[m]);
        out.k[i * nc + j] += v + d / static_cast<double>(nc);
      }
  }

  for (const auto& term : enumerate_win_terms(data.n_endpoints, config.margins,
                                              mode, TermDirection::c_wins)) {
    std::vector<double> p(nt * nc);
    for (std::size_t i = 0; i < nt; ++i)
      for (std::size_t j = 0; j < nc; ++j)
        p[i * nc + j] = eval_term(term, *ts[i], *cs[j], gt, gc, tau);
    double p0 = 0.0;
    for (double v : p) p0 += v;
    p0 /= static_cast<double>(nt * nc);
    std::vector<double> rowmean(nt, 0.0), a(nt), b(nt);
    for (std::size_t i = 0; i < nt; ++i) {
      for (std::size_t j = 0; j < nc; ++j) rowmean[i] += p[i * nc + j];
      rowmean[i] /= static_cast<double>(nc);
      const WeightArgs args = term_weight_args(term, *ts[i], tau);
      a[i] = args.opp;
      b[i] = args.own;
    }
    for (std::size_t i = 0; i < nt; ++i)
      for (std::size_t j = 0; j < nc; ++j) {
        double v = p[i * nc + j] - p0 + rowmean[i] * mc.h(j, a[i]);
        double d = 0.0;
        for (std::size_t kk = 0; kk < nt; ++kk)
          d += p[kk * nc + j] * mt.h(i, b[kk]);
        out.l[i * nc + j] += v + d / static_cast<double>(nt);
      }
  }
  return out;
}

}  // namespace

TEST_CASE("influence entries match the cubic-cost transcription") {
  Rng rng(71001);
  int done = 0;
  for (int attempt = 0; attempt < 80 && done < 12; ++attempt) {
    const int L = 1 + static_cast<int>(rng.uniform() * 2.0);
    const int nt = 3 + static_cast<int>(rng.uniform() * 4.0);
    const int nc = 3 + static_cast<int>(rng.uniform() * 4.0);
    const Dataset data =
        testutil::random_censored(rng, L, nt, nc, 10.0, attempt % 2 == 0);
    std::vector<double> zeta(L, attempt % 3 == 0 ? 0.75 : 0.0);
    const HazardMode hm =
        attempt % 2 == 0 ? HazardMode::neg_log_km : HazardMode::nelson_aalen;
    const auto config = config_for(L, zeta, 10.0, hm);
    try {
      const WinProbEstimate est = estimate_win_probabilities(data, config);
      const InfluenceComponents parts =
          influence_components(data, config, est);
      const OracleMatrices want = oracle_influence(data, config);
      REQUIRE(parts.n_t == want.nt);
      REQUIRE(parts.n_c == want.nc);
      for (std::size_t idx = 0; idx < want.k.size(); ++idx) {
        CHECK(parts.k[idx] == doctest::Approx(want.k[idx]).epsilon(1e-10));
        CHECK(parts.l[idx] == doctest::Approx(want.l[idx]).epsilon(1e-10));
      }
      ++done;
    } catch (const DegenerateError&) {
    }
  }
  CHECK(done == 12);
}

TEST_CASE("influence entries sum to zero under the counting hazard") {
  Rng rng(71002);
  int done = 0;
  for (int attempt = 0; attempt < 40 && done < 6; ++attempt) {
    const Dataset data =
        testutil::random_censored(rng, 2, 8, 7, 10.0, attempt % 2 == 0);
    const auto config =
        config_for(2, {0.0, 0.0}, 10.0, HazardMode::nelson_aalen);
    try {
      const WinProbEstimate est = estimate_win_probabilities(data, config);
      const InfluenceComponents parts =
          influence_components(data, config, est);
      double total_k = 0.0, total_l = 0.0, scale = 0.0;
      for (std::size_t idx = 0; idx < parts.k.size(); ++idx) {
        total_k += parts.k[idx];
        total_l += parts.l[idx];
        scale += std::fabs(parts.k[idx]) + std::fabs(parts.l[idx]);
      }
      CHECK(std::fabs(total_k) <= 1e-9 * (1.0 + scale));
      CHECK(std::fabs(total_l) <= 1e-9 * (1.0 + scale));
      ++done;
    } catch (const DegenerateError&) {
    }
  }
  CHECK(done == 6);
}

TEST_CASE("centered kernels alone for unit and true weights") {
  Rng rng(71003);
  const Dataset data = testutil::random_censored(rng, 2, 6, 6, 10.0, true);
  const auto config = config_for(2, {0.0, 0.0});

  const WinProbEstimate unit =
      estimate_with_weight_provider(data, config, *make_unit_provider());
  const InfluenceComponents parts = influence_components(data, config, unit);
  // An exact two-sample U-statistic: both sums vanish to rounding.
  double total_k = 0.0, total_l = 0.0;
  for (std::size_t idx = 0; idx < parts.k.size(); ++idx) {
    total_k += parts.k[idx];
    total_l += parts.l[idx];
  }
  CHECK(std::fabs(total_k) <= 1e-12 * parts.k.size());
  CHECK(std::fabs(total_l) <= 1e-12 * parts.l.size());
  CHECK(parts.diagnostics.hazard_jumps_dropped == 0);

  // The kernel matrix itself must be the centered unit-weight kernel.
  std::vector<const SubjectRecord*> ts, cs;
  for (const auto& s : data.subjects)
    (s.group == Group::treatment ? ts : cs).push_back(&s);
  const auto terms = enumerate_win_terms(2, config.margins, MarginMode::zero,
                                         TermDirection::t_wins);
  double p00 = 0.0;
  std::vector<double> raw(parts.k.size(), 0.0);
  for (const auto& term : terms)
    for (std::size_t i = 0; i < ts.size(); ++i)
      for (std::size_t j = 0; j < cs.size(); ++j)
        raw[i * cs.size() + j] +=
            term_indicator(term, *ts[i], *cs[j], 10.0);
  for (double v : raw) p00 += v;
  p00 /= static_cast<double>(raw.size());
  for (std::size_t idx = 0; idx < raw.size(); ++idx)
    CHECK(parts.k[idx] == doctest::Approx(raw[idx] - p00).epsilon(1e-12));

  // True-weight schemes refuse to run without their provider.
  const auto one = [](double) { return 1.0; };
  const auto provider = make_true_common_provider(one, one);
  const WinProbEstimate te =
      estimate_with_weight_provider(data, config, *provider);
  CHECK_THROWS_AS(influence_components(data, config, te), ConfigError);
  const InfluenceComponents tparts =
      influence_components(data, config, te, provider.get());
  for (std::size_t idx = 0; idx < tparts.k.size(); ++idx)
    CHECK(tparts.k[idx] == doctest::Approx(parts.k[idx]).epsilon(1e-12));
}

TEST_CASE("fall-through influence entries are centered win indicators") {
  Rng rng(71009);
  for (int rep = 0; rep < 6; ++rep) {
    const int L = 1 + rep % 3;
    const Dataset data =
        testutil::random_censored(rng, L, 5, 6, 10.0, rep % 2 == 0);
    std::vector<double> zeta(L, rep % 2 == 0 ? 0.0 : 0.8);
    const auto config = config_for(L, zeta);

    const WinProbEstimate naive = naive_win_probabilities(data, config);
    const InfluenceComponents parts =
        influence_components(data, config, naive);

    std::vector<const SubjectRecord*> ts, cs;
    for (const auto& s : data.subjects)
      (s.group == Group::treatment ? ts : cs).push_back(&s);
    REQUIRE(parts.n_t == ts.size());
    REQUIRE(parts.n_c == cs.size());
    double total_k = 0.0, total_l = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i)
      for (std::size_t j = 0; j < cs.size(); ++j) {
        const int v = compare_observed_pair(*ts[i], *cs[j], zeta);
        const double want_k = (v > 0 ? 1.0 : 0.0) - naive.pi_t;
        const double want_l = (v < 0 ? 1.0 : 0.0) - naive.pi_c;
        CHECK(parts.k_at(i, j) == want_k);
        CHECK(parts.l_at(i, j) == want_l);
        total_k += parts.k_at(i, j);
        total_l += parts.l_at(i, j);
      }
    // Exact U-statistic: centered sums vanish and no hazard machinery ran.
    CHECK(std::fabs(total_k) <= 1e-12 * parts.k.size());
    CHECK(std::fabs(total_l) <= 1e-12 * parts.l.size());
    CHECK(parts.diagnostics.hazard_jumps_dropped == 0);

    // analyze_naive wires the same entries into the covariance.
    const AnalysisResult full = analyze_naive(data, config);
    const CovarianceEstimate want = covariance(parts);
    CHECK(full.cov.s_tt == want.s_tt);
    CHECK(full.cov.s_cc == want.s_cc);
    CHECK(full.cov.s_tc == want.s_tc);
    CHECK(full.probs.weight_provenance == WeightProvenance::none);
  }
}

TEST_CASE("covariance matches the index-pair sums") {
  Rng rng(71004);
  int done = 0;
  for (int attempt = 0; attempt < 40 && done < 8; ++attempt) {
    const int L = 1 + static_cast<int>(rng.uniform() * 2.0);
    const Dataset data =
        testutil::random_censored(rng, L, 5, 6, 10.0, attempt % 2 == 0);
    std::vector<double> zeta(L, attempt % 2 == 0 ? 0.0 : 0.6);
    const auto config = config_for(L, zeta);
    try {
      const WinProbEstimate est = estimate_win_probabilities(data, config);
      const InfluenceComponents parts =
          influence_components(data, config, est);
      const CovarianceEstimate cov = covariance(parts);

      const std::size_t nt = parts.n_t, nc = parts.n_c;
      double tt1 = 0.0, cc1 = 0.0, tc1 = 0.0;
      for (std::size_t i = 0; i < nt; ++i)
        for (std::size_t j = 0; j < nc; ++j)
          for (std::size_t j2 = 0; j2 < nc; ++j2) {
            if (j == j2) continue;
            tt1 += parts.k_at(i, j) * parts.k_at(i, j2);
            cc1 += parts.l_at(i, j) * parts.l_at(i, j2);
            tc1 += parts.k_at(i, j) * parts.l_at(i, j2);
          }
      double tt2 = 0.0, cc2 = 0.0, tc2 = 0.0;
      for (std::size_t j = 0; j < nc; ++j)
        for (std::size_t i = 0; i < nt; ++i)
          for (std::size_t i2 = 0; i2 < nt; ++i2) {
            if (i == i2) continue;
            tt2 += parts.k_at(i, j) * parts.k_at(i2, j);
            cc2 += parts.l_at(i, j) * parts.l_at(i2, j);
            tc2 += parts.k_at(i, j) * parts.l_at(i2, j);
          }
      const double dnt = static_cast<double>(nt), dnc = static_cast<double>(nc);
      const double n = dnt + dnc;
      const double c1 = n / (dnt * dnt * dnc * (dnc - 1.0));
      const double c2 = n / (dnt * (dnt - 1.0) * dnc * dnc);
      CHECK(cov.s_tt ==
            doctest::Approx(c1 * tt1 + c2 * tt2).epsilon(1e-11));
      CHECK(cov.s_cc ==
            doctest::Approx(c1 * cc1 + c2 * cc2).epsilon(1e-11));
      CHECK(cov.s_tc ==
            doctest::Approx(c1 * tc1 + c2 * tc2).epsilon(1e-11));
      ++done;
    } catch (const DegenerateError&) {
    }
  }
  CHECK(done == 8);

  InfluenceComponents tiny;
  tiny.n_t = 1;
  tiny.n_c = 3;
  tiny.k.assign(3, 0.0);
  tiny.l.assign(3, 0.0);
  CHECK_THROWS_AS(covariance(tiny), DegenerateError);
}

TEST_CASE("variance formulas at pinned values") {
  CovarianceEstimate cov;
  cov.s_tt = 4.0;
  cov.s_cc = 3.0;
  cov.s_tc = 1.0;
  CHECK(statistic_variance(Statistic::win_ratio, 0.5, 0.4, cov, 200, 200) ==
        doctest::Approx(0.0618750).epsilon(1e-14));

  CovarianceEstimate unitcov;
  unitcov.s_tt = 1.0;
  unitcov.s_cc = 1.0;
  unitcov.s_tc = 0.0;
  CHECK(statistic_variance(Statistic::net_benefit, 0.4, 0.3, unitcov, 100,
                           100) == doctest::Approx(0.01).epsilon(1e-14));
  // Odds variance via the net-benefit spread: 4 * 2 / (200 * 0.96^2).
  CHECK(statistic_variance(Statistic::win_odds, 0.6, 0.4, unitcov, 100, 100) ==
        doctest::Approx(8.0 / (200.0 * 0.9216)).epsilon(1e-13));

  CHECK(null_variance_log_wr(0.0, unitcov, 200, 200) ==
        doctest::Approx(0.02).epsilon(1e-14));
  CHECK(null_variance_log_wr(0.5, unitcov, 200, 200) ==
        doctest::Approx(0.08).epsilon(1e-14));
  CovarianceEstimate flat;
  flat.s_tt = 1.0;
  flat.s_cc = 1.0;
  flat.s_tc = 1.0;
  CHECK(null_variance_log_wr(0.0, flat, 200, 200) == 0.0);

  CHECK_THROWS_AS(
      statistic_variance(Statistic::win_ratio, 0.0, 0.4, cov, 10, 10),
      DegenerateError);
  CHECK_THROWS_AS(
      statistic_variance(Statistic::win_odds, 1.0, 0.0, cov, 10, 10),
      DegenerateError);
  CHECK_THROWS_AS(null_variance_log_wr(1.0, cov, 10, 10), DegenerateError);
}

TEST_CASE("tests and confidence intervals at pinned values") {
  SUBCASE("ratio near 1.66 with se 0.1485") {
    const StatisticInference r = test_and_ci(
        Statistic::win_ratio, 0.2905, 0.175, 0.1485 * 0.1485, 0.05);
    CHECK(r.estimate == doctest::Approx(1.66).epsilon(1e-12));
    CHECK(std::round(r.ci_low * 100.0) == 124.0);
    CHECK(std::round(r.ci_high * 100.0) == 222.0);
    CHECK(r.p_two_sided > 0.0003);
    CHECK(r.p_two_sided < 0.0007);
    CHECK(r.p_one_sided == doctest::Approx(r.p_two_sided / 2.0).epsilon(1e-12));
  }
  SUBCASE("z at the two-sided boundary gives p = 0.05") {
    const double nb = 0.2;
    const double se = nb / 1.959963984540054;
    const StatisticInference r =
        test_and_ci(Statistic::net_benefit, 0.3, 0.1, se * se, 0.05);
    CHECK(r.z == doctest::Approx(1.959963984540054).epsilon(1e-12));
    CHECK(r.p_two_sided == doctest::Approx(0.05).epsilon(1e-9));
    CHECK(r.ci_low == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("alpha controls the width") {
    const StatisticInference wide =
        test_and_ci(Statistic::win_odds, 0.5, 0.3, 0.04, 0.05);
    const StatisticInference narrow =
        test_and_ci(Statistic::win_odds, 0.5, 0.3, 0.04, 0.20);
    CHECK(narrow.ci_low > wide.ci_low);
    CHECK(narrow.ci_high < wide.ci_high);
    CHECK(narrow.estimate == wide.estimate);
  }
  SUBCASE("degenerate and invalid inputs") {
    CHECK_THROWS_AS(test_and_ci(Statistic::win_ratio, 0.4, 0.0, 0.01, 0.05),
                    DegenerateError);
    CHECK_THROWS_AS(test_and_ci(Statistic::net_benefit, 0.4, 0.2, 0.0, 0.05),
                    DegenerateError);
    CHECK_THROWS_AS(test_and_ci(Statistic::net_benefit, 0.4, 0.2, 0.01, 0.0),
                    ConfigError);
  }
}

TEST_CASE("analysis is symmetric under a group swap") {
  Rng rng(71005);
  int done = 0;
  for (int attempt = 0; attempt < 40 && done < 5; ++attempt) {
    Dataset data = testutil::random_censored(rng, 2, 12, 10, 10.0, false);
    const auto config = config_for(2, {0.0, 0.0});
    try {
      const AnalysisResult a = analyze_dataset(data, config);
      Dataset flipped = data;
      for (auto& s : flipped.subjects)
        s.group = s.group == Group::treatment ? Group::control
                                              : Group::treatment;
      const AnalysisResult b = analyze_dataset(flipped, config);
      if (!a.wr || !b.wr || !a.nb || !b.nb) continue;
      CHECK(a.wr->estimate ==
            doctest::Approx(1.0 / b.wr->estimate).epsilon(1e-10));
      CHECK(a.wr->z == doctest::Approx(-b.wr->z).epsilon(1e-9));
      CHECK(a.wr->p_two_sided ==
            doctest::Approx(b.wr->p_two_sided).epsilon(1e-9));
      CHECK(a.nb->estimate == doctest::Approx(-b.nb->estimate).epsilon(1e-10));
      CHECK(a.nb->se == doctest::Approx(b.nb->se).epsilon(1e-10));
      CHECK(a.cov.s_tt == doctest::Approx(b.cov.s_cc).epsilon(1e-9));
      ++done;
    } catch (const DegenerateError&) {
    }
  }
  CHECK(done == 5);
}

TEST_CASE("estimated variance tracks the sampling spread") {
  // Small Monte Carlo canary: the mean estimated variance of the win
  // probability difference should sit near the empirical variance over
  // replications. Exponential events against a common exponential
  // censoring time, single endpoint.
  Rng rng(71006);
  const int reps = 300;
  const int n = 40;
  const double tau = 15.0;
  std::vector<double> nb_hat;
  double var_sum = 0.0;
  int used = 0;
  for (int r = 0; r < reps; ++r) {
    Dataset data;
    data.n_endpoints = 1;
    data.tau = tau;
    for (int i = 0; i < 2 * n; ++i) {
      const double rate = i < n ? 0.04 : 0.06;
      const double t = -std::log(rng.uniform()) / rate;
      const double cens = -std::log(rng.uniform()) / 0.03;
      auto [x, d] = apply_horizon({t}, cens, tau);
      SubjectRecord s;
      s.group = i < n ? Group::treatment : Group::control;
      s.times = x;
      s.events = d;
      data.subjects.push_back(std::move(s));
    }
    try {
      const AnalysisResult res = analyze_dataset(data, config_for(1, {0.0}, tau));
      if (!res.nb) continue;
      nb_hat.push_back(res.nb->estimate);
      var_sum += res.nb->se * res.nb->se;
      ++used;
    } catch (const DegenerateError&) {
    }
  }
  REQUIRE(used > 280);
  double mean = 0.0;
  for (double v : nb_hat) mean += v;
  mean /= used;
  double emp = 0.0;
  for (double v : nb_hat) emp += (v - mean) * (v - mean);
  emp /= (used - 1);
  const double ratio = (var_sum / used) / emp;
  CHECK(ratio > 0.65);
  CHECK(ratio < 1.40);
}
