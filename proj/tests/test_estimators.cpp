#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "test_util.hpp"
#include "winstat/estimators.hpp"
#include "winstat/parallel.hpp"
#include "winstat/rng.hpp"
#include "winstat/win_kernel.hpp"

using namespace winstat;

namespace {

SubjectRecord subject(Group g, const char* id, std::vector<double> x,
                      std::vector<unsigned char> d) {
  SubjectRecord s;
  s.group = g;
  s.id = id;
  s.times = std::move(x);
  s.events = std::move(d);
  return s;
}

AnalysisConfig config_for(int L, std::vector<double> margins,
                          double tau = 10.0) {
  AnalysisConfig c;
  c.n_endpoints = L;
  c.tau = TauSpec::fixed(tau);
  c.margins = std::move(margins);
  return c;
}

struct Fractions {
  double t = 0.0, c = 0.0, tie = 0.0;
};

Fractions brute_force(const Dataset& data, const std::vector<double>& zeta) {
  Fractions f;
  std::size_t pairs = 0;
  for (const auto& t : data.subjects) {
    if (t.group != Group::treatment) continue;
    for (const auto& c : data.subjects) {
      if (c.group != Group::control) continue;
      ++pairs;
      switch (testutil::reference_outcome(t, c, data.tau, zeta)) {
        case testutil::Outcome::t_win: f.t += 1.0; break;
        case testutil::Outcome::c_win: f.c += 1.0; break;
        case testutil::Outcome::tie: f.tie += 1.0; break;
      }
    }
  }
  f.t /= pairs;
  f.c /= pairs;
  f.tie /= pairs;
  return f;
}

// Direct sum over enumerated terms and pairs through the public
// single-pair evaluator, bypassing the assembly loop entirely.
Fractions transcribed_km(const Dataset& data, const AnalysisConfig& config) {
  const auto g_t =
      fit_censoring_survival(censoring_records(data, Group::treatment));
  const auto g_c =
      fit_censoring_survival(censoring_records(data, Group::control));
  const MarginMode mode = classify_margins(config.margins);
  std::vector<const SubjectRecord*> ts, cs;
  for (const auto& s : data.subjects)
    (s.group == Group::treatment ? ts : cs).push_back(&s);
  auto sum_terms = [&](const std::vector<KernelTerm>& terms) {
    double acc = 0.0;
    for (const auto& term : terms)
      for (const auto* t : ts)
        for (const auto* c : cs)
          acc += eval_term(term, *t, *c, g_t, g_c, data.tau);
    return acc / (static_cast<double>(ts.size()) * cs.size());
  };
  Fractions f;
  f.t = sum_terms(enumerate_win_terms(data.n_endpoints, config.margins, mode,
                                      TermDirection::t_wins));
  f.c = sum_terms(enumerate_win_terms(data.n_endpoints, config.margins, mode,
                                      TermDirection::c_wins));
  if (mode == MarginMode::positive)
    f.tie =
        0.5 * sum_terms(enumerate_tie_terms(data.n_endpoints, config.margins));
  else
    f.tie = std::max(0.0, 1.0 - f.t - f.c);
  return f;
}

}  // namespace

TEST_CASE("win statistics from a probability pair") {
  SUBCASE("all three defined") {
    const WinStatistics s = win_statistics(0.6, 0.2);
    REQUIRE(s.wr.has_value());
    REQUIRE(s.wo.has_value());
    CHECK(*s.wr == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(s.nb == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(*s.wo == doctest::Approx(7.0 / 3.0).epsilon(1e-15));
  }
  SUBCASE("ratio rounds to three decimals") {
    const WinStatistics s = win_statistics(0.571, 0.420);
    CHECK(std::round(*s.wr * 1000.0) == 1360.0);
  }
  SUBCASE("no losses leaves the ratio undefined but not the others") {
    const WinStatistics s = win_statistics(0.3, 0.0);
    CHECK(!s.wr.has_value());
    CHECK(s.nb == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(*s.wo == doctest::Approx(0.65 / 0.35).epsilon(1e-15));
  }
  SUBCASE("total certainty kills the odds denominator too") {
    const WinStatistics s = win_statistics(1.0, 0.0);
    CHECK(!s.wr.has_value());
    CHECK(!s.wo.has_value());
    CHECK(s.nb == 1.0);
  }
  SUBCASE("invalid inputs") {
    CHECK_THROWS_AS(win_statistics(-0.1, 0.2), ConfigError);
    CHECK_THROWS_AS(
        win_statistics(std::numeric_limits<double>::quiet_NaN(), 0.2),
        ConfigError);
  }
}

TEST_CASE("renormalization of the probability triple") {
  SUBCASE("scales down when wins plus losses pass one") {
    double pt = 0.6, pc = 0.5, tie = 0.1;
    renormalize(pt, pc, tie);
    CHECK(pt == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(pc == doctest::Approx(0.5 / 1.2).epsilon(1e-15));
    CHECK(tie == doctest::Approx(0.1 / 1.2).epsilon(1e-15));
    CHECK(pt + pc + tie == doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("identity inside the simplex") {
    double pt = 0.3, pc = 0.2, tie = 0.5;
    renormalize(pt, pc, tie);
    CHECK(pt == 0.3);
    CHECK(pc == 0.2);
    CHECK(tie == 0.5);
  }
  SUBCASE("negative tie estimate is floored before scaling") {
    double pt = 0.8, pc = 0.4, tie = -0.1;
    renormalize(pt, pc, tie);
    CHECK(pt == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(pc == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(tie == 0.0);
  }
  SUBCASE("all zero is an error") {
    double z1 = 0.0, z2 = 0.0, z3 = 0.0;
    CHECK_THROWS_AS(renormalize(z1, z2, z3), DegenerateError);
  }
}

TEST_CASE("uncensored single-endpoint example") {
  Dataset data;
  data.n_endpoints = 1;
  data.tau = 10.0;
  data.subjects = {subject(Group::treatment, "t1", {2.0}, {1}),
                   subject(Group::treatment, "t2", {4.0}, {1}),
                   subject(Group::control, "c1", {1.0}, {1}),
                   subject(Group::control, "c2", {3.0}, {1})};
  const auto config = config_for(1, {0.0});

  const WinProbEstimate est = estimate_win_probabilities(data, config);
  CHECK(est.pi_t == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(est.pi_c == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(est.pi_tie == 0.0);
  CHECK(!est.renormalized);
  CHECK(est.n_t == 2);
  CHECK(est.n_c == 2);
  CHECK(est.t_term_sums.size() == 1);
  CHECK(est.weight_provenance == WeightProvenance::km);

  const WinStatistics s = win_statistics(est.pi_t, est.pi_c);
  CHECK(*s.wr == doctest::Approx(3.0).epsilon(1e-14));

  // No censoring records -> the weighted estimate equals the naive one.
  const WinProbEstimate naive = naive_win_probabilities(data, config);
  CHECK(naive.pi_t == est.pi_t);
  CHECK(naive.pi_c == est.pi_c);
  CHECK(naive.weight_provenance == WeightProvenance::none);
}

TEST_CASE("uncensored estimates match the direct comparison rule") {
  Rng rng(61001);
  for (int L = 1; L <= 3; ++L) {
    for (int rep = 0; rep < 12; ++rep) {
      const int nt = 3 + static_cast<int>(rng.uniform() * 8);
      const int nc = 3 + static_cast<int>(rng.uniform() * 8);
      const Dataset data = testutil::random_uncensored(rng, L, nt, nc, 10.0);

      std::vector<std::vector<double>> margin_sets;
      margin_sets.push_back(std::vector<double>(L, 0.0));
      std::vector<double> pos = {1.1, 0.8, 0.6};
      pos.resize(L);
      margin_sets.push_back(pos);

      for (const auto& zeta : margin_sets) {
        const auto config = config_for(L, zeta);
        const Fractions want = brute_force(data, zeta);
        const WinProbEstimate est = estimate_win_probabilities(data, config);
        CHECK(est.pi_t == doctest::Approx(want.t).epsilon(1e-12));
        CHECK(est.pi_c == doctest::Approx(want.c).epsilon(1e-12));
        CHECK(est.pi_tie == doctest::Approx(want.tie).epsilon(1e-12));
        // Rounding can push an exact partition one ulp past 1, tripping
        // the renormalization check; the flag must then be honest and
        // the scaling negligible.
        CHECK((!est.renormalized || est.raw_pi_t + est.raw_pi_c > 1.0));
        CHECK(est.pi_t == doctest::Approx(est.raw_pi_t).epsilon(1e-13));

        // Term sums reassemble to the raw totals in enumeration order.
        double acc = 0.0;
        for (double v : est.t_term_sums) acc += v;
        CHECK(acc == est.raw_pi_t);
        acc = 0.0;
        for (double v : est.c_term_sums) acc += v;
        CHECK(acc == est.raw_pi_c);

        // Without censoring the fall-through comparison agrees with the
        // weighted estimate; only the summation order differs.
        const WinProbEstimate naive = naive_win_probabilities(data, config);
        CHECK(naive.pi_t == doctest::Approx(est.pi_t).epsilon(1e-12));
        CHECK(naive.pi_c == doctest::Approx(est.pi_c).epsilon(1e-12));
        CHECK(naive.pi_tie == doctest::Approx(est.pi_tie).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("tie expansion carries the half coefficient") {
  Dataset data;
  data.n_endpoints = 1;
  data.tau = 10.0;
  data.subjects = {subject(Group::treatment, "t1", {3.0}, {1}),
                   subject(Group::control, "c1", {1.0}, {1}),
                   subject(Group::control, "c2", {2.5}, {1})};
  const WinProbEstimate est =
      estimate_win_probabilities(data, config_for(1, {1.0}));
  CHECK(est.pi_t == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(est.pi_c == 0.0);
  CHECK(est.pi_tie == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(est.tie_term_sums.size() == 4);
}

TEST_CASE("horizon ties fall through to later endpoints") {
  Dataset data;
  data.n_endpoints = 2;
  data.tau = 10.0;
  data.subjects = {subject(Group::treatment, "t1", {10.0, 8.0}, {1, 1}),
                   subject(Group::control, "c1", {10.0, 5.0}, {1, 1})};
  const WinProbEstimate est =
      estimate_win_probabilities(data, config_for(2, {0.0, 0.0}));
  CHECK(est.pi_t == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(est.pi_c == 0.0);
  CHECK(est.pi_tie == 0.0);

  // An exact dead heat below the horizon is final, not passed on.
  data.subjects[0].times[0] = 9.0;
  data.subjects[1].times[0] = 9.0;
  const WinProbEstimate heat =
      estimate_win_probabilities(data, config_for(2, {0.0, 0.0}));
  CHECK(heat.pi_t == 0.0);
  CHECK(heat.pi_c == 0.0);
  CHECK(heat.pi_tie == 1.0);
}

TEST_CASE("weighted estimate matches a term-by-term transcription") {
  Rng rng(61002);
  int done = 0;
  for (int attempt = 0; attempt < 60 && done < 10; ++attempt) {
    const int L = 1 + static_cast<int>(rng.uniform() * 2.0);
    const Dataset data =
        testutil::random_censored(rng, L, 6, 7, 10.0, attempt % 2 == 0);
    std::vector<double> zeta(L, attempt % 3 == 0 ? 0.0 : 0.75);
    const auto config = config_for(L, zeta);
    try {
      const WinProbEstimate est = estimate_win_probabilities(data, config);
      const Fractions want = transcribed_km(data, config);
      CHECK(est.raw_pi_t == doctest::Approx(want.t).epsilon(1e-12));
      CHECK(est.raw_pi_c == doctest::Approx(want.c).epsilon(1e-12));
      CHECK(est.raw_pi_tie == doctest::Approx(want.tie).epsilon(1e-12));
      ++done;
    } catch (const DegenerateError&) {
      // Heavy censoring draw; try the next dataset.
    }
  }
  CHECK(done == 10);
}

TEST_CASE("swapping group labels exchanges the win probabilities") {
  Rng rng(61003);
  int done = 0;
  for (int attempt = 0; attempt < 60 && done < 6; ++attempt) {
    const int L = 1 + static_cast<int>(rng.uniform() * 2.0);
    Dataset data = testutil::random_censored(rng, L, 7, 5, 10.0, true);
    std::vector<double> zeta(L, attempt % 2 == 0 ? 0.0 : 0.5);
    const auto config = config_for(L, zeta);
    try {
      const WinProbEstimate est = estimate_win_probabilities(data, config);
      Dataset flipped = data;
      for (auto& s : flipped.subjects)
        s.group = s.group == Group::treatment ? Group::control
                                              : Group::treatment;
      const WinProbEstimate mirror =
          estimate_win_probabilities(flipped, config);
      CHECK(est.pi_t == doctest::Approx(mirror.pi_c).epsilon(1e-12));
      CHECK(est.pi_c == doctest::Approx(mirror.pi_t).epsilon(1e-12));
      CHECK(est.pi_tie == doctest::Approx(mirror.pi_tie).epsilon(1e-12));
      ++done;
    } catch (const DegenerateError&) {
    }
  }
  CHECK(done == 6);
}

TEST_CASE("rescaling the time axis leaves the estimate unchanged") {
  Rng rng(61004);
  int done = 0;
  for (int attempt = 0; attempt < 40 && done < 6; ++attempt) {
    const Dataset data = testutil::random_censored(rng, 2, 6, 6, 10.0, false);
    const std::vector<double> zeta = {attempt % 2 == 0 ? 0.0 : 0.5,
                                      attempt % 2 == 0 ? 0.0 : 0.5};
    const auto config = config_for(2, zeta);
    // Power-of-two factor so every scaled time is exact.
    const double k = 4.0;
    Dataset scaled = data;
    scaled.tau *= k;
    for (auto& s : scaled.subjects)
      for (auto& x : s.times) x *= k;
    auto scaled_config = config;
    scaled_config.tau = TauSpec::fixed(scaled.tau);
    for (auto& z : scaled_config.margins) z *= k;
    try {
      const WinProbEstimate a = estimate_win_probabilities(data, config);
      const WinProbEstimate b =
          estimate_win_probabilities(scaled, scaled_config);
      CHECK(a.pi_t == b.pi_t);
      CHECK(a.pi_c == b.pi_c);
      CHECK(a.pi_tie == b.pi_tie);
      ++done;
    } catch (const DegenerateError&) {
    }
  }
  CHECK(done == 6);
}

TEST_CASE("wider margins grow ties on uncensored data") {
  Rng rng(61005);
  const Dataset data = testutil::random_uncensored(rng, 2, 25, 25, 10.0);
  const std::vector<double> grid = {1e-9, 0.25, 0.5, 1.0, 2.0, 4.0};
  double prev_t = 2.0, prev_c = 2.0, prev_tie = -1.0;
  for (double z : grid) {
    const WinProbEstimate est =
        estimate_win_probabilities(data, config_for(2, {z, z}));
    CHECK(est.pi_t <= prev_t + 1e-12);
    CHECK(est.pi_c <= prev_c + 1e-12);
    CHECK(est.pi_tie >= prev_tie - 1e-12);
    prev_t = est.pi_t;
    prev_c = est.pi_c;
    prev_tie = est.pi_tie;
  }

  // A vanishing positive margin agrees with the zero-margin regime when
  // no pairwise gap is that small.
  const WinProbEstimate zero =
      estimate_win_probabilities(data, config_for(2, {0.0, 0.0}));
  const WinProbEstimate eps =
      estimate_win_probabilities(data, config_for(2, {1e-9, 1e-9}));
  CHECK(zero.pi_t == doctest::Approx(eps.pi_t).epsilon(1e-9));
  CHECK(zero.pi_c == doctest::Approx(eps.pi_c).epsilon(1e-9));
}

TEST_CASE("unit weights lower-bound km weights and the fall-through rule") {
  // Two pointwise bounds at zero margins: km weights are >= 1, so every
  // kernel term can only grow, and the fall-through comparison accepts
  // at level l whenever the kernel does (the at-horizon continuation is
  // one way to be undecided earlier, equality anywhere is another).
  Rng rng(61006);
  int done = 0;
  for (int attempt = 0; attempt < 60 && done < 10; ++attempt) {
    const int L = 1 + static_cast<int>(rng.uniform() * 2.0);
    const Dataset data =
        testutil::random_censored(rng, L, 8, 8, 10.0, attempt % 2 == 0);
    const auto config = config_for(L, std::vector<double>(L, 0.0));
    try {
      const WinProbEstimate km = estimate_win_probabilities(data, config);
      const WinProbEstimate unit = estimate_with_weight_provider(
          data, config, *make_unit_provider());
      const WinProbEstimate naive = naive_win_probabilities(data, config);
      CHECK(unit.raw_pi_t <= km.raw_pi_t + 1e-12);
      CHECK(unit.raw_pi_c <= km.raw_pi_c + 1e-12);
      CHECK(unit.raw_pi_t <= naive.raw_pi_t + 1e-12);
      CHECK(unit.raw_pi_c <= naive.raw_pi_c + 1e-12);
      ++done;
    } catch (const DegenerateError&) {
    }
  }
  CHECK(done == 10);
}

TEST_CASE("constant-one survival curves reproduce unit weights bit for bit") {
  Rng rng(61007);
  const Dataset data = testutil::random_censored(rng, 2, 6, 6, 10.0, true);
  const auto config = config_for(2, {0.5, 0.5});
  const auto one = [](double) { return 1.0; };
  const WinProbEstimate truth = estimate_with_weight_provider(
      data, config, *make_true_common_provider(one, one));
  const WinProbEstimate unit = estimate_with_weight_provider(
      data, config, *make_unit_provider());
  CHECK(truth.pi_t == unit.pi_t);
  CHECK(truth.pi_c == unit.pi_c);
  CHECK(truth.pi_tie == unit.pi_tie);
  CHECK(truth.weight_provenance == WeightProvenance::true_common);
}

TEST_CASE("uncensored positive margins collapse to the fall-through rule") {
  // With every event observed the shifted-comparison expansion
  // telescopes level by level into the fall-through comparison, up to
  // pairs landing exactly on a margin boundary (absent in continuous
  // draws). Censored data break the identity: the expansion demands
  // observed events on every higher-priority endpoint of the weighted
  // subject, while the fall-through rule can pass an undecidable level.
  Rng rng(61012);
  for (int rep = 0; rep < 8; ++rep) {
    const int L = 1 + rep % 3;
    const Dataset data = testutil::random_uncensored(rng, L, 7, 6, 10.0);
    std::vector<double> zeta = {0.9, 0.6, 0.4};
    zeta.resize(L);
    const auto config = config_for(L, zeta);
    const WinProbEstimate unit = estimate_with_weight_provider(
        data, config, *make_unit_provider());
    const WinProbEstimate naive = naive_win_probabilities(data, config);
    CHECK(naive.pi_t == doctest::Approx(unit.pi_t).epsilon(1e-13));
    CHECK(naive.pi_c == doctest::Approx(unit.pi_c).epsilon(1e-13));
  }
}

TEST_CASE("known continuous weights match a hand transcription") {
  Dataset data;
  data.n_endpoints = 1;
  data.tau = 10.0;
  data.subjects = {subject(Group::treatment, "t1", {2.0}, {1}),
                   subject(Group::treatment, "t2", {4.0}, {1}),
                   subject(Group::treatment, "t3", {5.0}, {0}),
                   subject(Group::control, "c1", {1.0}, {1}),
                   subject(Group::control, "c2", {3.0}, {1}),
                   subject(Group::control, "c3", {6.0}, {0})};
  const auto surv = [](double s) { return std::exp(-0.1 * s); };
  const WinProbEstimate est = estimate_with_weight_provider(
      data, config_for(1, {0.0}), *make_true_common_provider(surv, surv));
  // Treatment wins observed at control event times 1 (three winners) and
  // 3 (two winners); control wins at treatment event times 2 (two) and 4
  // (one); each inverse weight is exp(0.2 * time).
  const double want_t = (3.0 * std::exp(0.2) + 2.0 * std::exp(0.6)) / 9.0;
  const double want_c = (2.0 * std::exp(0.4) + 1.0 * std::exp(0.8)) / 9.0;
  // Six subjects is small enough for the raw total to pass 1, so the
  // reported values are renormalized; the transcription is raw.
  CHECK(est.raw_pi_t == doctest::Approx(want_t).epsilon(1e-14));
  CHECK(est.raw_pi_c == doctest::Approx(want_c).epsilon(1e-14));
  CHECK(est.renormalized);
  CHECK(est.pi_t ==
        doctest::Approx(want_t / (want_t + want_c)).epsilon(1e-13));
}

TEST_CASE("joint-survival provider follows the per-endpoint argument rule") {
  Dataset data;
  data.n_endpoints = 2;
  data.tau = 10.0;
  data.subjects = {subject(Group::treatment, "t1", {10.0, 7.0}, {1, 1}),
                   subject(Group::treatment, "t2", {6.0, 3.0}, {1, 0}),
                   subject(Group::treatment, "t3", {10.0, 9.0}, {1, 1}),
                   subject(Group::control, "c1", {4.0, 2.0}, {1, 1}),
                   subject(Group::control, "c2", {10.0, 5.0}, {1, 1}),
                   subject(Group::control, "c3", {8.0, 8.0}, {0, 0})};
  const auto jt = [](double a, double b) {
    return 1.0 / ((1.0 + 0.10 * a) * (1.0 + 0.07 * b));
  };
  const auto jc = [](double a, double b) {
    return 1.0 / ((1.0 + 0.05 * a) * (1.0 + 0.09 * b));
  };
  const WinProbEstimate est = estimate_with_weight_provider(
      data, config_for(2, {0.0, 0.0}), *make_true_joint_provider(jt, jc));

  // Literal two-term transcription. First priority weights evaluate at
  // (x1, 0); the second-priority term pins endpoint 1 at the horizon.
  const double tau = 10.0;
  double want_t = 0.0, want_c = 0.0;
  for (const auto& t : data.subjects) {
    if (t.group != Group::treatment) continue;
    for (const auto& c : data.subjects) {
      if (c.group != Group::control) continue;
      if (c.events[0] == 1 && t.times[0] > c.times[0])
        want_t += 1.0 / (jt(c.times[0], 0.0) * jc(c.times[0], 0.0));
      else if (t.times[0] == tau && c.times[0] == tau && c.events[1] == 1 &&
               t.times[1] > c.times[1])
        want_t += 1.0 / (jt(tau, c.times[1]) * jc(tau, c.times[1]));
      if (t.events[0] == 1 && c.times[0] > t.times[0])
        want_c += 1.0 / (jt(t.times[0], 0.0) * jc(t.times[0], 0.0));
      else if (t.times[0] == tau && c.times[0] == tau && t.events[1] == 1 &&
               c.times[1] > t.times[1])
        want_c += 1.0 / (jt(tau, t.times[1]) * jc(tau, t.times[1]));
    }
  }
  want_t /= 9.0;
  want_c /= 9.0;
  CHECK(est.raw_pi_t == doctest::Approx(want_t).epsilon(1e-14));
  CHECK(est.raw_pi_c == doctest::Approx(want_c).epsilon(1e-14));

  // Two endpoints only.
  Dataset three;
  three.n_endpoints = 3;
  three.tau = 10.0;
  three.subjects = {
      subject(Group::treatment, "t1", {1.0, 1.0, 1.0}, {1, 1, 1}),
      subject(Group::control, "c1", {2.0, 2.0, 2.0}, {1, 1, 1})};
  CHECK_THROWS_AS(
      estimate_with_weight_provider(three, config_for(3, {0.0, 0.0, 0.0}),
                                    *make_true_joint_provider(jt, jc)),
      ConfigError);
}

TEST_CASE("renormalization triggers when inflated weights break the simplex") {
  Rng rng(61008);
  const Dataset data = testutil::random_uncensored(rng, 1, 6, 6, 10.0);
  const auto flat = [](double) { return 0.2; };
  auto config = config_for(1, {0.0});

  const WinProbEstimate est = estimate_with_weight_provider(
      data, config, *make_true_common_provider(flat, flat));
  CHECK(est.renormalized);
  CHECK(est.raw_pi_t + est.raw_pi_c > 1.0);
  CHECK(est.pi_t + est.pi_c + est.pi_tie == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(est.pi_t / est.pi_c ==
        doctest::Approx(est.raw_pi_t / est.raw_pi_c).epsilon(1e-12));

  config.renormalize = false;
  const WinProbEstimate raw = estimate_with_weight_provider(
      data, config, *make_true_common_provider(flat, flat));
  CHECK(!raw.renormalized);
  CHECK(raw.pi_t == raw.raw_pi_t);
  CHECK(raw.pi_t > 1.0);
}

TEST_CASE("weights are only demanded where an indicator is active") {
  const auto cliff = [](double s) { return s > 5.0 ? 1e-30 : 1.0; };
  Dataset data;
  data.n_endpoints = 1;
  data.tau = 10.0;
  data.subjects = {subject(Group::treatment, "t1", {4.0}, {1}),
                   subject(Group::control, "c1", {6.0}, {1}),
                   subject(Group::control, "c2", {1.0}, {1})};
  // c1's weight is degenerate but nobody beats c1, so it is never used.
  const WinProbEstimate est = estimate_with_weight_provider(
      data, config_for(1, {0.0}), *make_true_common_provider(cliff, cliff));
  CHECK(est.pi_t == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(est.pi_c == doctest::Approx(0.5).epsilon(1e-14));

  // Push the treatment time past c1 and the degenerate weight is needed.
  data.subjects[0].times[0] = 7.0;
  try {
    estimate_with_weight_provider(data, config_for(1, {0.0}),
                                  *make_true_common_provider(cliff, cliff));
    CHECK(false);
  } catch (const DegenerateError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("t1") != std::string::npos);
    CHECK(msg.find("c1") != std::string::npos);
  }
}

TEST_CASE("estimates are bit-identical across worker counts") {
  Rng rng(61009);
  const Dataset data = testutil::random_censored(rng, 2, 10, 9, 10.0, true);
  const auto config = config_for(2, {0.5, 0.5});
  set_thread_count(1);
  WinProbEstimate serial;
  bool degenerate = false;
  try {
    serial = estimate_win_probabilities(data, config);
  } catch (const DegenerateError&) {
    degenerate = true;
  }
  set_thread_count(3);
  if (!degenerate) {
    const WinProbEstimate threaded = estimate_win_probabilities(data, config);
    CHECK(serial.pi_t == threaded.pi_t);
    CHECK(serial.pi_c == threaded.pi_c);
    CHECK(serial.pi_tie == threaded.pi_tie);
  }
  set_thread_count(0);
  CHECK(!degenerate);
}

TEST_CASE("estimator configuration errors") {
  Dataset data;
  data.n_endpoints = 2;
  data.tau = 10.0;
  data.subjects = {subject(Group::treatment, "t1", {1.0, 1.0}, {1, 1}),
                   subject(Group::control, "c1", {2.0, 2.0}, {1, 1})};
  CHECK_THROWS_AS(estimate_win_probabilities(data, config_for(1, {0.0})),
                  ConfigError);
  CHECK_THROWS_AS(
      estimate_win_probabilities(data, config_for(2, {0.0, -1.0})),
      ConfigError);
  CHECK_THROWS_AS(estimate_win_probabilities(data, config_for(2, {0.0, 1.0})),
                  ConfigError);

  Dataset no_tau = data;
  no_tau.tau = 0.0;
  CHECK_THROWS_AS(
      estimate_win_probabilities(no_tau, config_for(2, {0.0, 0.0})),
      ConfigError);
}
