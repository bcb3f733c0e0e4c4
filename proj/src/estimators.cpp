#include "winstat/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>

#include "winstat/censoring_km.hpp"
#include "winstat/data_model.hpp"
#include "winstat/parallel.hpp"

namespace winstat {

namespace {

double clamp_time(double s) { return s < 0.0 ? 0.0 : s; }

class KmProvider final : public WeightProvider {
 public:
  explicit KmProvider(const Dataset& data)
      : g_treat_(fit_censoring_survival(
            censoring_records(data, Group::treatment))),
        g_ctrl_(fit_censoring_survival(
            censoring_records(data, Group::control))) {}

  WeightProvenance provenance() const override { return WeightProvenance::km; }

  double pair_weight(const KernelTerm& term, const SubjectRecord& subject,
                     double tau) const override {
    const WeightArgs args = term_weight_args(term, subject, tau);
    if (term.weighted == Group::control)
      return survival_at(g_treat_, args.opp, SurvivalSide::right) *
             survival_at(g_ctrl_, args.own, SurvivalSide::left);
    return survival_at(g_treat_, args.own, SurvivalSide::left) *
           survival_at(g_ctrl_, args.opp, SurvivalSide::right);
  }

 private:
  StepSurvival g_treat_;
  StepSurvival g_ctrl_;
};

class UnitProvider final : public WeightProvider {
 public:
  WeightProvenance provenance() const override {
    return WeightProvenance::unit;
  }
  double pair_weight(const KernelTerm&, const SubjectRecord&,
                     double) const override {
    return 1.0;
  }
};

class TrueCommonProvider final : public WeightProvider {
 public:
  TrueCommonProvider(std::function<double(double)> st,
                     std::function<double(double)> sc)
      : surv_treat_(std::move(st)), surv_ctrl_(std::move(sc)) {}

  WeightProvenance provenance() const override {
    return WeightProvenance::true_common;
  }

  // A continuous survival function has equal left and right limits, so
  // one callable serves both evaluation sides.
  double pair_weight(const KernelTerm& term, const SubjectRecord& subject,
                     double tau) const override {
    const WeightArgs args = term_weight_args(term, subject, tau);
    const double opp = clamp_time(args.opp);
    const double own = clamp_time(args.own);
    if (term.weighted == Group::control)
      return surv_treat_(opp) * surv_ctrl_(own);
    return surv_treat_(own) * surv_ctrl_(opp);
  }

 private:
  std::function<double(double)> surv_treat_;
  std::function<double(double)> surv_ctrl_;
};

class TrueJointProvider final : public WeightProvider {
 public:
  TrueJointProvider(std::function<double(double, double)> jt,
                    std::function<double(double, double)> jc)
      : joint_treat_(std::move(jt)), joint_ctrl_(std::move(jc)) {}

  WeightProvenance provenance() const override {
    return WeightProvenance::true_joint;
  }

  double pair_weight(const KernelTerm& term, const SubjectRecord& subject,
                     double tau) const override {
    term_weight_args_per_endpoint(term, subject, tau, opp_, own_);
    const auto& opp_fn =
        term.weighted == Group::control ? joint_treat_ : joint_ctrl_;
    const auto& own_fn =
        term.weighted == Group::control ? joint_ctrl_ : joint_treat_;
    return opp_fn(clamp_time(opp_[0]), clamp_time(opp_[1])) *
           own_fn(clamp_time(own_[0]), clamp_time(own_[1]));
  }

 private:
  std::function<double(double, double)> joint_treat_;
  std::function<double(double, double)> joint_ctrl_;
  // pair_weight is only called from the sequential precompute pass, so
  // reusable scratch is safe.
  mutable std::vector<double> opp_;
  mutable std::vector<double> own_;
};

constexpr std::size_t kNoPair = std::numeric_limits<std::size_t>::max();

// Mean over all (i, j) pairs of the signed, weighted kernel value for
// one term. Weights depend only on the weighted subject, so they are
// inverted once per subject; the positivity floor is enforced only for
// pairs whose indicator is active.
double term_mean(const KernelTerm& term,
                 const std::vector<const SubjectRecord*>& ts,
                 const std::vector<const SubjectRecord*>& cs, double tau,
                 const WeightProvider& provider) {
  const bool weight_on_ctrl = term.weighted == Group::control;
  const auto& weighted = weight_on_ctrl ? cs : ts;
  std::vector<double> inv_w(weighted.size(), 0.0);
  std::vector<unsigned char> bad(weighted.size(), 0);
  for (std::size_t k = 0; k < weighted.size(); ++k) {
    const double w = provider.pair_weight(term, *weighted[k], tau);
    if (w > kWeightFloor)
      inv_w[k] = 1.0 / w;
    else
      bad[k] = 1;
  }

  std::vector<double> row(ts.size(), 0.0);
  std::vector<std::size_t> bad_col(ts.size(), kNoPair);
  parallel_for(ts.size(), [&](std::size_t i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < cs.size(); ++j) {
      const int ind = term_indicator(term, *ts[i], *cs[j], tau);
      if (ind == 0) continue;
      const std::size_t widx = weight_on_ctrl ? j : i;
      if (bad[widx]) {
        if (bad_col[i] == kNoPair) bad_col[i] = j;
        continue;
      }
      acc += static_cast<double>(ind) * inv_w[widx];
    }
    row[i] = acc;
  });

  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (bad_col[i] == kNoPair) continue;
    const std::size_t j = bad_col[i];
    const auto& subject = *(weight_on_ctrl ? cs[j] : ts[i]);
    const double w = provider.pair_weight(term, subject, tau);
    throw DegenerateError(
        "degenerate IPCW weight (" + std::to_string(w) + ") for pair (" +
        (ts[i]->id.empty() ? "t?" : ts[i]->id) + ", " +
        (cs[j]->id.empty() ? "c?" : cs[j]->id) +
        "); the censoring positivity condition looks violated");
  }
  return tree_sum(row.data(), row.size()) /
         (static_cast<double>(ts.size()) * static_cast<double>(cs.size()));
}

}  // namespace

std::unique_ptr<WeightProvider> make_km_provider(const Dataset& data) {
  return std::make_unique<KmProvider>(data);
}

std::unique_ptr<WeightProvider> make_unit_provider() {
  return std::make_unique<UnitProvider>();
}

std::unique_ptr<WeightProvider> make_true_common_provider(
    std::function<double(double)> surv_treat,
    std::function<double(double)> surv_ctrl) {
  return std::make_unique<TrueCommonProvider>(std::move(surv_treat),
                                              std::move(surv_ctrl));
}

std::unique_ptr<WeightProvider> make_true_joint_provider(
    std::function<double(double, double)> joint_treat,
    std::function<double(double, double)> joint_ctrl) {
  return std::make_unique<TrueJointProvider>(std::move(joint_treat),
                                             std::move(joint_ctrl));
}

void renormalize(double& pi_t, double& pi_c, double& pi_tie) {
  if (pi_t == 0.0 && pi_c == 0.0 && pi_tie == 0.0)
    throw DegenerateError(
        "all win probabilities are zero; nothing to renormalize");
  if (pi_t + pi_c <= 1.0) return;
  // A negative tie estimate (possible under positive margins in small
  // samples) is floored before entering the total.
  if (pi_tie < 0.0) pi_tie = 0.0;
  const double total = pi_t + pi_c + pi_tie;
  pi_t /= total;
  pi_c /= total;
  pi_tie /= total;
}

WinStatistics win_statistics(double pi_t, double pi_c) {
  if (!std::isfinite(pi_t) || !std::isfinite(pi_c) || pi_t < 0.0 ||
      pi_c < 0.0)
    throw ConfigError("win probabilities must be finite and nonnegative");
  WinStatistics s;
  s.nb = pi_t - pi_c;
  if (pi_c > 0.0) s.wr = pi_t / pi_c;
  const double half_tie = 0.5 * (1.0 - pi_t - pi_c);
  const double den = pi_c + half_tie;
  if (den > 0.0) s.wo = (pi_t + half_tie) / den;
  return s;
}

WinProbEstimate estimate_with_weight_provider(const Dataset& data,
                                              const AnalysisConfig& config,
                                              const WeightProvider& provider) {
  validate_config(config);
  validate_dataset(data);
  if (config.n_endpoints != data.n_endpoints)
    throw ConfigError("config covers " + std::to_string(config.n_endpoints) +
                      " endpoints but the dataset has " +
                      std::to_string(data.n_endpoints));
  if (!(data.tau > 0.0))
    throw ConfigError("dataset has no resolved horizon; truncate it first");
  if (config.tau.kind == TauSpec::Kind::fixed && config.tau.value != data.tau)
    throw ConfigError("config horizon " + std::to_string(config.tau.value) +
                      " does not match the dataset horizon " +
                      std::to_string(data.tau));
  if (provider.provenance() == WeightProvenance::true_joint &&
      data.n_endpoints != 2)
    throw ConfigError(
        "joint-survival weights are supported for exactly 2 endpoints");
  const MarginMode mode = classify_margins(config.margins);

  std::vector<const SubjectRecord*> ts;
  std::vector<const SubjectRecord*> cs;
  for (const auto& s : data.subjects)
    (s.group == Group::treatment ? ts : cs).push_back(&s);

  WinProbEstimate out;
  out.weight_provenance = provider.provenance();
  out.n_t = ts.size();
  out.n_c = cs.size();

  for (const auto& term : enumerate_win_terms(data.n_endpoints, config.margins,
                                              mode, TermDirection::t_wins))
    out.t_term_sums.push_back(term_mean(term, ts, cs, data.tau, provider));
  for (const auto& term : enumerate_win_terms(data.n_endpoints, config.margins,
                                              mode, TermDirection::c_wins))
    out.c_term_sums.push_back(term_mean(term, ts, cs, data.tau, provider));

  double pt = 0.0;
  for (double v : out.t_term_sums) pt += v;
  double pc = 0.0;
  for (double v : out.c_term_sums) pc += v;

  double tie = 0.0;
  if (mode == MarginMode::positive) {
    for (const auto& term :
         enumerate_tie_terms(data.n_endpoints, config.margins))
      out.tie_term_sums.push_back(term_mean(term, ts, cs, data.tau, provider));
    double s = 0.0;
    for (double v : out.tie_term_sums) s += v;
    tie = 0.5 * s;
  } else {
    tie = std::max(0.0, 1.0 - pt - pc);
  }

  out.raw_pi_t = pt;
  out.raw_pi_c = pc;
  out.raw_pi_tie = tie;
  out.pi_t = pt;
  out.pi_c = pc;
  out.pi_tie = tie;
  if (config.renormalize && pt + pc > 1.0) {
    renormalize(out.pi_t, out.pi_c, out.pi_tie);
    out.renormalized = true;
  }
  return out;
}

WinProbEstimate estimate_win_probabilities(const Dataset& data,
                                           const AnalysisConfig& config) {
  return estimate_with_weight_provider(data, config, *make_km_provider(data));
}

int compare_observed_pair(const SubjectRecord& t, const SubjectRecord& c,
                          const std::vector<double>& margins) {
  const std::size_t L = t.times.size();
  if (c.times.size() != L || margins.size() != L)
    throw ConfigError("pair comparison needs matching endpoint counts");
  for (std::size_t l = 0; l < L; ++l) {
    if (t.times[l] > c.times[l] + margins[l] && c.events[l]) return 1;
    if (c.times[l] > t.times[l] + margins[l] && t.events[l]) return -1;
  }
  return 0;
}

WinProbEstimate naive_win_probabilities(const Dataset& data,
                                        const AnalysisConfig& config) {
  validate_config(config);
  validate_dataset(data);
  if (config.n_endpoints != data.n_endpoints)
    throw ConfigError("config covers " + std::to_string(config.n_endpoints) +
                      " endpoints but the dataset has " +
                      std::to_string(data.n_endpoints));
  if (!(data.tau > 0.0))
    throw ConfigError("dataset has no resolved horizon; truncate it first");
  if (config.tau.kind == TauSpec::Kind::fixed && config.tau.value != data.tau)
    throw ConfigError("config horizon " + std::to_string(config.tau.value) +
                      " does not match the dataset horizon " +
                      std::to_string(data.tau));

  std::vector<const SubjectRecord*> ts;
  std::vector<const SubjectRecord*> cs;
  for (const auto& s : data.subjects)
    (s.group == Group::treatment ? ts : cs).push_back(&s);

  std::size_t wins = 0, losses = 0;
  for (const SubjectRecord* t : ts)
    for (const SubjectRecord* c : cs) {
      const int v = compare_observed_pair(*t, *c, config.margins);
      if (v > 0)
        ++wins;
      else if (v < 0)
        ++losses;
    }

  const double pairs =
      static_cast<double>(ts.size()) * static_cast<double>(cs.size());
  WinProbEstimate out;
  out.weight_provenance = WeightProvenance::none;
  out.n_t = ts.size();
  out.n_c = cs.size();
  out.pi_t = static_cast<double>(wins) / pairs;
  out.pi_c = static_cast<double>(losses) / pairs;
  out.pi_tie = static_cast<double>(ts.size() * cs.size() - wins - losses) /
               pairs;
  out.raw_pi_t = out.pi_t;
  out.raw_pi_c = out.pi_c;
  out.raw_pi_tie = out.pi_tie;
  return out;
}

}  // namespace winstat
