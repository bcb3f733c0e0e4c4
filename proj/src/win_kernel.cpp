#include "winstat/win_kernel.hpp"

#include <algorithm>
#include <string>

namespace winstat {

namespace {

void check_margin_count(int n_endpoints, const std::vector<double>& margins) {
  if (static_cast<int>(margins.size()) != n_endpoints)
    throw ConfigError("margins must list exactly one value per endpoint");
}

}  // namespace

std::vector<KernelTerm> enumerate_win_terms(int n_endpoints,
                                            const std::vector<double>& margins,
                                            MarginMode mode,
                                            TermDirection direction) {
  if (direction == TermDirection::tie)
    throw ConfigError("win-term enumeration needs a t_wins or c_wins direction");
  check_margin_count(n_endpoints, margins);
  if (classify_margins(margins) != mode)
    throw ConfigError("margin mode does not match the margin values");

  const Group weighted =
      direction == TermDirection::t_wins ? Group::control : Group::treatment;
  std::vector<KernelTerm> terms;

  if (mode == MarginMode::zero) {
    for (int l = 1; l <= n_endpoints; ++l) {
      KernelTerm term;
      term.sign = 1;
      term.direction = direction;
      term.weighted = weighted;
      term.priority = l;
      term.comparisons.push_back({l - 1, 0.0, ComparisonKind::strict_greater});
      for (int k = 0; k < l - 1; ++k)
        term.comparisons.push_back({k, 0.0, ComparisonKind::equals_tau});
      term.delta_mask.push_back(l - 1);
      terms.push_back(std::move(term));
    }
    return terms;
  }

  // Positive margins: for priority l, expand over the 2^(l-1) tie-shift
  // sign vectors of the lower-priority endpoints. The winning endpoint's
  // shift is +zeta_l; the sign is (-1)^(l+1) times the product of the
  // lower-priority shift signs.
  for (int l = 1; l <= n_endpoints; ++l) {
    const unsigned n_shift = 1u << (l - 1);
    for (unsigned b = 0; b < n_shift; ++b) {
      KernelTerm term;
      term.direction = direction;
      term.weighted = weighted;
      term.priority = l;
      term.comparisons.push_back({l - 1, margins[l - 1], ComparisonKind::strict_greater});
      int neg = 0;
      for (int k = 0; k < l - 1; ++k) {
        const bool plus = (b >> k) & 1u;
        if (!plus) ++neg;
        term.comparisons.push_back(
            {k, plus ? margins[k] : -margins[k], ComparisonKind::strict_greater});
      }
      const int l_sign = l % 2 == 1 ? 1 : -1;
      term.sign = l_sign * (neg % 2 == 0 ? 1 : -1);
      for (int k = 0; k < l; ++k) term.delta_mask.push_back(k);
      terms.push_back(std::move(term));
    }
  }
  return terms;
}

std::vector<KernelTerm> enumerate_tie_terms(int n_endpoints,
                                            const std::vector<double>& margins) {
  check_margin_count(n_endpoints, margins);
  if (classify_margins(margins) != MarginMode::positive)
    throw ConfigError("tie terms exist only for strictly positive margins");

  std::vector<KernelTerm> terms;
  for (Group weighted : {Group::control, Group::treatment}) {
    const unsigned n_shift = 1u << n_endpoints;
    for (unsigned b = 0; b < n_shift; ++b) {
      KernelTerm term;
      term.direction = TermDirection::tie;
      term.weighted = weighted;
      term.priority = 0;
      int plus_count = 0;
      for (int k = 0; k < n_endpoints; ++k) {
        const bool plus = (b >> k) & 1u;
        if (plus) ++plus_count;
        term.comparisons.push_back(
            {k, plus ? margins[k] : -margins[k], ComparisonKind::strict_greater});
        term.delta_mask.push_back(k);
      }
      term.sign = plus_count % 2 == 0 ? 1 : -1;
      terms.push_back(std::move(term));
    }
  }
  return terms;
}

int term_indicator(const KernelTerm& term, const SubjectRecord& treat,
                   const SubjectRecord& ctrl, double tau) {
  const SubjectRecord& winner =
      term.weighted == Group::control ? treat : ctrl;
  const SubjectRecord& weighted =
      term.weighted == Group::control ? ctrl : treat;
  for (const TermComparison& c : term.comparisons) {
    if (c.kind == ComparisonKind::strict_greater) {
      if (!(winner.times[c.endpoint] > weighted.times[c.endpoint] + c.shift))
        return 0;
    } else {
      if (winner.times[c.endpoint] != tau || weighted.times[c.endpoint] != tau)
        return 0;
    }
  }
  for (int k : term.delta_mask)
    if (!weighted.events[k]) return 0;
  return term.sign;
}

WeightArgs term_weight_args(const KernelTerm& term,
                            const SubjectRecord& weighted_subject, double tau) {
  WeightArgs args;
  bool first = true;
  for (const TermComparison& c : term.comparisons) {
    double opp, own;
    if (c.kind == ComparisonKind::equals_tau) {
      opp = tau;
      own = tau;
    } else {
      opp = weighted_subject.times[c.endpoint] + c.shift;
      own = weighted_subject.times[c.endpoint];
    }
    if (first) {
      args.opp = opp;
      args.own = own;
      first = false;
    } else {
      args.opp = std::max(args.opp, opp);
      args.own = std::max(args.own, own);
    }
  }
  return args;
}

void term_weight_args_per_endpoint(const KernelTerm& term,
                                   const SubjectRecord& weighted_subject,
                                   double tau, std::vector<double>& opp,
                                   std::vector<double>& own) {
  opp.assign(weighted_subject.times.size(), 0.0);
  own.assign(weighted_subject.times.size(), 0.0);
  for (const TermComparison& c : term.comparisons) {
    if (c.kind == ComparisonKind::equals_tau) {
      opp[c.endpoint] = tau;
      own[c.endpoint] = tau;
    } else {
      opp[c.endpoint] = weighted_subject.times[c.endpoint] + c.shift;
      own[c.endpoint] = weighted_subject.times[c.endpoint];
    }
  }
}

double eval_term(const KernelTerm& term, const SubjectRecord& treat,
                 const SubjectRecord& ctrl, const StepSurvival& g_treat,
                 const StepSurvival& g_ctrl, double tau) {
  const int ind = term_indicator(term, treat, ctrl, tau);
  if (ind == 0) return 0.0;
  const SubjectRecord& weighted =
      term.weighted == Group::control ? ctrl : treat;
  const WeightArgs args = term_weight_args(term, weighted, tau);
  double w_treat, w_ctrl;
  if (term.weighted == Group::control) {
    w_treat = survival_at(g_treat, args.opp, SurvivalSide::right);
    w_ctrl = survival_at(g_ctrl, args.own, SurvivalSide::left);
  } else {
    w_treat = survival_at(g_treat, args.own, SurvivalSide::left);
    w_ctrl = survival_at(g_ctrl, args.opp, SurvivalSide::right);
  }
  const double w = w_treat * w_ctrl;
  if (w <= kWeightFloor)
    throw DegenerateError(
        "degenerate IPCW weight (" + std::to_string(w) + ") for pair (" +
        (treat.id.empty() ? "t?" : treat.id) + ", " +
        (ctrl.id.empty() ? "c?" : ctrl.id) +
        "); the censoring positivity condition looks violated");
  return static_cast<double>(ind) / w;
}

}  // namespace winstat
