#pragma once

#include <utility>
#include <vector>

#include "winstat/types.hpp"

// Dataset construction and preparation: horizon truncation, censoring
// record derivation, induced common censoring, automatic horizon
// selection, and CSV ingestion.

namespace winstat {

// Applies horizon truncation and censoring to latent event times:
// X_l = min(T_l, tau, C), delta_l = I(min(T_l, tau) <= C). Truncation at
// tau counts as an observed event, so a time that reaches the horizon is
// stored as exactly tau with delta 1. Pass censor_time = +infinity for an
// uncensored subject.
std::pair<std::vector<double>, std::vector<unsigned char>> apply_horizon(
    const std::vector<double>& event_times, double censor_time, double tau);

// Re-truncates already-observed data at a (possibly smaller) horizon:
// any X_l >= tau becomes exactly tau with delta 1. Idempotent.
Dataset truncate_at_horizon(const Dataset& data, double tau);

// (X~, delta_c): the subject's maximum observed time and whether it is a
// censoring time. A censored endpoint forces X_l = C, and C bounds every
// other observed time, so delta_c = I(min_l delta_l = 0).
CensoringRecord derive_censoring_record(const SubjectRecord& subject);

// Censoring records for one group, in subject order.
std::vector<CensoringRecord> censoring_records(const Dataset& data, Group g);

// Automatic horizon: per group, the smallest t where the censoring
// survival curve is <= quantile; returns the minimum over groups.
// Throws DegenerateError naming the group if a curve never falls that low
// (for example when the group has no censoring events).
double select_tau_auto(const Dataset& data, double quantile);

// Resolves a TauSpec against the data (fixed value, or the auto rule).
double resolve_tau(const Dataset& data, const TauSpec& tau);

// Replaces per-endpoint censoring with the single time C* = min_l C_l,
// recomputing every endpoint's observed time and indicator. Requires
// censor_times on every subject. Never increases any X_l and never turns
// an indicator from 0 to 1.
Dataset induce_common_censoring(const Dataset& data);

// Subject-level variant from latent event times, per-endpoint censoring
// times, and the horizon: equivalent to apply_horizon with C* = min_l C_l.
std::pair<std::vector<double>, std::vector<unsigned char>>
induce_common_censoring_latent(const std::vector<double>& event_times,
                               const std::vector<double>& censor_times,
                               double tau);

// CSV input with header id,group,x1,...,xL,d1,...,dL and optional
// c1,...,cL columns; group is "t" or "c". Malformed rows raise DataError
// naming the row number. The returned dataset is untruncated (tau = 0);
// run resolve_tau and truncate_at_horizon before analysis.
Dataset read_dataset_csv(const std::string& path);

void write_dataset_csv(const std::string& path, const Dataset& data);

}  // namespace winstat
