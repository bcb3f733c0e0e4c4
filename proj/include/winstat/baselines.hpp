#pragma once

#include "winstat/types.hpp"

// Conventional comparators used alongside the win statistics: the
// first-event collapse of prioritized endpoints and the two-sample
// log-rank test on those collapsed times.

namespace winstat {

struct FirstEventRecord {
  double time = 0.0;
  bool event = false;
};

// Earliest observed time across endpoints; when several endpoints share
// the minimum, an observed event takes precedence over a censoring.
FirstEventRecord time_to_first_event(const SubjectRecord& subject);

struct LogrankResult {
  double chi2 = 0.0;
  double z = 0.0;  // positive favors treatment (fewer events than expected)
  double p_two_sided = 1.0;
  double p_one_sided = 0.5;
};

// Standard log-rank on first-event times with the hypergeometric
// variance at ties. Horizon reachers carry an event at tau by
// construction; those terms self-cancel, matching censoring at tau.
LogrankResult logrank_test(const Dataset& data);

}  // namespace winstat
