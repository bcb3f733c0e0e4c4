#include "winstat/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "winstat/normal.hpp"

namespace winstat {

FirstEventRecord time_to_first_event(const SubjectRecord& subject) {
  if (subject.times.empty()) throw DataError("subject has no endpoints");
  FirstEventRecord r{subject.times[0], subject.events[0] != 0};
  for (std::size_t l = 1; l < subject.times.size(); ++l) {
    if (subject.times[l] < r.time) {
      r.time = subject.times[l];
      r.event = subject.events[l] != 0;
    } else if (subject.times[l] == r.time) {
      r.event = r.event || subject.events[l] != 0;
    }
  }
  return r;
}

LogrankResult logrank_test(const Dataset& data) {
  validate_dataset(data);
  struct Obs {
    double x;
    bool event;
    bool treat;
  };
  std::vector<Obs> obs;
  obs.reserve(data.subjects.size());
  std::size_t at_risk_t = 0, at_risk_c = 0;
  for (const auto& s : data.subjects) {
    const FirstEventRecord fe = time_to_first_event(s);
    const bool treat = s.group == Group::treatment;
    obs.push_back({fe.time, fe.event, treat});
    (treat ? at_risk_t : at_risk_c) += 1;
  }
  std::sort(obs.begin(), obs.end(), [](const Obs& a, const Obs& b) {
    return a.x < b.x;
  });

  double u = 0.0, v = 0.0;
  std::size_t i = 0;
  while (i < obs.size()) {
    const double t = obs[i].x;
    std::size_t d = 0, d_t = 0, gone_t = 0, gone_c = 0;
    std::size_t j = i;
    for (; j < obs.size() && obs[j].x == t; ++j) {
      if (obs[j].event) {
        ++d;
        if (obs[j].treat) ++d_t;
      }
      (obs[j].treat ? gone_t : gone_c) += 1;
    }
    const double n = static_cast<double>(at_risk_t + at_risk_c);
    if (d > 0 && n > 0.0) {
      const double frac_t = static_cast<double>(at_risk_t) / n;
      u += static_cast<double>(d_t) - static_cast<double>(d) * frac_t;
      if (n > 1.0)
        v += static_cast<double>(d) * frac_t * (1.0 - frac_t) *
             (n - static_cast<double>(d)) / (n - 1.0);
    }
    at_risk_t -= gone_t;
    at_risk_c -= gone_c;
    i = j;
  }

  if (!(v > 0.0))
    throw DegenerateError("log-rank variance is zero; no usable events");
  LogrankResult r;
  r.chi2 = u * u / v;
  r.z = -u / std::sqrt(v);
  r.p_two_sided = 2.0 * norm_cdf_upper(std::fabs(r.z));
  r.p_one_sided = norm_cdf_upper(r.z);
  return r;
}

}  // namespace winstat
