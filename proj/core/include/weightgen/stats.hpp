#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace weightgen {

struct SummaryStats {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation
  double median = 0.0;
  double ci_low = 0.0;   // bootstrap 95% CI of the median
  double ci_high = 0.0;
};

double mean_of(std::span<const double> values);
double median_of(std::span<const double> values);

/// Mean/std/median plus a seeded percentile-bootstrap CI of the median.
SummaryStats summarize(std::span<const double> values, uint64_t bootstrap_seed,
                       int resamples = 1000);

struct MwuResult {
  double u_statistic = 0.0;  // U for sample A, tie-adjusted
  double p_value = 1.0;      // two-sided
  double cles = 0.5;         // P(a > b) + 0.5 P(a = b)
  bool exact = false;
};

/// Two-sided Mann-Whitney U. Exact enumeration when both samples have at
/// most 8 values, otherwise the normal approximation with tie correction.
/// Degenerate pooled samples (all values identical) give p = 1, CLES = 0.5.
MwuResult mwu_test(std::span<const double> a, std::span<const double> b);

}  // namespace weightgen
