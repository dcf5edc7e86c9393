#include "weightgen/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "weightgen/errors.hpp"
#include "weightgen/rng.hpp"

namespace weightgen {

double mean_of(std::span<const double> values) {
  double acc = 0.0;
  for (double v : values) acc += v;
  return acc / static_cast<double>(values.size());
}

double median_of(std::span<const double> values) {
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const size_t n = sorted.size();
  if (n == 0) throw InputError("median: empty sample");
  return n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
}

SummaryStats summarize(std::span<const double> values, uint64_t bootstrap_seed, int resamples) {
  if (values.empty()) throw InputError("summarize: empty sample");
  SummaryStats s;
  s.mean = mean_of(values);
  double var = 0.0;
  for (double v : values) var += (v - s.mean) * (v - s.mean);
  s.stddev = values.size() > 1 ? std::sqrt(var / static_cast<double>(values.size() - 1)) : 0.0;
  s.median = median_of(values);

  RngStream rng(bootstrap_seed);
  std::vector<double> medians(static_cast<size_t>(resamples));
  std::vector<double> draw(values.size());
  for (int r = 0; r < resamples; ++r) {
    for (auto& d : draw) d = values[static_cast<size_t>(rng.below(values.size()))];
    medians[static_cast<size_t>(r)] = median_of(draw);
  }
  std::sort(medians.begin(), medians.end());
  const auto lo_idx = static_cast<size_t>(std::floor(0.025 * (resamples - 1)));
  const auto hi_idx = static_cast<size_t>(std::ceil(0.975 * (resamples - 1)));
  s.ci_low = medians[lo_idx];
  s.ci_high = medians[hi_idx];
  return s;
}

namespace {

// U for sample A over an explicit pair count: sum of [a > b] + 0.5 [a == b].
double u_statistic(std::span<const double> a, std::span<const double> b) {
  double u = 0.0;
  for (double x : a) {
    for (double y : b) {
      if (x > y) u += 1.0;
      else if (x == y) u += 0.5;
    }
  }
  return u;
}

double normal_sf(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

MwuResult exact_mwu(std::span<const double> a, std::span<const double> b) {
  const int n = static_cast<int>(a.size());
  const int m = static_cast<int>(b.size());
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  const int total = n + m;

  const double u_obs = u_statistic(a, b);

  // Enumerate every way to assign n of the pooled positions to sample A and
  // tally the permutation distribution of U.
  std::vector<int> comb(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) comb[static_cast<size_t>(i)] = i;
  int64_t count_total = 0, count_le = 0, count_ge = 0;
  std::vector<char> in_a(static_cast<size_t>(total));
  for (;;) {
    std::fill(in_a.begin(), in_a.end(), 0);
    for (int idx : comb) in_a[static_cast<size_t>(idx)] = 1;
    double u = 0.0;
    for (int i = 0; i < total; ++i) {
      if (!in_a[static_cast<size_t>(i)]) continue;
      for (int j = 0; j < total; ++j) {
        if (in_a[static_cast<size_t>(j)]) continue;
        if (pooled[static_cast<size_t>(i)] > pooled[static_cast<size_t>(j)]) u += 1.0;
        else if (pooled[static_cast<size_t>(i)] == pooled[static_cast<size_t>(j)]) u += 0.5;
      }
    }
    ++count_total;
    if (u <= u_obs + 1e-12) ++count_le;
    if (u >= u_obs - 1e-12) ++count_ge;

    // next combination
    int k = n - 1;
    while (k >= 0 && comb[static_cast<size_t>(k)] == total - n + k) --k;
    if (k < 0) break;
    ++comb[static_cast<size_t>(k)];
    for (int j = k + 1; j < n; ++j) comb[static_cast<size_t>(j)] = comb[static_cast<size_t>(j - 1)] + 1;
  }

  MwuResult res;
  res.exact = true;
  res.u_statistic = u_obs;
  res.cles = u_obs / (static_cast<double>(n) * m);
  const double p_le = static_cast<double>(count_le) / static_cast<double>(count_total);
  const double p_ge = static_cast<double>(count_ge) / static_cast<double>(count_total);
  res.p_value = std::min(1.0, 2.0 * std::min(p_le, p_ge));
  return res;
}

MwuResult approx_mwu(std::span<const double> a, std::span<const double> b) {
  const double n = static_cast<double>(a.size());
  const double m = static_cast<double>(b.size());
  const double total = n + m;

  // Midranks over the pooled sample.
  std::vector<std::pair<double, int>> pooled;  // value, origin (0=a, 1=b)
  pooled.reserve(static_cast<size_t>(total));
  for (double v : a) pooled.emplace_back(v, 0);
  for (double v : b) pooled.emplace_back(v, 1);
  std::sort(pooled.begin(), pooled.end(),
            [](const auto& x, const auto& y) { return x.first < y.first; });

  double rank_sum_a = 0.0;
  double tie_term = 0.0;
  size_t i = 0;
  while (i < pooled.size()) {
    size_t j = i;
    while (j < pooled.size() && pooled[j].first == pooled[i].first) ++j;
    const double tied = static_cast<double>(j - i);
    const double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (size_t k = i; k < j; ++k) {
      if (pooled[k].second == 0) rank_sum_a += midrank;
    }
    tie_term += tied * tied * tied - tied;
    i = j;
  }

  MwuResult res;
  res.exact = false;
  res.u_statistic = rank_sum_a - n * (n + 1.0) / 2.0;
  res.cles = res.u_statistic / (n * m);
  const double mu = n * m / 2.0;
  const double var = n * m / 12.0 * ((total + 1.0) - tie_term / (total * (total - 1.0)));
  if (var <= 0.0) {
    res.p_value = 1.0;
    res.cles = 0.5;
    return res;
  }
  const double diff = res.u_statistic - mu;
  const double cc = diff > 0 ? -0.5 : (diff < 0 ? 0.5 : 0.0);  // continuity correction
  const double z = (diff + cc) / std::sqrt(var);
  res.p_value = std::min(1.0, 2.0 * normal_sf(std::abs(z)));
  return res;
}

}  // namespace

MwuResult mwu_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 3 || b.size() < 3) {
    throw InputError("mwu_test: each sample needs at least 3 values");
  }
  bool all_equal = true;
  for (double v : a) all_equal = all_equal && v == a[0];
  for (double v : b) all_equal = all_equal && v == a[0];
  if (all_equal) {
    MwuResult res;
    res.u_statistic = static_cast<double>(a.size()) * static_cast<double>(b.size()) / 2.0;
    res.p_value = 1.0;
    res.cles = 0.5;
    return res;
  }
  if (a.size() <= 8 && b.size() <= 8) return exact_mwu(a, b);
  return approx_mwu(a, b);
}

}  // namespace weightgen
