#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace horosim {

// Point estimate with an error bar.  std_error comes from batch means, so it
// is meaningful for correlated series; n_effective = n_samples / tau where
// tau is the integrated autocorrelation time implied by the batch variance.
struct Estimate {
  double mean = 0.0;
  double std_error = 0.0;
  double n_effective = 0.0;
  long n_samples = 0;
};

// Batch means with B = floor(sqrt(N)) batches (trailing remainder dropped).
// For iid data this reduces to the usual standard error.
inline Estimate estimate_from_series(const std::vector<double>& x) {
  const long n = static_cast<long>(x.size());
  if (n < 4) throw std::invalid_argument("estimate_from_series: need at least 4 samples");
  const long nb = static_cast<long>(std::floor(std::sqrt(static_cast<double>(n))));
  const long m = n / nb;  // batch length
  double mean = 0.0;
  for (long i = 0; i < nb * m; ++i) mean += x[i];
  mean /= static_cast<double>(nb * m);

  double var_raw = 0.0;
  for (long i = 0; i < nb * m; ++i) var_raw += (x[i] - mean) * (x[i] - mean);
  var_raw /= static_cast<double>(nb * m - 1);

  double var_batch = 0.0;
  for (long b = 0; b < nb; ++b) {
    double bm = 0.0;
    for (long i = b * m; i < (b + 1) * m; ++i) bm += x[i];
    bm /= static_cast<double>(m);
    var_batch += (bm - mean) * (bm - mean);
  }
  var_batch /= static_cast<double>(nb - 1);

  Estimate e;
  e.mean = mean;
  e.std_error = std::sqrt(var_batch / static_cast<double>(nb));
  e.n_samples = n;
  if (var_batch > 0.0 && var_raw > 0.0) {
    const double tau = std::max(1.0, static_cast<double>(m) * var_batch / var_raw);
    e.n_effective = static_cast<double>(n) / tau;
  } else {
    e.n_effective = static_cast<double>(n);
  }
  return e;
}

// Inverse-variance weighted merge of independent estimates.
inline Estimate merge_estimates(const std::vector<Estimate>& parts) {
  if (parts.empty()) throw std::invalid_argument("merge_estimates: empty input");
  double wsum = 0.0, msum = 0.0, neff = 0.0;
  long n = 0;
  for (const auto& p : parts) {
    if (p.std_error <= 0.0) throw std::invalid_argument("merge_estimates: non-positive std_error");
    const double w = 1.0 / (p.std_error * p.std_error);
    wsum += w;
    msum += w * p.mean;
    neff += p.n_effective;
    n += p.n_samples;
  }
  Estimate e;
  e.mean = msum / wsum;
  e.std_error = std::sqrt(1.0 / wsum);
  e.n_effective = neff;
  e.n_samples = n;
  return e;
}

// Streaming mean/variance (Welford), for large draw counts.
struct RunningStat {
  long n = 0;
  double mean = 0.0;
  double m2 = 0.0;
  void push(double x) {
    ++n;
    const double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }
  double variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
  double std_error() const { return n > 1 ? std::sqrt(variance() / static_cast<double>(n)) : 0.0; }
};

}  // namespace horosim
