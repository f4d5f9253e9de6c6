#pragma once

// Small Monte Carlo helpers: total variation, mean/standard error, and the
// two-sample Kolmogorov-Smirnov test.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "hlab/markov_core.hpp"

namespace hlab {

inline double total_variation(const Vector& p, const Vector& q) { return 0.5 * (p - q).cwiseAbs().sum(); }

struct MeanEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
  long samples = 0;
};

inline MeanEstimate mean_estimate(std::span<const double> xs) {
  MeanEstimate e;
  e.samples = static_cast<long>(xs.size());
  if (xs.empty()) return e;
  double sum = 0.0;
  for (double x : xs) sum += x;
  e.mean = sum / static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - e.mean) * (x - e.mean);
  if (xs.size() > 1)
    e.standard_error = std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
  return e;
}

struct KSResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

// Asymptotic Kolmogorov distribution Q(λ) = 2 Σ (-1)^{j-1} e^{-2 j² λ²}.
inline double kolmogorov_tail(double lambda) {
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    sum += (j % 2 == 1 ? term : -term);
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

inline KSResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double ne = na * nb / (na + nb);
  const double sq = std::sqrt(ne);
  return {d, kolmogorov_tail((sq + 0.12 + 0.11 / sq) * d)};
}

}  // namespace hlab
