#pragma once

#include <boost/math/distributions/beta.hpp>
#include <stdexcept>
#include <utility>

namespace mondeq {

/// Exact (Clopper-Pearson) binomial confidence interval for k successes
/// out of n trials at the given confidence level.
inline std::pair<double, double> clopper_pearson(int k, int n, double confidence = 0.95) {
  if (n <= 0 || k < 0 || k > n) throw std::invalid_argument("bad binomial counts");
  if (confidence <= 0 || confidence >= 1) throw std::invalid_argument("bad confidence level");
  const double alpha = 1.0 - confidence;
  double lo = 0.0, hi = 1.0;
  if (k > 0)
    lo = boost::math::quantile(boost::math::beta_distribution<double>(k, n - k + 1), alpha / 2);
  if (k < n)
    hi = boost::math::quantile(boost::math::beta_distribution<double>(k + 1, n - k),
                               1.0 - alpha / 2);
  return {lo, hi};
}

}  // namespace mondeq
