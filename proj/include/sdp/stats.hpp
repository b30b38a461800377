#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace sdp {

/// A statistic with its standard error.
struct Estimate {
  double value = 0.0;
  double se = 0.0;
};

inline constexpr int kDefaultBatches = 20;

/// Mean with a batch-means standard error over `batches` contiguous blocks.
template <typename Derived>
Estimate batch_mean(const Eigen::DenseBase<Derived>& x, int batches = kDefaultBatches) {
  const Eigen::Index n = x.size();
  Estimate out;
  if (n == 0) return out;
  out.value = x.derived().mean();
  const Eigen::Index b = std::min<Eigen::Index>(batches, n);
  if (b < 2) return out;
  Eigen::ArrayXd means(b);
  for (Eigen::Index g = 0; g < b; ++g) {
    const Eigen::Index lo = g * n / b, hi = (g + 1) * n / b;
    means(g) = x.derived().segment(lo, hi - lo).mean();
  }
  const double var = (means - means.mean()).square().sum() / static_cast<double>(b - 1);
  out.se = std::sqrt(var / static_cast<double>(b));
  return out;
}

/// Delete-a-group jackknife: `stat` is evaluated on the full data and with
/// each of `groups` contiguous blocks removed. Works for any number of
/// aligned samples, all split into the same block positions.
Estimate jackknife(const std::vector<Eigen::ArrayXd>& samples,
                   const std::function<double(const std::vector<Eigen::ArrayXd>&)>& stat,
                   int groups = kDefaultBatches);

/// Two-sample Kolmogorov-Smirnov distance between empirical CDFs.
double ks_statistic(const Eigen::ArrayXd& a, const Eigen::ArrayXd& b);

/// One-sample Kolmogorov-Smirnov distance to a continuous CDF.
double ks_statistic(const Eigen::ArrayXd& a, const std::function<double(double)>& cdf);

double sample_variance(const Eigen::ArrayXd& x);
double sample_skewness(const Eigen::ArrayXd& x);

/// Standard normal quantile.
double normal_quantile(double p);

/// Weighted least-squares slope of y against x with weights 1/se^2. The trend
/// counts as non-increasing unless the slope is positive at the given
/// one-sided confidence.
struct TrendTest {
  double slope = 0.0;
  double slope_se = 0.0;
  double threshold = 0.0;
  bool nonincreasing = false;
};
TrendTest trend_test(const Eigen::ArrayXd& x, const Eigen::ArrayXd& y, const Eigen::ArrayXd& se,
                     double confidence = 0.90);

}  // namespace sdp
