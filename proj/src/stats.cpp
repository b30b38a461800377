#include "sdp/stats.hpp"

#include <numeric>

#include "sdp/error.hpp"

namespace sdp {

Estimate jackknife(const std::vector<Eigen::ArrayXd>& samples,
                   const std::function<double(const std::vector<Eigen::ArrayXd>&)>& stat, int groups) {
  require(!samples.empty(), "jackknife: no samples");
  Estimate out;
  out.value = stat(samples);
  Eigen::ArrayXd partial(groups);
  for (int g = 0; g < groups; ++g) {
    std::vector<Eigen::ArrayXd> reduced;
    reduced.reserve(samples.size());
    for (const auto& s : samples) {
      const Eigen::Index n = s.size();
      const Eigen::Index lo = g * n / groups, hi = (g + 1) * n / groups;
      Eigen::ArrayXd r(n - (hi - lo));
      r << s.head(lo), s.tail(n - hi);
      reduced.push_back(std::move(r));
    }
    partial(g) = stat(reduced);
  }
  const double g = groups;
  out.se = std::sqrt((g - 1.0) / g * (partial - partial.mean()).square().sum());
  return out;
}

double ks_statistic(const Eigen::ArrayXd& a, const Eigen::ArrayXd& b) {
  require(a.size() > 0 && b.size() > 0, "ks_statistic: samples must be nonempty");
  std::vector<double> x(a.data(), a.data() + a.size()), y(b.data(), b.data() + b.size());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double nx = static_cast<double>(x.size()), ny = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / nx - static_cast<double>(j) / ny));
  }
  return d;
}

double ks_statistic(const Eigen::ArrayXd& a, const std::function<double(double)>& cdf) {
  require(a.size() > 0, "ks_statistic: sample must be nonempty");
  std::vector<double> x(a.data(), a.data() + a.size());
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf(x[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

double sample_variance(const Eigen::ArrayXd& x) {
  if (x.size() < 2) return 0.0;
  return (x - x.mean()).square().sum() / static_cast<double>(x.size() - 1);
}

double sample_skewness(const Eigen::ArrayXd& x) {
  const Eigen::ArrayXd c = x - x.mean();
  const double m2 = c.square().mean();
  if (m2 == 0.0) return 0.0;
  return c.cube().mean() / std::pow(m2, 1.5);
}

double normal_quantile(double p) {
  require(p > 0.0 && p < 1.0, "normal_quantile: p must lie in (0, 1)");
  double lo = -40.0, hi = 40.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (0.5 * std::erfc(-mid / std::sqrt(2.0)) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

TrendTest trend_test(const Eigen::ArrayXd& x, const Eigen::ArrayXd& y, const Eigen::ArrayXd& se, double confidence) {
  require(x.size() == y.size() && x.size() == se.size() && x.size() >= 2, "trend_test: need >= 2 aligned points");
  require((se > 0.0).all(), "trend_test: standard errors must be positive");
  const Eigen::ArrayXd w = se.square().inverse();
  const double xbar = (w * x).sum() / w.sum();
  const double ybar = (w * y).sum() / w.sum();
  const double sxx = (w * (x - xbar).square()).sum();
  TrendTest out;
  out.slope = (w * (x - xbar) * (y - ybar)).sum() / sxx;
  out.slope_se = std::sqrt(1.0 / sxx);
  out.threshold = normal_quantile(confidence) * out.slope_se;
  out.nonincreasing = out.slope <= out.threshold;
  return out;
}

}  // namespace sdp
