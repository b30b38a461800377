#include "sdp/polymer.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "sdp/error.hpp"
#include "sdp/parallel.hpp"
#include "sdp/stats.hpp"

namespace sdp {
namespace {

bool in_simplex(std::span<const double> s, double horizon) {
  double prev = 0.0;
  for (double si : s) {
    if (!(si > prev)) return false;
    prev = si;
  }
  return prev <= horizon;
}

bool strictly_decreasing(const std::vector<AssumptionRow>& rows, double AssumptionRow::*field) {
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (!(rows[i].*field < rows[i - 1].*field)) return false;
  }
  return true;
}

struct PathBatch {
  Eigen::ArrayXd times;
  Eigen::ArrayXXd positions;  // one column per path
  double sup = 0.0;
};

template <typename Draw>
PathBatch draw_batch(int n_paths, Draw&& draw) {
  PathBatch batch;
  for (int j = 0; j < n_paths; ++j) {
    PathSkeleton path = draw();
    if (j == 0) {
      batch.times = path.times;
      batch.positions.resize(path.positions.size(), n_paths);
    }
    batch.positions.col(j) = path.positions;
  }
  batch.sup = batch.positions.abs().maxCoeff();
  return batch;
}

// Weights exp(beta omega(V_t) - lambda v r t) averaged over the two halves of the batch.
std::pair<double, double> split_averages(const PolymerConfig& config, const PoissonCloud& cloud,
                                         const PathBatch& batch, int n_path) {
  const TubeIndex index(cloud, batch.times);
  const double shift = config.log_normalizer();
  double sums[2] = {0.0, 0.0};
  for (int j = 0; j < 2 * n_path; ++j) {
    const long count = index.count(batch.positions.col(j), config.r);
    sums[j / n_path] += std::exp(config.beta * static_cast<double>(count) - shift);
  }
  return {sums[0] / n_path, sums[1] / n_path};
}

template <typename Draw>
WPairs sample_pairs(const PolymerConfig& config, long n_env, int n_path, std::uint64_t seed,
                    const SamplingOptions& opts, double weight, Draw&& draw) {
  require(n_env >= 1 && n_path >= 1, "sampling budgets must be positive");
  WPairs out;
  out.first.resize(n_env);
  out.second.resize(n_env);
  out.n_path = n_path;
  const double base_width = default_half_width(config.stable, config.t);
  std::vector<char> enlarged(static_cast<std::size_t>(n_env), 0);
  parallel_for(static_cast<std::size_t>(n_env), opts.workers, [&](std::size_t e) {
    Stream rng(seed, e);
    const PathBatch batch = draw_batch(2 * n_path, [&] { return draw(rng); });
    const double needed = batch.sup + 2.0 * config.r;
    const double width = std::max(base_width, needed);
    enlarged[e] = needed > base_width;
    const PoissonCloud cloud = sample_cloud(config.v, config.t, width, rng, opts.max_expected_points);
    const auto [a, b] = split_averages(config, cloud, batch, n_path);
    out.first(static_cast<Eigen::Index>(e)) = weight * a;
    out.second(static_cast<Eigen::Index>(e)) = weight * b;
  });
  out.enlarged_fraction =
      static_cast<double>(std::count(enlarged.begin(), enlarged.end(), 1)) / static_cast<double>(n_env);
  out.overflow_fraction = 0.0;
  out.valid = out.overflow_fraction <= opts.max_overflow;
  return out;
}

}  // namespace

void PolymerConfig::validate() const {
  stable.validate();
  require(std::isfinite(beta), "beta must be finite");
  require(v >= 0.0 && std::isfinite(v), "intensity v must be non-negative");
  require(r > 0.0 && std::isfinite(r), "tube width r must be positive");
  require(t > 0.0 && std::isfinite(t), "horizon t must be positive");
}

Schedule::Schedule(StableParams stable, double beta_star, double rho, double eta)
    : stable_(stable), beta_star_(beta_star), rho_(rho), eta_(eta) {
  stable_.validate();
  require(beta_star != 0.0 && std::isfinite(beta_star), "schedule: beta* must be non-zero");
  const double inv = 1.0 / stable_.alpha;
  require(rho > 0.0 && rho < inv, "schedule: need 0 < rho < 1/alpha");
  require(eta >= 0.0, "schedule: need eta >= 0");
  require(rho - eta < inv, "schedule: need rho - eta < 1/alpha");
}

Schedule Schedule::standard(StableParams stable, double beta_star) {
  stable.validate();
  const double e = 0.5 / stable.alpha;
  return Schedule(stable, beta_star, e, e);
}

double Schedule::r(double t) const {
  require(t > 0.0, "schedule: t must be positive");
  return std::pow(t, rho_);
}

double Schedule::lambda(double t) const {
  require(t > 0.0, "schedule: t must be positive");
  return std::copysign(std::pow(t, -eta_), beta_star_);
}

double Schedule::beta(double t) const {
  const double l = lambda(t);
  require(l > -1.0, "schedule: lambda(beta_t) <= -1 has no real beta_t at this t");
  return std::log1p(l);
}

double Schedule::v(double t) const {
  require(t > 0.0, "schedule: t must be positive");
  const double a = stable_.alpha;
  return beta_star_ * beta_star_ * std::pow(t, -(1.0 - 1.0 / a) - 2.0 * rho_ + 2.0 * eta_);
}

PolymerConfig Schedule::config(double t) const {
  PolymerConfig c;
  c.stable = stable_;
  c.beta = beta(t);
  c.v = v(t);
  c.r = r(t);
  c.t = t;
  return c;
}

double gamma_t(const Schedule& schedule, double t) {
  const double a = schedule.stable().alpha;
  const double p = (a + 1.0) / (a - 1.0);
  return std::pow(schedule.lambda(t) * schedule.r(t) / schedule.beta_star(), p) *
         std::pow(schedule.v(t), 1.0 / (a - 1.0));
}

double default_half_width(const StableParams& stable, double t) {
  return kWindowScales * std::pow(2.0 * stable.nu * t, 1.0 / stable.alpha);
}

int default_n_steps(const StableParams& stable, double r, double t) {
  stable.validate();
  require(r > 0.0 && t > 0.0, "default_n_steps: r and t must be positive");
  // (2 nu t / n)^{1/alpha} < r/4  <=>  n > 2 nu t (4/r)^alpha
  const double bound = 2.0 * stable.nu * t * std::pow(4.0 / r, stable.alpha);
  require(bound < 1e8, "default_n_steps: step count above 1e8");
  return std::max(1, static_cast<int>(std::floor(bound)) + 1);
}

PolymerEstimate point_to_line_W(const PolymerConfig& config, const PoissonCloud& cloud, int n_path, int n_steps,
                                Stream& rng, double max_overflow) {
  config.validate();
  require(n_path >= 1 && n_steps >= 1, "point_to_line_W: budgets must be positive");
  require(cloud.t_max >= config.t, "point_to_line_W: cloud does not cover [0, t]");
  const double limit = cloud.half_width - config.r;
  const PathBatch batch =
      draw_batch(n_path, [&] { return sample_path(config.stable, config.t, n_steps, rng); });
  const TubeIndex index(cloud, batch.times);
  const double shift = config.log_normalizer();
  Eigen::ArrayXd weights(n_path);
  Eigen::Index kept = 0;
  for (int j = 0; j < n_path; ++j) {
    if (batch.positions.col(j).abs().maxCoeff() > limit) continue;
    weights(kept++) = std::exp(config.beta * static_cast<double>(index.count(batch.positions.col(j), config.r)) - shift);
  }
  PolymerEstimate est;
  est.n_path = n_path;
  est.overflow_fraction = static_cast<double>(n_path - kept) / n_path;
  if (est.overflow_fraction > max_overflow) {
    throw RuntimeFailure("point_to_line_W: window overflow fraction above limit");
  }
  if (kept == 0) throw RuntimeFailure("point_to_line_W: every path left the window");
  const auto w = weights.head(kept);
  est.value = w.mean();
  est.std_error = kept > 1 ? std::sqrt((w - est.value).square().sum() / (kept - 1) / kept) : 0.0;
  return est;
}

PolymerEstimate point_to_point_W(const PolymerConfig& config, const DensityGrid& grid, const PoissonCloud& cloud,
                                 double x, int n_path, int n_steps, Stream& rng, double max_overflow) {
  config.validate();
  require(n_path >= 1 && n_steps >= 1, "point_to_point_W: budgets must be positive");
  require(cloud.t_max >= config.t, "point_to_point_W: cloud does not cover [0, t]");
  const double limit = cloud.half_width - config.r;
  const PathBatch batch = draw_batch(n_path, [&] { return sample_bridge(grid, config.t, x, n_steps, rng); });
  const TubeIndex index(cloud, batch.times);
  const double shift = config.log_normalizer();
  const double p = density(grid, config.t, x);
  Eigen::ArrayXd weights(n_path);
  Eigen::Index kept = 0;
  for (int j = 0; j < n_path; ++j) {
    if (batch.positions.col(j).abs().maxCoeff() > limit) continue;
    weights(kept++) =
        p * std::exp(config.beta * static_cast<double>(index.count(batch.positions.col(j), config.r)) - shift);
  }
  PolymerEstimate est;
  est.n_path = n_path;
  est.overflow_fraction = static_cast<double>(n_path - kept) / n_path;
  if (est.overflow_fraction > max_overflow) {
    throw RuntimeFailure("point_to_point_W: window overflow fraction above limit");
  }
  if (kept == 0) throw RuntimeFailure("point_to_point_W: every bridge left the window");
  const auto w = weights.head(kept);
  est.value = w.mean();
  est.std_error = kept > 1 ? std::sqrt((w - est.value).square().sum() / (kept - 1) / kept) : 0.0;
  return est;
}

double joint_window_probability(const DensityGrid& grid, std::span<const double> s, std::span<const double> x,
                                double width, int n_path, Stream& rng) {
  require(s.size() == x.size(), "joint_window_probability: s and x differ in length");
  require(width > 0.0, "joint_window_probability: width must be positive");
  require(in_simplex(s, s.empty() ? 0.0 : s.back()), "joint_window_probability: times must be increasing and positive");
  const std::size_t k = s.size();
  if (k == 0) return 1.0;
  const double half = 0.5 * width;
  auto last_factor = [&](double from, double s_from) {
    const double tau = s[k - 1] - s_from;
    return cdf(grid, tau, x[k - 1] + half - from) - cdf(grid, tau, x[k - 1] - half - from);
  };
  if (k == 1) return last_factor(0.0, 0.0);
  require(n_path >= 1, "joint_window_probability: n_path must be positive");
  const StableParams& params = grid.params();
  double total = 0.0;
  for (int j = 0; j < n_path; ++j) {
    double pos = 0.0, prev = 0.0;
    bool inside = true;
    for (std::size_t i = 0; i + 1 < k && inside; ++i) {
      pos += sample_increment(params, s[i] - prev, rng);
      prev = s[i];
      inside = std::abs(x[i] - pos) <= half;
    }
    if (inside) total += last_factor(pos, prev);
  }
  return total / n_path;
}

double chaos_coefficient(const PolymerConfig& config, const DensityGrid& grid, std::span<const double> s,
                         std::span<const double> x, int n_path, Stream& rng) {
  config.validate();
  require(in_simplex(s, config.t), "chaos_coefficient: s must lie in the simplex 0 < s_1 < ... < s_k <= t");
  const double lambda = lambda_of(config.beta);
  return std::pow(lambda, static_cast<double>(s.size())) * joint_window_probability(grid, s, x, config.r, n_path, rng);
}

double phi_t_k(const Schedule& schedule, const DensityGrid& grid, double t, std::span<const double> s,
               std::span<const double> x, int n_path, Stream& rng) {
  require(s.size() == x.size(), "phi_t_k: s and x differ in length");
  if (!in_simplex(s, 1.0)) return 0.0;
  const double width = schedule.r(t) / std::pow(t, 1.0 / schedule.stable().alpha);
  const double ratio = schedule.lambda(t) / gamma_t(schedule, t);
  return std::pow(ratio, static_cast<double>(s.size())) * joint_window_probability(grid, s, x, width, n_path, rng);
}

AssumptionReport verify_assumptions(const Schedule& schedule, std::span<const double> t_list) {
  require(!t_list.empty(), "verify_assumptions: empty t list");
  for (std::size_t i = 0; i < t_list.size(); ++i) {
    require(t_list[i] > 0.0, "verify_assumptions: t must be positive");
    require(i == 0 || t_list[i] > t_list[i - 1], "verify_assumptions: t list must be increasing");
  }
  const double a = schedule.stable().alpha;
  const double b2 = schedule.beta_star() * schedule.beta_star();
  AssumptionReport report;
  report.a_exact = true;
  for (double t : t_list) {
    const double v = schedule.v(t), r = schedule.r(t), l = std::abs(schedule.lambda(t));
    AssumptionRow row{};
    row.t = t;
    row.a_quantity = v * r * r * l * l;
    row.a_ratio = row.a_quantity / (b2 * std::pow(t, -(1.0 - 1.0 / a)));
    row.b_quantity = v * std::pow(r * l, a + 1.0);
    row.c_quantity = r / std::pow(t, 1.0 / a);
    report.a_exact = report.a_exact && std::abs(row.a_ratio - 1.0) <= 1e-12;
    report.rows.push_back(row);
  }
  report.b_decreasing = strictly_decreasing(report.rows, &AssumptionRow::b_quantity);
  report.c_decreasing = strictly_decreasing(report.rows, &AssumptionRow::c_quantity);
  return report;
}

WPairs sample_W_pairs(const PolymerConfig& config, long n_env, int n_path, int n_steps, std::uint64_t seed,
                      const SamplingOptions& opts) {
  config.validate();
  require(n_steps >= 1, "sample_W_pairs: n_steps must be positive");
  return sample_pairs(config, n_env, n_path, seed, opts, 1.0,
                      [&](Stream& rng) { return sample_path(config.stable, config.t, n_steps, rng); });
}

WPairs sample_point_W_pairs(const PolymerConfig& config, const DensityGrid& grid, double x_end, long n_env,
                            int n_path, int n_steps, std::uint64_t seed, const SamplingOptions& opts) {
  config.validate();
  require(n_steps >= 1, "sample_point_W_pairs: n_steps must be positive");
  require(grid.params().alpha == config.stable.alpha && grid.params().nu == config.stable.nu,
          "sample_point_W_pairs: density grid built for different stable parameters");
  return sample_pairs(config, n_env, n_path, seed, opts, density(grid, config.t, x_end),
                      [&](Stream& rng) { return sample_bridge(grid, config.t, x_end, n_steps, rng); });
}

WPairs sample_W_distribution(const Schedule& schedule, double t, long n_env, int n_path, int n_steps,
                             std::uint64_t seed, const SamplingOptions& opts) {
  const PolymerConfig config = schedule.config(t);
  if (n_steps <= 0) n_steps = default_n_steps(config.stable, config.r, config.t);
  return sample_W_pairs(config, n_env, n_path, n_steps, seed, opts);
}

WSummary summarize(const WPairs& pairs, double t) {
  WSummary row;
  row.t = t;
  row.n_env = static_cast<long>(pairs.n_env());
  row.n_path = pairs.n_path;
  const Estimate mean = batch_mean(pairs.averaged());
  const Estimate second = batch_mean(pairs.first * pairs.second);
  row.mean = mean.value;
  row.std_error = mean.se;
  row.second_moment = second.value;
  row.second_moment_se = second.se;
  row.overflow_fraction = pairs.overflow_fraction;
  return row;
}

void write_summary_csv(std::span<const WSummary> rows, std::ostream& out) {
  const auto old_precision = out.precision(17);
  out << "t,n_env,n_path,mean,second_moment,stderr,overflow_fraction\n";
  for (const auto& r : rows) {
    out << r.t << ',' << r.n_env << ',' << r.n_path << ',' << r.mean << ',' << r.second_moment << ','
        << r.std_error << ',' << r.overflow_fraction << '\n';
  }
  out.precision(old_precision);
}

}  // namespace sdp
