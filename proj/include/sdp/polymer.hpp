#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "sdp/poisson.hpp"
#include "sdp/rng.hpp"
#include "sdp/stable.hpp"

namespace sdp {

/// lambda(beta) = e^beta - 1.
inline double lambda_of(double beta) { return std::expm1(beta); }

struct PolymerConfig {
  StableParams stable;
  double beta = 0.0;  // inverse temperature
  double v = 1.0;     // environment intensity
  double r = 1.0;     // tube width
  double t = 1.0;     // horizon

  void validate() const;
  /// lambda(beta) v r t, the log of E_Q[exp(beta omega(V_t(X)))] for a fixed path.
  double log_normalizer() const { return lambda_of(beta) * v * r * t; }
};

/// Intermediate-disorder schedule: r_t = t^rho, lambda(beta_t) = sign(beta*) t^-eta,
/// and v_t solving v_t r_t^2 lambda(beta_t)^2 = (beta*)^2 t^{-(1-1/alpha)} exactly.
class Schedule {
 public:
  Schedule(StableParams stable, double beta_star, double rho, double eta);
  /// rho = eta = 1/(2 alpha).
  static Schedule standard(StableParams stable, double beta_star);

  const StableParams& stable() const { return stable_; }
  double beta_star() const { return beta_star_; }
  double rho() const { return rho_; }
  double eta() const { return eta_; }

  double r(double t) const;
  double lambda(double t) const;
  double beta(double t) const;
  double v(double t) const;
  PolymerConfig config(double t) const;

 private:
  StableParams stable_;
  double beta_star_, rho_, eta_;
};

/// (beta*)^{-(a+1)/(a-1)} v_t^{1/(a-1)} r_t^{(a+1)/(a-1)} lambda(beta_t)^{(a+1)/(a-1)}, evaluated as
/// (lambda r / beta*)^{(a+1)/(a-1)} v^{1/(a-1)} so that a negative beta* stays real.
double gamma_t(const Schedule& schedule, double t);

struct PolymerEstimate {
  double value = 0.0;
  double std_error = 0.0;
  long n_env = 1;
  long n_path = 0;
  double overflow_fraction = 0.0;
};

inline constexpr double kWindowScales = 12.0;
inline constexpr double kMaxOverflowFraction = 0.01;

/// 12 (2 nu t)^{1/alpha}.
double default_half_width(const StableParams& stable, double t);

/// Smallest n with (2 nu t / n)^{1/alpha} < r / 4.
int default_n_steps(const StableParams& stable, double r, double t);

/// e^{-lambda v r t} times the path average of exp(beta omega(V_t)) in one fixed
/// environment. Paths leaving [-L + r, L - r] are excluded and counted as
/// overflow; an overflow fraction above max_overflow throws RuntimeFailure.
PolymerEstimate point_to_line_W(const PolymerConfig& config, const PoissonCloud& cloud, int n_path, int n_steps,
                                Stream& rng, double max_overflow = kMaxOverflowFraction);

/// p(t, x) e^{-lambda v r t} times the bridge average of exp(beta omega(V_t)).
PolymerEstimate point_to_point_W(const PolymerConfig& config, const DensityGrid& grid, const PoissonCloud& cloud,
                                 double x, int n_path, int n_steps, Stream& rng,
                                 double max_overflow = kMaxOverflowFraction);

/// Monte Carlo estimate of P(|x_i - X_{s_i}| <= width/2 for all i). The last
/// factor is integrated exactly given X_{s_{k-1}} via the CDF, which leaves
/// the estimator unbiased and makes k = 1 deterministic.
double joint_window_probability(const DensityGrid& grid, std::span<const double> s, std::span<const double> x,
                                double width, int n_path, Stream& rng);

/// lambda(beta)^k E_P[prod_i chi^r_{s_i, x_i}(X)]; requires s in Delta_k(t).
double chaos_coefficient(const PolymerConfig& config, const DensityGrid& grid, std::span<const double> s,
                         std::span<const double> x, int n_path, Stream& rng);

/// gamma_t^{-k} lambda(beta_t)^k E_P[prod chi^{r_t/t^{1/alpha}}_{s_i,x_i}] on unit-time paths,
/// zero when s is outside Delta_k(1).
double phi_t_k(const Schedule& schedule, const DensityGrid& grid, double t, std::span<const double> s,
               std::span<const double> x, int n_path, Stream& rng);

struct AssumptionRow {
  double t;
  double a_quantity;  // v r^2 lambda^2
  double a_ratio;     // a_quantity / ((beta*)^2 t^{-(1-1/alpha)})
  double b_quantity;  // v r^{alpha+1} lambda^{alpha+1}
  double c_quantity;  // r / t^{1/alpha}
};

struct AssumptionReport {
  std::vector<AssumptionRow> rows;
  bool a_exact = false;
  bool b_decreasing = false;
  bool c_decreasing = false;
  bool ok() const { return a_exact && b_decreasing && c_decreasing; }
};

AssumptionReport verify_assumptions(const Schedule& schedule, std::span<const double> t_list);

/// Paired path-batch estimates (W', W'') per environment replica.
struct WPairs {
  Eigen::ArrayXd first;
  Eigen::ArrayXd second;
  long n_path = 0;               // per batch
  double overflow_fraction = 0;  // replicas with clipped paths (0 when windows adapt)
  double enlarged_fraction = 0;  // replicas whose window grew beyond the default
  bool valid = true;

  Eigen::Index n_env() const { return first.size(); }
  Eigen::ArrayXd averaged() const { return 0.5 * (first + second); }
};

struct SamplingOptions {
  unsigned workers = 1;
  double max_overflow = kMaxOverflowFraction;
  double max_expected_points = kDefaultMaxExpectedPoints;
};

/// Nested Monte Carlo for W_t. Replica e draws from stream (seed, e): first
/// 2 n_path paths, then a cloud on [-L, L] with L = max(default, sup|X| + 2r),
/// so no path ever leaves its environment.
WPairs sample_W_pairs(const PolymerConfig& config, long n_env, int n_path, int n_steps, std::uint64_t seed,
                      const SamplingOptions& opts = {});

/// Same for the point-to-point partition function with bridges ending at x_end.
WPairs sample_point_W_pairs(const PolymerConfig& config, const DensityGrid& grid, double x_end, long n_env,
                            int n_path, int n_steps, std::uint64_t seed, const SamplingOptions& opts = {});

/// W pairs at time t of the schedule; n_steps <= 0 picks default_n_steps.
WPairs sample_W_distribution(const Schedule& schedule, double t, long n_env, int n_path, int n_steps,
                             std::uint64_t seed, const SamplingOptions& opts = {});

/// Summary row (t, n_env, n_path, mean, second_moment, stderr, overflow_fraction).
/// second_moment is the unbiased mean of W' W''; stderr is that of the mean.
struct WSummary {
  double t = 0.0;
  long n_env = 0;
  long n_path = 0;
  double mean = 0.0;
  double second_moment = 0.0;
  double std_error = 0.0;
  double second_moment_se = 0.0;
  double overflow_fraction = 0.0;
};

WSummary summarize(const WPairs& pairs, double t);
void write_summary_csv(std::span<const WSummary> rows, std::ostream& out);

}  // namespace sdp
