#pragma once

#include <Eigen/Core>

#include <iosfwd>
#include <span>

#include "sdp/rng.hpp"

namespace sdp {

/// Symmetric alpha-stable law with characteristic function exp(-nu t |z|^alpha).
struct StableParams {
  double alpha = 2.0;
  double nu = 1.0;

  void validate() const;
  bool gaussian() const { return alpha == 2.0; }
  /// Scale parameter (nu t)^{1/alpha} of the time-t marginal.
  double scale(double t) const;
};

/// p(1, 0) = Gamma(1 + 1/alpha) / (pi nu^{1/alpha}), the maximum of the unit-time density.
double peak_density(const StableParams& params);

/// Leading tail constant C with p(1, x) ~ C |x|^{-1-alpha}.
double tail_constant(const StableParams& params);

/// Unit-time density table on a uniform symmetric grid.
///
/// Nodes are x_i = (i - n/2) h for i = 0..n, so the origin is always a node.
/// Between nodes the density is the monotone cubic (Fritsch-Carlson)
/// interpolant; beyond x_cut it continues as tail_coeff |x|^{-1-alpha}.
/// For alpha = 2 every evaluation uses the Gaussian closed form.
class DensityGrid {
 public:
  const StableParams& params() const { return params_; }
  const Eigen::ArrayXd& nodes() const { return x_; }
  const Eigen::ArrayXd& values() const { return p_; }
  double spacing() const { return h_; }
  double x_max() const { return x_max_; }
  double x_cut() const { return x_cut_; }
  double tail_coeff() const { return tail_coeff_; }

  double unit_density(double x) const;
  double unit_cdf(double x) const;
  /// Trapezoid rule over the table inside +-x_cut plus the analytic tail mass.
  double total_mass() const;

 private:
  friend DensityGrid build_density_grid(const StableParams&, double, Eigen::Index);

  double half_cumulative(double a) const;

  StableParams params_;
  double x_max_ = 0.0;
  double h_ = 0.0;
  double x_cut_ = 0.0;
  Eigen::Index cut_index_ = 0;
  double tail_coeff_ = 0.0;
  Eigen::ArrayXd x_, p_;
  // Positive half-line: values, Hermite slopes and cumulative integrals from 0.
  Eigen::ArrayXd half_, slope_, cum_;
};

/// Builds the table by FFT inversion of exp(-nu |z|^alpha).
/// Requires n_nodes >= 1024 and even; x_max > 0.
DensityGrid build_density_grid(const StableParams& params, double x_max, Eigen::Index n_nodes);

/// Table extent and size giving |total mass - 1| well below 1e-6 for alpha in (1, 2].
DensityGrid build_default_density_grid(const StableParams& params);

/// p(t, x) = t^{-1/alpha} p(1, t^{-1/alpha} x).
double density(const DensityGrid& grid, double t, double x);

/// P(X_t <= x).
double cdf(const DensityGrid& grid, double t, double x);

/// prod_j p(s_j - s_{j-1}, x_j - x_{j-1}) with s_0 = x_0 = 0.
double multistep_density(const DensityGrid& grid, std::span<const double> s, std::span<const double> x);

/// Exact L2 norm squared of p(s, .): Gamma(1 + 1/alpha) / (pi (2 nu s)^{1/alpha}).
double density_l2(const StableParams& params, double s);

/// One draw with density p(dt, .). Chambers-Mallows-Stuck for alpha < 2.
double sample_increment(const StableParams& params, double dt, Stream& rng);

struct PathSkeleton {
  Eigen::ArrayXd times;
  Eigen::ArrayXd positions;
  bool is_bridge = false;
  double endpoint = 0.0;

  Eigen::Index steps() const { return times.size() - 1; }
  double horizon() const { return times(times.size() - 1); }
  /// Piecewise-constant, right-continuous value X(s) for s in [0, horizon].
  double at(double s) const;
};

PathSkeleton sample_path(const StableParams& params, double t, int n_steps, Stream& rng);

enum class BridgeMethod {
  Automatic,  // exact Gaussian conditionals at alpha = 2, table inversion otherwise
  Gaussian,
  Table,
};

/// Conditional law of X_s given X_{s_prev} = from and X_t = to, discretized on
/// a nonuniform node set. cdf is normalized to end at 1.
struct BridgeStep {
  Eigen::ArrayXd nodes;
  Eigen::ArrayXd cdf;
  double normalizer = 0.0;  // trapezoid integral of the unnormalized density
};

BridgeStep bridge_step(const DensityGrid& grid, double from, double tau_before, double tau_after, double to);
double sample_bridge_step(const BridgeStep& step, Stream& rng);

PathSkeleton sample_bridge(const DensityGrid& grid, double t, double x_end, int n_steps, Stream& rng,
                           BridgeMethod method = BridgeMethod::Automatic);

void write_density_csv(const DensityGrid& grid, std::ostream& out);

}  // namespace sdp
