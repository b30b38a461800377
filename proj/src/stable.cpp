#include "sdp/stable.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <ostream>
#include <vector>

#include "fft_setup.hpp"
#include "sdp/error.hpp"

namespace sdp {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTailCutRatio = 1e-10;
constexpr double kWindowScales = 12.0;

double gaussian_unit_density(const StableParams& params, double x) {
  return std::exp(-x * x / (4.0 * params.nu)) / std::sqrt(4.0 * kPi * params.nu);
}

double gaussian_unit_cdf(const StableParams& params, double x) {
  return 0.5 * std::erfc(-x / (2.0 * std::sqrt(params.nu)));
}

Eigen::Index next_pow2(Eigen::Index n) {
  Eigen::Index p = 1;
  while (p < n) p <<= 1;
  return p;
}

// Values of p(1, j h) for j = 0..half via the Poisson-summation identity:
// a trapezoid sum over frequencies with step dz equals the density periodized
// with period 2 pi / dz. The period is kept >= 32 x_max so aliasing is negligible.
Eigen::ArrayXd invert_characteristic(const StableParams& params, double h, Eigen::Index half) {
  Eigen::Index oversample = 1;
  while (params.nu * std::pow(kPi * oversample / h, params.alpha) < 40.0) oversample *= 2;
  const double h_int = h / static_cast<double>(oversample);
  const Eigen::Index n = next_pow2(64 * half * oversample);
  const double dz = 2.0 * kPi / (static_cast<double>(n) * h_int);

  std::vector<std::complex<double>> spectrum(static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k <= n / 2; ++k) {
    const double z = dz * static_cast<double>(k);
    const double phi = std::exp(-params.nu * std::pow(z, params.alpha));
    spectrum[static_cast<std::size_t>(k)] = phi;
    if (k > 0 && k < n / 2) spectrum[static_cast<std::size_t>(n - k)] = phi;
  }
  detail::enable_threaded_planning();
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> values;
  fft.inv(values, spectrum);  // includes the 1/n factor

  Eigen::ArrayXd out(half + 1);
  for (Eigen::Index j = 0; j <= half; ++j) {
    out(j) = std::max(0.0, values[static_cast<std::size_t>(j * oversample)].real() / h_int);
  }
  return out;
}

// Fritsch-Carlson slopes on the positive half-line; the peak at 0 has slope 0.
Eigen::ArrayXd monotone_slopes(const Eigen::ArrayXd& y, double h) {
  const Eigen::Index n = y.size();
  Eigen::ArrayXd d = Eigen::ArrayXd::Zero(n);
  for (Eigen::Index j = 1; j + 1 < n; ++j) {
    const double left = (y(j) - y(j - 1)) / h;
    const double right = (y(j + 1) - y(j)) / h;
    if (left * right > 0.0) d(j) = 2.0 / (1.0 / left + 1.0 / right);
  }
  if (n > 1) d(n - 1) = (y(n - 1) - y(n - 2)) / h;
  return d;
}

// Antiderivatives of the cubic Hermite basis on [0, tau].
double hermite_integral(double y0, double d0, double y1, double d1, double h, double tau) {
  const double t2 = tau * tau, t3 = t2 * tau, t4 = t3 * tau;
  const double h00 = 0.5 * t4 - t3 + tau;
  const double h10 = 0.25 * t4 - 2.0 * t3 / 3.0 + 0.5 * t2;
  const double h01 = -0.5 * t4 + t3;
  const double h11 = 0.25 * t4 - t3 / 3.0;
  return h * (y0 * h00 + h * d0 * h10 + y1 * h01 + h * d1 * h11);
}

}  // namespace

void StableParams::validate() const {
  require(alpha > 1.0 && alpha <= 2.0 && std::isfinite(alpha), "alpha must lie in (1, 2]");
  require(nu > 0.0 && std::isfinite(nu), "nu must be positive");
}

double StableParams::scale(double t) const { return std::pow(nu * t, 1.0 / alpha); }

double peak_density(const StableParams& params) {
  return std::tgamma(1.0 + 1.0 / params.alpha) / (kPi * std::pow(params.nu, 1.0 / params.alpha));
}

double tail_constant(const StableParams& params) {
  if (params.gaussian()) return 0.0;
  return params.nu * std::tgamma(1.0 + params.alpha) * std::sin(kPi * params.alpha / 2.0) / kPi;
}

DensityGrid build_density_grid(const StableParams& params, double x_max, Eigen::Index n_nodes) {
  params.validate();
  require(x_max > 0.0 && std::isfinite(x_max), "x_max must be positive");
  require(n_nodes >= 1024, "n_nodes must be at least 2^10");
  require(n_nodes % 2 == 0, "n_nodes must be even so that x = 0 is a node");

  DensityGrid grid;
  grid.params_ = params;
  grid.x_max_ = x_max;
  const Eigen::Index half = n_nodes / 2;
  grid.h_ = x_max / static_cast<double>(half);

  if (params.gaussian()) {
    grid.half_ = Eigen::ArrayXd::LinSpaced(half + 1, 0.0, x_max).unaryExpr([&](double x) {
      return gaussian_unit_density(params, x);
    });
  } else {
    grid.half_ = invert_characteristic(params, grid.h_, half);
  }

  const double peak = grid.half_(0);
  grid.cut_index_ = half;
  for (Eigen::Index j = 1; j <= half; ++j) {
    if (grid.half_(j) < kTailCutRatio * peak) {
      grid.cut_index_ = j;
      break;
    }
  }
  grid.x_cut_ = grid.h_ * static_cast<double>(grid.cut_index_);
  if (!params.gaussian()) {
    grid.tail_coeff_ = grid.half_(grid.cut_index_) * std::pow(grid.x_cut_, 1.0 + params.alpha);
  }

  grid.slope_ = monotone_slopes(grid.half_.head(grid.cut_index_ + 1), grid.h_);
  grid.cum_ = Eigen::ArrayXd::Zero(grid.cut_index_ + 1);
  for (Eigen::Index j = 0; j < grid.cut_index_; ++j) {
    grid.cum_(j + 1) = grid.cum_(j) + hermite_integral(grid.half_(j), grid.slope_(j), grid.half_(j + 1),
                                                       grid.slope_(j + 1), grid.h_, 1.0);
  }

  grid.x_.resize(n_nodes + 1);
  grid.p_.resize(n_nodes + 1);
  for (Eigen::Index i = 0; i <= n_nodes; ++i) {
    const Eigen::Index j = i - half;
    grid.x_(i) = grid.h_ * static_cast<double>(j);
    grid.p_(i) = grid.half_(std::abs(j));
  }
  return grid;
}

DensityGrid build_default_density_grid(const StableParams& params) {
  params.validate();
  return build_density_grid(params, 400.0 * std::pow(params.nu, 1.0 / params.alpha), Eigen::Index{1} << 15);
}

double DensityGrid::unit_density(double x) const {
  if (params_.gaussian()) return gaussian_unit_density(params_, x);
  const double a = std::abs(x);
  if (a >= x_cut_) return tail_coeff_ * std::pow(a, -1.0 - params_.alpha);
  const double u = a / h_;
  const Eigen::Index j = std::min<Eigen::Index>(static_cast<Eigen::Index>(u), cut_index_ - 1);
  const double tau = u - static_cast<double>(j);
  const double t2 = tau * tau, t3 = t2 * tau;
  return (2 * t3 - 3 * t2 + 1) * half_(j) + (t3 - 2 * t2 + tau) * h_ * slope_(j) + (-2 * t3 + 3 * t2) * half_(j + 1) +
         (t3 - t2) * h_ * slope_(j + 1);
}

double DensityGrid::half_cumulative(double a) const {
  const double u = a / h_;
  const Eigen::Index j = std::min<Eigen::Index>(static_cast<Eigen::Index>(u), cut_index_ - 1);
  const double tau = u - static_cast<double>(j);
  return cum_(j) + hermite_integral(half_(j), slope_(j), half_(j + 1), slope_(j + 1), h_, tau);
}

double DensityGrid::unit_cdf(double x) const {
  if (params_.gaussian()) return gaussian_unit_cdf(params_, x);
  const double a = std::abs(x);
  double upper;  // P(X > a)
  if (a >= x_cut_) {
    upper = tail_coeff_ * std::pow(a, -params_.alpha) / params_.alpha;
  } else {
    upper = 0.5 - half_cumulative(a);
  }
  return x >= 0.0 ? 1.0 - upper : upper;
}

double DensityGrid::total_mass() const {
  const auto inner = half_.head(cut_index_ + 1);
  const double trapezoid = h_ * (inner.sum() - 0.5 * (inner(0) + inner(cut_index_)));
  double tail;
  if (params_.gaussian()) {
    tail = 1.0 - gaussian_unit_cdf(params_, x_cut_);
  } else {
    tail = tail_coeff_ * std::pow(x_cut_, -params_.alpha) / params_.alpha;
  }
  return 2.0 * (trapezoid + tail);
}

double density(const DensityGrid& grid, double t, double x) {
  require(t > 0.0, "density: t must be positive");
  const double shrink = std::pow(t, -1.0 / grid.params().alpha);
  return shrink * grid.unit_density(shrink * x);
}

double cdf(const DensityGrid& grid, double t, double x) {
  require(t > 0.0, "cdf: t must be positive");
  return grid.unit_cdf(std::pow(t, -1.0 / grid.params().alpha) * x);
}

double multistep_density(const DensityGrid& grid, std::span<const double> s, std::span<const double> x) {
  require(s.size() == x.size(), "multistep_density: time and space vectors differ in length");
  double prev_s = 0.0, prev_x = 0.0, value = 1.0;
  for (std::size_t j = 0; j < s.size(); ++j) {
    require(s[j] > prev_s, "multistep_density: times must be strictly increasing from 0");
    value *= density(grid, s[j] - prev_s, x[j] - prev_x);
    prev_s = s[j];
    prev_x = x[j];
  }
  return value;
}

double density_l2(const StableParams& params, double s) {
  params.validate();
  require(s > 0.0, "density_l2: s must be positive");
  return std::tgamma(1.0 + 1.0 / params.alpha) / (kPi * std::pow(2.0 * params.nu * s, 1.0 / params.alpha));
}

double sample_increment(const StableParams& params, double dt, Stream& rng) {
  require(dt > 0.0, "sample_increment: dt must be positive");
  if (params.gaussian()) return std::sqrt(2.0 * params.nu * dt) * standard_normal(rng);
  const double a = params.alpha;
  for (;;) {
    const double v = kPi * (uniform_open(rng) - 0.5);
    const double w = standard_exponential(rng);
    const double x = std::sin(a * v) / std::pow(std::cos(v), 1.0 / a) *
                     std::pow(std::cos((1.0 - a) * v) / w, (1.0 - a) / a);
    if (std::isfinite(x)) return params.scale(dt) * x;
  }
}

double PathSkeleton::at(double s) const {
  const auto* begin = times.data();
  const auto* end = begin + times.size();
  const auto* it = std::upper_bound(begin, end, s);
  const Eigen::Index k = std::max<Eigen::Index>(0, (it - begin) - 1);
  return positions(k);
}

PathSkeleton sample_path(const StableParams& params, double t, int n_steps, Stream& rng) {
  require(n_steps >= 1, "sample_path: n_steps must be >= 1");
  require(t > 0.0, "sample_path: t must be positive");
  PathSkeleton path;
  path.times = Eigen::ArrayXd::LinSpaced(n_steps + 1, 0.0, t);
  path.positions.resize(n_steps + 1);
  path.positions(0) = 0.0;
  const double dt = t / n_steps;
  for (int i = 1; i <= n_steps; ++i) path.positions(i) = path.positions(i - 1) + sample_increment(params, dt, rng);
  path.endpoint = path.positions(n_steps);
  return path;
}

BridgeStep bridge_step(const DensityGrid& grid, double from, double tau_before, double tau_after, double to) {
  require(tau_before > 0.0 && tau_after > 0.0, "bridge_step: both time gaps must be positive");
  const StableParams& params = grid.params();
  constexpr int kPerWindow = 256;
  constexpr int kBackbone = 64;

  const double tau_total = tau_before + tau_after;
  const double mode = from + (to - from) * tau_before / tau_total;
  const double windows[3][2] = {
      {from, params.scale(tau_before)},
      {to, params.scale(tau_after)},
      {mode, std::pow(params.nu * tau_before * tau_after / tau_total, 1.0 / params.alpha)},
  };
  std::vector<double> nodes;
  nodes.reserve(3 * kPerWindow + kBackbone);
  double lo = windows[0][0], hi = windows[0][0];
  for (const auto& w : windows) {
    const double a = w[0] - kWindowScales * w[1], b = w[0] + kWindowScales * w[1];
    lo = std::min(lo, a);
    hi = std::max(hi, b);
    for (int i = 0; i < kPerWindow; ++i) nodes.push_back(a + (b - a) * i / (kPerWindow - 1));
  }
  for (int i = 0; i < kBackbone; ++i) nodes.push_back(lo + (hi - lo) * i / (kBackbone - 1));
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());

  BridgeStep step;
  step.nodes = Eigen::Map<Eigen::ArrayXd>(nodes.data(), static_cast<Eigen::Index>(nodes.size()));
  const Eigen::ArrayXd f = step.nodes.unaryExpr([&](double y) {
    return density(grid, tau_before, y - from) * density(grid, tau_after, to - y);
  });
  step.cdf = Eigen::ArrayXd::Zero(f.size());
  for (Eigen::Index i = 1; i < f.size(); ++i) {
    step.cdf(i) = step.cdf(i - 1) + 0.5 * (f(i) + f(i - 1)) * (step.nodes(i) - step.nodes(i - 1));
  }
  step.normalizer = step.cdf(step.cdf.size() - 1);
  if (!(step.normalizer >= 1e-12)) {
    throw RuntimeFailure("bridge_step: conditional density normalizes below 1e-12");
  }
  step.cdf /= step.normalizer;
  return step;
}

double sample_bridge_step(const BridgeStep& step, Stream& rng) {
  const double u = uniform_open(rng);
  const auto* begin = step.cdf.data();
  const auto* end = begin + step.cdf.size();
  const Eigen::Index i = std::clamp<Eigen::Index>((std::upper_bound(begin, end, u) - begin) - 1, 0, step.cdf.size() - 2);
  const double span = step.cdf(i + 1) - step.cdf(i);
  const double frac = span > 0.0 ? (u - step.cdf(i)) / span : 0.5;
  return step.nodes(i) + frac * (step.nodes(i + 1) - step.nodes(i));
}

PathSkeleton sample_bridge(const DensityGrid& grid, double t, double x_end, int n_steps, Stream& rng,
                           BridgeMethod method) {
  require(n_steps >= 1, "sample_bridge: n_steps must be >= 1");
  require(t > 0.0, "sample_bridge: t must be positive");
  const StableParams& params = grid.params();
  if (method == BridgeMethod::Automatic) method = params.gaussian() ? BridgeMethod::Gaussian : BridgeMethod::Table;
  require(method != BridgeMethod::Gaussian || params.gaussian(), "sample_bridge: Gaussian bridge needs alpha = 2");

  PathSkeleton path;
  path.times = Eigen::ArrayXd::LinSpaced(n_steps + 1, 0.0, t);
  path.positions.resize(n_steps + 1);
  path.positions(0) = 0.0;
  path.is_bridge = true;
  path.endpoint = x_end;
  for (int i = 1; i < n_steps; ++i) {
    const double before = path.times(i) - path.times(i - 1);
    const double after = t - path.times(i);
    const double from = path.positions(i - 1);
    if (method == BridgeMethod::Gaussian) {
      const double mean = from + (x_end - from) * before / (before + after);
      const double var = 2.0 * params.nu * before * after / (before + after);
      path.positions(i) = mean + std::sqrt(var) * standard_normal(rng);
    } else {
      path.positions(i) = sample_bridge_step(bridge_step(grid, from, before, after, x_end), rng);
    }
  }
  path.positions(n_steps) = x_end;
  return path;
}

void write_density_csv(const DensityGrid& grid, std::ostream& out) {
  const auto old_precision = out.precision(17);
  out << "x,p\n";
  for (Eigen::Index i = 0; i < grid.nodes().size(); ++i) out << grid.nodes()(i) << ',' << grid.values()(i) << '\n';
  out.precision(old_precision);
}

}  // namespace sdp
