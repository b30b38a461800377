#include "sdp/she.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <numbers>
#include <ostream>
#include <vector>

#include <fftw3.h>

#include "fft_setup.hpp"
#include "sdp/error.hpp"

namespace sdp {
namespace {

Eigen::Index next_pow2(Eigen::Index n) {
  Eigen::Index p = 1;
  while (p < n) p <<= 1;
  return p;
}

Eigen::Index on_lattice(double value, double step, const char* what) {
  const double q = value / step;
  const double n = std::round(q);
  if (std::abs(q - n) > 1e-9 * std::max(1.0, std::abs(q))) {
    throw ValidationError(std::string(what) + " is not a lattice point");
  }
  return static_cast<Eigen::Index>(n);
}

void check_stable(const Eigen::ArrayXd& values, const char* who) {
  if (!(values.abs().maxCoeff() <= kInstabilityLimit)) {
    throw RuntimeFailure(std::string(who) + ": solution exceeded 1e12, scheme unstable");
  }
}

void check_inputs(const SheSolver& solver, const NoiseGrid& noise, int K, int max_order) {
  require(K >= 0, "chaos order K must be non-negative");
  require(K <= max_order, "chaos order K exceeds the configured maximum");
  require(noise.xi.rows() == solver.grid().nx() && noise.xi.cols() == solver.grid().nt(),
          "noise grid does not match the solver grid");
}

}  // namespace

void SheGridSpec::validate() const {
  require(dt > 0.0 && dx > 0.0 && std::isfinite(dt) && std::isfinite(dx), "grid steps must be positive");
  require(t_max > 0.0 && x_max > 0.0, "grid extents must be positive");
  require(x_max >= dx, "x_max must cover at least one cell");
  require(std::abs(t_max / dt - std::round(t_max / dt)) <= 1e-9 * std::max(1.0, t_max / dt),
          "t_max must be a multiple of dt");
}

Eigen::Index SheGridSpec::nt() const { return static_cast<Eigen::Index>(std::llround(t_max / dt)); }

Eigen::Index SheGridSpec::half() const { return static_cast<Eigen::Index>(std::ceil(x_max / dx - 1e-9)); }

SheGridSpec default_she_grid(const StableParams& params, double t_max, double dx, double x_max) {
  params.validate();
  require(t_max > 0.0 && dx > 0.0, "t_max and dx must be positive");
  const double dt_max = std::pow(dx, params.alpha) / (4.0 * params.nu);
  const double steps = std::ceil(t_max / dt_max - 1e-9);
  SheGridSpec grid;
  grid.dx = dx;
  grid.t_max = t_max;
  grid.dt = t_max / steps;
  grid.x_max = x_max > 0.0 ? x_max : 12.0 * std::pow(2.0 * params.nu * t_max, 1.0 / params.alpha);
  grid.validate();
  return grid;
}

NoiseGrid sample_noise(const SheGridSpec& grid, Stream& rng, double max_cells) {
  grid.validate();
  const double cells = static_cast<double>(grid.nx()) * static_cast<double>(grid.nt());
  require(cells <= max_cells, "noise grid exceeds the memory cap");
  NoiseGrid noise;
  noise.grid = grid;
  noise.xi.resize(grid.nx(), grid.nt());
  const double sd = 1.0 / std::sqrt(grid.dt * grid.dx);
  double* out = noise.xi.data();
  const Eigen::Index n = noise.xi.size();
  // Box-Muller, both variates of each pair used.
  for (Eigen::Index i = 0; i < n; i += 2) {
    const double radius = sd * std::sqrt(-2.0 * std::log(uniform_open(rng)));
    const double angle = 2.0 * std::numbers::pi * uniform_open(rng);
    out[i] = radius * std::cos(angle);
    if (i + 1 < n) out[i + 1] = radius * std::sin(angle);
  }
  return noise;
}

NoiseGrid sample_noise(const SheGridSpec& grid, std::uint64_t seed, std::uint64_t stream, double max_cells) {
  Stream rng(seed, stream);
  NoiseGrid noise = sample_noise(grid, rng, max_cells);
  noise.seed = seed;
  noise.stream = stream;
  return noise;
}

double discrete_I1(const NoiseGrid& noise, const Eigen::ArrayXXd& g) {
  require(g.rows() == noise.xi.rows() && g.cols() == noise.xi.cols(), "discrete_I1: shape mismatch");
  return (g * noise.xi).sum() * noise.grid.dt * noise.grid.dx;
}

// r2c / c2r plans made once per solver and executed on per-thread buffers.
// FFTW_ESTIMATE keeps the chosen algorithm, and so the rounding, identical
// across runs.
struct SheSolver::Plans {
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;

  explicit Plans(int n) {
    detail::enable_threaded_planning();
    double* real = fftw_alloc_real(static_cast<std::size_t>(n));
    fftw_complex* freq = fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1));
    forward = fftw_plan_dft_r2c_1d(n, real, freq, FFTW_ESTIMATE);
    backward = fftw_plan_dft_c2r_1d(n, freq, real, FFTW_ESTIMATE);
    fftw_free(real);
    fftw_free(freq);
    if (!forward || !backward) throw RuntimeFailure("FFTW planning failed");
  }
  ~Plans() {
    fftw_destroy_plan(forward);
    fftw_destroy_plan(backward);
  }
  Plans(const Plans&) = delete;
  Plans& operator=(const Plans&) = delete;
};

struct SheSolver::Workspace::Impl {
  double* real = nullptr;
  fftw_complex* freq = nullptr;
  ~Impl() {
    fftw_free(real);
    fftw_free(freq);
  }
};

SheSolver::Workspace::Workspace(const SheSolver& solver) : impl_(std::make_unique<Impl>()) {
  impl_->real = fftw_alloc_real(static_cast<std::size_t>(solver.fft_size_));
  impl_->freq = fftw_alloc_complex(static_cast<std::size_t>(solver.fft_size_ / 2 + 1));
  if (!impl_->real || !impl_->freq) throw RuntimeFailure("FFT buffer allocation failed");
}

SheSolver::Workspace::~Workspace() = default;

SheSolver::SheSolver(const StableParams& params, const SheGridSpec& grid) : params_(params), grid_(grid) {
  params_.validate();
  grid_.validate();
  detail::enable_threaded_planning();
  const Eigen::Index nx = grid_.nx();

  // Lattice kernel by a fine Riemann sum over the Brillouin zone; the period
  // of the sum is >= 32 domain widths so wrap-around is negligible.
  const Eigen::Index m = next_pow2(32 * nx);
  std::vector<std::complex<double>> symbol(static_cast<std::size_t>(m));
  for (Eigen::Index k = 0; k < m; ++k) {
    const Eigen::Index freq = k <= m / 2 ? k : k - m;
    const double z = 2.0 * std::numbers::pi * static_cast<double>(freq) / (static_cast<double>(m) * grid_.dx);
    symbol[static_cast<std::size_t>(k)] = std::exp(-params_.nu * grid_.dt * std::pow(std::abs(z), params_.alpha));
  }
  std::vector<std::complex<double>> kernel;
  Eigen::FFT<double> fft;
  fft.inv(kernel, symbol);
  weights_.resize(2 * nx - 1);
  for (Eigen::Index d = -(nx - 1); d <= nx - 1; ++d) {
    weights_(d + nx - 1) = kernel[static_cast<std::size_t>((d + m) % m)].real();
  }

  fft_size_ = next_pow2(2 * nx - 1);
  std::vector<double> wrapped(static_cast<std::size_t>(fft_size_), 0.0);
  for (Eigen::Index d = -(nx - 1); d <= nx - 1; ++d) {
    wrapped[static_cast<std::size_t>((d + fft_size_) % fft_size_)] = weights_(d + nx - 1);
  }
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<std::complex<double>> half;
  fft.fwd(half, wrapped);
  spectrum_ = Eigen::Map<Eigen::ArrayXcd>(half.data(), static_cast<Eigen::Index>(half.size())).real() /
              static_cast<double>(fft_size_);
  plans_ = std::make_shared<const Plans>(static_cast<int>(fft_size_));

  Workspace ws(*this);
  Eigen::ArrayXd z = initial();
  for (Eigen::Index n = 0; n < grid_.nt(); ++n) propagate(z, ws);
  mass_loss_ = 1.0 - z.sum() * grid_.dx;
}

Eigen::ArrayXd SheSolver::initial() const {
  Eigen::ArrayXd z = Eigen::ArrayXd::Zero(grid_.nx());
  z(grid_.half()) = 1.0 / grid_.dx;
  return z;
}

void SheSolver::propagate(Eigen::ArrayXd& values, Workspace& ws) const {
  auto& w = *ws.impl_;
  const Eigen::Index nx = grid_.nx();
  std::copy(values.data(), values.data() + nx, w.real);
  std::fill(w.real + nx, w.real + fft_size_, 0.0);
  fftw_execute_dft_r2c(plans_->forward, w.real, w.freq);
  for (Eigen::Index k = 0; k < spectrum_.size(); ++k) {
    w.freq[k][0] *= spectrum_(k);
    w.freq[k][1] *= spectrum_(k);
  }
  fftw_execute_dft_c2r(plans_->backward, w.freq, w.real);
  std::copy(w.real, w.real + nx, values.data());
}

ChaosField chaos_field(const SheSolver& solver, const NoiseGrid& noise, double beta, int K, Eigen::Index steps,
                       int max_order) {
  check_inputs(solver, noise, K, max_order);
  const SheGridSpec& grid = solver.grid();
  if (steps < 0) steps = grid.nt();
  require(steps <= grid.nt(), "chaos_field: more steps than the noise grid holds");
  std::vector<Eigen::ArrayXd> f(static_cast<std::size_t>(K) + 1, Eigen::ArrayXd::Zero(grid.nx()));
  f[0] = solver.initial();
  SheSolver::Workspace ws(solver);
  const double coupling = beta * grid.dt;
  for (Eigen::Index n = 0; n < steps; ++n) {
    const auto xi = noise.xi.col(n);
    for (int k = K; k >= 1; --k) f[k] += coupling * f[k - 1] * xi;
    for (auto& term : f) solver.propagate(term, ws);
  }
  ChaosField out;
  out.terms.resize(K + 1, grid.nx());
  for (int k = 0; k <= K; ++k) {
    check_stable(f[k], "chaos_field");
    out.terms.row(k) = f[k].transpose();
  }
  return out;
}

double chaos_solve(const SheSolver& solver, const NoiseGrid& noise, double beta, int K, double t, double x,
                   int max_order) {
  const SheGridSpec& grid = solver.grid();
  require(t > 0.0, "chaos_solve: t must be positive");
  const Eigen::Index n = on_lattice(t, grid.dt, "chaos_solve: t");
  const Eigen::Index j = on_lattice(x, grid.dx, "chaos_solve: x") + grid.half();
  require(n <= grid.nt(), "chaos_solve: t beyond the grid");
  require(j >= 0 && j < grid.nx(), "chaos_solve: x outside the grid");
  return chaos_field(solver, noise, beta, K, n, max_order).terms.col(j).sum();
}

ChaosLine chaos_point_to_line(const SheSolver& solver, const NoiseGrid& noise, double beta, int K, int max_order) {
  const ChaosField field = chaos_field(solver, noise, beta, K, -1, max_order);
  ChaosLine out;
  out.terms = field.terms.rowwise().sum() * solver.grid().dx;
  out.total = out.terms.sum();
  return out;
}

SheSolution duhamel_solve(const SheSolver& solver, const NoiseGrid& noise, double beta) {
  check_inputs(solver, noise, 0, 0);
  const SheGridSpec& grid = solver.grid();
  SheSolution sol;
  sol.grid = grid;
  sol.params = solver.params();
  sol.beta = beta;
  sol.mass_loss = solver.mass_loss();
  sol.values.resize(grid.nx(), grid.nt() + 1);
  Eigen::ArrayXd z = solver.initial();
  sol.values.col(0) = z;
  SheSolver::Workspace ws(solver);
  const double coupling = beta * grid.dt;
  for (Eigen::Index n = 0; n < grid.nt(); ++n) {
    z *= 1.0 + coupling * noise.xi.col(n);
    solver.propagate(z, ws);
    check_stable(z, "duhamel_solve");
    sol.values.col(n + 1) = z;
  }
  return sol;
}

MomentSeries second_moment_series(const StableParams& params, double beta, int K) {
  params.validate();
  require(params.alpha > 1.05, "second_moment_series: alpha <= 1.05 is rejected (Gamma(1 - 1/alpha) blows up)");
  require(K >= 0 && K <= 50, "second_moment_series: K must lie in [0, 50]");
  require(std::isfinite(beta), "second_moment_series: beta must be finite");
  const double a = 1.0 - 1.0 / params.alpha;
  const double g = std::tgamma(a);
  const double c = density_l2(params, 1.0);
  const double peak = peak_density(params);
  MomentSeries s;
  s.alpha = params.alpha;
  s.nu = params.nu;
  s.beta = beta;
  s.terms.resize(K + 1);
  s.bound_terms.resize(K + 1);
  for (int k = 0; k <= K; ++k) {
    const double log_denominator = std::lgamma(k * a + 1.0);
    const double b2k = std::pow(beta * beta, k);
    s.terms(k) = b2k * std::exp(k * std::log(c * g) - log_denominator);
    s.bound_terms(k) = b2k * std::exp(k * std::log(peak * g) - log_denominator);
  }
  s.total = s.terms.sum();
  return s;
}

void write_solution_csv(const SheSolution& solution, std::ostream& out, Eigen::Index time_stride) {
  require(time_stride >= 1, "write_solution_csv: stride must be positive");
  const auto old_precision = out.precision(17);
  out << "t,x,Z\n";
  for (Eigen::Index n = 0; n < solution.values.cols(); n += time_stride) {
    const double t = static_cast<double>(n) * solution.grid.dt;
    for (Eigen::Index j = 0; j < solution.values.rows(); ++j) {
      out << t << ',' << solution.grid.x(j) << ',' << solution.values(j, n) << '\n';
    }
  }
  out.precision(old_precision);
}

}  // namespace sdp
