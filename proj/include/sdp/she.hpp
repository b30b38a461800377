#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <vector>

#include "sdp/rng.hpp"
#include "sdp/stable.hpp"

namespace sdp {

/// Space-time lattice x_j = (j - half) dx, t_n = n dt, with x = 0 a node.
struct SheGridSpec {
  double dt = 0.0;
  double dx = 0.0;
  double t_max = 1.0;
  double x_max = 0.0;

  void validate() const;
  Eigen::Index nt() const;
  Eigen::Index half() const;
  Eigen::Index nx() const { return 2 * half() + 1; }
  double x(Eigen::Index j) const { return static_cast<double>(j - half()) * dx; }
};

/// dt = dx^alpha / (4 nu) shrunk to divide t_max; x_max = 12 (2 nu t_max)^{1/alpha} unless given.
SheGridSpec default_she_grid(const StableParams& params, double t_max, double dx = 0.1, double x_max = 0.0);

inline constexpr double kDefaultNoiseCellCap = 5e7;

/// Discrete white noise: xi(j, n) on cell (x_j, t_n), i.i.d. N(0, 1/(dt dx)).
/// Column n holds one time slice.
struct NoiseGrid {
  SheGridSpec grid;
  Eigen::ArrayXXd xi;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
};

NoiseGrid sample_noise(const SheGridSpec& grid, Stream& rng, double max_cells = kDefaultNoiseCellCap);
NoiseGrid sample_noise(const SheGridSpec& grid, std::uint64_t seed, std::uint64_t stream,
                       double max_cells = kDefaultNoiseCellCap);

/// sum g xi dt dx for g laid out like the noise (nx by nt).
double discrete_I1(const NoiseGrid& noise, const Eigen::ArrayXXd& g);

/// Heat-semigroup propagator on the lattice. The one-step kernel has symbol
/// exp(-nu dt |k|^alpha) on the Brillouin zone |k| <= pi/dx, so n steps give
/// exactly the symbol at n dt. Mass crossing +-x_max is absorbed.
class SheSolver {
 public:
  SheSolver(const StableParams& params, const SheGridSpec& grid);

  const StableParams& params() const { return params_; }
  const SheGridSpec& grid() const { return grid_; }
  /// Weights w_d, d = -(nx-1)..nx-1, stored at d + nx - 1. The band-limited symbol
  /// leaves small oscillating negative weights (about 1% of the mass) and a tail
  /// deficit beyond the stencil.
  const Eigen::ArrayXd& step_weights() const { return weights_; }
  /// 1 - dx sum of the deterministic solution at t_max.
  double mass_loss() const { return mass_loss_; }
  /// delta_0 as 1/dx in the centre cell.
  Eigen::ArrayXd initial() const;

  class Workspace;
  /// values <- sum_y w(x - y) values(y).
  void propagate(Eigen::ArrayXd& values, Workspace& ws) const;

 private:
  struct Plans;

  StableParams params_;
  SheGridSpec grid_;
  Eigen::Index fft_size_ = 0;
  Eigen::ArrayXd weights_;
  Eigen::ArrayXd spectrum_;  // half spectrum of the (symmetric) wrapped weights, scaled by 1/fft_size
  std::shared_ptr<const Plans> plans_;
  double mass_loss_ = 0.0;
};

/// Per-thread FFT buffers for SheSolver::propagate.
class SheSolver::Workspace {
 public:
  explicit Workspace(const SheSolver& solver);
  ~Workspace();
  Workspace(const Workspace&) = delete;
  Workspace& operator=(const Workspace&) = delete;

 private:
  friend class SheSolver;
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

inline constexpr int kDefaultMaxChaosOrder = 8;

/// Chaos terms F_0..F_K at the final time, one row per order.
struct ChaosField {
  Eigen::ArrayXXd terms;  // (K + 1) x nx
  Eigen::ArrayXd total() const { return terms.colwise().sum(); }
};

/// Strictly causal recursion F_k(t + dt) = C(F_k(t) + beta F_{k-1}(t) xi(t) dt),
/// F_0(0) = delta_0. Runs `steps` steps (default: the whole noise grid).
ChaosField chaos_field(const SheSolver& solver, const NoiseGrid& noise, double beta, int K, Eigen::Index steps = -1,
                       int max_order = kDefaultMaxChaosOrder);

/// sum_{k <= K} F_k(t, x) at the lattice point nearest (t, x); throws if (t, x) is off-grid.
double chaos_solve(const SheSolver& solver, const NoiseGrid& noise, double beta, int K, double t, double x,
                   int max_order = kDefaultMaxChaosOrder);

struct ChaosLine {
  double total = 0.0;
  Eigen::ArrayXd terms;  // dx sum_x F_k(t_max, x)
};

/// dx sum_x of the chaos field at t_max.
ChaosLine chaos_point_to_line(const SheSolver& solver, const NoiseGrid& noise, double beta, int K,
                              int max_order = kDefaultMaxChaosOrder);

struct SheSolution {
  SheGridSpec grid;
  StableParams params;
  double beta = 0.0;
  Eigen::ArrayXXd values;  // nx x (nt + 1), column n at t_n
  double mass_loss = 0.0;
};

inline constexpr double kInstabilityLimit = 1e12;

/// Z(t + dt) = C(Z(t) (1 + beta xi(t) dt)), Z(0) = delta_0.
SheSolution duhamel_solve(const SheSolver& solver, const NoiseGrid& noise, double beta);

/// sum_k beta^{2k} c^k Gamma(1-1/alpha)^k / Gamma(k(1-1/alpha)+1) with c = int p(1,x)^2 dx,
/// and the same series with c replaced by the peak density.
struct MomentSeries {
  double alpha = 0.0;
  double nu = 0.0;
  double beta = 0.0;
  Eigen::ArrayXd terms;
  Eigen::ArrayXd bound_terms;
  double total = 0.0;
};

MomentSeries second_moment_series(const StableParams& params, double beta, int K);

/// Rows (t, x, Z) for every time slice that is a multiple of `time_stride`.
void write_solution_csv(const SheSolution& solution, std::ostream& out, Eigen::Index time_stride = 1);

}  // namespace sdp
