#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "sdp/rng.hpp"
#include "sdp/stable.hpp"

namespace sdp {

struct SpaceTimePoint {
  double s;  // time
  double y;  // space
};

/// A realized Poisson environment on (0, t_max] x [-half_width, half_width].
/// Points are kept sorted by time.
struct PoissonCloud {
  std::vector<SpaceTimePoint> points;
  double t_max = 0.0;
  double half_width = 0.0;
  double intensity = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  double area() const { return t_max * 2.0 * half_width; }
  std::size_t size() const { return points.size(); }
  /// The sub-cloud {s <= t}.
  PoissonCloud restricted(double t) const;
};

struct TubeSpec {
  double r = 1.0;
  void validate() const;
};

inline constexpr double kDefaultMaxExpectedPoints = 1e8;

PoissonCloud sample_cloud(double v, double t_max, double half_width, Stream& rng,
                          double max_expected = kDefaultMaxExpectedPoints);
PoissonCloud sample_cloud(double v, double t_max, double half_width, std::uint64_t seed, std::uint64_t stream,
                          double max_expected = kDefaultMaxExpectedPoints);

/// omega(V_t(X)): points (s, y) with s <= horizon and |y - X(s)| <= r/2, where X is
/// the right-continuous piecewise-constant extension of the skeleton.
/// The horizon defaults to the end of the path.
long tube_count(const PoissonCloud& cloud, const PathSkeleton& path, const TubeSpec& spec);
long tube_count(const PoissonCloud& cloud, const PathSkeleton& path, const TubeSpec& spec, double horizon);

/// Cloud bucketed by the slabs [s_k, s_{k+1}) of a fixed time grid and sorted in
/// space within each slab, so counting along a path on that grid costs
/// O(n_steps log(points per slab)).
class TubeIndex {
 public:
  TubeIndex(const PoissonCloud& cloud, const Eigen::ArrayXd& times);
  long count(const Eigen::ArrayXd& positions, double r) const;

 private:
  std::vector<std::size_t> offsets_;
  std::vector<double> ys_;
};

using PointFunction = std::function<double(std::span<const SpaceTimePoint>)>;

/// Sum of f over ordered m-tuples of pairwise distinct cloud points, m in {1, 2, 3}.
double factorial_measure(const PoissonCloud& cloud, const PointFunction& f, int m);

/// Symmetric integrand of order m for Wiener-Ito integrals. The break lists mark
/// lines where f may jump; quadrature panels are aligned with them.
struct WindowKernel {
  int order = 1;
  PointFunction f;
  std::vector<double> time_breaks;
  std::vector<double> space_breaks;
};

struct QuadratureOptions {
  double rel_tol = 1e-6;
  int max_level = 6;  // panels are split into at most 2^max_level pieces
};

/// v^m times the integral of f over the cloud window^m.
double integrate_intensity(const PoissonCloud& cloud, const WindowKernel& kernel, const QuadratureOptions& opts = {});

/// Integral of f * g over window^m against v^m for two kernels of equal order.
double integrate_product(const PoissonCloud& cloud, const WindowKernel& f, const WindowKernel& g,
                         const QuadratureOptions& opts = {});

/// m-th order compensated integral sum_k (-1)^{m-k} C(m,k) omega^(k) (x) v^(m-k) (f),
/// m in {0, 1, 2}. For m = 0 returns the constant f().
double wiener_ito(const PoissonCloud& cloud, const WindowKernel& kernel, const QuadratureOptions& opts = {});

/// CSV (s,y) preceded by one "# {json}" header line carrying v, t_max, L, seed, stream.
void write_cloud(const PoissonCloud& cloud, std::ostream& out);
PoissonCloud read_cloud(std::istream& in);

}  // namespace sdp
