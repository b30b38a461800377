#include "sdp/poisson.hpp"

#include "json.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

#include "sdp/error.hpp"

namespace sdp {
namespace {

struct Rule {
  std::vector<double> nodes, weights;
};

// Composite 3-point Gauss-Legendre on [a, b] with panels split at the breaks,
// each panel cut into `pieces` equal parts. Nodes never sit on a break.
Rule panel_rule(double a, double b, const std::vector<double>& breaks, int pieces) {
  std::vector<double> edges{a};
  for (double x : breaks)
    if (x > a && x < b) edges.push_back(x);
  edges.push_back(b);
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  static constexpr std::array<double, 3> kGl = {-0.7745966692414834, 0.0, 0.7745966692414834};
  static constexpr std::array<double, 3> kGw = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
  Rule rule;
  for (std::size_t e = 0; e + 1 < edges.size(); ++e) {
    const double width = (edges[e + 1] - edges[e]) / pieces;
    for (int p = 0; p < pieces; ++p) {
      const double mid = edges[e] + (p + 0.5) * width;
      for (int q = 0; q < 3; ++q) {
        rule.nodes.push_back(mid + 0.5 * width * kGl[q]);
        rule.weights.push_back(0.5 * width * kGw[q]);
      }
    }
  }
  return rule;
}

// Integral of f(fixed..., z_1..z_free) over window^free using a product rule.
double product_integral(const PointFunction& f, std::span<const SpaceTimePoint> fixed, int free_points,
                        const Rule& time_rule, const Rule& space_rule) {
  std::array<SpaceTimePoint, 3> args{};
  std::copy(fixed.begin(), fixed.end(), args.begin());
  const std::size_t base = fixed.size();
  const std::span<const SpaceTimePoint> view(args.data(), base + free_points);
  if (free_points == 0) return f(view);

  double total = 0.0;
  const std::size_t nt = time_rule.nodes.size(), ny = space_rule.nodes.size();
  for (std::size_t i = 0; i < nt; ++i) {
    for (std::size_t j = 0; j < ny; ++j) {
      args[base] = {time_rule.nodes[i], space_rule.nodes[j]};
      const double w1 = time_rule.weights[i] * space_rule.weights[j];
      if (free_points == 1) {
        total += w1 * f(view);
        continue;
      }
      double inner = 0.0;
      for (std::size_t k = 0; k < nt; ++k) {
        for (std::size_t l = 0; l < ny; ++l) {
          args[base + 1] = {time_rule.nodes[k], space_rule.nodes[l]};
          inner += time_rule.weights[k] * space_rule.weights[l] * f(view);
        }
      }
      total += w1 * inner;
    }
  }
  return total;
}

double adaptive_integral(const PoissonCloud& cloud, const WindowKernel& kernel, std::span<const SpaceTimePoint> fixed,
                         int free_points, const QuadratureOptions& opts) {
  double previous = 0.0;
  for (int level = 0; level <= opts.max_level; ++level) {
    const int pieces = 1 << level;
    const Rule time_rule = panel_rule(0.0, cloud.t_max, kernel.time_breaks, pieces);
    const Rule space_rule = panel_rule(-cloud.half_width, cloud.half_width, kernel.space_breaks, pieces);
    const double value = product_integral(kernel.f, fixed, free_points, time_rule, space_rule);
    if (free_points == 0) return value;
    if (level > 0) {
      const double change = std::abs(value - previous);
      if (change == 0.0 || change <= opts.rel_tol * std::abs(value)) return value;
    }
    previous = value;
  }
  throw ValidationError("wiener_ito: quadrature did not reach the relative tolerance; grid too coarse");
}

void validate_kernel(const WindowKernel& kernel) {
  require(kernel.order >= 0 && kernel.order <= 2, "Wiener-Ito integrals are supported for m in {0, 1, 2}");
  require(static_cast<bool>(kernel.f), "kernel function is empty");
}

}  // namespace

void TubeSpec::validate() const { require(r > 0.0 && std::isfinite(r), "tube width r must be positive"); }

PoissonCloud PoissonCloud::restricted(double t) const {
  PoissonCloud out = *this;
  const auto end = std::upper_bound(out.points.begin(), out.points.end(), t,
                                    [](double value, const SpaceTimePoint& p) { return value < p.s; });
  out.points.erase(end, out.points.end());
  out.t_max = std::min(t_max, t);
  return out;
}

PoissonCloud sample_cloud(double v, double t_max, double half_width, Stream& rng, double max_expected) {
  require(v >= 0.0 && std::isfinite(v), "sample_cloud: intensity must be non-negative");
  require(t_max > 0.0 && half_width > 0.0, "sample_cloud: window extents must be positive");
  PoissonCloud cloud;
  cloud.t_max = t_max;
  cloud.half_width = half_width;
  cloud.intensity = v;
  const double mean = v * t_max * 2.0 * half_width;
  if (mean > max_expected) {
    std::ostringstream msg;
    msg << "sample_cloud: expected point count " << mean << " exceeds cap " << max_expected;
    throw ValidationError(msg.str());
  }
  if (mean == 0.0) return cloud;
  std::poisson_distribution<long> count_dist(mean);
  const long count = count_dist(rng);
  cloud.points.resize(static_cast<std::size_t>(count));
  for (auto& p : cloud.points) {
    p.s = t_max * (1.0 - uniform_open(rng));  // (0, t_max]
    p.y = half_width * (2.0 * uniform_open(rng) - 1.0);
  }
  std::sort(cloud.points.begin(), cloud.points.end(),
            [](const SpaceTimePoint& a, const SpaceTimePoint& b) { return a.s < b.s || (a.s == b.s && a.y < b.y); });
  return cloud;
}

PoissonCloud sample_cloud(double v, double t_max, double half_width, std::uint64_t seed, std::uint64_t stream,
                          double max_expected) {
  Stream rng(seed, stream);
  PoissonCloud cloud = sample_cloud(v, t_max, half_width, rng, max_expected);
  cloud.seed = seed;
  cloud.stream = stream;
  return cloud;
}

long tube_count(const PoissonCloud& cloud, const PathSkeleton& path, const TubeSpec& spec) {
  return tube_count(cloud, path, spec, path.horizon());
}

long tube_count(const PoissonCloud& cloud, const PathSkeleton& path, const TubeSpec& spec, double horizon) {
  spec.validate();
  const double half = 0.5 * spec.r;
  long count = 0;
  for (const auto& p : cloud.points) {
    if (p.s > horizon) break;
    if (std::abs(p.y - path.at(p.s)) <= half) ++count;
  }
  return count;
}

TubeIndex::TubeIndex(const PoissonCloud& cloud, const Eigen::ArrayXd& times) {
  const Eigen::Index slabs = times.size();
  const double horizon = times(slabs - 1);
  const auto* tb = times.data();
  const auto* te = tb + slabs;
  std::vector<std::size_t> slab_of;
  slab_of.reserve(cloud.points.size());
  offsets_.assign(static_cast<std::size_t>(slabs) + 1, 0);
  for (const auto& p : cloud.points) {
    if (p.s > horizon) break;
    const auto k = static_cast<std::size_t>((std::upper_bound(tb, te, p.s) - tb) - 1);
    slab_of.push_back(k);
    ++offsets_[k + 1];
  }
  for (std::size_t k = 1; k < offsets_.size(); ++k) offsets_[k] += offsets_[k - 1];
  ys_.resize(slab_of.size());
  std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
  for (std::size_t i = 0; i < slab_of.size(); ++i) ys_[fill[slab_of[i]]++] = cloud.points[i].y;
  for (std::size_t k = 0; k + 1 < offsets_.size(); ++k) {
    std::sort(ys_.begin() + static_cast<std::ptrdiff_t>(offsets_[k]),
              ys_.begin() + static_cast<std::ptrdiff_t>(offsets_[k + 1]));
  }
}

long TubeIndex::count(const Eigen::ArrayXd& positions, double r) const {
  const double half = 0.5 * r;
  long total = 0;
  for (std::size_t k = 0; k + 1 < offsets_.size(); ++k) {
    const auto first = ys_.begin() + static_cast<std::ptrdiff_t>(offsets_[k]);
    const auto last = ys_.begin() + static_cast<std::ptrdiff_t>(offsets_[k + 1]);
    if (first == last) continue;
    const double x = positions(static_cast<Eigen::Index>(k));
    total += std::upper_bound(first, last, x + half) - std::lower_bound(first, last, x - half);
  }
  return total;
}

double factorial_measure(const PoissonCloud& cloud, const PointFunction& f, int m) {
  require(m >= 1 && m <= 3, "factorial_measure: m must be 1, 2 or 3");
  const auto& pts = cloud.points;
  const std::size_t n = pts.size();
  std::array<SpaceTimePoint, 3> args{};
  const std::span<const SpaceTimePoint> view(args.data(), static_cast<std::size_t>(m));
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    args[0] = pts[i];
    if (m == 1) {
      total += f(view);
      continue;
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      args[1] = pts[j];
      if (m == 2) {
        total += f(view);
        continue;
      }
      for (std::size_t k = 0; k < n; ++k) {
        if (k == i || k == j) continue;
        args[2] = pts[k];
        total += f(view);
      }
    }
  }
  return total;
}

double integrate_intensity(const PoissonCloud& cloud, const WindowKernel& kernel, const QuadratureOptions& opts) {
  validate_kernel(kernel);
  return std::pow(cloud.intensity, kernel.order) * adaptive_integral(cloud, kernel, {}, kernel.order, opts);
}

double integrate_product(const PoissonCloud& cloud, const WindowKernel& f, const WindowKernel& g,
                         const QuadratureOptions& opts) {
  require(f.order == g.order, "integrate_product: kernels must have equal order");
  WindowKernel product;
  product.order = f.order;
  product.f = [&](std::span<const SpaceTimePoint> x) { return f.f(x) * g.f(x); };
  product.time_breaks = f.time_breaks;
  product.time_breaks.insert(product.time_breaks.end(), g.time_breaks.begin(), g.time_breaks.end());
  product.space_breaks = f.space_breaks;
  product.space_breaks.insert(product.space_breaks.end(), g.space_breaks.begin(), g.space_breaks.end());
  return integrate_intensity(cloud, product, opts);
}

double wiener_ito(const PoissonCloud& cloud, const WindowKernel& kernel, const QuadratureOptions& opts) {
  validate_kernel(kernel);
  const int m = kernel.order;
  const double v = cloud.intensity;
  if (m == 0) return kernel.f({});
  if (m == 1) return factorial_measure(cloud, kernel.f, 1) - integrate_intensity(cloud, kernel, opts);

  // m = 2: omega^(2)(f) - 2 sum_i v int f(p_i, z) dz + v^2 int int f.
  double mixed = 0.0;
  for (const auto& p : cloud.points) {
    const SpaceTimePoint fixed[1] = {p};
    mixed += v * adaptive_integral(cloud, kernel, fixed, 1, opts);
  }
  return factorial_measure(cloud, kernel.f, 2) - 2.0 * mixed + integrate_intensity(cloud, kernel, opts);
}

void write_cloud(const PoissonCloud& cloud, std::ostream& out) {
  const nlohmann::json header = {{"v", cloud.intensity}, {"t_max", cloud.t_max}, {"L", cloud.half_width},
                                 {"seed", cloud.seed},   {"stream", cloud.stream}, {"count", cloud.points.size()}};
  const auto old_precision = out.precision(17);
  out << "# " << header.dump() << "\ns,y\n";
  for (const auto& p : cloud.points) out << p.s << ',' << p.y << '\n';
  out.precision(old_precision);
}

PoissonCloud read_cloud(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("# ", 0) != 0) throw RuntimeFailure("read_cloud: missing JSON header");
  const auto header = nlohmann::json::parse(line.substr(2));
  PoissonCloud cloud;
  cloud.intensity = header.at("v").get<double>();
  cloud.t_max = header.at("t_max").get<double>();
  cloud.half_width = header.at("L").get<double>();
  cloud.seed = header.at("seed").get<std::uint64_t>();
  cloud.stream = header.at("stream").get<std::uint64_t>();
  std::getline(in, line);  // column names
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw RuntimeFailure("read_cloud: malformed row '" + line + "'");
    cloud.points.push_back({std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1))});
  }
  if (cloud.points.size() != header.at("count").get<std::size_t>()) {
    throw RuntimeFailure("read_cloud: row count does not match header");
  }
  return cloud;
}

}  // namespace sdp
