#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "sdp/error.hpp"
#include "sdp/stable.hpp"
#include "sdp/stats.hpp"

namespace {

constexpr double kPi = std::numbers::pi;

// Gaussian member of the family: variance 2 nu t.
double gauss(double t, double x, double nu = 1.0) {
  return std::exp(-x * x / (4.0 * nu * t)) / std::sqrt(4.0 * kPi * nu * t);
}

// p(t, 0) = Gamma(1 + 1/alpha) / (pi (nu t)^{1/alpha}) from inverting the characteristic function at 0.
double peak(double alpha, double nu, double t) {
  return std::tgamma(1.0 + 1.0 / alpha) / (kPi * std::pow(nu * t, 1.0 / alpha));
}

// Independent oracle for alpha < 2: direct trapezoid of the inversion integral (1/pi) int_0^inf cos(zx) e^{-z^a} dz.
double inversion(double alpha, double x) {
  const double h = 1e-3;
  double sum = 0.5;
  for (int k = 1; k * h < 40.0; ++k) {
    const double z = k * h;
    sum += std::cos(z * x) * std::exp(-std::pow(z, alpha));
  }
  return sum * h / kPi;
}

const sdp::DensityGrid& grid15() {
  static const sdp::DensityGrid g = sdp::build_default_density_grid({1.5, 1.0});
  return g;
}

}  // namespace

TEST_SUITE("stable_process") {
  TEST_CASE("parameter validation") {
    CHECK_THROWS_AS(sdp::StableParams({1.0, 1.0}).validate(), sdp::ValidationError);
    CHECK_THROWS_AS(sdp::StableParams({2.1, 1.0}).validate(), sdp::ValidationError);
    CHECK_THROWS_AS(sdp::StableParams({1.5, 0.0}).validate(), sdp::ValidationError);
    CHECK_NOTHROW(sdp::StableParams({1.5, 2.0}).validate());
  }

  TEST_CASE("frozen oracle values") {
    const auto g2 = sdp::build_default_density_grid({2.0, 1.0});
    CHECK(sdp::density(g2, 1.0, 0.0) == doctest::Approx(0.2820948).epsilon(1e-7));
    CHECK(sdp::density(g2, 4.0, 0.0) == doctest::Approx(0.1410474).epsilon(1e-7));
    CHECK(sdp::density_l2({2.0, 1.0}, 1.0) == doctest::Approx(0.1994711).epsilon(1e-7));
    CHECK(std::pow(sdp::peak_density({2.0, 1.0}), 2) == doctest::Approx(0.0795775).epsilon(1e-7));
  }

  TEST_CASE("alpha = 2 matches the Gaussian everywhere") {
    const auto g2 = sdp::build_default_density_grid({2.0, 1.0});
    double worst = 0.0;
    for (double x = -15.0; x <= 15.0; x += 0.0137) worst = std::max(worst, std::abs(g2.unit_density(x) - gauss(1, x)));
    CHECK(worst <= 1e-8);
  }

  TEST_CASE("alpha = 1.5 table against direct inversion") {
    for (double x : {0.0, 0.3, 1.0, 2.5, 5.0}) {
      CHECK(grid15().unit_density(x) == doctest::Approx(inversion(1.5, x)).epsilon(1e-5));
    }
    CHECK(grid15().unit_density(0.0) == doctest::Approx(peak(1.5, 1.0, 1.0)).epsilon(1e-8));
    CHECK(sdp::peak_density({1.5, 1.0}) == doctest::Approx(peak(1.5, 1.0, 1.0)).epsilon(1e-12));
  }

  TEST_CASE("table invariants") {
    for (double alpha : {1.2, 1.5, 1.8, 2.0}) {
      CAPTURE(alpha);
      const auto g = sdp::build_default_density_grid({alpha, 1.0});
      CHECK((g.values() >= 0.0).all());
      const auto n = g.values().size();
      CHECK((g.values() - g.values().reverse()).abs().maxCoeff() == 0.0);
      CHECK(std::abs(g.total_mass() - 1.0) <= 1e-6);
      CHECK(g.nodes()(n / 2) == 0.0);
    }
  }

  TEST_CASE("tail continuation follows the power law") {
    const auto& g = grid15();
    const double c = sdp::tail_constant({1.5, 1.0});
    for (double x : {60.0, 200.0, 1000.0}) CHECK(g.unit_density(x) * std::pow(x, 2.5) == doctest::Approx(c).epsilon(0.02));
  }

  TEST_CASE("scaling identity is exact") {
    const auto& g = grid15();
    for (double t : {0.01, 0.5, 3.0, 100.0}) {
      for (double x : {0.0, 0.7, -4.0}) {
        const double s = std::pow(t, 1.0 / 1.5);
        CHECK(sdp::density(g, t, x) == doctest::Approx(g.unit_density(x / s) / s).epsilon(1e-14));
      }
    }
  }

  TEST_CASE("nu enters through the time scale") {
    const auto g = sdp::build_default_density_grid({1.5, 2.0});
    CHECK(sdp::density(g, 1.0, 0.4) == doctest::Approx(sdp::density(grid15(), 2.0, 0.4)).epsilon(1e-6));
  }

  TEST_CASE("cdf is consistent with the density") {
    const auto& g = grid15();
    CHECK(sdp::cdf(g, 1.0, 0.0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(sdp::cdf(g, 1.0, 2.0) + sdp::cdf(g, 1.0, -2.0) == doctest::Approx(1.0).epsilon(1e-10));
    const double h = 1e-4;
    for (double x : {-3.0, 0.5, 7.0}) {
      const double deriv = (sdp::cdf(g, 1.0, x + h) - sdp::cdf(g, 1.0, x - h)) / (2 * h);
      CHECK(deriv == doctest::Approx(sdp::density(g, 1.0, x)).epsilon(1e-5));
    }
  }

  TEST_CASE("Chapman-Kolmogorov") {
    for (double alpha : {1.5, 2.0}) {
      const auto g = alpha == 2.0 ? sdp::build_default_density_grid({2.0, 1.0}) : grid15();
      const double x = 0.8;
      double sum = 0.0;
      const double h = 0.005;
      for (double y = -200.0; y <= 200.0; y += h) sum += sdp::density(g, 0.4, y) * sdp::density(g, 0.6, x - y);
      CHECK(sum * h == doctest::Approx(sdp::density(g, 1.0, x)).epsilon(1e-4));
    }
  }

  TEST_CASE("density_l2 equals p(2s, 0) and stays below p(s, 0)") {
    for (double alpha : {1.3, 1.5, 2.0}) {
      for (double s : {0.1, 1.0, 10.0}) {
        CHECK(sdp::density_l2({alpha, 1.0}, s) == doctest::Approx(peak(alpha, 1.0, 2 * s)).epsilon(1e-6));
        CHECK(sdp::density_l2({alpha, 1.0}, s) <= peak(alpha, 1.0, s));
      }
    }
  }

  TEST_CASE("increments match the density") {
    const auto& g = grid15();
    sdp::Stream rng(21, 0);
    Eigen::ArrayXd draws(100000);
    for (auto& d : draws) d = sdp::sample_increment({1.5, 1.0}, 1.0, rng);
    CHECK(sdp::ks_statistic(draws, [&](double x) { return sdp::cdf(g, 1.0, x); }) < 0.01);
  }

  TEST_CASE("path marginal and grid refinement") {
    const auto& g = grid15();
    const double t = 2.0;
    for (int steps : {1, 16}) {
      sdp::Stream rng(22, static_cast<std::uint64_t>(steps));
      Eigen::ArrayXd ends(20000);
      for (auto& e : ends) {
        const auto path = sdp::sample_path({1.5, 1.0}, t, steps, rng);
        REQUIRE(path.positions(0) == 0.0);
        e = path.positions(steps);
      }
      CHECK(sdp::ks_statistic(ends, [&](double x) { return sdp::cdf(g, t, x); }) < 0.015);
    }
  }

  TEST_CASE("path skeleton is right-continuous and piecewise constant") {
    sdp::Stream rng(23, 0);
    const auto path = sdp::sample_path({1.5, 1.0}, 1.0, 4, rng);
    CHECK((path.times.tail(4) - path.times.head(4) > 0.0).all());
    CHECK(path.at(0.25) == path.positions(1));
    CHECK(path.at(0.2499) == path.positions(0));
    CHECK(path.at(1.0) == path.positions(4));
  }

  TEST_CASE("bridges end at the endpoint and have the right midpoint law") {
    for (double alpha : {1.5, 2.0}) {
      CAPTURE(alpha);
      const auto g = alpha == 2.0 ? sdp::build_default_density_grid({2.0, 1.0}) : grid15();
      const double t = 1.0, x_end = 1.2;
      sdp::Stream rng(24, 0);
      Eigen::ArrayXd mid(5000);
      for (auto& m : mid) {
        const auto b = sdp::sample_bridge(g, t, x_end, 2, rng);
        REQUIRE(b.is_bridge);
        REQUIRE(b.positions(2) == x_end);
        m = b.positions(1);
      }
      // Midpoint density p(1/2, y) p(1/2, x - y) / p(1, x), integrated numerically.
      auto mid_cdf = [&](double y) {
        double sum = 0.0;
        const double lo = -60.0, h = 0.002;
        for (double u = lo; u < y; u += h) sum += sdp::density(g, 0.5, u) * sdp::density(g, 0.5, x_end - u);
        return sum * h / sdp::density(g, t, x_end);
      };
      Eigen::ArrayXd sorted = mid;
      std::sort(sorted.begin(), sorted.end());
      double worst = 0.0;
      for (double q : {0.1, 0.25, 0.5, 0.75, 0.9}) {
        const double y = sorted(static_cast<Eigen::Index>(q * (sorted.size() - 1)));
        worst = std::max(worst, std::abs(mid_cdf(y) - q));
      }
      CHECK(worst < 0.03);
    }
  }

  TEST_CASE("density CSV export") {
    std::ostringstream out;
    sdp::write_density_csv(grid15(), out);
    std::istringstream in(out.str());
    std::string header;
    std::getline(in, header);
    CHECK(header == "x,p");
    long rows = 0;
    for (std::string line; std::getline(in, line);) ++rows;
    CHECK(rows == grid15().nodes().size());
  }
}
