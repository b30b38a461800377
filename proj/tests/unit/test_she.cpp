#include <cmath>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "sdp/error.hpp"
#include "sdp/she.hpp"
#include "sdp/stats.hpp"

namespace {

// k = 1 coefficient of the second-moment series: beta^2 int_0^1 int p(s,x)^2 dx ds = beta^2 int_0^1 p(2s, 0) ds.
double first_order_oracle(double alpha, double beta) {
  const double c = std::tgamma(1.0 + 1.0 / alpha) / (std::numbers::pi * std::pow(2.0, 1.0 / alpha));
  return beta * beta * c / (1.0 - 1.0 / alpha);
}

// The full series, summed independently of the library.
double series_oracle(double alpha, double beta, int K) {
  const double c = std::tgamma(1.0 + 1.0 / alpha) / (std::numbers::pi * std::pow(2.0, 1.0 / alpha));
  const double a = 1.0 - 1.0 / alpha;
  double sum = 0.0;
  for (int k = 0; k <= K; ++k) sum += std::pow(beta * beta * c * std::tgamma(a), k) / std::tgamma(k * a + 1.0);
  return sum;
}

struct Setup {
  sdp::SheGridSpec grid;
  sdp::SheSolver solver;
  Setup(double alpha, double dx, double t = 1.0)
      : grid(sdp::default_she_grid({alpha, 1.0}, t, dx)), solver({alpha, 1.0}, grid) {}
};

}  // namespace

TEST_SUITE("she_solver") {
  TEST_CASE("grid layout") {
    const auto g = sdp::default_she_grid({1.5, 1.0}, 1.0, 0.1);
    CHECK(g.dt <= std::pow(0.1, 1.5) / 4.0 + 1e-15);
    CHECK(static_cast<double>(g.nt()) * g.dt == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(g.x(g.half()) == 0.0);
    CHECK(g.x_max >= 12.0 * std::pow(2.0, 1.0 / 1.5));
    sdp::SheGridSpec bad = g;
    bad.dx = -1.0;
    CHECK_THROWS_AS(bad.validate(), sdp::ValidationError);
  }

  TEST_CASE("frozen series values and series oracle") {
    CHECK(sdp::second_moment_series({2.0, 1.0}, 0.5, 6).total == doctest::Approx(1.108109).epsilon(1e-5));
    CHECK(sdp::second_moment_series({2.0, 1.0}, 0.25, 6).total == doctest::Approx(1.025430).epsilon(1e-5));
    for (double alpha : {1.5, 2.0}) {
      for (double beta : {0.25, 0.5}) {
        const auto s = sdp::second_moment_series({alpha, 1.0}, beta, 10);
        CHECK(s.total == doctest::Approx(series_oracle(alpha, beta, 10)).epsilon(1e-12));
        CHECK(s.terms(1) == doctest::Approx(first_order_oracle(alpha, beta)).epsilon(1e-4));
      }
    }
  }

  TEST_CASE("series terms are nonnegative, partial sums increase, bound dominates") {
    const auto s = sdp::second_moment_series({1.5, 1.0}, 0.5, 12);
    CHECK((s.terms >= 0.0).all());
    CHECK((s.bound_terms >= s.terms).all());
    CHECK(s.terms(0) == 1.0);
    double partial = 0.0;
    for (double term : s.terms) {
      const double next = partial + term;
      CHECK(next >= partial);
      partial = next;
    }
    CHECK_THROWS_AS(sdp::second_moment_series({1.02, 1.0}, 0.5, 6), sdp::ValidationError);
  }

  TEST_CASE("step weights form a symmetric sub-probability kernel") {
    const Setup gauss(2.0, 0.1);
    CHECK(std::abs(gauss.solver.step_weights().sum() - 1.0) < 1e-6);
    // At alpha < 2 the stencil drops the power-law tail beyond its reach.
    const Setup s(1.5, 0.1);
    const auto& w = s.solver.step_weights();
    const double reach = (static_cast<double>(s.grid.nx()) - 0.5) * s.grid.dx;
    const double tail = 2.0 * sdp::tail_constant({1.5, 1.0}) * s.grid.dt / (1.5 * std::pow(reach, 1.5));
    CHECK(1.0 - w.sum() >= 0.0);
    CHECK(1.0 - w.sum() <= 2.0 * tail);
    CHECK(-(w < 0.0).select(w, 0.0).sum() < 0.02);
    CHECK((w - w.reverse()).abs().maxCoeff() < 1e-15);
  }

  TEST_CASE("beta = 0 reproduces the heat kernel") {
    for (double alpha : {1.5, 2.0}) {
      CAPTURE(alpha);
      const Setup s(alpha, 0.1);
      const auto grid = sdp::build_default_density_grid({alpha, 1.0});
      const auto noise = sdp::sample_noise(s.grid, 1, 0);
      const auto sol = sdp::duhamel_solve(s.solver, noise, 0.0);
      const auto field = sdp::chaos_field(s.solver, noise, 0.0, 3);
      double worst = 0.0;
      for (Eigen::Index j = 0; j < s.grid.nx(); ++j) {
        const double x = s.grid.x(j);
        if (std::abs(x) > s.grid.x_max / 2) continue;
        const double p = sdp::density(grid, 1.0, x);
        worst = std::max(worst, std::abs(sol.values(j, s.grid.nt()) - p) / p);
        CHECK(field.total()(j) == doctest::Approx(sol.values(j, s.grid.nt())).epsilon(1e-10));
      }
      CHECK(worst <= 0.02);
      CHECK(s.solver.mass_loss() < 0.01);
    }
  }

  TEST_CASE("noise moments") {
    const Setup s(2.0, 0.2);
    const auto noise = sdp::sample_noise(s.grid, 2, 0);
    const double n = static_cast<double>(noise.xi.size());
    const double var = 1.0 / (s.grid.dt * s.grid.dx);
    CHECK(std::abs(noise.xi.mean()) < 3.0 * std::sqrt(var / n));
    CHECK(std::abs((noise.xi.square().mean() - var) / var) < 3.0 * std::sqrt(2.0 / n));
    CHECK(noise.xi.rows() == s.grid.nx());
    CHECK(noise.xi.cols() == s.grid.nt());
    CHECK_THROWS_AS(sdp::sample_noise(s.grid, 2, 0, 100.0), sdp::ValidationError);
  }

  TEST_CASE("noise is replayable by seed") {
    const Setup s(2.0, 0.2);
    CHECK((sdp::sample_noise(s.grid, 3, 5).xi == sdp::sample_noise(s.grid, 3, 5).xi).all());
    CHECK((sdp::sample_noise(s.grid, 3, 5).xi != sdp::sample_noise(s.grid, 3, 6).xi).any());
  }

  TEST_CASE("discrete first-order integral: isometry and polarization") {
    const Setup s(2.0, 0.25);
    const auto nx = s.grid.nx(), nt = s.grid.nt();
    Eigen::ArrayXXd g = Eigen::ArrayXXd::Zero(nx, nt), h = g;
    for (Eigen::Index n = 0; n < nt; ++n) {
      for (Eigen::Index j = 0; j < nx; ++j) {
        const double x = s.grid.x(j);
        g(j, n) = std::abs(x) <= 1.0 ? 1.0 : 0.0;
        h(j, n) = x >= 0.0 && x <= 2.0 ? 1.0 : 0.0;
      }
    }
    const double cell = s.grid.dt * s.grid.dx;
    const double g2 = g.square().sum() * cell, gh = (g * h).sum() * cell;
    const int reps = 10000;
    Eigen::ArrayXd ig(reps), ih(reps);
    for (int k = 0; k < reps; ++k) {
      const auto noise = sdp::sample_noise(s.grid, 4, k);
      ig(k) = sdp::discrete_I1(noise, g);
      ih(k) = sdp::discrete_I1(noise, h);
    }
    CHECK(sdp::sample_variance(ig) == doctest::Approx(g2).epsilon(0.05));
    const auto cov = sdp::batch_mean(Eigen::ArrayXd(ig * ih));
    CHECK(std::abs(cov.value - gh) < 3.0 * cov.se);
  }

  TEST_CASE("mean preservation, orthogonality and second moment at small scale") {
    const Setup s(2.0, 0.2);
    const double beta = 0.5;
    const int reps = 10000;
    const auto grid = sdp::build_default_density_grid({2.0, 1.0});
    Eigen::ArrayXd z0(reps), f1(reps), f2(reps), line(reps);
    for (int k = 0; k < reps; ++k) {
      const auto noise = sdp::sample_noise(s.grid, 5, k);
      const auto field = sdp::chaos_field(s.solver, noise, beta, 6);
      z0(k) = field.total()(s.grid.half());
      f1(k) = field.terms(1, s.grid.half());
      f2(k) = field.terms(2, s.grid.half());
      line(k) = field.total().sum() * s.grid.dx;
    }
    const auto mean = sdp::batch_mean(z0);
    CHECK(std::abs(mean.value - sdp::density(grid, 1.0, 0.0)) < 3.0 * mean.se);
    const auto ortho = sdp::batch_mean(Eigen::ArrayXd(f1 * f2));
    CHECK(std::abs(ortho.value) < 3.0 * ortho.se);
    const double second = line.square().mean();
    CHECK(second == doctest::Approx(sdp::second_moment_series({2.0, 1.0}, beta, 6).total).epsilon(0.10));
  }

  TEST_CASE("chaos and Duhamel agree on the same noise") {
    for (double alpha : {1.5, 2.0}) {
      CAPTURE(alpha);
      const Setup s(alpha, 0.1);
      const auto noise = sdp::sample_noise(s.grid, 6, 0);
      const auto sol = sdp::duhamel_solve(s.solver, noise, 0.5);
      const Eigen::ArrayXd chaos = sdp::chaos_field(s.solver, noise, 0.5, 6).total();
      const Eigen::ArrayXd duh = sol.values.col(s.grid.nt());
      const double rms = std::sqrt((chaos - duh).square().mean() / duh.square().mean());
      CHECK(rms <= 0.05);
    }
  }

  TEST_CASE("point solve and line solve agree with the field") {
    const Setup s(2.0, 0.2);
    const auto noise = sdp::sample_noise(s.grid, 7, 0);
    const auto field = sdp::chaos_field(s.solver, noise, 0.3, 4);
    CHECK(sdp::chaos_solve(s.solver, noise, 0.3, 4, 1.0, 0.4) ==
          doctest::Approx(field.total()(s.grid.half() + 2)).epsilon(1e-12));
    const auto line = sdp::chaos_point_to_line(s.solver, noise, 0.3, 4);
    CHECK(line.total == doctest::Approx(field.total().sum() * s.grid.dx).epsilon(1e-10));
    CHECK(line.terms.size() == 5);
    CHECK_THROWS_AS(sdp::chaos_solve(s.solver, noise, 0.3, 4, 1.0, 0.33), sdp::ValidationError);
    CHECK_THROWS_AS(sdp::chaos_field(s.solver, noise, 0.3, 20), sdp::ValidationError);
  }

  TEST_CASE("solution CSV") {
    const Setup s(2.0, 0.5, 0.5);
    const auto sol = sdp::duhamel_solve(s.solver, sdp::sample_noise(s.grid, 8, 0), 0.2);
    std::ostringstream out;
    sdp::write_solution_csv(sol, out, s.grid.nt());
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "t,x,Z");
    long rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 2 * s.grid.nx());
  }
}
