#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "sdp/error.hpp"
#include "sdp/experiments.hpp"

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("sdp_unit_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

sdp::Prop31Config small_prop31() {
  return {sdp::Schedule::standard({2.0, 1.0}, 0.5), sdp::TestFunction::Box, {16.0, 64.0}, 400, 3};
}

}  // namespace

TEST_SUITE("experiments") {
  TEST_CASE("test function norms") {
    CHECK(sdp::test_function_norm2(sdp::TestFunction::Box) == doctest::Approx(1.0));
    CHECK(sdp::test_function_norm2(sdp::TestFunction::Tent) == doctest::Approx(2.0 / 3.0));
    CHECK(sdp::test_function_norm2(sdp::TestFunction::Zero) == 0.0);
  }

  TEST_CASE("schedule json round trip") {
    const sdp::Schedule s({1.5, 2.0}, -0.3, 0.2, 0.1);
    const auto back = sdp::schedule_from_json(sdp::to_json(s));
    for (double t : {1.0, 50.0}) {
      CHECK(back.r(t) == s.r(t));
      CHECK(back.lambda(t) == s.lambda(t));
      CHECK(back.v(t) == s.v(t));
    }
  }

  TEST_CASE("prop31 report shape, determinism and rerun") {
    const auto a = sdp::run_prop31(small_prop31());
    sdp::RunOptions four;
    four.workers = 4;
    const auto b = sdp::run_prop31(small_prop31(), four);
    REQUIRE(a.rows.size() == 2);
    CHECK(a.rows[0].t < a.rows[1].t);
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
      CHECK(a.rows[i].stat("mean").value == b.rows[i].stat("mean").value);
      CHECK(a.rows[i].stat("ks").value == b.rows[i].stat("ks").value);
    }
    CHECK_THROWS(a.rows[0].stat("no such statistic"));

    const auto d1 = scratch("p31a"), d2 = scratch("p31b");
    sdp::emit_report(a, d1);
    for (const char* f : {"prop31.csv", "prop31.gp", "manifest.json", "summary.json"}) CHECK(fs::exists(d1 / f));
    const auto again = sdp::rerun(nlohmann::json::parse(slurp(d1 / "manifest.json")));
    sdp::emit_report(again, d2);
    CHECK(slurp(d1 / "prop31.csv") == slurp(d2 / "prop31.csv"));
    CHECK(slurp(d1 / "summary.json") == slurp(d2 / "summary.json"));
    CHECK(slurp(d1 / "prop31.csv").rfind("t,n_env,n_path,n_reference,mean,mean_se,", 0) == 0);
  }

  TEST_CASE("rerun rejects bad manifests") {
    CHECK_THROWS_AS(sdp::rerun(nlohmann::json{{"experiment", "unknown"}}), sdp::ValidationError);
    CHECK_THROWS(sdp::rerun(nlohmann::json::object()));
  }

  TEST_CASE("covariance check: order one, small run") {
    const auto c = sdp::chaos_covariance_test(1, 1, 5.0, 4000, 9);
    CHECK(c.expected == doctest::Approx(5.0 * 0.3 * 0.7));
    CHECK(c.within(3.0));
    const auto mixed = sdp::chaos_covariance_test(1, 2, 5.0, 4000, 9);
    CHECK(mixed.expected == 0.0);
    CHECK(mixed.within(3.0));
  }

  TEST_CASE("SHE reference cache reproduces fresh samples") {
    sdp::SheBudget budget;
    budget.n_noise = 30;
    budget.dx = 0.25;
    sdp::RunOptions cached;
    cached.cache_dir = scratch("cache");
    const auto fresh = sdp::she_reference({2.0, 1.0}, 0.5, 1.0, 0.0, budget, 4);
    const auto first = sdp::she_reference({2.0, 1.0}, 0.5, 1.0, 0.0, budget, 4, cached);
    const auto second = sdp::she_reference({2.0, 1.0}, 0.5, 1.0, 0.0, budget, 4, cached);
    CHECK((fresh.line == first.line).all());
    CHECK((first.line == second.line).all());
    CHECK((first.point == second.point).all());
    CHECK(std::distance(fs::directory_iterator(cached.cache_dir), fs::directory_iterator{}) == 1);
  }
}
