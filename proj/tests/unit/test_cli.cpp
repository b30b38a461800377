#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

const fs::path& workdir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "sdp_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

int run(const std::string& args, const std::string& out = "run") {
  const std::string cmd = std::string(SDP_CLI) + " --out-dir " + (workdir() / out).string() + " " + args + " > " +
                          (workdir() / (out + ".log")).string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("exit status 2 on bad input") {
    CHECK(run("") == 2);
    CHECK(run("no-such-command") == 2);
    CHECK(run("density --alpha 0.8") == 2);
    CHECK(run("density --alpha abc") == 2);
    CHECK(run("simulate --r -1") == 2);
    CHECK(run("check-assumptions --rho 0.9") == 2);
    CHECK(run("solve-she --scheme euler") == 2);
    CHECK(run("--max-cells 10 solve-she") == 2);
    CHECK(run("prop31 --manifest /nonexistent/manifest.json") == 2);
  }

  TEST_CASE("exit status 3 on runtime failure") {
    const fs::path blocker = workdir() / "blocker";
    std::ofstream(blocker) << "not a directory";
    const std::string cmd = std::string(SDP_CLI) + " --out-dir " + (blocker / "sub").string() + " density > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    CHECK(WEXITSTATUS(status) == 3);
  }

  TEST_CASE("simulate at beta = 0 prints W = 1 and stderr 0") {
    REQUIRE(run("simulate --beta 0 --n-env 20 --n-path 10", "zero") == 0);
    const auto log = slurp(workdir() / "zero.log");
    CHECK(log.find("W = 1  stderr = 0") != std::string::npos);
    CHECK(fs::exists(workdir() / "zero" / "estimates.csv"));
    CHECK(fs::exists(workdir() / "zero" / "manifest.json"));
    CHECK(fs::exists(workdir() / "zero" / "run.ini"));
  }

  TEST_CASE("config file replays a run") {
    REQUIRE(run("check-assumptions --alpha 1.5 --t-list 1,3,9", "a1") == 0);
    const std::string replay = "--config " + (workdir() / "a1" / "run.ini").string() + " check-assumptions";
    REQUIRE(run(replay, "a2") == 0);
    CHECK(slurp(workdir() / "a1" / "assumptions.csv") == slurp(workdir() / "a2" / "assumptions.csv"));
  }

  TEST_CASE("density and paths export") {
    REQUIRE(run("density --alpha 1.5 --nodes 4096 --x-max 100", "dens") == 0);
    CHECK(slurp(workdir() / "dens" / "density.csv").rfind("x,p\n", 0) == 0);
    REQUIRE(run("sample-path --alpha 1.5 --steps 8 --count 3 --bridge-to 0.5", "paths") == 0);
    CHECK(slurp(workdir() / "paths" / "paths.csv").rfind("path,s,x\n", 0) == 0);
  }

  TEST_CASE("solve-she writes t,x,Z") {
    REQUIRE(run("solve-she --scheme duhamel --dx 0.25 --time-stride 100000", "she") == 0);
    CHECK(slurp(workdir() / "she" / "solution.csv").rfind("t,x,Z\n", 0) == 0);
  }
}
