#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "sdp/polymer.hpp"
#include "sdp/stats.hpp"

namespace sdp {

/// Independent sub-seed for a named or indexed part of an experiment (splitmix64 mix).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag);

struct PolymerBudget {
  long n_env = 2000;
  int n_path = 200;  // per half of the W', W'' pair
  int n_steps = 0;   // 0: default_n_steps at each t
};

struct SheBudget {
  long n_noise = 10000;
  double dx = 0.1;
  int K = 6;
  double x_max = 0.0;  // 0: default
};

struct RunOptions {
  unsigned workers = 1;
  std::filesystem::path cache_dir;  // empty: no reference cache
};

struct NamedStat {
  std::string name;
  double value = 0.0;
  double se = 0.0;
};

struct ReportRow {
  double t = 0.0;
  long n_env = 0;
  long n_path = 0;
  long n_reference = 0;
  double overflow_fraction = 0.0;
  double enlarged_fraction = 0.0;
  std::vector<NamedStat> stats;

  const NamedStat& stat(const std::string& name) const;
};

struct ConvergenceReport {
  std::string experiment;
  std::vector<ReportRow> rows;  // sorted by t
  nlohmann::json manifest;      // enough to rerun
  nlohmann::json summary;       // trend test, oracles, validity
  bool valid = true;
};

struct Theorem1Config {
  Schedule schedule;
  std::vector<double> t_list;
  PolymerBudget polymer;
  SheBudget she;
  std::uint64_t seed = 1;
};

struct Theorem2Config {
  Schedule schedule;
  std::vector<double> t_list;
  double T = 1.0;
  double Y = 0.0;
  PolymerBudget polymer;
  SheBudget she;
  std::uint64_t seed = 1;
};

enum class TestFunction {
  Zero,  // g = 0
  Box,   // 1 on [0,1] x [-1/2, 1/2]
  Tent,  // (1 - |y|)_+ on [0,1] x R
};

struct Prop31Config {
  Schedule schedule;
  TestFunction g = TestFunction::Box;
  std::vector<double> t_list;
  long n_rep = 10000;
  std::uint64_t seed = 1;
};

/// Samples of the SHE chaos solution: dx sum_x Z(T, x) and Z(T, Y).
struct SheReference {
  Eigen::ArrayXd line;
  Eigen::ArrayXd point;
  double mass_loss = 0.0;
};

SheReference she_reference(const StableParams& params, double beta, double T, double Y, const SheBudget& budget,
                           std::uint64_t seed, const RunOptions& opts = {});

/// Per t: mean and second moment of W_t, KS(W_t, Z), with trend test of KS against log t.
ConvergenceReport run_theorem1(const Theorem1Config& config, const RunOptions& opts = {});

/// Per t: t^{1/alpha} W_{tT, t^{1/alpha} Y} against Z(T, Y) with coupling beta* / T.
ConvergenceReport run_theorem2(const Theorem2Config& config, const RunOptions& opts = {});

/// Per t: gamma_t (sum g_t - v_t int g_t) against N(0, |g|^2), g_t(s, y) = g(s/t, y/t^{1/alpha}).
ConvergenceReport run_prop31(const Prop31Config& config, const RunOptions& opts = {});

/// Monte Carlo check of E[I_m(f) I_n(g)] = 1{m = n} m! int f g dv^m for box
/// indicators on the window (0, 1] x [-1, 1]: f is a product of indicators of
/// [0, 0.6] x [-0.5, 0.5], g of [0.3, 1] x [-0.2, 0.8].
struct CovarianceCheck {
  int m = 1;
  int n = 1;
  double v = 0.0;
  long n_clouds = 0;
  double estimate = 0.0;
  double std_error = 0.0;
  double expected = 0.0;
  bool within(double sigmas) const { return std::abs(estimate - expected) <= sigmas * std_error; }
};

CovarianceCheck chaos_covariance_test(int m, int n, double v, long n_clouds, std::uint64_t seed,
                                      const RunOptions& opts = {});

/// Squared L2 norm of the test function.
double test_function_norm2(TestFunction g);

/// <dir>/<experiment>.csv, <dir>/<experiment>.gp, <dir>/manifest.json and <dir>/summary.json.
void emit_report(const ConvergenceReport& report, const std::filesystem::path& out_dir);

nlohmann::json to_json(const Schedule& schedule);
Schedule schedule_from_json(const nlohmann::json& j);

/// Reruns the experiment a manifest describes.
ConvergenceReport rerun(const nlohmann::json& manifest, const RunOptions& opts = {});

}  // namespace sdp
