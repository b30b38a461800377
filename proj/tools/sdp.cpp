// Command-line driver: one subcommand per experiment or export.

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "sdp/error.hpp"
#include "sdp/experiments.hpp"
#include "sdp/polymer.hpp"
#include "sdp/she.hpp"
#include "sdp/stable.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

struct Global {
  std::uint64_t seed = 1;
  unsigned workers = 1;
  std::string out_dir;
  double max_cells = sdp::kDefaultNoiseCellCap;
  double max_points = sdp::kDefaultMaxExpectedPoints;
};

struct StableOpts {
  double alpha = 2.0;
  double nu = 1.0;
  sdp::StableParams params() const {
    sdp::StableParams p{alpha, nu};
    p.validate();
    return p;
  }
};

struct ScheduleOpts {
  StableOpts stable;
  double beta_star = 0.5;
  double rho = -1.0;  // negative: 1/(2 alpha)
  double eta = -1.0;
  sdp::Schedule make() const {
    const auto p = stable.params();
    const double d = 0.5 / p.alpha;
    return sdp::Schedule(p, beta_star, rho < 0.0 ? d : rho, eta < 0.0 ? d : eta);
  }
};

void add_stable(CLI::App* cmd, StableOpts& s) {
  cmd->add_option("--alpha", s.alpha, "stability index in (1, 2]")->capture_default_str();
  cmd->add_option("--nu", s.nu, "scale nu > 0")->capture_default_str();
}

void add_schedule(CLI::App* cmd, ScheduleOpts& s) {
  add_stable(cmd, s.stable);
  cmd->add_option("--beta-star", s.beta_star, "limiting coupling beta* (non-zero)")->capture_default_str();
  cmd->add_option("--rho", s.rho, "r_t = t^rho (default 1/(2 alpha))")->capture_default_str();
  cmd->add_option("--eta", s.eta, "lambda(beta_t) = t^-eta (default 1/(2 alpha))")->capture_default_str();
}

fs::path prepare_out(const Global& g, const std::string& command) {
  fs::path dir = g.out_dir.empty() ? fs::path("sdp-out") / command : fs::path(g.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw sdp::RuntimeFailure("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw sdp::RuntimeFailure("cannot write " + path.string());
  out << std::setprecision(17);
  return out;
}

// Every option of the subcommand and the globals, as given after config and flags merge.
json options_json(const CLI::App* app) {
  json j = json::object();
  for (const CLI::Option* opt : app->get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "config") continue;
    if (opt->count() == 0 && opt->get_default_str().empty()) continue;
    const auto& res = opt->results();
    if (res.empty()) j[name] = opt->get_default_str();
    else if (res.size() == 1) j[name] = res.front();
    else j[name] = res;
  }
  return j;
}

void write_ini(const fs::path& dir, const CLI::App& root) {
  auto ini = open_out(dir / "run.ini");
  ini << root.config_to_str(false, false);
}

void write_manifest(const fs::path& dir, const CLI::App& root, const CLI::App* sub, json extra = json::object()) {
  json m;
  m["schema_version"] = 1;
  m["command"] = sub->get_name();
  m["global"] = options_json(&root);
  m["options"] = options_json(sub);
  m["replay"] = sub->get_name() + " --config " + (dir / "run.ini").string();
  for (auto& [k, v] : extra.items()) m[k] = v;
  auto out = open_out(dir / "manifest.json");
  out << m.dump(2) << '\n';
  write_ini(dir, root);
}

std::vector<double> t_list_default() { return {1.0, 4.0, 16.0, 64.0}; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stable directed polymer and fractional SHE laboratory"};
  app.require_subcommand(1);
  app.set_config("--config", "", "INI file with [subcommand] sections; flags override it");
  Global g;
  if (const char* env = std::getenv("SDP_OUT_DIR")) g.out_dir = env;
  app.add_option("--seed", g.seed, "master seed")->capture_default_str();
  app.add_option("--workers", g.workers, "worker threads (results do not depend on it)")->capture_default_str();
  app.add_option("--out-dir", g.out_dir, "output directory (default $SDP_OUT_DIR or ./sdp-out/<command>)");
  app.add_option("--max-cells", g.max_cells, "memory cap on SHE noise cells")->capture_default_str();
  app.add_option("--max-points", g.max_points, "cap on expected Poisson points per cloud")->capture_default_str();

  // density
  StableOpts density_stable;
  double density_x_max = 0.0;
  long density_nodes = 0;
  auto* density_cmd = app.add_subcommand("density", "export the unit-time density table as CSV (x,p)");
  add_stable(density_cmd, density_stable);
  density_cmd->add_option("--x-max", density_x_max, "table half-width (0: default)")->capture_default_str();
  density_cmd->add_option("--nodes", density_nodes, "even node count >= 1024 (0: default)")->capture_default_str();

  // sample-path
  StableOpts path_stable;
  double path_t = 1.0;
  int path_steps = 100;
  int path_count = 1;
  std::optional<double> path_bridge;
  auto* path_cmd = app.add_subcommand("sample-path", "sample stable paths or bridges on a uniform grid");
  add_stable(path_cmd, path_stable);
  path_cmd->add_option("--t", path_t, "horizon")->capture_default_str();
  path_cmd->add_option("--steps", path_steps, "grid steps")->capture_default_str();
  path_cmd->add_option("--count", path_count, "number of paths")->capture_default_str();
  path_cmd->add_option("--bridge-to", path_bridge, "pin the endpoint X_t to this value");

  // simulate
  StableOpts sim_stable;
  double sim_beta = 0.5, sim_v = 1.0, sim_r = 1.0, sim_t = 1.0;
  long sim_env = 200;
  int sim_path = 100, sim_steps = 0;
  std::optional<double> sim_point, sim_beta_star;
  auto* sim_cmd = app.add_subcommand("simulate", "nested Monte Carlo estimates of W_t (or W_{t,x})");
  add_stable(sim_cmd, sim_stable);
  sim_cmd->add_option("--beta", sim_beta, "inverse temperature")->capture_default_str();
  sim_cmd->add_option("--v", sim_v, "environment intensity")->capture_default_str();
  sim_cmd->add_option("--r", sim_r, "tube width")->capture_default_str();
  sim_cmd->add_option("--t", sim_t, "horizon")->capture_default_str();
  sim_cmd->add_option("--beta-star", sim_beta_star, "take (beta, v, r) from the default schedule at t instead");
  sim_cmd->add_option("--n-env", sim_env, "environment replicas")->capture_default_str();
  sim_cmd->add_option("--n-path", sim_path, "paths per half batch")->capture_default_str();
  sim_cmd->add_option("--n-steps", sim_steps, "path steps (0: tube-width default)")->capture_default_str();
  sim_cmd->add_option("--point", sim_point, "point-to-point endpoint x");

  // solve-she
  StableOpts she_stable;
  std::string she_scheme = "chaos";
  double she_beta = 0.25, she_t = 1.0, she_dx = 0.1, she_x_max = 0.0;
  int she_K = 6, she_stride = 1;
  auto* she_cmd = app.add_subcommand("solve-she", "solve the fractional SHE on one noise realization");
  add_stable(she_cmd, she_stable);
  she_cmd->add_option("--scheme", she_scheme, "chaos or duhamel")
      ->check(CLI::IsMember({"chaos", "duhamel"}))
      ->capture_default_str();
  she_cmd->add_option("--beta", she_beta, "noise coupling")->capture_default_str();
  she_cmd->add_option("--t", she_t, "final time")->capture_default_str();
  she_cmd->add_option("--dx", she_dx, "space step")->capture_default_str();
  she_cmd->add_option("--x-max", she_x_max, "domain half-width (0: default)")->capture_default_str();
  she_cmd->add_option("--K", she_K, "chaos truncation order")->capture_default_str();
  she_cmd->add_option("--time-stride", she_stride, "write every n-th time slice (duhamel)")->capture_default_str();

  // check-assumptions
  ScheduleOpts assume_sched;
  std::vector<double> assume_t = {1.0, 10.0, 100.0, 1000.0, 10000.0};
  auto* assume_cmd = app.add_subcommand("check-assumptions", "tabulate the scaling assumptions along t");
  add_schedule(assume_cmd, assume_sched);
  assume_cmd->add_option("--t-list", assume_t, "increasing t values")->delimiter(',')->capture_default_str();

  // chaos-cov-test
  int cov_m = 1, cov_n = 1;
  double cov_v = 5.0;
  long cov_clouds = 100000;
  auto* cov_cmd = app.add_subcommand("chaos-cov-test", "Monte Carlo covariance of Poisson Wiener-Ito integrals");
  cov_cmd->add_option("--m", cov_m, "order of the first integral (1 or 2)")->capture_default_str();
  cov_cmd->add_option("--n", cov_n, "order of the second integral (1 or 2)")->capture_default_str();
  cov_cmd->add_option("--v", cov_v, "intensity")->capture_default_str();
  cov_cmd->add_option("--clouds", cov_clouds, "environment replicas")->capture_default_str();

  // sweep-thm1 / sweep-thm2
  ScheduleOpts sweep_sched;
  std::vector<double> sweep_t = t_list_default();
  sdp::PolymerBudget sweep_poly;
  sdp::SheBudget sweep_she;
  std::string sweep_cache, sweep_manifest;
  double sweep_T = 1.0, sweep_Y = 0.0;
  auto add_sweep = [&](CLI::App* cmd) {
    add_schedule(cmd, sweep_sched);
    cmd->add_option("--t-list", sweep_t, "increasing t values")->delimiter(',')->capture_default_str();
    cmd->add_option("--n-env", sweep_poly.n_env, "environment replicas per t")->capture_default_str();
    cmd->add_option("--n-path", sweep_poly.n_path, "paths per half batch")->capture_default_str();
    cmd->add_option("--n-steps", sweep_poly.n_steps, "path steps (0: default)")->capture_default_str();
    cmd->add_option("--n-noise", sweep_she.n_noise, "SHE reference replicas")->capture_default_str();
    cmd->add_option("--dx", sweep_she.dx, "SHE space step")->capture_default_str();
    cmd->add_option("--K", sweep_she.K, "SHE chaos order")->capture_default_str();
    cmd->add_option("--she-x-max", sweep_she.x_max, "SHE half-width (0: default)")->capture_default_str();
    cmd->add_option("--cache-dir", sweep_cache, "reference sample cache directory");
    cmd->add_option("--manifest", sweep_manifest, "rerun the experiment a manifest.json describes");
  };
  auto* thm1_cmd = app.add_subcommand("sweep-thm1", "point-to-line convergence sweep against the SHE");
  add_sweep(thm1_cmd);
  auto* thm2_cmd = app.add_subcommand("sweep-thm2", "point-to-point convergence sweep against the SHE");
  add_sweep(thm2_cmd);
  thm2_cmd->add_option("--T", sweep_T, "macroscopic time T")->capture_default_str();
  thm2_cmd->add_option("--Y", sweep_Y, "macroscopic endpoint Y")->capture_default_str();

  // prop31
  ScheduleOpts prop_sched;
  std::vector<double> prop_t = {64.0, 256.0, 1024.0, 4096.0};
  std::string prop_g = "box";
  long prop_rep = 10000;
  std::string prop_manifest;
  auto* prop_cmd = app.add_subcommand("prop31", "first-chaos Gaussian limit of the compensated environment");
  add_schedule(prop_cmd, prop_sched);
  prop_cmd->add_option("--t-list", prop_t, "increasing t values")->delimiter(',')->capture_default_str();
  prop_cmd->add_option("--g", prop_g, "test function")->check(CLI::IsMember({"box", "tent", "zero"}))->capture_default_str();
  prop_cmd->add_option("--n-rep", prop_rep, "environment replicas per t")->capture_default_str();
  prop_cmd->add_option("--manifest", prop_manifest, "rerun the experiment a manifest.json describes");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return kExitValidation;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    const fs::path dir = prepare_out(g, name);
    sdp::RunOptions ro;
    ro.workers = g.workers;
    std::cout << std::setprecision(10);

    if (sub == density_cmd) {
      const auto params = density_stable.params();
      const sdp::DensityGrid grid = (density_x_max > 0.0 || density_nodes > 0)
                                        ? sdp::build_density_grid(params, density_x_max > 0.0 ? density_x_max : 400.0,
                                                                  density_nodes > 0 ? density_nodes : 1 << 15)
                                        : sdp::build_default_density_grid(params);
      auto out = open_out(dir / "density.csv");
      sdp::write_density_csv(grid, out);
      write_manifest(dir, app, sub, {{"total_mass", grid.total_mass()}, {"x_cut", grid.x_cut()}});
      std::cout << "p(1,0) = " << grid.unit_density(0.0) << "\nmass = " << grid.total_mass() << "\n";
    } else if (sub == path_cmd) {
      const auto params = path_stable.params();
      sdp::Stream rng(g.seed, 0);
      std::optional<sdp::DensityGrid> grid;
      if (path_bridge) grid = sdp::build_default_density_grid(params);
      sdp::require(path_count >= 1, "count must be positive");
      auto out = open_out(dir / "paths.csv");
      out << "path,s,x\n";
      for (int k = 0; k < path_count; ++k) {
        const sdp::PathSkeleton p = path_bridge ? sdp::sample_bridge(*grid, path_t, *path_bridge, path_steps, rng)
                                                : sdp::sample_path(params, path_t, path_steps, rng);
        for (Eigen::Index i = 0; i < p.times.size(); ++i) out << k << ',' << p.times(i) << ',' << p.positions(i) << '\n';
      }
      write_manifest(dir, app, sub);
      std::cout << "wrote " << path_count << " path(s) to " << (dir / "paths.csv").string() << "\n";
    } else if (sub == sim_cmd) {
      sdp::PolymerConfig config;
      if (sim_beta_star) {
        config = sdp::Schedule::standard(sim_stable.params(), *sim_beta_star).config(sim_t);
      } else {
        config.stable = sim_stable.params();
        config.beta = sim_beta;
        config.v = sim_v;
        config.r = sim_r;
        config.t = sim_t;
      }
      config.validate();
      const int steps = sim_steps > 0 ? sim_steps : sdp::default_n_steps(config.stable, config.r, config.t);
      sdp::SamplingOptions so;
      so.workers = g.workers;
      so.max_expected_points = g.max_points;
      const sdp::WPairs pairs =
          sim_point ? sdp::sample_point_W_pairs(config, sdp::build_default_density_grid(config.stable), *sim_point,
                                                sim_env, sim_path, steps, g.seed, so)
                    : sdp::sample_W_pairs(config, sim_env, sim_path, steps, g.seed, so);
      const sdp::WSummary row = sdp::summarize(pairs, config.t);
      auto out = open_out(dir / "estimates.csv");
      sdp::write_summary_csv(std::span(&row, 1), out);
      write_manifest(dir, app, sub,
                     {{"resolved", {{"beta", config.beta}, {"v", config.v}, {"r", config.r}, {"t", config.t},
                                    {"n_steps", steps}}},
                      {"enlarged_fraction", pairs.enlarged_fraction}});
      std::cout << "W = " << row.mean << "  stderr = " << row.std_error << "\nE[W'W''] = " << row.second_moment
                << "  stderr = " << row.second_moment_se << "\n";
      if (!pairs.valid) throw sdp::RuntimeFailure("window overflow fraction above the limit");
    } else if (sub == she_cmd) {
      const auto params = she_stable.params();
      const sdp::SheGridSpec grid = sdp::default_she_grid(params, she_t, she_dx, she_x_max);
      const sdp::SheSolver solver(params, grid);
      const sdp::NoiseGrid noise = sdp::sample_noise(grid, g.seed, 0, g.max_cells);
      auto out = open_out(dir / "solution.csv");
      double line = 0.0;
      if (she_scheme == "duhamel") {
        const sdp::SheSolution sol = sdp::duhamel_solve(solver, noise, she_beta);
        sdp::write_solution_csv(sol, out, she_stride);
        line = sol.values.col(grid.nt()).sum() * grid.dx;
      } else {
        const sdp::ChaosField field = sdp::chaos_field(solver, noise, she_beta, she_K);
        const Eigen::ArrayXd z = field.total();
        out << "t,x,Z\n";
        for (Eigen::Index j = 0; j < grid.nx(); ++j) out << grid.t_max << ',' << grid.x(j) << ',' << z(j) << '\n';
        line = z.sum() * grid.dx;
      }
      write_manifest(dir, app, sub,
                     {{"grid", {{"dt", grid.dt}, {"dx", grid.dx}, {"t_max", grid.t_max}, {"x_max", grid.x_max},
                                {"nt", grid.nt()}, {"nx", grid.nx()}}},
                      {"mass_loss", solver.mass_loss()}});
      std::cout << "dx sum Z(t, x) = " << line << "\nmass loss = " << solver.mass_loss() << "\n";
    } else if (sub == assume_cmd) {
      const sdp::Schedule schedule = assume_sched.make();
      const sdp::AssumptionReport rep = sdp::verify_assumptions(schedule, assume_t);
      auto out = open_out(dir / "assumptions.csv");
      out << "t,a_ratio,b_quantity,c_quantity\n";
      std::cout << std::setw(12) << "t" << std::setw(20) << "a_ratio" << std::setw(20) << "b" << std::setw(20) << "c"
                << "\n";
      for (const auto& r : rep.rows) {
        out << r.t << ',' << r.a_ratio << ',' << r.b_quantity << ',' << r.c_quantity << '\n';
        std::cout << std::setw(12) << r.t << std::setw(20) << r.a_ratio << std::setw(20) << r.b_quantity
                  << std::setw(20) << r.c_quantity << "\n";
      }
      write_manifest(dir, app, sub,
                     {{"a_exact", rep.a_exact}, {"b_decreasing", rep.b_decreasing}, {"c_decreasing", rep.c_decreasing}});
      std::cout << "a_ratio == 1: " << rep.a_exact << "  b decreasing: " << rep.b_decreasing
                << "  c decreasing: " << rep.c_decreasing << "\n";
    } else if (sub == cov_cmd) {
      const sdp::CovarianceCheck c = sdp::chaos_covariance_test(cov_m, cov_n, cov_v, cov_clouds, g.seed, ro);
      auto out = open_out(dir / "covariance.csv");
      out << "m,n,v,n_clouds,estimate,stderr,expected\n"
          << c.m << ',' << c.n << ',' << c.v << ',' << c.n_clouds << ',' << c.estimate << ',' << c.std_error << ','
          << c.expected << '\n';
      write_manifest(dir, app, sub);
      std::cout << "E[I_m I_n] = " << c.estimate << " +- " << c.std_error << "  expected " << c.expected << "\n";
    } else if (sub == thm1_cmd || sub == thm2_cmd || sub == prop_cmd) {
      if (!sweep_cache.empty()) ro.cache_dir = sweep_cache;
      const std::string& manifest_path = sub == prop_cmd ? prop_manifest : sweep_manifest;
      sdp::ConvergenceReport report = [&] {
        if (!manifest_path.empty()) {
          std::ifstream in(manifest_path);
          if (!in) throw sdp::ValidationError("cannot read manifest " + manifest_path);
          json m;
          try {
            in >> m;
          } catch (const json::exception& e) {
            throw sdp::ValidationError("malformed manifest: " + std::string(e.what()));
          }
          return sdp::rerun(m, ro);
        }
        if (sub == thm1_cmd) return sdp::run_theorem1({sweep_sched.make(), sweep_t, sweep_poly, sweep_she, g.seed}, ro);
        if (sub == thm2_cmd) {
          return sdp::run_theorem2({sweep_sched.make(), sweep_t, sweep_T, sweep_Y, sweep_poly, sweep_she, g.seed}, ro);
        }
        const auto fn = prop_g == "tent" ? sdp::TestFunction::Tent
                        : prop_g == "zero" ? sdp::TestFunction::Zero
                                           : sdp::TestFunction::Box;
        return sdp::run_prop31({prop_sched.make(), fn, prop_t, prop_rep, g.seed}, ro);
      }();
      sdp::emit_report(report, dir);
      write_ini(dir, app);
      std::cout << std::ifstream(dir / (report.experiment + ".csv")).rdbuf();
      std::cout << "report written to " << dir.string() << "\n";
      if (!report.valid) throw sdp::RuntimeFailure("run marked invalid: window overflow above 1%");
    }
    return 0;
  } catch (const sdp::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return kExitRuntime;
  }
}
