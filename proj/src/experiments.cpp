#include "sdp/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "sdp/error.hpp"
#include "sdp/parallel.hpp"
#include "sdp/she.hpp"

namespace sdp {
namespace {

constexpr int kSchemaVersion = 1;
constexpr std::uint64_t kTagShe = 0x5e5e;
constexpr std::uint64_t kTagPolymer = 0x9017;

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

void check_t_list(const std::vector<double>& t_list) {
  require(!t_list.empty(), "t list is empty");
  for (std::size_t i = 0; i < t_list.size(); ++i) {
    require(t_list[i] > 0.0, "t values must be positive");
    require(i == 0 || t_list[i] > t_list[i - 1], "t list must be increasing");
  }
}

void check_budget(const PolymerBudget& b) {
  require(b.n_env >= 2 && b.n_path >= 1 && b.n_steps >= 0, "polymer budgets must be positive");
}

void check_budget(const SheBudget& b) {
  require(b.n_noise >= 2, "SHE reference needs at least two noise replicas");
  require(b.dx > 0.0 && b.K >= 0 && b.x_max >= 0.0, "SHE grid settings must be positive");
}

nlohmann::json to_json(const PolymerBudget& b) {
  return {{"n_env", b.n_env}, {"n_path", b.n_path}, {"n_steps", b.n_steps}};
}

nlohmann::json to_json(const SheBudget& b) {
  return {{"n_noise", b.n_noise}, {"dx", b.dx}, {"K", b.K}, {"x_max", b.x_max}};
}

PolymerBudget polymer_from_json(const nlohmann::json& j) {
  PolymerBudget b;
  b.n_env = j.at("n_env").get<long>();
  b.n_path = j.at("n_path").get<int>();
  b.n_steps = j.at("n_steps").get<int>();
  return b;
}

SheBudget she_from_json(const nlohmann::json& j) {
  SheBudget b;
  b.n_noise = j.at("n_noise").get<long>();
  b.dx = j.at("dx").get<double>();
  b.K = j.at("K").get<int>();
  b.x_max = j.at("x_max").get<double>();
  return b;
}

const char* name_of(TestFunction g) {
  switch (g) {
    case TestFunction::Zero: return "zero";
    case TestFunction::Box: return "box";
    case TestFunction::Tent: return "tent";
  }
  return "?";
}

TestFunction test_function_from(const std::string& name) {
  if (name == "zero") return TestFunction::Zero;
  if (name == "box") return TestFunction::Box;
  if (name == "tent") return TestFunction::Tent;
  throw ValidationError("unknown test function '" + name + "' (expected zero, box or tent)");
}

double evaluate(TestFunction g, double s, double y) {
  if (s < 0.0 || s > 1.0) return 0.0;
  switch (g) {
    case TestFunction::Zero: return 0.0;
    case TestFunction::Box: return std::abs(y) <= 0.5 ? 1.0 : 0.0;
    case TestFunction::Tent: return std::max(0.0, 1.0 - std::abs(y));
  }
  return 0.0;
}

double support_half_width(TestFunction g) { return g == TestFunction::Box ? 0.5 : 1.0; }

// Samples cached as text with 17 significant digits, so reloading is exact.
bool load_cache(const std::filesystem::path& file, SheReference& ref) {
  std::ifstream in(file);
  if (!in) return false;
  std::string header;
  std::getline(in, header);
  std::istringstream head(header);
  long n = 0;
  head >> n >> ref.mass_loss;
  if (!head || n <= 0) return false;
  ref.line.resize(n);
  ref.point.resize(n);
  char comma;
  for (long i = 0; i < n; ++i) {
    if (!(in >> ref.line(i) >> comma >> ref.point(i))) return false;
  }
  return true;
}

void store_cache(const std::filesystem::path& file, const SheReference& ref) {
  std::filesystem::create_directories(file.parent_path());
  const auto tmp = file.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw RuntimeFailure("cannot write reference cache " + tmp);
    out << std::setprecision(17) << ref.line.size() << ' ' << ref.mass_loss << '\n';
    for (Eigen::Index i = 0; i < ref.line.size(); ++i) out << ref.line(i) << ',' << ref.point(i) << '\n';
  }
  std::filesystem::rename(tmp, file);
}

// KS distance with a delete-a-group jackknife that drops a block from both
// samples at once, so reference noise is counted too.
Estimate ks_with_error(const Eigen::ArrayXd& sample, const Eigen::ArrayXd& reference) {
  Estimate e =
      jackknife({sample, reference}, [](const std::vector<Eigen::ArrayXd>& d) { return ks_statistic(d[0], d[1]); });
  e.value = ks_statistic(sample, reference);
  return e;
}

Estimate ks_with_error(const Eigen::ArrayXd& sample, const std::function<double(double)>& cdf) {
  Estimate e = jackknife({sample}, [&](const std::vector<Eigen::ArrayXd>& d) { return ks_statistic(d[0], cdf); });
  e.value = ks_statistic(sample, cdf);
  return e;
}

NamedStat named(const std::string& name, const Estimate& e) { return {name, e.value, e.se}; }

nlohmann::json trend_json(const TrendTest& t) {
  return {{"slope", t.slope}, {"slope_se", t.slope_se}, {"threshold", t.threshold},
          {"nonincreasing", t.nonincreasing}};
}

TrendTest ks_trend(const std::vector<ReportRow>& rows) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  Eigen::ArrayXd x(n), y(n), se(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x(i) = std::log(rows[static_cast<std::size_t>(i)].t);
    y(i) = rows[static_cast<std::size_t>(i)].stat("ks").value;
    se(i) = rows[static_cast<std::size_t>(i)].stat("ks").se;
  }
  return trend_test(x, y, se);
}

int steps_for(const PolymerBudget& b, const PolymerConfig& c) {
  return b.n_steps > 0 ? b.n_steps : default_n_steps(c.stable, c.r, c.t);
}

std::string format_number(double v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

const NamedStat& ReportRow::stat(const std::string& name) const {
  for (const auto& s : stats) {
    if (s.name == name) return s;
  }
  throw ValidationError("report row has no statistic '" + name + "'");
}

nlohmann::json to_json(const Schedule& schedule) {
  return {{"alpha", schedule.stable().alpha}, {"nu", schedule.stable().nu}, {"beta_star", schedule.beta_star()},
          {"rho", schedule.rho()}, {"eta", schedule.eta()}};
}

Schedule schedule_from_json(const nlohmann::json& j) {
  const StableParams stable{j.at("alpha").get<double>(), j.at("nu").get<double>()};
  return Schedule(stable, j.at("beta_star").get<double>(), j.at("rho").get<double>(), j.at("eta").get<double>());
}

double test_function_norm2(TestFunction g) {
  switch (g) {
    case TestFunction::Zero: return 0.0;
    case TestFunction::Box: return 1.0;
    case TestFunction::Tent: return 2.0 / 3.0;
  }
  return 0.0;
}

SheReference she_reference(const StableParams& params, double beta, double T, double Y, const SheBudget& budget,
                           std::uint64_t seed, const RunOptions& opts) {
  params.validate();
  check_budget(budget);
  const SheGridSpec grid = default_she_grid(params, T, budget.dx, budget.x_max);
  const nlohmann::json key = {{"alpha", params.alpha}, {"nu", params.nu}, {"beta", beta},   {"T", T},
                              {"Y", Y},                {"seed", seed},    {"dx", grid.dx},  {"dt", grid.dt},
                              {"x_max", grid.x_max},   {"K", budget.K},   {"n", budget.n_noise}};
  std::filesystem::path cache_file;
  SheReference ref;
  if (!opts.cache_dir.empty()) {
    std::ostringstream name;
    name << "she_" << std::hex << std::setw(16) << std::setfill('0') << fnv1a(key.dump()) << ".csv";
    cache_file = opts.cache_dir / name.str();
    if (load_cache(cache_file, ref) && ref.line.size() == budget.n_noise) return ref;
  }

  const SheSolver solver(params, grid);
  require(std::abs(Y) <= grid.x_max, "SHE reference point Y lies outside the grid");
  const Eigen::Index j = static_cast<Eigen::Index>(std::llround(Y / grid.dx)) + grid.half();
  require(std::abs(grid.x(j) - Y) <= 1e-9 * std::max(1.0, std::abs(Y)), "Y must be a multiple of dx");
  ref.line.resize(budget.n_noise);
  ref.point.resize(budget.n_noise);
  ref.mass_loss = solver.mass_loss();
  parallel_for(static_cast<std::size_t>(budget.n_noise), opts.workers, [&](std::size_t i) {
    const NoiseGrid noise = sample_noise(grid, seed, i);
    const ChaosField field = chaos_field(solver, noise, beta, budget.K, -1, std::max(budget.K, kDefaultMaxChaosOrder));
    const auto idx = static_cast<Eigen::Index>(i);
    ref.line(idx) = field.terms.sum() * grid.dx;
    ref.point(idx) = field.terms.col(j).sum();
  });
  if (!cache_file.empty()) store_cache(cache_file, ref);
  return ref;
}

ConvergenceReport run_theorem1(const Theorem1Config& config, const RunOptions& opts) {
  check_t_list(config.t_list);
  check_budget(config.polymer);
  check_budget(config.she);
  const Schedule& schedule = config.schedule;
  ConvergenceReport report;
  report.experiment = "theorem1";
  report.manifest = {{"schema_version", kSchemaVersion}, {"experiment", report.experiment},
                     {"seed", config.seed},              {"schedule", to_json(schedule)},
                     {"t_list", config.t_list},          {"polymer", to_json(config.polymer)},
                     {"she", to_json(config.she)}};

  const std::uint64_t she_seed = derive_seed(config.seed, kTagShe);
  const SheReference ref =
      she_reference(schedule.stable(), schedule.beta_star(), 1.0, 0.0, config.she, she_seed, opts);

  nlohmann::json per_t = nlohmann::json::array();
  for (std::size_t i = 0; i < config.t_list.size(); ++i) {
    const double t = config.t_list[i];
    const PolymerConfig pc = schedule.config(t);
    const int n_steps = steps_for(config.polymer, pc);
    const std::uint64_t seed_t = derive_seed(derive_seed(config.seed, kTagPolymer), i);
    SamplingOptions so;
    so.workers = opts.workers;
    const WPairs pairs =
        sample_W_pairs(pc, config.polymer.n_env, config.polymer.n_path, n_steps, seed_t, so);
    const WSummary summary = summarize(pairs, t);
    ReportRow row;
    row.t = t;
    row.n_env = summary.n_env;
    row.n_path = summary.n_path;
    row.n_reference = static_cast<long>(ref.line.size());
    row.overflow_fraction = pairs.overflow_fraction;
    row.enlarged_fraction = pairs.enlarged_fraction;
    row.stats.push_back({"mean", summary.mean, summary.std_error});
    row.stats.push_back({"second_moment", summary.second_moment, summary.second_moment_se});
    row.stats.push_back(named("ks", ks_with_error(pairs.averaged(), ref.line)));
    report.valid = report.valid && pairs.valid;
    report.rows.push_back(std::move(row));
    per_t.push_back({{"t", t}, {"seed", seed_t}, {"n_steps", n_steps}, {"beta_t", pc.beta}, {"v_t", pc.v},
                     {"r_t", pc.r}});
  }
  const TrendTest trend = ks_trend(report.rows);
  const MomentSeries series = second_moment_series(schedule.stable(), schedule.beta_star(), 50);
  const Estimate ref_m2 = batch_mean(ref.line.square());
  report.summary = {{"experiment", report.experiment},
                    {"valid", report.valid},
                    {"ks_trend", trend_json(trend)},
                    {"series_second_moment", series.total},
                    {"reference_mean", batch_mean(ref.line).value},
                    {"reference_second_moment", ref_m2.value},
                    {"reference_second_moment_se", ref_m2.se},
                    {"reference_mass_loss", ref.mass_loss},
                    {"she_seed", she_seed},
                    {"per_t", per_t}};
  return report;
}

ConvergenceReport run_theorem2(const Theorem2Config& config, const RunOptions& opts) {
  check_t_list(config.t_list);
  check_budget(config.polymer);
  check_budget(config.she);
  require(config.T > 0.0, "T must be positive");
  const Schedule& schedule = config.schedule;
  const StableParams& stable = schedule.stable();
  ConvergenceReport report;
  report.experiment = "theorem2";
  report.manifest = {{"schema_version", kSchemaVersion}, {"experiment", report.experiment},
                     {"seed", config.seed},              {"schedule", to_json(schedule)},
                     {"t_list", config.t_list},          {"T", config.T},
                     {"Y", config.Y},                    {"polymer", to_json(config.polymer)},
                     {"she", to_json(config.she)}};

  const std::uint64_t she_seed = derive_seed(config.seed, kTagShe);
  const SheReference ref =
      she_reference(stable, schedule.beta_star() / config.T, config.T, config.Y, config.she, she_seed, opts);
  const DensityGrid grid = build_default_density_grid(stable);

  nlohmann::json per_t = nlohmann::json::array();
  for (std::size_t i = 0; i < config.t_list.size(); ++i) {
    const double t = config.t_list[i];
    const double horizon = t * config.T;
    const double scale = std::pow(t, 1.0 / stable.alpha);
    const PolymerConfig pc = schedule.config(horizon);
    const int n_steps = steps_for(config.polymer, pc);
    const std::uint64_t seed_t = derive_seed(derive_seed(config.seed, kTagPolymer), i);
    SamplingOptions so;
    so.workers = opts.workers;
    WPairs pairs = sample_point_W_pairs(pc, grid, scale * config.Y, config.polymer.n_env, config.polymer.n_path,
                                        n_steps, seed_t, so);
    pairs.first *= scale;
    pairs.second *= scale;
    const WSummary summary = summarize(pairs, t);
    ReportRow row;
    row.t = t;
    row.n_env = summary.n_env;
    row.n_path = summary.n_path;
    row.n_reference = static_cast<long>(ref.point.size());
    row.overflow_fraction = pairs.overflow_fraction;
    row.enlarged_fraction = pairs.enlarged_fraction;
    row.stats.push_back({"mean", summary.mean, summary.std_error});
    row.stats.push_back({"second_moment", summary.second_moment, summary.second_moment_se});
    row.stats.push_back(named("ks", ks_with_error(pairs.averaged(), ref.point)));
    report.valid = report.valid && pairs.valid;
    report.rows.push_back(std::move(row));
    per_t.push_back({{"t", t}, {"seed", seed_t}, {"n_steps", n_steps}, {"beta_t", pc.beta}, {"v_t", pc.v},
                     {"r_t", pc.r}, {"endpoint", scale * config.Y}});
  }
  const TrendTest trend = ks_trend(report.rows);
  report.summary = {{"experiment", report.experiment},
                    {"valid", report.valid},
                    {"ks_trend", trend_json(trend)},
                    {"target_mean", density(grid, config.T, config.Y)},
                    {"reference_mean", batch_mean(ref.point).value},
                    {"reference_second_moment", batch_mean(ref.point.square()).value},
                    {"reference_mass_loss", ref.mass_loss},
                    {"she_seed", she_seed},
                    {"per_t", per_t}};
  return report;
}

ConvergenceReport run_prop31(const Prop31Config& config, const RunOptions& opts) {
  check_t_list(config.t_list);
  require(config.n_rep >= 2, "prop31 needs at least two replicas");
  const Schedule& schedule = config.schedule;
  const double alpha = schedule.stable().alpha;
  const double norm2 = test_function_norm2(config.g);
  const TestFunction g = config.g;
  ConvergenceReport report;
  report.experiment = "prop31";
  report.manifest = {{"schema_version", kSchemaVersion}, {"experiment", report.experiment},
                     {"seed", config.seed},              {"schedule", to_json(schedule)},
                     {"t_list", config.t_list},          {"g", name_of(g)},
                     {"n_rep", config.n_rep}};

  nlohmann::json per_t = nlohmann::json::array();
  for (std::size_t i = 0; i < config.t_list.size(); ++i) {
    const double t = config.t_list[i];
    const double space = std::pow(t, 1.0 / alpha);
    const double v = schedule.v(t);
    const double gamma = gamma_t(schedule, t);
    const double half_width = support_half_width(g) * space;
    const std::uint64_t seed_t = derive_seed(config.seed, i);

    WindowKernel kernel;
    kernel.order = 1;
    kernel.f = [g, t, space](std::span<const SpaceTimePoint> p) { return evaluate(g, p[0].s / t, p[0].y / space); };
    kernel.time_breaks = {0.0, t};
    kernel.space_breaks = {-half_width, 0.0, half_width};
    if (g == TestFunction::Box) kernel.space_breaks = {-half_width, half_width};
    PoissonCloud window;
    window.t_max = t;
    window.half_width = half_width;
    window.intensity = v;
    const double compensator = integrate_intensity(window, kernel);

    Eigen::ArrayXd samples(config.n_rep);
    parallel_for(static_cast<std::size_t>(config.n_rep), opts.workers, [&](std::size_t e) {
      const PoissonCloud cloud = sample_cloud(v, t, half_width, seed_t, e);
      double sum = 0.0;
      for (const auto& p : cloud.points) sum += kernel.f(std::span<const SpaceTimePoint>(&p, 1));
      samples(static_cast<Eigen::Index>(e)) = gamma * (sum - compensator);
    });

    ReportRow row;
    row.t = t;
    row.n_env = config.n_rep;
    row.n_reference = 0;
    row.stats.push_back(named("mean", batch_mean(samples)));
    if (norm2 > 0.0) {
      row.stats.push_back(named("variance_ratio", jackknife({samples}, [&](const std::vector<Eigen::ArrayXd>& d) {
                                  return sample_variance(d[0]) / norm2;
                                })));
      const double sd = std::sqrt(norm2);
      row.stats.push_back(
          named("ks", ks_with_error(samples, [sd](double x) { return 0.5 * std::erfc(-x / (sd * std::sqrt(2.0))); })));
    } else {
      row.stats.push_back({"variance_ratio", 0.0, 0.0});
      row.stats.push_back({"ks", 0.0, 0.0});
    }
    row.stats.push_back(named("skewness", norm2 > 0.0 ? jackknife({samples}, [](const std::vector<Eigen::ArrayXd>& d) {
                                                          return sample_skewness(d[0]);
                                                        })
                                                      : Estimate{}));
    row.stats.push_back({"max_abs", samples.abs().maxCoeff(), 0.0});
    report.rows.push_back(std::move(row));
    per_t.push_back({{"t", t}, {"seed", seed_t}, {"v_t", v}, {"gamma_t", gamma}, {"compensator", compensator},
                     {"expected_points", v * t * 2.0 * half_width}});
  }
  report.summary = {{"experiment", report.experiment}, {"valid", true}, {"g_norm2", norm2}, {"per_t", per_t}};
  if (norm2 > 0.0) report.summary["ks_trend"] = trend_json(ks_trend(report.rows));
  return report;
}

CovarianceCheck chaos_covariance_test(int m, int n, double v, long n_clouds, std::uint64_t seed,
                                      const RunOptions& opts) {
  require(m >= 1 && m <= 2 && n >= 1 && n <= 2, "covariance test supports orders 1 and 2");
  require(v > 0.0, "covariance test needs a positive intensity");
  require(n_clouds >= 40, "covariance test needs at least 40 clouds");
  auto box = [](double s0, double s1, double y0, double y1) {
    return [=](const SpaceTimePoint& p) { return p.s >= s0 && p.s <= s1 && p.y >= y0 && p.y <= y1 ? 1.0 : 0.0; };
  };
  const auto in_f = box(0.0, 0.6, -0.5, 0.5);
  const auto in_g = box(0.3, 1.0, -0.2, 0.8);
  auto make = [](int order, auto in, std::vector<double> tb, std::vector<double> yb) {
    WindowKernel k;
    k.order = order;
    k.f = [order, in](std::span<const SpaceTimePoint> p) {
      double value = 1.0;
      for (int i = 0; i < order; ++i) value *= in(p[static_cast<std::size_t>(i)]);
      return value;
    };
    k.time_breaks = std::move(tb);
    k.space_breaks = std::move(yb);
    return k;
  };
  const WindowKernel f = make(m, in_f, {0.6}, {-0.5, 0.5});
  const WindowKernel g = make(n, in_g, {0.3}, {-0.2, 0.8});

  PoissonCloud window;
  window.t_max = 1.0;
  window.half_width = 1.0;
  window.intensity = v;
  CovarianceCheck out;
  out.m = m;
  out.n = n;
  out.v = v;
  out.n_clouds = n_clouds;
  out.expected = m == n ? std::tgamma(m + 1.0) * integrate_product(window, f, g) : 0.0;

  Eigen::ArrayXd products(n_clouds);
  parallel_for(static_cast<std::size_t>(n_clouds), opts.workers, [&](std::size_t e) {
    const PoissonCloud cloud = sample_cloud(v, 1.0, 1.0, seed, e);
    products(static_cast<Eigen::Index>(e)) = wiener_ito(cloud, f) * wiener_ito(cloud, g);
  });
  const Estimate est = batch_mean(products);
  out.estimate = est.value;
  out.std_error = est.se;
  return out;
}

void emit_report(const ConvergenceReport& report, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw RuntimeFailure("cannot create output directory " + out_dir.string() + ": " + ec.message());
  auto open = [&](const std::string& name) {
    const auto path = out_dir / name;
    std::ofstream out(path);
    if (!out) throw RuntimeFailure("cannot write " + path.string());
    return out;
  };

  const std::string csv_name = report.experiment + ".csv";
  {
    std::ofstream out = open(csv_name);
    out << "t,n_env,n_path,n_reference";
    if (!report.rows.empty()) {
      for (const auto& s : report.rows.front().stats) out << ',' << s.name << ',' << s.name << "_se";
    }
    out << ",overflow_fraction,enlarged_fraction\n";
    for (const auto& row : report.rows) {
      out << format_number(row.t) << ',' << row.n_env << ',' << row.n_path << ',' << row.n_reference;
      for (const auto& s : row.stats) out << ',' << format_number(s.value) << ',' << format_number(s.se);
      out << ',' << format_number(row.overflow_fraction) << ',' << format_number(row.enlarged_fraction) << '\n';
    }
    if (!out) throw RuntimeFailure("write failed for " + (out_dir / csv_name).string());
  }
  {
    std::ofstream out = open("manifest.json");
    out << report.manifest.dump(2) << '\n';
  }
  {
    std::ofstream out = open("summary.json");
    out << report.summary.dump(2) << '\n';
  }
  {
    std::ofstream out = open(report.experiment + ".gp");
    out << "set datafile separator ','\n"
        << "set key autotitle columnhead\n"
        << "set logscale x\n"
        << "set xlabel 't'\n"
        << "set terminal pngcairo size 1200,400\n"
        << "set output '" << report.experiment << ".png'\n";
    if (!report.rows.empty()) {
      const auto& stats = report.rows.front().stats;
      out << "set multiplot layout 1," << stats.size() << "\n";
      for (std::size_t k = 0; k < stats.size(); ++k) {
        const std::size_t col = 5 + 2 * k;
        out << "set title '" << stats[k].name << "'\n"
            << "plot '" << csv_name << "' using 1:" << col << ':' << col + 1 << " with yerrorlines notitle\n";
      }
      out << "unset multiplot\n";
    }
  }
}

ConvergenceReport rerun(const nlohmann::json& manifest, const RunOptions& opts) {
  try {
    require(manifest.at("schema_version").get<int>() == kSchemaVersion, "unsupported manifest schema version");
    const std::string kind = manifest.at("experiment").get<std::string>();
    const Schedule schedule = schedule_from_json(manifest.at("schedule"));
    const auto t_list = manifest.at("t_list").get<std::vector<double>>();
    const auto seed = manifest.at("seed").get<std::uint64_t>();
    if (kind == "theorem1") {
      return run_theorem1({schedule, t_list, polymer_from_json(manifest.at("polymer")),
                           she_from_json(manifest.at("she")), seed},
                          opts);
    }
    if (kind == "theorem2") {
      return run_theorem2({schedule, t_list, manifest.at("T").get<double>(), manifest.at("Y").get<double>(),
                           polymer_from_json(manifest.at("polymer")), she_from_json(manifest.at("she")), seed},
                          opts);
    }
    if (kind == "prop31") {
      return run_prop31({schedule, test_function_from(manifest.at("g").get<std::string>()), t_list,
                         manifest.at("n_rep").get<long>(), seed},
                        opts);
    }
    throw ValidationError("unknown experiment '" + kind + "' in manifest");
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed manifest: ") + e.what());
  }
}

}  // namespace sdp
