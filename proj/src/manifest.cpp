#include "logsde/manifest.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "logsde/coeffs.hpp"
#include "logsde/ldp.hpp"
#include "logsde/lyapunov.hpp"
#include "logsde/paths.hpp"
#include "logsde/sde.hpp"
#include "logsde/skeleton.hpp"

namespace logsde {

namespace {

const std::vector<std::string> kExperiments = {
    "simulate", "skeleton",  "converge", "lifetime", "stability",
    "rate",     "ldp",       "closeness", "osgood",  "lemma24"};

bool field_required(const std::string& experiment) {
  return experiment != "osgood" && experiment != "lemma24";
}

}  // namespace

const std::vector<std::string>& experiment_names() { return kExperiments; }

Manifest Manifest::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw validation_error("manifest must be a JSON object");
  Manifest m;
  m.schema_version = j.value("schema_version", 1);
  if (m.schema_version != 1)
    throw validation_error("unsupported schema_version " + std::to_string(m.schema_version));
  if (!j.contains("experiment") || !j.at("experiment").is_string())
    throw validation_error("manifest needs a string 'experiment'");
  m.experiment = j.at("experiment").get<std::string>();
  bool known = false;
  for (const auto& name : kExperiments) known = known || name == m.experiment;
  if (!known) throw validation_error("unknown experiment: " + m.experiment);
  if (j.contains("field")) {
    const auto& f = j.at("field");
    if (!f.is_object() || !f.contains("key"))
      throw validation_error("'field' must be an object with a 'key'");
    m.field_key = f.at("key").get<std::string>();
    m.field_params = f.value("params", nlohmann::json::object());
  }
  if (field_required(m.experiment) && m.field_key.empty())
    throw validation_error("experiment '" + m.experiment + "' needs a field");
  m.params = j.value("params", nlohmann::json::object());
  if (j.contains("seed")) m.seed = j.at("seed").get<std::uint64_t>();
  m.out_dir = j.value("out", std::string{});
  return m;
}

Manifest Manifest::from_string(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw validation_error(std::string("manifest is not valid JSON: ") + e.what());
  }
  return from_json(j);
}

Manifest Manifest::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw validation_error("cannot read manifest file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return from_string(buf.str());
}

nlohmann::json Manifest::to_json() const {
  nlohmann::json j;
  j["schema_version"] = schema_version;
  j["experiment"] = experiment;
  if (!field_key.empty()) {
    j["field"] = nlohmann::json::object();
    j["field"]["key"] = field_key;
    if (!field_params.empty()) j["field"]["params"] = field_params;
  }
  j["params"] = params;
  j["seed"] = seed;
  if (!out_dir.empty()) j["out"] = out_dir;
  return j;
}

std::string Manifest::canonical() const { return to_json().dump(); }

std::string Manifest::digest_hex() const {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(digest()));
  return std::string(buf);
}

namespace {

// ---- manifest parameter helpers -------------------------------------------

double pnum(const nlohmann::json& p, const char* key, double fallback) {
  if (!p.contains(key)) return fallback;
  if (!p.at(key).is_number()) throw validation_error(std::string("param '") + key + "' must be a number");
  return p.at(key).get<double>();
}

double pnum_req(const nlohmann::json& p, const char* key) {
  if (!p.contains(key)) throw validation_error(std::string("missing param '") + key + "'");
  if (!p.at(key).is_number()) throw validation_error(std::string("param '") + key + "' must be a number");
  return p.at(key).get<double>();
}

std::int64_t pint(const nlohmann::json& p, const char* key, std::int64_t fallback) {
  return static_cast<std::int64_t>(pnum(p, key, static_cast<double>(fallback)));
}

std::vector<double> pvec(const nlohmann::json& p, const char* key,
                         std::vector<double> fallback = {}) {
  if (!p.contains(key)) return fallback;
  if (!p.at(key).is_array()) throw validation_error(std::string("param '") + key + "' must be an array");
  return p.at(key).get<std::vector<double>>();
}

std::vector<int> pivec(const nlohmann::json& p, const char* key, std::vector<int> fallback = {}) {
  if (!p.contains(key)) return fallback;
  return p.at(key).get<std::vector<int>>();
}

std::vector<double> resolve_x0(const nlohmann::json& p, int d) {
  std::vector<double> x0 = pvec(p, "x0", std::vector<double>(static_cast<std::size_t>(d), 0.0));
  if (static_cast<int>(x0.size()) != d)
    throw validation_error("x0 dimension does not match the field");
  return x0;
}

PathEvent parse_event(const nlohmann::json& p, const std::vector<double>& x0) {
  if (!p.contains("event") || !p.at("event").is_object())
    throw validation_error("missing 'event' object");
  const auto& e = p.at("event");
  const std::string kind = e.value("kind", "");
  if (kind == "terminal_hit") {
    if (!e.contains("target")) throw validation_error("terminal_hit event needs 'target'");
    return PathEvent::terminal(e.at("target").get<std::vector<double>>(),
                               e.value("tol", 1e-4));
  }
  if (kind == "exit_ball") {
    auto ev = PathEvent::exit(pnum_req(e, "radius"));
    if (e.contains("center")) ev.center = e.at("center").get<std::vector<double>>();
    return ev;
  }
  if (kind == "level_hit") {
    auto ev = PathEvent::level(pnum_req(e, "level"));
    if (e.contains("direction")) ev.direction = e.at("direction").get<std::vector<double>>();
    return ev;
  }
  if (kind == "tube") {
    GridPath center(TimeGrid(1.0, 1), static_cast<int>(x0.size()));
    for (int k = 0; k <= 1; ++k)
      for (std::size_t j = 0; j < x0.size(); ++j) center.ref(k, static_cast<int>(j)) = x0[j];
    if (e.contains("center") && e.at("center").is_array()) {
      const auto c = e.at("center").get<std::vector<double>>();
      if (c.size() != x0.size()) throw validation_error("tube center dimension mismatch");
      for (int k = 0; k <= 1; ++k)
        for (std::size_t j = 0; j < c.size(); ++j) center.ref(k, static_cast<int>(j)) = c[j];
    }
    return PathEvent::tube_event(std::move(center), pnum_req(e, "delta"));
  }
  throw validation_error("unknown event kind: " + kind);
}

// ---- output helpers --------------------------------------------------------

struct Emitter {
  std::filesystem::path dir;
  std::string digest_line;
  nlohmann::json summary = nlohmann::json::object();
  std::vector<std::string> files;

  void csv(const std::string& name, const std::string& header,
           const std::vector<std::vector<double>>& rows) {
    std::ofstream os(dir / name, std::ios::binary);
    if (!os) throw validation_error("cannot write output file: " + (dir / name).string());
    os << digest_line << "\n" << header << "\n";
    for (const auto& row : rows) {
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) os << ",";
        os << format_double(row[i]);
      }
      os << "\n";
    }
    files.push_back(name);
  }

  void csv_text(const std::string& name, const std::string& body) {
    std::ofstream os(dir / name, std::ios::binary);
    if (!os) throw validation_error("cannot write output file: " + (dir / name).string());
    os << digest_line << "\n" << body;
    files.push_back(name);
  }

  void json_summary(const std::string& name) {
    std::ofstream os(dir / name, std::ios::binary);
    if (!os) throw validation_error("cannot write output file: " + (dir / name).string());
    os << summary.dump(2) << "\n";
    files.push_back(name);
  }
};

std::string trajectory_csv_body(const Trajectory& traj) {
  std::ostringstream os;
  write_csv(os, traj);
  return os.str();
}

// ---- experiment runners ----------------------------------------------------

void run_simulate(const Manifest& m, const CoefficientField& field, Emitter& em, int) {
  const auto& p = m.params;
  const double eps = pnum(p, "eps", 1.0);
  const int n = static_cast<int>(pint(p, "n", 2048));
  const double horizon = pnum(p, "T", 1.0);
  const auto x0 = resolve_x0(p, field.dim_state());
  const auto trial = static_cast<std::uint64_t>(pint(p, "trial", 0));
  SdeRun run{field, eps, x0,
             BrownianDriver::sample(field.dim_noise(), TimeGrid(horizon, n), m.seed, trial),
             pnum(p, "guard", 1e12)};
  const Trajectory traj = euler_maruyama(run);
  em.csv_text("simulate.csv", trajectory_csv_body(traj));
  em.summary["exploded"] = traj.exploded();
  if (traj.exploded()) {
    em.summary["explosion_time"] = traj.explosion->time;
    em.summary["explosion_norm"] = traj.explosion->norm;
  }
  em.summary["final_state"] = std::vector<double>(traj.back().begin(), traj.back().end());
}

void run_skeleton(const Manifest& m, const CoefficientField& field, Emitter& em, int) {
  const auto& p = m.params;
  const int n = static_cast<int>(pint(p, "n", 1024));
  const double horizon = pnum(p, "T", 1.0);
  const auto x0 = resolve_x0(p, field.dim_state());
  const std::string mode = p.value("mode", "rk4");

  Control control = Control::zero(field.dim_noise(), TimeGrid(horizon, 1));
  if (p.contains("control")) {
    const auto& c = p.at("control");
    const std::string kind = c.value("kind", "zero");
    const int knots = static_cast<int>(pint(c, "knots", 16));
    if (kind == "zero") {
      control = Control::zero(field.dim_noise(), TimeGrid(horizon, knots));
    } else if (kind == "linear") {
      const auto v = c.at("velocity").get<std::vector<double>>();
      control = Control::linear(v, TimeGrid(horizon, knots));
    } else if (kind == "seeded") {
      control = Control::seeded(field.dim_noise(), TimeGrid(horizon, knots),
                                pnum(c, "energy", 1.0), m.seed,
                                static_cast<std::uint64_t>(pint(c, "index", 0)));
    } else {
      throw validation_error("unknown control kind: " + kind);
    }
  }

  Trajectory traj;
  int steps_used = n;
  if (mode == "rk4") {
    // solver mesh snaps to a multiple of the control mesh
    steps_used = n % control.grid.steps == 0
                     ? n
                     : control.grid.steps * std::max(1, n / control.grid.steps);
    SkeletonProblem prob{field, control, x0, TimeGrid(horizon, steps_used),
                         pnum(p, "guard", 1e12)};
    traj = solve_skeleton(prob);
  } else if (mode == "polygon") {
    const GridPath driver = control.sample_on(TimeGrid(horizon, n));
    traj = euler_polygon(field, driver, x0, pnum(p, "guard", 1e12));
  } else {
    throw validation_error("unknown skeleton mode: " + mode);
  }
  em.csv_text("skeleton.csv", trajectory_csv_body(traj));
  em.summary["exploded"] = traj.exploded();
  em.summary["mode"] = mode;
  em.summary["steps"] = steps_used;
  em.summary["final_state"] = std::vector<double>(traj.back().begin(), traj.back().end());
}

void run_converge(const Manifest& m, const CoefficientField& field, Emitter& em, int) {
  const auto& p = m.params;
  const double alpha = pnum(p, "alpha", 4.0);
  const int control_count = static_cast<int>(pint(p, "controls", 20));
  const int control_knots = static_cast<int>(pint(p, "control_knots", 8));
  const std::vector<int> ladder = pivec(p, "n_ladder", {8, 16, 32, 64, 128});
  const auto x0 = resolve_x0(p, field.dim_state());
  const int ref_mult = static_cast<int>(pint(p, "ref_multiplier", 8));

  std::vector<Control> controls;
  controls.reserve(static_cast<std::size_t>(control_count));
  for (int i = 0; i < control_count; ++i)
    controls.push_back(Control::seeded(field.dim_noise(), TimeGrid(1.0, control_knots),
                                       alpha * (0.25 + 0.75 * (i + 1.0) / control_count),
                                       m.seed, static_cast<std::uint64_t>(i)));
  const ConvergenceReport report =
      uniform_convergence_report(field, controls, alpha, ladder, x0, ref_mult);

  std::vector<std::vector<double>> rows;
  for (const auto& r : report.rows)
    rows.push_back({static_cast<double>(r.n), r.sup_error});
  em.csv("converge.csv", "n,sup_error", rows);
  em.summary["errors_decreasing"] = report.errors_decreasing;
  em.summary["step_bound_ok"] = report.step_bound_ok;
  em.summary["step_bound_constant"] = report.step_bound_constant;
  em.summary["reference_steps"] = report.reference_steps;
  em.summary["note"] = report.note;
}

void run_lifetime(const Manifest& m, const CoefficientField& field, Emitter& em, int) {
  const auto& p = m.params;
  const auto x0 = resolve_x0(p, field.dim_state());
  const double horizon = pnum(p, "horizon", 1.0);
  std::vector<double> ladder = pvec(p, "r_ladder");
  if (ladder.empty())
    for (int k = 3; k <= 12; ++k) ladder.push_back(std::pow(10.0, k));
  const int n = static_cast<int>(pint(p, "n", 1 << 20));
  const double eps = pnum(p, "eps", 0.0);
  const LifetimeReport report =
      detect_lifetime(field, x0, horizon, ladder, n, eps, m.seed,
                      static_cast<std::uint64_t>(pint(p, "trial", 0)));

  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < report.r_ladder.size(); ++i)
    rows.push_back({report.r_ladder[i], report.tau[i]});
  em.csv("lifetime.csv", "R,tau", rows);
  em.summary["exploded"] = report.exploded;
  em.summary["lifetime"] = report.exploded ? nlohmann::json(report.lifetime)
                                           : nlohmann::json(">= horizon");
  em.summary["final_time"] = report.final_time;
  em.summary["final_state"] = report.final_state;
  em.summary["increment_exponent"] = report.increment_exponent;
}

void run_stability(const Manifest& m, const CoefficientField& field, Emitter& em, int threads) {
  const auto& p = m.params;
  const auto x0 = resolve_x0(p, field.dim_state());
  const double eps = pnum(p, "eps", 0.01);
  const std::vector<double> ladder = pvec(p, "delta_ladder", {0.3, 0.1, 0.03, 0.01});
  const double threshold = pnum(p, "threshold", 0.5);
  const std::int64_t trials = pint(p, "trials", 1000);
  const int n = static_cast<int>(pint(p, "n", 2048));
  const StabilityReport report = stability_probability(field, eps, x0, ladder, threshold,
                                                       trials, n, m.seed, threads);
  std::vector<std::vector<double>> rows;
  for (const auto& r : report.rows)
    rows.push_back({r.delta, static_cast<double>(r.trials), static_cast<double>(r.exceed),
                    r.fraction, r.std_error});
  em.csv("stability.csv", "delta,trials,exceed,fraction,std_error", rows);
  em.summary["threshold"] = report.threshold;
  em.summary["nonincreasing_2se"] = report.nonincreasing_2se;
}

void run_rate(const Manifest& m, const CoefficientField& field, Emitter& em, int) {
  const auto& p = m.params;
  const auto x0 = resolve_x0(p, field.dim_state());
  const PathEvent event = parse_event(p, x0);
  const int knots = static_cast<int>(pint(p, "knots", 32));
  const int restarts = static_cast<int>(pint(p, "restarts", 3));
  const RateResult result = rate_functional(field, event, x0, knots, restarts, m.seed);

  std::vector<std::vector<double>> rows;
  rows.push_back({result.rate, result.residual, static_cast<double>(result.knots),
                  static_cast<double>(result.restarts),
                  result.status == RateResult::Status::ok ? 1.0 : 0.0});
  em.csv("rate.csv", "I,residual,knots,restarts,feasible", rows);
  {
    std::ostringstream os;
    os << "t";
    for (int j = 0; j < result.minimizer.dim; ++j) os << ",g" << j;
    os << "\n";
    for (int k = 0; k <= result.minimizer.grid.steps; ++k) {
      os << format_double(result.minimizer.grid.node(k));
      for (int j = 0; j < result.minimizer.dim; ++j)
        os << "," << format_double(result.minimizer.knot(k)[j]);
      os << "\n";
    }
    em.csv_text("rate_minimizer.csv", os.str());
  }
  em.summary["I"] = result.rate;
  em.summary["residual"] = result.residual;
  em.summary["feasible"] = result.status == RateResult::Status::ok;
  em.summary["stage_residuals"] = result.stage_residuals;
  if (result.status != RateResult::Status::ok)
    throw numerical_error("rate functional infeasible at this resolution");
}

void run_ldp(const Manifest& m, const CoefficientField& field, Emitter& em, int threads) {
  const auto& p = m.params;
  const auto x0 = resolve_x0(p, field.dim_state());
  const PathEvent event = parse_event(p, x0);
  const std::vector<double> ladder = pvec(p, "eps_ladder", {0.4, 0.2, 0.1});
  const std::int64_t trials = pint(p, "trials", 20000);
  const int n = static_cast<int>(pint(p, "n", 2048));
  const int knots = static_cast<int>(pint(p, "knots", 32));
  const int restarts = static_cast<int>(pint(p, "restarts", 3));
  const LdpReport report =
      ldp_gap_report(field, event, x0, ladder, trials, n, knots, restarts, m.seed, threads);

  std::vector<std::vector<double>> rows;
  for (const auto& r : report.rows)
    rows.push_back({r.eps, static_cast<double>(r.trials), static_cast<double>(r.hits), r.p_hat,
                    r.eps_log_p, r.lo, r.hi, r.neg_rate, r.gap});
  em.csv("ldp.csv", "eps,trials,hits,p_hat,eps_log_p,lo,hi,neg_I,gap", rows);
  em.summary["I"] = report.rate.rate;
  em.summary["gaps_shrinking"] = report.gaps_shrinking;
}

void run_closeness(const Manifest& m, const CoefficientField& field, Emitter& em, int threads) {
  const auto& p = m.params;
  const auto x0 = resolve_x0(p, field.dim_state());
  const double eps = pnum(p, "eps", 0.1);
  const double delta = pnum(p, "delta", 0.1);
  const std::vector<int> ladder = pivec(p, "n_ladder", {8, 32, 128});
  const std::int64_t trials = pint(p, "trials", 10000);
  const int ref_mult = static_cast<int>(pint(p, "ref_multiplier", 16));
  const ClosenessReport report =
      euler_closeness(field, eps, ladder, delta, x0, trials, m.seed, threads, ref_mult);

  std::vector<std::vector<double>> rows;
  for (const auto& r : report.rows)
    rows.push_back({static_cast<double>(r.n), static_cast<double>(r.trials),
                    static_cast<double>(r.exceed), r.fraction, r.std_error});
  em.csv("closeness.csv", "n,trials,exceed,fraction,std_error", rows);
  em.summary["reference_steps"] = report.reference_steps;
  em.summary["delta"] = report.delta;
  em.summary["nonincreasing_2se"] = report.nonincreasing_2se;
}

void run_osgood(const Manifest& m, Emitter& em) {
  const auto& p = m.params;
  const GrowthProfile profile = GrowthProfile::by_key(p.value("profile", "log_reciprocal"));
  const double a = pnum(p, "a", 0.5);
  std::vector<double> ladder = pvec(p, "cutoff_ladder");
  if (ladder.empty()) ladder = default_osgood_ladder();
  const OsgoodReport report = osgood_diverges(profile, a, ladder);

  std::vector<std::vector<double>> rows;
  for (const auto& r : report.rungs) rows.push_back({r.delta, r.integral});
  em.csv("osgood.csv", "delta,integral", rows);
  em.summary["verdict"] = to_string(report.verdict);
  em.summary["profile"] = profile.name();
  em.summary["tolerance"] = report.tolerance;
  nlohmann::json rungs = nlohmann::json::array();
  for (const auto& r : report.rungs) rungs.push_back({{"delta", r.delta}, {"integral", r.integral}});
  em.summary["rungs"] = rungs;
}

void run_lemma24(const Manifest& m, Emitter& em) {
  const auto& p = m.params;
  const auto K = static_cast<std::int64_t>(pnum(p, "K", 2000000));
  const double tol = pnum(p, "tol", 1e-6);
  std::vector<double> grid = pvec(p, "theta_grid");
  if (grid.empty()) {
    const int count = static_cast<int>(pint(p, "grid_points", 100));
    const double lo = pnum(p, "theta_min", 1e-6);
    const double hi = pnum(p, "theta_max", 0.3678);
    for (int i = 0; i < count; ++i)
      grid.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (count - 1)));
  }
  const SineBoundReport report = sine_series_bound_check(grid, K, tol);
  std::vector<std::vector<double>> rows;
  rows.push_back({report.max_ratio, report.witness_theta, report.bound_constant});
  em.csv("lemma24.csv", "max_ratio,witness_theta,bound_constant", rows);
  em.summary["max_ratio"] = report.max_ratio;
  em.summary["witness_theta"] = report.witness_theta;
  em.summary["bound_constant"] = report.bound_constant;
  em.summary["within_bound"] = report.max_ratio <= report.bound_constant;
}

}  // namespace

RunResult run_manifest(const Manifest& manifest, const std::string& out_dir, int threads,
                       bool dry_run) {
  RunResult result;
  try {
    // validation pass: field construction and basic parameter shape
    CoefficientField field;
    if (!manifest.field_key.empty())
      field = make_field(manifest.field_key, manifest.field_params);
    if (threads < 1) throw validation_error("thread cap must be at least 1");
    if (dry_run) return result;

    std::filesystem::path dir = out_dir.empty() ? "." : out_dir;
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw validation_error("cannot create output directory: " + dir.string());

    Emitter em;
    em.dir = dir;
    em.digest_line = "# manifest_digest=" + manifest.digest_hex();
    em.summary["manifest_digest"] = manifest.digest_hex();
    em.summary["experiment"] = manifest.experiment;

    const std::string& exp = manifest.experiment;
    if (exp == "simulate")
      run_simulate(manifest, field, em, threads);
    else if (exp == "skeleton")
      run_skeleton(manifest, field, em, threads);
    else if (exp == "converge")
      run_converge(manifest, field, em, threads);
    else if (exp == "lifetime")
      run_lifetime(manifest, field, em, threads);
    else if (exp == "stability")
      run_stability(manifest, field, em, threads);
    else if (exp == "rate")
      run_rate(manifest, field, em, threads);
    else if (exp == "ldp")
      run_ldp(manifest, field, em, threads);
    else if (exp == "closeness")
      run_closeness(manifest, field, em, threads);
    else if (exp == "osgood")
      run_osgood(manifest, em);
    else if (exp == "lemma24")
      run_lemma24(manifest, em);
    else
      throw validation_error("unknown experiment: " + exp);

    em.json_summary(manifest.experiment + "_summary.json");
    result.files = em.files;
    return result;
  } catch (const validation_error& e) {
    result.exit_code = 2;
    nlohmann::json d{{"error", e.what()}, {"kind", "validation"}};
    result.diagnostic = d.dump();
    return result;
  } catch (const numerical_error& e) {
    result.exit_code = 3;
    nlohmann::json d{{"error", e.what()}, {"kind", "numerical"}};
    result.diagnostic = d.dump();
    return result;
  } catch (const std::exception& e) {
    result.exit_code = 3;
    nlohmann::json d{{"error", e.what()}, {"kind", "internal"}};
    result.diagnostic = d.dump();
    return result;
  }
}

}  // namespace logsde
