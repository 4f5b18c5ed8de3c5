#include "logsde/skeleton.hpp"

#include <algorithm>
#include <cmath>

namespace logsde {

namespace {

// Per-step growth beyond this factor counts as explosion even inside the
// norm guard; it separates genuine blow-up from fast transients.
constexpr double kStepGrowthCap = 1e6;

bool guard_tripped(std::span<const double> x, double prev_norm, double guard, double* norm_out) {
  double n = 0.0;
  bool finite = true;
  for (double v : x) {
    if (!std::isfinite(v)) finite = false;
    n += v * v;
  }
  n = std::sqrt(n);
  *norm_out = n;
  if (!finite) return true;
  if (n > guard) return true;
  return prev_norm > 1.0 && n > kStepGrowthCap * prev_norm;
}

}  // namespace

Trajectory solve_skeleton(const SkeletonProblem& p) {
  const int d = p.field.dim_state();
  const int m = p.field.dim_noise();
  if (static_cast<int>(p.x0.size()) != d)
    throw validation_error("initial state dimension does not match the field");
  if (p.control.dim != m)
    throw validation_error("control dimension does not match the field noise dimension");
  if (p.grid.horizon != p.control.grid.horizon)
    throw validation_error("control and solver grids must share the horizon");
  if (p.grid.steps % p.control.grid.steps != 0)
    throw validation_error("solver mesh must be a multiple of the control mesh");

  const int n = p.grid.steps;
  const double h = p.grid.dt();
  const int ratio = n / p.control.grid.steps;

  Trajectory traj;
  traj.grid = p.grid;
  traj.dim = d;
  traj.states.reserve(static_cast<std::size_t>(n + 1) * d);
  traj.states.insert(traj.states.end(), p.x0.begin(), p.x0.end());

  std::vector<double> x(p.x0.begin(), p.x0.end());
  std::vector<double> slope(m), b(d), sig(static_cast<std::size_t>(d) * m);
  std::vector<double> k1(d), k2(d), k3(d), k4(d), xs(d);

  auto rhs = [&](std::span<const double> state, std::span<double> out) {
    p.field.drift_into(state, b);
    p.field.diffusion_into(state, sig);
    for (int i = 0; i < d; ++i) {
      double v = b[i];
      for (int j = 0; j < m; ++j) v += sig[static_cast<std::size_t>(i) * m + j] * slope[j];
      out[i] = v;
    }
  };

  double prev_norm = norm2(x);
  for (int k = 0; k < n; ++k) {
    const int seg = k / ratio;
    for (int j = 0; j < m; ++j) slope[j] = p.control.slope(seg, j);

    rhs(x, k1);
    for (int i = 0; i < d; ++i) xs[i] = x[i] + 0.5 * h * k1[i];
    rhs(xs, k2);
    for (int i = 0; i < d; ++i) xs[i] = x[i] + 0.5 * h * k2[i];
    rhs(xs, k3);
    for (int i = 0; i < d; ++i) xs[i] = x[i] + h * k3[i];
    rhs(xs, k4);
    // combine as h * (sum/6) so constant right-hand sides integrate exactly
    for (int i = 0; i < d; ++i)
      x[i] += h * ((k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]) / 6.0);

    double norm = 0.0;
    if (guard_tripped(x, prev_norm, p.explosion_guard, &norm)) {
      traj.explosion = ExplosionRecord{p.grid.node(k + 1), k + 1, norm};
      return traj;
    }
    prev_norm = norm;
    traj.states.insert(traj.states.end(), x.begin(), x.end());
  }
  return traj;
}

Trajectory euler_polygon(const CoefficientField& field, const GridPath& driver,
                         std::span<const double> x0, double explosion_guard) {
  const int d = field.dim_state();
  const int m = field.dim_noise();
  if (static_cast<int>(x0.size()) != d)
    throw validation_error("initial state dimension does not match the field");
  if (driver.dim != m)
    throw validation_error("driver dimension does not match the field noise dimension");

  const int n = driver.grid.steps;
  const double h = driver.grid.dt();

  Trajectory traj;
  traj.grid = driver.grid;
  traj.dim = d;
  traj.states.reserve(static_cast<std::size_t>(n + 1) * d);
  traj.states.insert(traj.states.end(), x0.begin(), x0.end());

  std::vector<double> x(x0.begin(), x0.end());
  std::vector<double> b(d), sig(static_cast<std::size_t>(d) * m);

  double prev_norm = norm2(x);
  for (int k = 0; k < n; ++k) {
    field.drift_into(x, b);
    field.diffusion_into(x, sig);
    const double* w0 = driver.values.data() + static_cast<std::size_t>(k) * m;
    const double* w1 = driver.values.data() + static_cast<std::size_t>(k + 1) * m;
    for (int i = 0; i < d; ++i) {
      double v = x[i] + b[i] * h;
      for (int j = 0; j < m; ++j)
        v += sig[static_cast<std::size_t>(i) * m + j] * (w1[j] - w0[j]);
      x[i] = v;
    }
    double norm = 0.0;
    if (guard_tripped(x, prev_norm, explosion_guard, &norm)) {
      traj.explosion = ExplosionRecord{driver.grid.node(k + 1), k + 1, norm};
      return traj;
    }
    prev_norm = norm;
    traj.states.insert(traj.states.end(), x.begin(), x.end());
  }
  return traj;
}

std::vector<double> polygon_value(const CoefficientField& field, const GridPath& driver,
                                  const Trajectory& traj, double t) {
  const TimeGrid& grid = traj.grid;
  if (!(t >= 0.0 && t <= grid.horizon)) throw validation_error("time outside the horizon");
  const double h = grid.dt();
  int k = std::min(static_cast<int>(t / h), grid.steps - 1);
  if (k >= traj.nodes_stored() - 1) throw validation_error("trajectory truncated before t");
  const int d = traj.dim;
  const int m = driver.dim;
  std::vector<double> b(d), sig(static_cast<std::size_t>(d) * m), out(d);
  const auto xk = traj.at(k);
  field.drift_into(xk, b);
  field.diffusion_into(xk, sig);
  const double frac = (t - grid.node(k)) / h;
  for (int i = 0; i < d; ++i) {
    double v = xk[i] + b[i] * (t - grid.node(k));
    for (int j = 0; j < m; ++j) {
      const double w_t = driver.get(k, j) + frac * (driver.get(k + 1, j) - driver.get(k, j));
      v += sig[static_cast<std::size_t>(i) * m + j] * (w_t - driver.get(k, j));
    }
    out[i] = v;
  }
  return out;
}

ConvergenceReport uniform_convergence_report(const CoefficientField& field,
                                             std::span<const Control> controls, double alpha,
                                             std::span<const int> n_ladder,
                                             std::span<const double> x0_in, int ref_multiplier) {
  if (!field.bounds())
    throw validation_error(
        "convergence sweep needs a bounded field; truncate it first (truncate_field)");
  if (controls.empty()) throw validation_error("need at least one control");
  if (n_ladder.size() < 2) throw validation_error("ladder needs at least two rungs");
  for (std::size_t i = 1; i < n_ladder.size(); ++i)
    if (n_ladder[i] <= n_ladder[i - 1]) throw validation_error("ladder must increase");
  for (const Control& g : controls)
    if (g.energy() > alpha * (1.0 + 1e-12))
      throw validation_error("control energy exceeds alpha");

  const int ref_steps = n_ladder.back() * ref_multiplier;
  ConvergenceReport report;
  report.reference_steps = ref_steps;
  const FieldBounds& fb = *field.bounds();
  report.step_bound_constant = fb.sup_drift_norm + fb.sup_diffusion_norm * std::sqrt(alpha);
  report.note = "finite control sample stands in for the full energy ball";

  std::vector<double> x0(field.dim_state(), 0.0);
  if (!x0_in.empty()) {
    if (static_cast<int>(x0_in.size()) != field.dim_state())
      throw validation_error("x0 dimension does not match the field");
    x0.assign(x0_in.begin(), x0_in.end());
  }

  // reference solutions, one per control
  std::vector<Trajectory> reference;
  reference.reserve(controls.size());
  for (const Control& g : controls) {
    SkeletonProblem p{field, g, x0, TimeGrid(g.grid.horizon, ref_steps)};
    reference.push_back(solve_skeleton(p));
  }

  for (int n : n_ladder) {
    if (ref_steps % n != 0)
      throw validation_error("reference mesh must be a multiple of every rung");
    ConvergenceRow row;
    row.n = n;
    for (std::size_t c = 0; c < controls.size(); ++c) {
      const GridPath driver = controls[c].sample_on(TimeGrid(controls[c].grid.horizon, n));
      const Trajectory approx = euler_polygon(field, driver, x0);
      row.sup_error = std::max(row.sup_error, sup_distance(approx, reference[c]));
      for (int k = 0; k + 1 < approx.nodes_stored(); ++k)
        row.max_step_move = std::max(row.max_step_move, dist2(approx.at(k), approx.at(k + 1)));
    }
    report.rows.push_back(row);
  }

  report.errors_decreasing = true;
  for (std::size_t i = 1; i < report.rows.size(); ++i)
    if (!(report.rows[i].sup_error < report.rows[i - 1].sup_error))
      report.errors_decreasing = false;

  report.step_bound_ok = true;
  for (const ConvergenceRow& row : report.rows) {
    const double cap = report.step_bound_constant / std::sqrt(static_cast<double>(row.n));
    if (row.max_step_move > cap) report.step_bound_ok = false;
  }
  return report;
}

NonconfluenceReport ode_nonconfluence(const CoefficientField& field, std::span<const double> x0,
                                      std::span<const double> y0, const TimeGrid& grid,
                                      double explosion_guard) {
  if (x0.size() != y0.size()) throw validation_error("start points must share a dimension");
  if (dist2(x0, y0) == 0.0) throw validation_error("start points must differ");
  const Control zero = Control::zero(field.dim_noise(), grid);
  SkeletonProblem a{field, zero, {x0.begin(), x0.end()}, grid, explosion_guard};
  SkeletonProblem b{field, zero, {y0.begin(), y0.end()}, grid, explosion_guard};
  const Trajectory ta = solve_skeleton(a);
  const Trajectory tb = solve_skeleton(b);
  NonconfluenceReport report;
  if (ta.exploded() || tb.exploded()) {
    report.inconclusive = true;
    return report;
  }
  report.min_separation = std::numeric_limits<double>::infinity();
  for (int k = 0; k < ta.nodes_stored(); ++k)
    report.min_separation = std::min(report.min_separation, dist2(ta.at(k), tb.at(k)));
  report.final_separation = dist2(ta.back(), tb.back());
  return report;
}

}  // namespace logsde
