#include "logsde/sde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace logsde {

Trajectory euler_maruyama(const SdeRun& run) {
  if (!(run.eps > 0.0)) throw validation_error("eps must be positive");
  if (run.driver.noise_dim() != run.field.dim_noise())
    throw validation_error("driver dimension does not match the field noise dimension");
  const GridPath scaled = run.driver.scaled_path(std::sqrt(run.eps));
  return euler_polygon(run.field, scaled, run.x0, run.explosion_guard);
}

std::pair<Trajectory, Trajectory> coupled_pair(const CoefficientField& field, double eps,
                                               const BrownianDriver& driver,
                                               std::span<const double> x0,
                                               std::span<const double> y0,
                                               double explosion_guard) {
  SdeRun a{field, eps, {x0.begin(), x0.end()}, driver, explosion_guard};
  SdeRun b{field, eps, {y0.begin(), y0.end()}, driver, explosion_guard};
  return {euler_maruyama(a), euler_maruyama(b)};
}

StabilityReport stability_probability(const CoefficientField& field, double eps,
                                      std::span<const double> x0,
                                      std::span<const double> delta_ladder, double threshold,
                                      std::int64_t trials, int n, std::uint64_t seed,
                                      int threads, std::span<const double> direction) {
  if (!(threshold > 0.0)) throw validation_error("threshold must be positive");
  if (trials < 1) throw validation_error("need at least one trial");
  for (std::size_t i = 1; i < delta_ladder.size(); ++i)
    if (!(delta_ladder[i] < delta_ladder[i - 1]))
      throw validation_error("delta ladder must strictly decrease");

  const int d = field.dim_state();
  std::vector<double> dir(static_cast<std::size_t>(d), 0.0);
  if (direction.empty()) {
    dir[0] = 1.0;
  } else {
    if (static_cast<int>(direction.size()) != d)
      throw validation_error("direction dimension does not match the field");
    const double nn = norm2(direction);
    if (!(nn > 0.0)) throw validation_error("direction must be nonzero");
    for (int i = 0; i < d; ++i) dir[i] = direction[i] / nn;
  }

  const TimeGrid grid(1.0, n);
  StabilityReport report;
  report.threshold = threshold;

  for (double delta : delta_ladder) {
    StabilityRow row;
    row.delta = delta;
    row.trials = trials;
    if (delta == 0.0) {
      // identical starts feed identical recursions
      report.rows.push_back(row);
      continue;
    }
    std::vector<double> y0(x0.begin(), x0.end());
    for (int i = 0; i < d; ++i) y0[i] += delta * dir[i];

    std::vector<std::uint8_t> exceed(static_cast<std::size_t>(trials), 0);
    parallel_for(trials, threads, [&](std::int64_t t) {
      const BrownianDriver w =
          BrownianDriver::sample(field.dim_noise(), grid, seed, static_cast<std::uint64_t>(t));
      const auto [xa, xb] = coupled_pair(field, eps, w, x0, y0);
      if (xa.exploded() || xb.exploded()) {
        exceed[static_cast<std::size_t>(t)] = 1;
        return;
      }
      exceed[static_cast<std::size_t>(t)] = sup_distance(xa, xb) > threshold ? 1 : 0;
    });
    for (std::int64_t t = 0; t < trials; ++t) row.exceed += exceed[static_cast<std::size_t>(t)];
    row.fraction = static_cast<double>(row.exceed) / static_cast<double>(trials);
    row.std_error = std::sqrt(std::max(row.fraction * (1.0 - row.fraction), 1e-12) /
                              static_cast<double>(trials));
    report.rows.push_back(row);
  }

  report.nonincreasing_2se = true;
  for (std::size_t i = 1; i < report.rows.size(); ++i) {
    const auto& prev = report.rows[i - 1];
    const auto& cur = report.rows[i];
    const double slack = 2.0 * std::sqrt(prev.std_error * prev.std_error +
                                         cur.std_error * cur.std_error);
    if (cur.fraction > prev.fraction + slack) report.nonincreasing_2se = false;
  }
  return report;
}

LifetimeReport detect_lifetime(const CoefficientField& field, std::span<const double> x0,
                               double horizon, std::span<const double> r_ladder, int n,
                               double eps, std::uint64_t seed, std::uint64_t trial) {
  if (r_ladder.size() < 4) throw validation_error("radius ladder needs at least 4 rungs");
  for (std::size_t i = 1; i < r_ladder.size(); ++i)
    if (!(r_ladder[i] > r_ladder[i - 1]))
      throw validation_error("radius ladder must strictly increase");
  if (!(horizon > 0.0)) throw validation_error("horizon must be positive");

  const TimeGrid grid(horizon, n);
  const double guard = r_ladder.back();
  Trajectory traj;
  if (eps > 0.0) {
    SdeRun run{field, eps, {x0.begin(), x0.end()}, BrownianDriver::sample(
        field.dim_noise(), grid, seed, trial), guard};
    traj = euler_maruyama(run);
  } else {
    // Euler polygon with a zero driver: the stochastic scheme with the noise
    // removed, so deterministic and noisy lifetimes share one discretization.
    const GridPath zero_driver(grid, field.dim_noise());
    traj = euler_polygon(field, zero_driver, x0, guard);
  }

  LifetimeReport report;
  report.horizon = horizon;
  report.r_ladder.assign(r_ladder.begin(), r_ladder.end());
  report.tau.assign(r_ladder.size(), std::numeric_limits<double>::quiet_NaN());

  const int stored = traj.nodes_stored();
  std::size_t rung = 0;
  for (int k = 0; k < stored && rung < r_ladder.size(); ++k) {
    const double nrm = norm2(traj.at(k));
    while (rung < r_ladder.size() && nrm >= r_ladder[rung])
      report.tau[rung++] = grid.node(k);
  }
  if (traj.exploded() && rung < r_ladder.size()) {
    // the guard node itself covers every remaining rung at or below its norm
    const ExplosionRecord& rec = *traj.explosion;
    while (rung < r_ladder.size() && rec.norm >= r_ladder[rung])
      report.tau[rung++] = rec.time;
  }

  report.final_time = traj.exploded() ? traj.explosion->time : horizon;
  report.final_state.assign(traj.back().begin(), traj.back().end());

  const bool all_hit = rung == r_ladder.size();
  if (all_hit) {
    std::vector<double> inc;
    for (std::size_t i = 1; i < report.tau.size(); ++i)
      inc.push_back(std::max(report.tau[i] - report.tau[i - 1], 0.0));
    const double d_first = inc.front();
    const double d_last = inc.back();
    if (d_first > 0.0 && d_last > 0.0) {
      // Power-law slope of the hitting-time gaps against log R. Summable
      // gaps (finite blow-up time) give slopes near -2; unbounded growth
      // without blow-up gives slopes near -1.
      const double a_first = std::log(r_ladder[1]);
      const double a_last = std::log(r_ladder.back());
      report.increment_exponent = std::log(d_last / d_first) / std::log(a_last / a_first);
      const double prev = inc[inc.size() - 2];
      const double ratio = prev > 0.0 ? d_last / prev : 1.0;
      if (report.increment_exponent <= -1.5 && ratio < 0.95) {
        const double tail = d_last * ratio / (1.0 - ratio);
        const double estimate = report.tau.back() + tail;
        if (estimate < horizon) {
          report.exploded = true;
          report.lifetime = estimate;
        }
      }
    }
  }
  return report;
}

}  // namespace logsde
