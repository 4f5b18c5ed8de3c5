#include "logsde/ldp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "logsde/rng.hpp"
#include "logsde/sde.hpp"
#include "logsde/skeleton.hpp"

namespace logsde {

PathEvent PathEvent::terminal(std::vector<double> target, double tol) {
  PathEvent e;
  e.kind = Kind::terminal_hit;
  e.target = std::move(target);
  e.tol = tol;
  return e;
}

PathEvent PathEvent::exit(double radius, std::vector<double> center) {
  PathEvent e;
  e.kind = Kind::exit_ball;
  e.radius = radius;
  e.center = std::move(center);
  return e;
}

PathEvent PathEvent::level(double level_value, std::vector<double> direction) {
  PathEvent e;
  e.kind = Kind::level_hit;
  e.level_value = level_value;
  e.direction = std::move(direction);
  return e;
}

PathEvent PathEvent::tube_event(GridPath center_path, double delta) {
  PathEvent e;
  e.kind = Kind::tube;
  e.tube_center = std::move(center_path);
  e.tube_delta = delta;
  return e;
}

namespace {

std::vector<double> tube_center_at(const GridPath& center, double t) {
  const TimeGrid& g = center.grid;
  const double h = g.dt();
  int k = std::min(static_cast<int>(t / h), g.steps - 1);
  const double frac = (t - g.node(k)) / h;
  std::vector<double> out(center.dim);
  for (int j = 0; j < center.dim; ++j)
    out[j] = center.get(k, j) + frac * (center.get(k + 1, j) - center.get(k, j));
  return out;
}

}  // namespace

bool PathEvent::evaluate(const Trajectory& traj, std::span<const double> x0) const {
  switch (kind) {
    case Kind::terminal_hit: {
      if (traj.exploded()) return false;
      return dist2(traj.back(), target) <= tol;
    }
    case Kind::exit_ball: {
      std::span<const double> c = center.empty() ? x0 : std::span<const double>(center);
      if (traj.exploded()) return true;
      for (int k = 0; k < traj.nodes_stored(); ++k)
        if (dist2(traj.at(k), c) > radius) return true;
      return false;
    }
    case Kind::level_hit: {
      if (traj.exploded()) return true;
      for (int k = 0; k < traj.nodes_stored(); ++k) {
        double proj = 0.0;
        const auto x = traj.at(k);
        if (direction.empty()) {
          proj = x[0];
        } else {
          for (std::size_t j = 0; j < x.size(); ++j) proj += direction[j] * x[j];
        }
        if (proj >= level_value) return true;
      }
      return false;
    }
    case Kind::tube: {
      if (traj.exploded()) return false;
      for (int k = 0; k < traj.nodes_stored(); ++k) {
        const auto c = tube_center_at(tube_center, traj.grid.node(k));
        if (dist2(traj.at(k), c) > tube_delta) return false;
      }
      return true;
    }
  }
  return false;
}

double PathEvent::violation(const Trajectory& traj, std::span<const double> x0, int* node_out,
                            std::vector<double>* seed_out) const {
  const int d = traj.dim;
  const int last = traj.nodes_stored() - 1;
  *node_out = last;
  seed_out->assign(d, 0.0);
  switch (kind) {
    case Kind::terminal_hit: {
      const auto x = traj.back();
      const double dist = dist2(x, target);
      const double v = std::max(0.0, dist - tol);
      if (v > 0.0 && dist > 0.0)
        for (int i = 0; i < d; ++i) (*seed_out)[i] = (x[i] - target[i]) / dist;
      return v;
    }
    case Kind::exit_ball: {
      std::span<const double> c = center.empty() ? x0 : std::span<const double>(center);
      double best = -1.0;
      int arg = last;
      for (int k = 0; k < traj.nodes_stored(); ++k) {
        const double dist = dist2(traj.at(k), c);
        if (dist >= best) {  // later index wins ties so the gradient reaches every step
          best = dist;
          arg = k;
        }
      }
      *node_out = arg;
      const double v = std::max(0.0, radius - best);
      if (v > 0.0) {
        if (best > 0.0) {
          const auto x = traj.at(arg);
          for (int i = 0; i < d; ++i) (*seed_out)[i] = -(x[i] - c[i]) / best;
        } else {
          // Sitting exactly on the center leaves the exit direction free;
          // pick the first axis so descent can start from the zero control.
          (*seed_out)[0] = -1.0;
        }
      }
      return v;
    }
    case Kind::level_hit: {
      double best = -std::numeric_limits<double>::infinity();
      int arg = last;
      for (int k = 0; k < traj.nodes_stored(); ++k) {
        double proj = 0.0;
        const auto x = traj.at(k);
        if (direction.empty()) {
          proj = x[0];
        } else {
          for (int j = 0; j < d; ++j) proj += direction[j] * x[j];
        }
        if (proj >= best) {
          best = proj;
          arg = k;
        }
      }
      *node_out = arg;
      const double v = std::max(0.0, level_value - best);
      if (v > 0.0) {
        if (direction.empty()) {
          (*seed_out)[0] = -1.0;
        } else {
          for (int j = 0; j < d; ++j) (*seed_out)[j] = -direction[j];
        }
      }
      return v;
    }
    case Kind::tube: {
      double best = -1.0;
      int arg = last;
      for (int k = 0; k < traj.nodes_stored(); ++k) {
        const auto c = tube_center_at(tube_center, traj.grid.node(k));
        const double dist = dist2(traj.at(k), c);
        if (dist >= best) {
          best = dist;
          arg = k;
        }
      }
      *node_out = arg;
      const double v = std::max(0.0, best - tube_delta);
      if (v > 0.0 && best > 0.0) {
        const auto x = traj.at(arg);
        const auto c = tube_center_at(tube_center, traj.grid.node(arg));
        for (int i = 0; i < d; ++i) (*seed_out)[i] = (x[i] - c[i]) / best;
      }
      return v;
    }
  }
  return 0.0;
}

namespace {

struct Forward {
  Trajectory traj;
  double violation = 0.0;
  int node = 0;
  std::vector<double> seed;
};

// Discrete action problem over control increments u (knots x m, flattened).
class ActionProblem {
 public:
  ActionProblem(const CoefficientField& field, const PathEvent& event,
                std::span<const double> x0, int knots, const RateOptions& opt)
      : field_(field),
        event_(event),
        x0_(x0.begin(), x0.end()),
        knots_(knots),
        m_(field.dim_noise()),
        d_(field.dim_state()),
        h_(1.0 / knots),
        opt_(opt),
        grid_(1.0, knots) {}

  int dim() const { return knots_ * m_; }
  double dt() const { return h_; }

  double energy(std::span<const double> u) const {
    double e = 0.0;
    for (double v : u) e += v * v;
    return e / h_;
  }

  Forward forward(std::span<const double> u) const {
    GridPath driver(grid_, m_);
    for (int k = 0; k < knots_; ++k)
      for (int j = 0; j < m_; ++j)
        driver.ref(k + 1, j) = driver.get(k, j) + u[static_cast<std::size_t>(k) * m_ + j];
    Forward fw;
    fw.traj = euler_polygon(field_, driver, x0_);
    fw.violation = event_.violation(fw.traj, x0_, &fw.node, &fw.seed);
    return fw;
  }

  double objective(std::span<const double> u, double mu, Forward* fw_out = nullptr) const {
    Forward fw = forward(u);
    const double J = 0.5 * energy(u) + mu * fw.violation * fw.violation;
    if (fw_out) *fw_out = std::move(fw);
    return J;
  }

  // Gradient of the penalized objective via the adjoint of the recursion
  // x_{k+1} = x_k + b(x_k) h + sigma(x_k) u_k. The violation depends on one
  // node (fw.node) with derivative fw.seed; lambda_k = dv/dx_k is propagated
  // backwards with FD Jacobians of the field.
  void gradient(std::span<const double> u, double mu, const Forward& fw,
                std::span<double> grad) const {
    for (int i = 0; i < dim(); ++i) grad[i] = u[i] / h_;
    if (fw.violation <= 0.0 || fw.node == 0) return;
    if (fw.traj.nodes_stored() < knots_ + 1) return;  // exploded forward pass

    const double w = 2.0 * mu * fw.violation;
    std::vector<double> lambda = fw.seed;  // dv/dx at node fw.node
    std::vector<double> b_plus(d_), b_minus(d_);
    std::vector<double> s_plus(static_cast<std::size_t>(d_) * m_),
        s_minus(static_cast<std::size_t>(d_) * m_);
    std::vector<double> sig(static_cast<std::size_t>(d_) * m_);
    std::vector<double> probe(d_), next_lambda(d_);

    for (int k = fw.node - 1; k >= 0; --k) {
      // lambda currently holds dv/dx_{k+1}
      const auto xk = fw.traj.at(k);
      field_.diffusion_into(xk, sig);
      for (int j = 0; j < m_; ++j) {
        double g = 0.0;
        for (int i = 0; i < d_; ++i) g += sig[static_cast<std::size_t>(i) * m_ + j] * lambda[i];
        grad[static_cast<std::size_t>(k) * m_ + j] += w * g;
      }
      if (k == 0) break;

      // lambda_k = (I + h Jb(x_k) + sum_j Jsigma_j(x_k) u_kj)^T lambda_{k+1}
      probe.assign(xk.begin(), xk.end());
      for (int i = 0; i < d_; ++i) next_lambda[i] = lambda[i];
      for (int l = 0; l < d_; ++l) {
        const double step = opt_.jacobian_fd_step * std::max(1.0, std::abs(xk[l]));
        probe[l] = xk[l] + step;
        field_.drift_into(probe, b_plus);
        field_.diffusion_into(probe, s_plus);
        probe[l] = xk[l] - step;
        field_.drift_into(probe, b_minus);
        field_.diffusion_into(probe, s_minus);
        probe[l] = xk[l];
        double acc = 0.0;
        for (int i = 0; i < d_; ++i) {
          double col = h_ * (b_plus[i] - b_minus[i]) / (2.0 * step);
          for (int j = 0; j < m_; ++j)
            col += (s_plus[static_cast<std::size_t>(i) * m_ + j] -
                    s_minus[static_cast<std::size_t>(i) * m_ + j]) /
                   (2.0 * step) * u[static_cast<std::size_t>(k) * m_ + j];
          acc += col * lambda[i];
        }
        next_lambda[l] += acc;
      }
      lambda = next_lambda;
    }
  }

 private:
  const CoefficientField& field_;
  const PathEvent& event_;
  std::vector<double> x0_;
  int knots_;
  int m_;
  int d_;
  double h_;
  RateOptions opt_;
  TimeGrid grid_;
};

struct RestartOutcome {
  std::vector<double> u;
  double violation = std::numeric_limits<double>::infinity();
  double energy = std::numeric_limits<double>::infinity();
  std::vector<double> stage_residuals;
};

RestartOutcome minimize_from(const ActionProblem& problem, std::vector<double> u,
                             const RateOptions& opt) {
  const int dim = static_cast<int>(u.size());
  std::vector<double> grad(dim), trial(dim);
  RestartOutcome out;

  double mu = opt.penalty_initial;
  for (int stage = 0; stage < opt.penalty_stages; ++stage) {
    double alpha = 1.0;
    Forward fw;
    double J = problem.objective(u, mu, &fw);
    for (int it = 0; it < opt.max_inner_iterations; ++it) {
      problem.gradient(u, mu, fw, grad);
      double gnorm_sq = 0.0;
      for (double g : grad) gnorm_sq += g * g;
      if (gnorm_sq <= opt.grad_tol * opt.grad_tol) break;

      // backtracking line search with a warm-started step
      alpha = std::min(alpha * 2.0, 1e6);
      bool moved = false;
      while (alpha > 1e-18) {
        for (int i = 0; i < dim; ++i) trial[i] = u[i] - alpha * grad[i];
        Forward fw_trial;
        const double J_trial = problem.objective(trial, mu, &fw_trial);
        if (J_trial <= J - 1e-4 * alpha * gnorm_sq) {
          u.swap(trial);
          J = J_trial;
          fw = std::move(fw_trial);
          moved = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!moved) break;
    }
    out.stage_residuals.push_back(fw.violation);
    mu *= opt.penalty_factor;
  }

  Forward fw = problem.forward(u);
  out.violation = fw.violation;
  out.energy = problem.energy(u);
  out.u = std::move(u);
  return out;
}

}  // namespace

RateResult rate_functional(const CoefficientField& field, const PathEvent& event,
                           std::span<const double> x0, int knots, int restarts,
                           std::uint64_t seed, const RateOptions& options) {
  if (knots < 1) throw validation_error("need at least one knot");
  if (restarts < 1) throw validation_error("need at least one restart");
  const ActionProblem problem(field, event, x0, knots, options);
  const int dim = problem.dim();
  const double h = problem.dt();

  std::vector<RestartOutcome> outcomes(static_cast<std::size_t>(restarts));
  parallel_for(restarts, restarts > 1 ? 2 : 1, [&](std::int64_t r) {
    std::vector<double> u(static_cast<std::size_t>(dim), 0.0);
    if (r > 0) {
      rng::Stream stream(seed, static_cast<std::uint64_t>(r), 0,
                         rng::Purpose::optimizer_restart);
      for (int i = 0; i < dim; ++i)
        u[i] = options.restart_spread * std::sqrt(h) *
               stream.normal(static_cast<std::uint64_t>(i), 0);
    }
    outcomes[static_cast<std::size_t>(r)] = minimize_from(problem, std::move(u), options);
  });

  // best feasible energy, else smallest violation
  const RestartOutcome* best = &outcomes[0];
  for (const auto& o : outcomes) {
    const bool o_feasible = o.violation <= options.residual_tol;
    const bool b_feasible = best->violation <= options.residual_tol;
    if (o_feasible && (!b_feasible || o.energy < best->energy))
      best = &o;
    else if (!o_feasible && !b_feasible && o.violation < best->violation)
      best = &o;
  }

  RateResult result;
  result.knots = knots;
  result.restarts = restarts;
  result.stage_residuals = best->stage_residuals;
  result.residual = best->violation;
  result.status = best->violation <= options.residual_tol ? RateResult::Status::ok
                                                          : RateResult::Status::infeasible;
  const TimeGrid grid(1.0, knots);
  std::vector<double> knots_flat(static_cast<std::size_t>(knots + 1) * field.dim_noise(), 0.0);
  for (int k = 0; k < knots; ++k)
    for (int j = 0; j < field.dim_noise(); ++j)
      knots_flat[static_cast<std::size_t>(k + 1) * field.dim_noise() + j] =
          knots_flat[static_cast<std::size_t>(k) * field.dim_noise() + j] +
          best->u[static_cast<std::size_t>(k) * field.dim_noise() + j];
  result.minimizer = Control::from_knots(grid, field.dim_noise(), std::move(knots_flat));
  result.rate = 0.5 * result.minimizer.energy();
  return result;
}

namespace {

constexpr double kZ95 = 1.959963984540054;

void wilson_interval(std::int64_t hits, std::int64_t trials, double& lo, double& hi) {
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(hits) / n;
  const double z2 = kZ95 * kZ95;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half = kZ95 * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  lo = std::max(0.0, center - half);
  hi = std::min(1.0, center + half);
}

}  // namespace

McLogProb mc_log_prob(const CoefficientField& field, double eps, const PathEvent& event,
                      std::span<const double> x0, std::int64_t trials, int n,
                      std::uint64_t seed, int threads) {
  if (trials < 1000) throw validation_error("need at least 1000 trials");
  if (!(eps > 0.0)) throw validation_error("eps must be positive");
  const TimeGrid grid(1.0, n);
  std::vector<std::uint8_t> hit(static_cast<std::size_t>(trials), 0);
  parallel_for(trials, threads, [&](std::int64_t t) {
    SdeRun run{field, eps, std::vector<double>(x0.begin(), x0.end()),
               BrownianDriver::sample(field.dim_noise(), grid, seed,
                                      static_cast<std::uint64_t>(t))};
    const Trajectory traj = euler_maruyama(run);
    hit[static_cast<std::size_t>(t)] = event.evaluate(traj, x0) ? 1 : 0;
  });

  McLogProb out;
  out.eps = eps;
  out.trials = trials;
  for (std::int64_t t = 0; t < trials; ++t) out.hits += hit[static_cast<std::size_t>(t)];
  out.p_hat = static_cast<double>(out.hits) / static_cast<double>(trials);
  out.below_resolution = out.hits == 0;
  out.degenerate = out.hits == 0 || out.hits == trials;
  double lo_p, hi_p;
  wilson_interval(out.hits, trials, lo_p, hi_p);
  out.eps_log_p = out.hits > 0 ? eps * std::log(out.p_hat)
                               : -std::numeric_limits<double>::infinity();
  out.lo = lo_p > 0.0 ? eps * std::log(lo_p) : -std::numeric_limits<double>::infinity();
  out.hi = hi_p > 0.0 ? eps * std::log(hi_p) : -std::numeric_limits<double>::infinity();
  return out;
}

LdpReport ldp_gap_report(const CoefficientField& field, const PathEvent& event,
                         std::span<const double> x0, std::span<const double> eps_ladder,
                         std::int64_t trials, int n, int knots, int restarts,
                         std::uint64_t seed, int threads) {
  if (eps_ladder.empty()) throw validation_error("eps ladder must be nonempty");
  for (std::size_t i = 1; i < eps_ladder.size(); ++i)
    if (!(eps_ladder[i] < eps_ladder[i - 1]))
      throw validation_error("eps ladder must strictly decrease");

  LdpReport report;
  report.rate = rate_functional(field, event, x0, knots, restarts, seed);
  if (report.rate.status != RateResult::Status::ok)
    throw numerical_error("rate functional infeasible at this resolution");

  for (double eps : eps_ladder) {
    const McLogProb mc = mc_log_prob(field, eps, event, x0, trials, n, seed, threads);
    LdpRow row{eps,   mc.trials, mc.hits, mc.p_hat, mc.eps_log_p,
               mc.lo, mc.hi,     -report.rate.rate, mc.eps_log_p + report.rate.rate};
    report.rows.push_back(row);
  }
  report.gaps_shrinking = true;
  for (std::size_t i = 1; i < report.rows.size(); ++i) {
    const double prev = report.rows[i - 1].gap;
    const double cur = report.rows[i].gap;
    if (!std::isfinite(cur) || !std::isfinite(prev)) {
      report.gaps_shrinking = false;
      continue;
    }
    const bool closed = cur == 0.0 && prev == 0.0;  // already met, e.g. a certain event
    if (!closed && !(std::abs(cur) < std::abs(prev))) report.gaps_shrinking = false;
  }
  return report;
}

ClosenessReport euler_closeness(const CoefficientField& field, double eps,
                                std::span<const int> n_ladder, double delta,
                                std::span<const double> x0, std::int64_t trials,
                                std::uint64_t seed, int threads, int ref_multiplier) {
  if (!field.bounds())
    throw validation_error("closeness study needs a bounded field; truncate it first");
  if (!(delta > 0.0 && delta < 0.36787944117144233))
    throw validation_error("delta must lie in (0, 1/e)");
  if (n_ladder.size() < 2) throw validation_error("ladder needs at least two rungs");
  for (std::size_t i = 1; i < n_ladder.size(); ++i)
    if (n_ladder[i] <= n_ladder[i - 1]) throw validation_error("ladder must increase");
  const int base = n_ladder.front();
  const int ref_steps = n_ladder.back() * ref_multiplier;
  if (ref_steps % base != 0 || ((ref_steps / base) & (ref_steps / base - 1)) != 0)
    throw validation_error("reference mesh must be a power-of-two refinement of the first rung");
  for (int n : n_ladder)
    if (ref_steps % n != 0) throw validation_error("every rung must divide the reference mesh");

  const TimeGrid base_grid(1.0, base);
  ClosenessReport report;
  report.reference_steps = ref_steps;
  report.delta = delta;

  std::vector<std::vector<std::uint8_t>> exceed(n_ladder.size());
  for (auto& col : exceed) col.assign(static_cast<std::size_t>(trials), 0);

  parallel_for(trials, threads, [&](std::int64_t t) {
    const BrownianDriver coarse =
        BrownianDriver::sample(field.dim_noise(), base_grid, seed, static_cast<std::uint64_t>(t));
    const BrownianDriver fine = coarse.refine_to(ref_steps);
    SdeRun ref_run{field, eps, std::vector<double>(x0.begin(), x0.end()), fine};
    const Trajectory ref = euler_maruyama(ref_run);
    for (std::size_t i = 0; i < n_ladder.size(); ++i) {
      SdeRun run{field, eps, std::vector<double>(x0.begin(), x0.end()),
                 fine.restrict_to(n_ladder[i])};
      const Trajectory approx = euler_maruyama(run);
      exceed[i][static_cast<std::size_t>(t)] = sup_distance(ref, approx) > delta ? 1 : 0;
    }
  });

  for (std::size_t i = 0; i < n_ladder.size(); ++i) {
    ClosenessRow row{n_ladder[i], trials, 0, 0.0, 0.0};
    for (std::int64_t t = 0; t < trials; ++t) row.exceed += exceed[i][static_cast<std::size_t>(t)];
    row.fraction = static_cast<double>(row.exceed) / static_cast<double>(trials);
    row.std_error = std::sqrt(std::max(row.fraction * (1.0 - row.fraction), 1e-12) /
                              static_cast<double>(trials));
    report.rows.push_back(row);
  }
  report.nonincreasing_2se = true;
  for (std::size_t i = 1; i < report.rows.size(); ++i) {
    const auto& prev = report.rows[i - 1];
    const auto& cur = report.rows[i];
    const double slack =
        2.0 * std::sqrt(prev.std_error * prev.std_error + cur.std_error * cur.std_error);
    if (cur.fraction > prev.fraction + slack) report.nonincreasing_2se = false;
  }
  return report;
}

}  // namespace logsde
