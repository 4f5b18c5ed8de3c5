#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "logsde/coeffs.hpp"
#include "logsde/paths.hpp"

namespace logsde {

// Path event decided from trajectory nodes alone.
//   terminal_hit : |x(T) - target| <= tol
//   exit_ball    : sup_t |x(t) - center| > radius
//   tube         : sup_t |x(t) - center_path(t)| <= tube_delta
//   level_hit    : sup_t <direction, x(t)> >= level
struct PathEvent {
  enum class Kind { terminal_hit, exit_ball, tube, level_hit };

  Kind kind = Kind::terminal_hit;
  std::vector<double> target;       // terminal_hit
  double tol = 1e-4;                // terminal_hit slack
  double radius = 1.0;              // exit_ball
  std::vector<double> center;       // exit_ball center; default x0 at evaluation
  std::vector<double> direction;    // level_hit; default first axis
  double level_value = 1.0;         // level_hit
  double tube_delta = 0.1;          // tube
  GridPath tube_center;             // tube center path (grid must refine trajectory grid)

  static PathEvent terminal(std::vector<double> target, double tol = 1e-4);
  static PathEvent exit(double radius, std::vector<double> center = {});
  static PathEvent level(double level_value, std::vector<double> direction = {});
  static PathEvent tube_event(GridPath center_path, double delta);

  bool evaluate(const Trajectory& traj, std::span<const double> x0) const;

  // Penalty-side hooks for the action minimizer: nonnegative violation and
  // the node index/derivative seed where it is attained.
  double violation(const Trajectory& traj, std::span<const double> x0, int* node_out,
                   std::vector<double>* seed_out) const;
};

struct RateResult {
  enum class Status { ok, infeasible };
  Status status = Status::infeasible;
  double rate = 0.0;          // half the minimizer's energy
  Control minimizer;
  double residual = 0.0;      // event violation of the minimizer
  int knots = 0;
  int restarts = 0;
  std::vector<double> stage_residuals;  // per penalty stage, best restart
};

struct RateOptions {
  double penalty_initial = 10.0;
  double penalty_factor = 10.0;
  int penalty_stages = 6;
  int max_inner_iterations = 400;
  double grad_tol = 1e-10;
  double residual_tol = 1e-5;
  double jacobian_fd_step = 1e-6;
  double restart_spread = 0.3;  // scale of seeded perturbations
};

// Action minimization: minimizes half the control energy subject to the
// event, by quadratic penalty with increasing weight and gradient descent
// with backtracking; gradients come from the adjoint of the discrete polygon
// recursion. The returned rate is an upper bound witnessed by the minimizer.
RateResult rate_functional(const CoefficientField& field, const PathEvent& event,
                           std::span<const double> x0, int knots, int restarts,
                           std::uint64_t seed, const RateOptions& options = {});

struct McLogProb {
  double eps = 0.0;
  std::int64_t trials = 0;
  std::int64_t hits = 0;
  double p_hat = 0.0;
  double eps_log_p = 0.0;  // eps * log p_hat; meaningful only when hits > 0
  double lo = 0.0;         // 95% Wilson band mapped through eps*log
  double hi = 0.0;
  bool below_resolution = false;  // zero hits
  bool degenerate = false;        // p_hat in {0, 1}
};

// Crude Monte Carlo estimate of eps * log P(event) for the eps-noise scheme.
McLogProb mc_log_prob(const CoefficientField& field, double eps, const PathEvent& event,
                      std::span<const double> x0, std::int64_t trials, int n,
                      std::uint64_t seed, int threads = 1);

struct LdpRow {
  double eps;
  std::int64_t trials;
  std::int64_t hits;
  double p_hat;
  double eps_log_p;
  double lo;
  double hi;
  double neg_rate;
  double gap;
};

struct LdpReport {
  std::vector<LdpRow> rows;
  RateResult rate;
  bool gaps_shrinking = false;  // |gap| decreasing down the eps ladder
};

LdpReport ldp_gap_report(const CoefficientField& field, const PathEvent& event,
                         std::span<const double> x0, std::span<const double> eps_ladder,
                         std::int64_t trials, int n, int knots, int restarts,
                         std::uint64_t seed, int threads = 1);

struct ClosenessRow {
  int n;
  std::int64_t trials;
  std::int64_t exceed;
  double fraction;
  double std_error;
};

struct ClosenessReport {
  std::vector<ClosenessRow> rows;
  int reference_steps = 0;
  double delta = 0.0;
  bool nonincreasing_2se = false;
};

// Coupled Euler-mesh comparison: the reference run uses the bridge-refined
// driver at ref_multiplier times the largest rung; each rung consumes the
// restriction of the same driver. Reports the per-n exceedance fraction of
// sup |X_ref - X_n| > delta. Requires a bounded field and delta < 1/e.
ClosenessReport euler_closeness(const CoefficientField& field, double eps,
                                std::span<const int> n_ladder, double delta,
                                std::span<const double> x0, std::int64_t trials,
                                std::uint64_t seed, int threads = 1, int ref_multiplier = 16);

}  // namespace logsde
