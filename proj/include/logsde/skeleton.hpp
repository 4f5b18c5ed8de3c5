#pragma once

#include <span>
#include <string>
#include <vector>

#include "logsde/coeffs.hpp"
#include "logsde/paths.hpp"

namespace logsde {

// Controlled ODE x' = b(x) + sigma(x) g'(t) with piecewise-constant g' per
// control segment. The solver mesh must align with the control mesh so slope
// switches land on step boundaries.
struct SkeletonProblem {
  CoefficientField field;
  Control control;
  std::vector<double> x0;
  TimeGrid grid;                    // solver mesh
  double explosion_guard = 1e12;
};

// Fixed-step classical RK4; exact for constant right-hand sides.
Trajectory solve_skeleton(const SkeletonProblem& p);

// Euler polygon along a grid driver: node recursion
//   x_{k+1} = x_k + b(x_k) dt + sigma(x_k) (w_{k+1} - w_k).
// The node values are independent of any between-node interpolation.
Trajectory euler_polygon(const CoefficientField& field, const GridPath& driver,
                         std::span<const double> x0, double explosion_guard = 1e12);

// Between-node polygon value at time t: the node state plus the frozen drift
// and diffusion applied to the linearly interpolated driver increment.
std::vector<double> polygon_value(const CoefficientField& field, const GridPath& driver,
                                  const Trajectory& traj, double t);

struct ConvergenceRow {
  int n = 0;
  double sup_error = 0.0;       // sup over controls of sup over nodes
  double max_step_move = 0.0;   // max |x_{k+1} - x_k| over controls
};

struct ConvergenceReport {
  std::vector<ConvergenceRow> rows;
  int reference_steps = 0;
  bool errors_decreasing = false;   // first rung to last
  double step_bound_constant = 0.0; // (sup|b| + sup||sigma|| sqrt(alpha)) for the n^{-1/2} check
  bool step_bound_ok = false;
  std::string note;
};

// Polygon-vs-skeleton convergence sweep over a finite family of controls of
// energy <= alpha. The reference solution uses the same integrator on a mesh
// ref_multiplier times the largest rung. Finitely many controls stand in for
// the full energy ball; the note records that gap.
ConvergenceReport uniform_convergence_report(const CoefficientField& field,
                                             std::span<const Control> controls, double alpha,
                                             std::span<const int> n_ladder,
                                             std::span<const double> x0 = {},
                                             int ref_multiplier = 8);

struct NonconfluenceReport {
  double min_separation = 0.0;
  double final_separation = 0.0;
  bool inconclusive = false;  // an endpoint trajectory exploded
};

// Solves the uncontrolled ODE from two distinct starts on the same mesh and
// reports the minimum node separation.
NonconfluenceReport ode_nonconfluence(const CoefficientField& field, std::span<const double> x0,
                                      std::span<const double> y0, const TimeGrid& grid,
                                      double explosion_guard = 1e12);

}  // namespace logsde
