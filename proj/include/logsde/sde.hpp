#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "logsde/coeffs.hpp"
#include "logsde/paths.hpp"
#include "logsde/skeleton.hpp"

namespace logsde {

struct SdeRun {
  CoefficientField field;
  double eps = 1.0;
  std::vector<double> x0;
  BrownianDriver driver;
  double explosion_guard = 1e12;
};

// Euler-Maruyama node recursion
//   x_{k+1} = x_k + b(x_k) dt + sqrt(eps) sigma(x_k) (W_{k+1} - W_k).
// Implemented as the Euler polygon applied to the sqrt(eps)-scaled driver
// path, so the two schemes agree bitwise at every node.
Trajectory euler_maruyama(const SdeRun& run);

// Two runs consuming the same driver.
std::pair<Trajectory, Trajectory> coupled_pair(const CoefficientField& field, double eps,
                                               const BrownianDriver& driver,
                                               std::span<const double> x0,
                                               std::span<const double> y0,
                                               double explosion_guard = 1e12);

struct StabilityRow {
  double delta = 0.0;
  std::int64_t exceed = 0;
  std::int64_t trials = 0;
  double fraction = 0.0;
  double std_error = 0.0;
};

struct StabilityReport {
  std::vector<StabilityRow> rows;
  double threshold = 0.0;
  bool nonincreasing_2se = false;
};

// Fraction of coupled trials whose sup-distance exceeds the threshold, per
// initial offset delta along `direction` (default: first coordinate axis).
StabilityReport stability_probability(const CoefficientField& field, double eps,
                                      std::span<const double> x0,
                                      std::span<const double> delta_ladder, double threshold,
                                      std::int64_t trials, int n, std::uint64_t seed,
                                      int threads = 1, std::span<const double> direction = {});

struct LifetimeReport {
  bool exploded = false;
  double lifetime = 0.0;       // extrapolated estimate when exploded
  double horizon = 0.0;
  std::vector<double> r_ladder;
  std::vector<double> tau;     // hitting time per rung; NaN when never hit
  std::vector<double> final_state;
  double final_time = 0.0;
  double increment_exponent = 0.0;  // power-law slope of hitting-time gaps
};

// Hitting-time ladder diagnosis of finite-time blow-up. A run is declared
// explosive when every rung is hit before the horizon, the hitting-time
// increments shrink with a power-law exponent <= -1.5, and the geometric
// extrapolation of the remaining increments lands inside the horizon. eps=0
// gives the deterministic drift flow.
LifetimeReport detect_lifetime(const CoefficientField& field, std::span<const double> x0,
                               double horizon, std::span<const double> r_ladder, int n,
                               double eps = 0.0, std::uint64_t seed = 0,
                               std::uint64_t trial = 0);

}  // namespace logsde
