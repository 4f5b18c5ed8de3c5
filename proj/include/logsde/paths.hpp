#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "logsde/common.hpp"

namespace logsde {

// Uniform grid t_k = k*T/n on [0, T].
struct TimeGrid {
  double horizon = 1.0;
  int steps = 1;

  TimeGrid() = default;
  TimeGrid(double T, int n);

  double dt() const { return horizon / steps; }
  double node(int k) const { return (horizon * k) / steps; }
  int node_count() const { return steps + 1; }
  bool operator==(const TimeGrid& o) const {
    return horizon == o.horizon && steps == o.steps;
  }
};

// Grid-indexed path in R^dim; values row-major, (steps+1) x dim.
struct GridPath {
  TimeGrid grid;
  int dim = 1;
  std::vector<double> values;

  GridPath() = default;
  GridPath(const TimeGrid& g, int d)
      : grid(g), dim(d), values(static_cast<std::size_t>(g.node_count()) * d, 0.0) {}

  std::span<const double> at(int k) const {
    return {values.data() + static_cast<std::size_t>(k) * dim, static_cast<std::size_t>(dim)};
  }
  double& ref(int k, int j) { return values[static_cast<std::size_t>(k) * dim + j]; }
  double get(int k, int j) const { return values[static_cast<std::size_t>(k) * dim + j]; }
};

struct SeedLineage {
  std::uint64_t seed = 0;
  std::uint64_t trial = 0;
  std::uint32_t level = 0;
};

// Brownian motion on a uniform grid. The canonical object is the horizon-1
// path U; node values are exposed as sqrt(T)*U so the same (seed, trial)
// produces the scaled copy of one path at every horizon. Refinement fills
// midpoints by Brownian-bridge conditioning keyed on (seed, trial, level+1)
// and copies coarse node values verbatim, so restriction to any ancestor grid
// is bit-for-bit.
class BrownianDriver {
 public:
  static BrownianDriver sample(int noise_dim, const TimeGrid& grid, std::uint64_t seed,
                               std::uint64_t trial);

  BrownianDriver refine() const;
  BrownianDriver refine_to(int target_steps) const;  // repeated doubling
  BrownianDriver restrict_to(int coarse_steps) const;

  const TimeGrid& grid() const { return grid_; }
  int noise_dim() const { return m_; }
  const SeedLineage& lineage() const { return lin_; }

  double value(int k, int j) const { return scale_ * unit_[static_cast<std::size_t>(k) * m_ + j]; }
  GridPath path() const { return scaled_path(1.0); }
  GridPath scaled_path(double factor) const;

 private:
  BrownianDriver(const TimeGrid& g, int m, SeedLineage lin, std::vector<double> unit);

  TimeGrid grid_;
  int m_ = 1;
  SeedLineage lin_;
  std::vector<double> unit_;  // horizon-1 node values, (steps+1) x m
  double scale_ = 1.0;        // sqrt(horizon)
};

// Finite-energy control path, piecewise linear between grid knots, g(0)=0.
struct Control {
  TimeGrid grid;
  int dim = 1;
  std::vector<double> knots;  // (steps+1) x dim

  static Control zero(int dim, const TimeGrid& grid);
  static Control linear(std::span<const double> velocity, const TimeGrid& grid);
  static Control from_knots(const TimeGrid& grid, int dim, std::vector<double> knots);
  // Random piecewise-linear control with energy exactly `target_energy`.
  static Control seeded(int dim, const TimeGrid& grid, double target_energy,
                        std::uint64_t seed, std::uint64_t index);

  std::span<const double> knot(int k) const {
    return {knots.data() + static_cast<std::size_t>(k) * dim, static_cast<std::size_t>(dim)};
  }
  // Exact piecewise-linear energy sum |g(t_{k+1})-g(t_k)|^2 / dt.
  double energy() const;
  // Piecewise-linear evaluation on a refining grid (fine.steps % grid.steps == 0).
  GridPath sample_on(const TimeGrid& fine) const;
  // Constant slope on segment k, component j.
  double slope(int segment, int j) const;
};

inline double energy(const Control& g) { return g.energy(); }

struct ExplosionRecord {
  double time = 0.0;
  int step = 0;
  double norm = 0.0;
};

// Solution path; states may be truncated at the explosion record.
struct Trajectory {
  TimeGrid grid;
  int dim = 1;
  std::vector<double> states;  // nodes_stored() x dim
  std::optional<ExplosionRecord> explosion;

  int nodes_stored() const { return static_cast<int>(states.size()) / dim; }
  std::span<const double> at(int k) const {
    return {states.data() + static_cast<std::size_t>(k) * dim, static_cast<std::size_t>(dim)};
  }
  bool exploded() const { return explosion.has_value(); }
  std::span<const double> back() const { return at(nodes_stored() - 1); }
};

// Max Euclidean distance over common nodes. Grids must be equal or one a
// dyadic-style refinement of the other (steps divisible, same horizon).
double sup_distance(const Trajectory& a, const Trajectory& b);

// CSV (columns t, c0..c{dim-1}) and a compact binary dump.
void write_csv(std::ostream& os, const GridPath& path);
void write_csv(std::ostream& os, const Trajectory& traj);
void write_binary(std::ostream& os, const GridPath& path, const SeedLineage& lineage);
GridPath read_binary(std::istream& is, SeedLineage* lineage_out = nullptr);

}  // namespace logsde
