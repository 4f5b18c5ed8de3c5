#include "logsde/paths.hpp"

#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

#include "logsde/rng.hpp"

namespace logsde {

TimeGrid::TimeGrid(double T, int n) : horizon(T), steps(n) {
  if (!(T > 0.0) || !std::isfinite(T)) throw validation_error("grid horizon must be positive");
  if (n < 1) throw validation_error("grid needs at least one step");
}

BrownianDriver::BrownianDriver(const TimeGrid& g, int m, SeedLineage lin,
                               std::vector<double> unit)
    : grid_(g), m_(m), lin_(lin), unit_(std::move(unit)), scale_(std::sqrt(g.horizon)) {}

BrownianDriver BrownianDriver::sample(int noise_dim, const TimeGrid& grid, std::uint64_t seed,
                                      std::uint64_t trial) {
  if (noise_dim < 1) throw validation_error("noise dimension must be positive");
  const int n = grid.steps;
  const double root_dt = std::sqrt(1.0 / n);
  rng::Stream stream(seed, trial, 0, rng::Purpose::brownian_increment);
  std::vector<double> unit(static_cast<std::size_t>(n + 1) * noise_dim, 0.0);
  for (int k = 0; k < n; ++k) {
    for (int j = 0; j < noise_dim; ++j) {
      const double z = stream.normal(static_cast<std::uint64_t>(k), static_cast<std::uint32_t>(j));
      unit[static_cast<std::size_t>(k + 1) * noise_dim + j] =
          unit[static_cast<std::size_t>(k) * noise_dim + j] + root_dt * z;
    }
  }
  return BrownianDriver(grid, noise_dim, SeedLineage{seed, trial, 0}, std::move(unit));
}

BrownianDriver BrownianDriver::refine() const {
  const int n = grid_.steps;
  const std::uint32_t next_level = lin_.level + 1;
  rng::Stream stream(lin_.seed, lin_.trial, next_level, rng::Purpose::bridge_midpoint);
  std::vector<double> unit(static_cast<std::size_t>(2 * n + 1) * m_, 0.0);
  const double half_sd = std::sqrt(1.0 / (4.0 * n));
  for (int k = 0; k <= n; ++k)
    for (int j = 0; j < m_; ++j)
      unit[static_cast<std::size_t>(2 * k) * m_ + j] = unit_[static_cast<std::size_t>(k) * m_ + j];
  for (int k = 0; k < n; ++k) {
    for (int j = 0; j < m_; ++j) {
      const double a = unit_[static_cast<std::size_t>(k) * m_ + j];
      const double b = unit_[static_cast<std::size_t>(k + 1) * m_ + j];
      const double z = stream.normal(static_cast<std::uint64_t>(k), static_cast<std::uint32_t>(j));
      unit[static_cast<std::size_t>(2 * k + 1) * m_ + j] = 0.5 * (a + b) + half_sd * z;
    }
  }
  TimeGrid fine(grid_.horizon, 2 * n);
  return BrownianDriver(fine, m_, SeedLineage{lin_.seed, lin_.trial, next_level}, std::move(unit));
}

BrownianDriver BrownianDriver::refine_to(int target_steps) const {
  if (target_steps < grid_.steps || target_steps % grid_.steps != 0)
    throw validation_error("refinement target must be a multiple of the current step count");
  int ratio = target_steps / grid_.steps;
  if ((ratio & (ratio - 1)) != 0)
    throw validation_error("refinement ratio must be a power of two");
  BrownianDriver out = *this;
  while (out.grid_.steps < target_steps) out = out.refine();
  return out;
}

BrownianDriver BrownianDriver::restrict_to(int coarse_steps) const {
  if (coarse_steps < 1 || grid_.steps % coarse_steps != 0)
    throw validation_error("restriction target must divide the current step count");
  const int stride = grid_.steps / coarse_steps;
  std::vector<double> unit(static_cast<std::size_t>(coarse_steps + 1) * m_);
  for (int k = 0; k <= coarse_steps; ++k)
    for (int j = 0; j < m_; ++j)
      unit[static_cast<std::size_t>(k) * m_ + j] =
          unit_[static_cast<std::size_t>(k) * static_cast<std::size_t>(stride) * m_ + j];
  TimeGrid coarse(grid_.horizon, coarse_steps);
  return BrownianDriver(coarse, m_, lin_, std::move(unit));
}

GridPath BrownianDriver::scaled_path(double factor) const {
  GridPath p(grid_, m_);
  for (std::size_t i = 0; i < unit_.size(); ++i) p.values[i] = factor * (scale_ * unit_[i]);
  return p;
}

Control Control::zero(int dim, const TimeGrid& grid) {
  Control g;
  g.grid = grid;
  g.dim = dim;
  g.knots.assign(static_cast<std::size_t>(grid.node_count()) * dim, 0.0);
  return g;
}

Control Control::linear(std::span<const double> velocity, const TimeGrid& grid) {
  Control g = zero(static_cast<int>(velocity.size()), grid);
  for (int k = 0; k <= grid.steps; ++k) {
    const double t = grid.node(k);
    for (std::size_t j = 0; j < velocity.size(); ++j)
      g.knots[static_cast<std::size_t>(k) * g.dim + j] = velocity[j] * t;
  }
  return g;
}

Control Control::from_knots(const TimeGrid& grid, int dim, std::vector<double> knots) {
  if (knots.size() != static_cast<std::size_t>(grid.node_count()) * dim)
    throw validation_error("knot array size does not match grid");
  for (int j = 0; j < dim; ++j)
    if (knots[j] != 0.0) throw validation_error("control must start at the origin");
  Control g;
  g.grid = grid;
  g.dim = dim;
  g.knots = std::move(knots);
  return g;
}

Control Control::seeded(int dim, const TimeGrid& grid, double target_energy, std::uint64_t seed,
                        std::uint64_t index) {
  rng::Stream stream(seed, index, 0, rng::Purpose::control_sample);
  Control g = zero(dim, grid);
  for (int k = 1; k <= grid.steps; ++k)
    for (int j = 0; j < dim; ++j)
      g.knots[static_cast<std::size_t>(k) * dim + j] =
          g.knots[static_cast<std::size_t>(k - 1) * dim + j] +
          stream.normal(static_cast<std::uint64_t>(k - 1), static_cast<std::uint32_t>(j));
  const double e = g.energy();
  if (e > 0.0) {
    const double s = std::sqrt(target_energy / e);
    for (double& v : g.knots) v *= s;
  }
  return g;
}

double Control::energy() const {
  const double dt = grid.dt();
  double total = 0.0;
  for (int k = 0; k < grid.steps; ++k) {
    double seg = 0.0;
    for (int j = 0; j < dim; ++j) {
      const double d = knots[static_cast<std::size_t>(k + 1) * dim + j] -
                       knots[static_cast<std::size_t>(k) * dim + j];
      seg += d * d;
    }
    total += seg / dt;
  }
  return total;
}

double Control::slope(int segment, int j) const {
  return (knots[static_cast<std::size_t>(segment + 1) * dim + j] -
          knots[static_cast<std::size_t>(segment) * dim + j]) /
         grid.dt();
}

GridPath Control::sample_on(const TimeGrid& fine) const {
  if (fine.horizon != grid.horizon)
    throw validation_error("control and sampling grids must share the horizon");
  if (fine.steps % grid.steps != 0)
    throw validation_error("sampling grid must refine the control grid");
  const int ratio = fine.steps / grid.steps;
  GridPath p(fine, dim);
  for (int k = 0; k <= fine.steps; ++k) {
    const int seg = (k == fine.steps) ? grid.steps - 1 : k / ratio;
    const double frac = static_cast<double>(k - seg * ratio) / ratio;
    for (int j = 0; j < dim; ++j) {
      const double a = knots[static_cast<std::size_t>(seg) * dim + j];
      const double b = knots[static_cast<std::size_t>(seg + 1) * dim + j];
      p.ref(k, j) = a + frac * (b - a);
    }
  }
  return p;
}

double sup_distance(const Trajectory& a, const Trajectory& b) {
  if (a.dim != b.dim) throw validation_error("trajectories have different state dimensions");
  if (a.grid.horizon != b.grid.horizon)
    throw validation_error("trajectories have different horizons");
  const Trajectory* coarse = &a;
  const Trajectory* fine = &b;
  if (a.grid.steps > b.grid.steps) std::swap(coarse, fine);
  if (fine->grid.steps % coarse->grid.steps != 0)
    throw validation_error("trajectory grids are incompatible");
  const int stride = fine->grid.steps / coarse->grid.steps;
  int common = coarse->nodes_stored();
  const int fine_limit = (fine->nodes_stored() - 1) / stride + 1;
  if (fine_limit < common) common = fine_limit;
  double best = 0.0;
  for (int k = 0; k < common; ++k) {
    const double d = dist2(coarse->at(k), fine->at(k * stride));
    if (d > best) best = d;
  }
  return best;
}

namespace {

void write_csv_rows(std::ostream& os, const TimeGrid& grid, int dim,
                    const std::vector<double>& data) {
  os << "t";
  for (int j = 0; j < dim; ++j) os << ",c" << j;
  os << "\n";
  const int rows = static_cast<int>(data.size()) / dim;
  for (int k = 0; k < rows; ++k) {
    os << format_double(grid.node(k));
    for (int j = 0; j < dim; ++j)
      os << "," << format_double(data[static_cast<std::size_t>(k) * dim + j]);
    os << "\n";
  }
}

}  // namespace

void write_csv(std::ostream& os, const GridPath& path) {
  write_csv_rows(os, path.grid, path.dim, path.values);
}

void write_csv(std::ostream& os, const Trajectory& traj) {
  write_csv_rows(os, traj.grid, traj.dim, traj.states);
}

// Binary dump layout: magic "LSDEPTH1", u32 dim, u32 steps, f64 horizon,
// u64 seed, u64 trial, u32 level, then (steps+1)*dim doubles, little-endian.
namespace {
constexpr char kMagic[8] = {'L', 'S', 'D', 'E', 'P', 'T', 'H', '1'};
}

void write_binary(std::ostream& os, const GridPath& path, const SeedLineage& lineage) {
  os.write(kMagic, sizeof(kMagic));
  const std::uint32_t dim = static_cast<std::uint32_t>(path.dim);
  const std::uint32_t steps = static_cast<std::uint32_t>(path.grid.steps);
  os.write(reinterpret_cast<const char*>(&dim), sizeof(dim));
  os.write(reinterpret_cast<const char*>(&steps), sizeof(steps));
  os.write(reinterpret_cast<const char*>(&path.grid.horizon), sizeof(double));
  os.write(reinterpret_cast<const char*>(&lineage.seed), sizeof(lineage.seed));
  os.write(reinterpret_cast<const char*>(&lineage.trial), sizeof(lineage.trial));
  const std::uint32_t level = lineage.level;
  os.write(reinterpret_cast<const char*>(&level), sizeof(level));
  os.write(reinterpret_cast<const char*>(path.values.data()),
           static_cast<std::streamsize>(path.values.size() * sizeof(double)));
}

GridPath read_binary(std::istream& is, SeedLineage* lineage_out) {
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw validation_error("bad path dump header");
  std::uint32_t dim = 0, steps = 0, level = 0;
  double horizon = 0.0;
  SeedLineage lin;
  is.read(reinterpret_cast<char*>(&dim), sizeof(dim));
  is.read(reinterpret_cast<char*>(&steps), sizeof(steps));
  is.read(reinterpret_cast<char*>(&horizon), sizeof(horizon));
  is.read(reinterpret_cast<char*>(&lin.seed), sizeof(lin.seed));
  is.read(reinterpret_cast<char*>(&lin.trial), sizeof(lin.trial));
  is.read(reinterpret_cast<char*>(&level), sizeof(level));
  lin.level = level;
  if (!is || dim == 0 || steps == 0) throw validation_error("bad path dump header");
  GridPath p(TimeGrid(horizon, static_cast<int>(steps)), static_cast<int>(dim));
  is.read(reinterpret_cast<char*>(p.values.data()),
          static_cast<std::streamsize>(p.values.size() * sizeof(double)));
  if (!is) throw validation_error("truncated path dump");
  if (lineage_out) *lineage_out = lin;
  return p;
}

}  // namespace logsde
