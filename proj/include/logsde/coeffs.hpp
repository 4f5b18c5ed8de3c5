#pragma once

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "logsde/common.hpp"

#include "json.hpp"

namespace logsde {

enum class ModulusClass { lipschitz, log_lipschitz, custom };

// Known sup-norms, carried when a field is bounded by construction.
struct FieldBounds {
  double sup_drift_norm = 0.0;      // sup_x |b(x)|
  double sup_diffusion_norm = 0.0;  // sup_x ||sigma(x)||_F
};

// Drift b: R^d -> R^d and diffusion sigma: R^d -> R^(d x m) with metadata.
// Evaluations are pure and deterministic; instances are immutable and safe to
// share across threads.
class CoefficientField {
 public:
  using DriftFn = std::function<void(std::span<const double>, std::span<double>)>;
  using DiffusionFn = std::function<void(std::span<const double>, std::span<double>)>;

  CoefficientField() = default;
  CoefficientField(int dim_state, int dim_noise, DriftFn drift, DiffusionFn diffusion,
                   ModulusClass modulus, std::optional<double> declared_constant = {},
                   std::optional<FieldBounds> bounds = {});

  int dim_state() const { return d_; }
  int dim_noise() const { return m_; }
  ModulusClass modulus_class() const { return modulus_; }
  const std::optional<double>& declared_constant() const { return constant_; }
  const std::optional<FieldBounds>& bounds() const { return bounds_; }

  // Hot-path evaluation, no input validation. out sizes: d and d*m (row-major).
  void drift_into(std::span<const double> x, std::span<double> out) const { drift_(x, out); }
  void diffusion_into(std::span<const double> x, std::span<double> out) const {
    diffusion_(x, out);
  }

 private:
  int d_ = 1;
  int m_ = 1;
  DriftFn drift_;
  DiffusionFn diffusion_;
  ModulusClass modulus_ = ModulusClass::custom;
  std::optional<double> constant_;
  std::optional<FieldBounds> bounds_;
};

struct FieldEval {
  std::vector<double> drift;      // d
  std::vector<double> diffusion;  // d x m, row-major
};

// Validating evaluation; rejects non-finite inputs naming the coordinate.
FieldEval eval_field(const CoefficientField& field, std::span<const double> x);

// Example drift built from the double sine series
//   f(x1, x2) = sum_{k=1..K} sin(k x1) sin(k x2) / k^2,
// truncated at K terms (tail below 1/K uniformly). The scalar is lifted to a
// drift componentwise, drift_i = lift_i * f(x), with lift = (1, 1) by
// default; diffusion is sigma0 * I.
class SineSeriesField {
 public:
  explicit SineSeriesField(std::int64_t k_terms, double sigma0 = 0.0,
                           std::array<double, 2> lift = {1.0, 1.0});

  std::int64_t k_terms() const { return k_terms_; }
  double f(double x1, double x2) const;
  const CoefficientField& field() const { return field_; }

  static constexpr double kSupF = 1.6449340668482264;  // sum 1/k^2

 private:
  std::int64_t k_terms_ = 1;
  double sigma0_ = 0.0;
  CoefficientField field_;
};

inline SineSeriesField sine_series_field(std::int64_t k_terms, double sigma0 = 0.0) {
  return SineSeriesField(k_terms, sigma0);
}

struct TruncationSpec {
  double radius = 1.0;
  double m_R = 0.0;  // probed sup of {|b(x)|, ||sigma(x)||} over the ball
};

// Field with every drift component and diffusion entry clipped to
// [-m_R-1, m_R+1]; identical to the input on the ball |x| <= R. m_R is
// estimated from a deterministic low-discrepancy probe of the ball plus the
// origin and the axis points.
CoefficientField truncate_field(const CoefficientField& field, double radius, int probe_count,
                                TruncationSpec* spec_out = nullptr);

struct ModulusEstimate {
  double c_sigma = 0.0;  // max ||sigma(x)-sigma(y)||^2 / (|x-y|^2 log(1/|x-y|))
  double c_drift = 0.0;  // max |b(x)-b(y)| / (|x-y| log(1/|x-y|))
  std::int64_t pairs_used = 0;
};

// Empirical modulus ratios over seeded pairs: centers uniform in [-2,2]^d,
// separations log-uniform over [1e-8, 1). Nested in pair_count for a fixed
// seed, so estimates are non-decreasing as the sample grows.
ModulusEstimate estimate_modulus(const CoefficientField& field, std::int64_t pair_count,
                                 std::uint64_t seed);

// Builds a field from a config key. Known keys: "constant", "linear",
// "sine_series", "log_growth", "log_sq_growth", and "truncated:<base>:<R>".
CoefficientField make_field(const std::string& key, const nlohmann::json& params);

}  // namespace logsde
