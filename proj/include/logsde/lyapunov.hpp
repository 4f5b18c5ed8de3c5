#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "logsde/common.hpp"

namespace logsde {

enum class ProfileKind { log_reciprocal, log, log_squared, constant_one, user_tabulated };

// Growth modulus r(s), continuous and positive on its domain. The built-in
// kinds are the profiles the uniqueness/non-explosion arguments use:
//   log_reciprocal  r(s) = log(1/s)      on (0,1)
//   log             r(s) = log(s)        on [1,inf)
//   log_squared     r(s) = log(1/s)^2    on (0,1)
//   constant_one    r(s) = 1             (Lipschitz-type reference)
class GrowthProfile {
 public:
  static GrowthProfile log_reciprocal();
  static GrowthProfile log_at_infinity();
  static GrowthProfile log_squared();
  static GrowthProfile constant_one();
  static GrowthProfile tabulated(std::vector<double> s_nodes, std::vector<double> r_values);
  static GrowthProfile by_key(const std::string& key);

  double operator()(double s) const;
  // r(exp(-u)); evaluated without forming exp(-u) for the built-in kinds, so
  // cutoffs far below the subnormal range stay usable.
  double at_log_scale(double u) const;

  ProfileKind kind() const { return kind_; }
  double domain_lo() const { return lo_; }
  double domain_hi() const { return hi_; }
  const std::string& name() const { return name_; }

 private:
  GrowthProfile(ProfileKind kind, double lo, double hi, std::string name,
                std::function<double(double)> r);
  ProfileKind kind_;
  double lo_, hi_;
  std::string name_;
  std::function<double(double)> r_;
};

// Parameters for the Osgood integrals psi_rho(xi) = int_0^xi ds/(s r(s)+rho)
// and their exponentials.
struct OsgoodEvaluator {
  GrowthProfile profile = GrowthProfile::log_reciprocal();
  double rho = 1.0;
  double lambda = 1.0;
  double quad_tol = 1e-10;
  // Lower integration limit used when rho == 0; zero means "from 0", which is
  // rejected as divergent for profiles whose Osgood integral blows up there.
  double zero_rho_cutoff = 0.0;
};

double psi_rho(const OsgoodEvaluator& ev, double xi);
double log_phi_rho_lambda(const OsgoodEvaluator& ev, double xi);  // lambda * psi
// exp(lambda * psi); throws exp_overflow instead of returning inf.
double phi_rho_lambda(const OsgoodEvaluator& ev, double xi);

enum class OsgoodVerdict { diverges, converges, inconclusive };

struct OsgoodRung {
  double delta;
  double integral;  // int_delta^a ds/(s r(s))
};

struct OsgoodReport {
  OsgoodVerdict verdict = OsgoodVerdict::inconclusive;
  std::vector<OsgoodRung> rungs;
  double tolerance = 0.0;
};

const char* to_string(OsgoodVerdict v);

// Numerical signature of the Osgood test int_0 ds/(s r(s)) = inf: evaluates
// the integral down a cutoff ladder and classifies the increment pattern.
// Divergence shows as increments bounded below (log-log growth); convergence
// as geometrically decaying increments.
OsgoodReport osgood_diverges(const GrowthProfile& profile, double a,
                             std::span<const double> cutoff_ladder, double quad_tol = 1e-10);

// Double-exponential ladder 10^-1, 10^-2, 10^-4, ..., 10^-128.
std::vector<double> default_osgood_ladder();

// Sup-path tail bound 2d exp(-(R - sqrt(d) B T)^2 / (2 A^2 d T)) for
// processes int alpha dW + int beta ds with ||alpha|| <= A, |beta| <= B.
// Requires sqrt(d) B T < R; returns 0 when A == 0.
double stroock_bound(double A, double B, double T, double R, int d);

// C^1 positive profile equal to -s log s near 0 and s log s at infinity,
// joined by a cubic Hermite patch on [1-delta0, 1+delta0], and its integral
// psi(R) = int_0^R ds/(f(s)+1), which grows without bound in R.
class ExitProfile {
 public:
  explicit ExitProfile(double delta0 = 0.25);

  double delta0() const { return delta0_; }
  double f(double s) const;
  double psi(double R, double quad_tol = 1e-10) const;

 private:
  double delta0_;
  double v1_, v2_, d1_, d2_;  // Hermite endpoint values/slopes
};

inline double exit_profile_psi(const ExitProfile& p, double R, double quad_tol = 1e-10) {
  return p.psi(R, quad_tol);
}

struct SineBoundReport {
  double max_ratio = 0.0;      // max over the grid of V(theta)/(theta log(1/theta))
  double witness_theta = 0.0;  // grid point attaining it
  double bound_constant = 0.0; // 2(pi^2/2 + 1)
  double tail = 0.0;           // tail allowance added to each partial sum
};

// Checks V(theta) = sum |sin k theta| / k^2 <= 2(pi^2/2+1) theta log(1/theta)
// on a grid in (0, 1/e), with V computed as a K-term partial sum plus the
// 1/K tail allowance.
SineBoundReport sine_series_bound_check(std::span<const double> theta_grid, std::int64_t K,
                                        double tol = 1e-6);

}  // namespace logsde
