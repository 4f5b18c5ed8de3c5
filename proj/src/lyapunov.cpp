#include "logsde/lyapunov.hpp"

#include <algorithm>
#include <cmath>

#include "logsde/quadrature.hpp"

namespace logsde {

GrowthProfile::GrowthProfile(ProfileKind kind, double lo, double hi, std::string name,
                             std::function<double(double)> r)
    : kind_(kind), lo_(lo), hi_(hi), name_(std::move(name)), r_(std::move(r)) {}

GrowthProfile GrowthProfile::log_reciprocal() {
  return GrowthProfile(ProfileKind::log_reciprocal, 0.0, 1.0, "log_reciprocal",
                       [](double s) { return std::log(1.0 / s); });
}

GrowthProfile GrowthProfile::log_at_infinity() {
  return GrowthProfile(ProfileKind::log, 1.0, std::numeric_limits<double>::infinity(), "log",
                       [](double s) { return std::log(s); });
}

GrowthProfile GrowthProfile::log_squared() {
  return GrowthProfile(ProfileKind::log_squared, 0.0, 1.0, "log_squared", [](double s) {
    const double l = std::log(1.0 / s);
    return l * l;
  });
}

GrowthProfile GrowthProfile::constant_one() {
  return GrowthProfile(ProfileKind::constant_one, 0.0,
                       std::numeric_limits<double>::infinity(), "one",
                       [](double) { return 1.0; });
}

GrowthProfile GrowthProfile::tabulated(std::vector<double> s_nodes,
                                       std::vector<double> r_values) {
  if (s_nodes.size() != r_values.size() || s_nodes.size() < 2)
    throw validation_error("tabulated profile needs matching node/value arrays");
  for (std::size_t i = 1; i < s_nodes.size(); ++i)
    if (!(s_nodes[i] > s_nodes[i - 1]))
      throw validation_error("tabulated profile nodes must increase");
  for (double v : r_values)
    if (!(v > 0.0)) throw validation_error("tabulated profile values must be positive");
  const double lo = s_nodes.front(), hi = s_nodes.back();
  auto eval = [s = std::move(s_nodes), r = std::move(r_values)](double x) {
    if (x <= s.front()) return r.front();
    if (x >= s.back()) return r.back();
    const auto it = std::upper_bound(s.begin(), s.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - s.begin());
    const double w = (x - s[i - 1]) / (s[i] - s[i - 1]);
    return r[i - 1] + w * (r[i] - r[i - 1]);
  };
  return GrowthProfile(ProfileKind::user_tabulated, lo, hi, "tabulated", std::move(eval));
}

GrowthProfile GrowthProfile::by_key(const std::string& key) {
  if (key == "log_reciprocal") return log_reciprocal();
  if (key == "log") return log_at_infinity();
  if (key == "log_squared") return log_squared();
  if (key == "one" || key == "constant") return constant_one();
  throw validation_error("unknown growth profile key: " + key);
}

double GrowthProfile::operator()(double s) const { return r_(s); }

double GrowthProfile::at_log_scale(double u) const {
  switch (kind_) {
    case ProfileKind::log_reciprocal:
      return u;
    case ProfileKind::log_squared:
      return u * u;
    case ProfileKind::constant_one:
      return 1.0;
    default:
      return r_(std::exp(-u));
  }
}

namespace {

bool osgood_integral_diverges_at_zero(const GrowthProfile& p) {
  // int_0 ds/(s r(s)) diverges unless r grows at least like log(1/s)^(1+a).
  switch (p.kind()) {
    case ProfileKind::log_reciprocal:
    case ProfileKind::constant_one:
      return true;
    case ProfileKind::log_squared:
      return false;
    default:
      return true;  // conservative for user profiles
  }
}

}  // namespace

double psi_rho(const OsgoodEvaluator& ev, double xi) {
  if (!(xi >= 0.0)) throw validation_error("psi requires xi >= 0");
  if (xi == 0.0) return 0.0;
  if (ev.rho < 0.0) throw validation_error("rho must be nonnegative");
  const GrowthProfile& r = ev.profile;
  if (xi > r.domain_hi())
    throw validation_error("xi lies outside the profile domain");
  double lo = 0.0;
  if (ev.rho == 0.0) {
    if (ev.zero_rho_cutoff <= 0.0 && osgood_integral_diverges_at_zero(r))
      throw divergent_integral("psi_0 from 0 is divergent for this profile");
    lo = ev.zero_rho_cutoff;
  }
  const double rho = ev.rho;
  AdaptiveSimpson quad(ev.quad_tol);
  auto integrand = [&r, rho](double s) {
    if (s <= 0.0) return 1.0 / rho;  // s*r(s) -> 0 for the built-in moduli
    return 1.0 / (s * r(s) + rho);
  };
  return quad.integrate(integrand, lo, xi);
}

double log_phi_rho_lambda(const OsgoodEvaluator& ev, double xi) {
  if (!(ev.lambda > 0.0)) throw validation_error("lambda must be positive");
  return ev.lambda * psi_rho(ev, xi);
}

double phi_rho_lambda(const OsgoodEvaluator& ev, double xi) {
  const double exponent = log_phi_rho_lambda(ev, xi);
  if (exponent > 700.0) throw exp_overflow(exponent);
  return std::exp(exponent);
}

const char* to_string(OsgoodVerdict v) {
  switch (v) {
    case OsgoodVerdict::diverges:
      return "diverges";
    case OsgoodVerdict::converges:
      return "converges";
    default:
      return "inconclusive";
  }
}

std::vector<double> default_osgood_ladder() {
  std::vector<double> ladder;
  double exponent = 1.0;
  for (int k = 0; k < 8; ++k) {
    ladder.push_back(std::pow(10.0, -exponent));
    exponent *= 2.0;
  }
  return ladder;
}

OsgoodReport osgood_diverges(const GrowthProfile& profile, double a,
                             std::span<const double> cutoff_ladder, double quad_tol) {
  if (!(a > 0.0 && a < 1.0)) throw validation_error("upper limit a must lie in (0,1)");
  if (cutoff_ladder.size() < 6) throw validation_error("cutoff ladder needs at least 6 rungs");
  for (std::size_t i = 0; i < cutoff_ladder.size(); ++i) {
    if (!(cutoff_ladder[i] > 0.0) || cutoff_ladder[i] >= a)
      throw validation_error("cutoffs must lie in (0, a)");
    if (i > 0 && !(cutoff_ladder[i] < cutoff_ladder[i - 1]))
      throw validation_error("cutoff ladder must strictly decrease");
  }

  // Substitute u = log(1/s): int_delta^a ds/(s r(s)) = int_{log 1/a}^{log 1/delta} du / r~(u)
  // with r~(u) = r(e^-u). This keeps rungs far below machine range integrable.
  AdaptiveSimpson quad(quad_tol);
  auto integrand = [&profile](double u) { return 1.0 / profile.at_log_scale(u); };
  const double u_a = std::log(1.0 / a);

  OsgoodReport report;
  report.tolerance = quad_tol;
  for (double delta : cutoff_ladder) {
    const double u_d = -std::log(delta);
    report.rungs.push_back({delta, quad.integrate(integrand, u_a, u_d)});
  }

  std::vector<double> inc;
  for (std::size_t i = 1; i < report.rungs.size(); ++i)
    inc.push_back(report.rungs[i].integral - report.rungs[i - 1].integral);

  // Divergence: the last three increments stay at least half the first one.
  bool diverges = inc.size() >= 3;
  for (std::size_t i = inc.size() - 3; diverges && i < inc.size(); ++i)
    diverges = inc[i] >= 0.5 * inc.front();
  // Convergence: increments decay geometrically (ratio <= 1/2, small slack).
  bool converges = inc.size() >= 3;
  for (std::size_t i = inc.size() - 3; converges && i < inc.size(); ++i) {
    if (!(inc[i - 1] > 0.0)) {
      converges = false;
      break;
    }
    converges = inc[i] <= (0.5 + 1e-4) * inc[i - 1];
  }

  if (diverges && !converges)
    report.verdict = OsgoodVerdict::diverges;
  else if (converges && !diverges)
    report.verdict = OsgoodVerdict::converges;
  else
    report.verdict = OsgoodVerdict::inconclusive;
  return report;
}

double stroock_bound(double A, double B, double T, double R, int d) {
  if (A < 0.0 || B < 0.0) throw validation_error("A and B must be nonnegative");
  if (!(T > 0.0) || !(R > 0.0) || d < 1)
    throw validation_error("T, R must be positive and d >= 1");
  const double drift_reach = std::sqrt(static_cast<double>(d)) * B * T;
  if (!(drift_reach < R))
    throw validation_error("hypothesis violated: requires sqrt(d)*B*T < R");
  if (A == 0.0) return 0.0;
  const double num = (R - drift_reach) * (R - drift_reach);
  const double den = 2.0 * A * A * d * T;
  return 2.0 * d * std::exp(-num / den);
}

ExitProfile::ExitProfile(double delta0) : delta0_(delta0) {
  if (!(delta0 > 0.0 && delta0 < 0.5)) throw validation_error("delta0 must lie in (0, 1/2)");
  const double s1 = 1.0 - delta0_;
  const double s2 = 1.0 + delta0_;
  v1_ = -s1 * std::log(s1);
  v2_ = s2 * std::log(s2);
  d1_ = -(std::log(s1) + 1.0);
  d2_ = std::log(s2) + 1.0;
}

double ExitProfile::f(double s) const {
  if (s < 0.0) throw validation_error("profile argument must be nonnegative");
  if (s == 0.0) return 0.0;
  const double s1 = 1.0 - delta0_;
  const double s2 = 1.0 + delta0_;
  if (s <= s1) return -s * std::log(s);
  if (s >= s2) return s * std::log(s);
  // cubic Hermite on [s1, s2]
  const double h = s2 - s1;
  const double t = (s - s1) / h;
  const double t2 = t * t, t3 = t2 * t;
  const double h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
  const double h10 = t3 - 2.0 * t2 + t;
  const double h01 = -2.0 * t3 + 3.0 * t2;
  const double h11 = t3 - t2;
  return h00 * v1_ + h10 * h * d1_ + h01 * v2_ + h11 * h * d2_;
}

double ExitProfile::psi(double R, double quad_tol) const {
  if (!(R >= 0.0)) throw validation_error("psi requires R >= 0");
  if (R == 0.0) return 0.0;
  AdaptiveSimpson quad(quad_tol);
  auto integrand = [this](double s) { return 1.0 / (f(s) + 1.0); };
  // Integrate piecewise: the two junctions, then decades out to R. The
  // integrand is C^1 but the splits keep the adaptive pass cheap for large R.
  std::vector<double> cuts{0.0};
  const double s1 = 1.0 - delta0_, s2 = 1.0 + delta0_;
  if (R > s1) cuts.push_back(s1);
  if (R > s2) cuts.push_back(s2);
  double decade = 10.0;
  while (decade < R) {
    if (decade > s2) cuts.push_back(decade);
    decade *= 10.0;
  }
  cuts.push_back(R);
  double total = 0.0;
  for (std::size_t i = 1; i < cuts.size(); ++i)
    total += quad.integrate(integrand, cuts[i - 1], cuts[i]);
  return total;
}

SineBoundReport sine_series_bound_check(std::span<const double> theta_grid, std::int64_t K,
                                        double tol) {
  constexpr double kInvE = 0.36787944117144233;
  if (K < 1) throw validation_error("K must be positive");
  if (1.0 / static_cast<double>(K) > tol)
    throw validation_error("K too small for the requested tolerance");
  SineBoundReport report;
  report.bound_constant = 2.0 * (9.869604401089358 / 2.0 + 1.0);  // 2(pi^2/2 + 1)
  report.tail = 1.0 / static_cast<double>(K);
  for (double theta : theta_grid) {
    if (!(theta > 0.0 && theta < kInvE))
      throw validation_error("theta grid must lie in (0, 1/e)");
    // V_K(theta) by rotation recurrence with periodic re-anchoring.
    double v = 0.0;
    double s = 0.0, c = 0.0;
    const double ds = std::sin(theta), dc = std::cos(theta);
    for (std::int64_t k = 1; k <= K; ++k) {
      if ((k - 1) % 4096 == 0) {
        s = std::sin(static_cast<double>(k) * theta);
        c = std::cos(static_cast<double>(k) * theta);
      } else {
        const double ns = s * dc + c * ds;
        const double nc = c * dc - s * ds;
        s = ns;
        c = nc;
      }
      v += std::abs(s) / (static_cast<double>(k) * static_cast<double>(k));
    }
    const double ratio = (v + report.tail) / (theta * std::log(1.0 / theta));
    if (ratio > report.max_ratio) {
      report.max_ratio = ratio;
      report.witness_theta = theta;
    }
  }
  return report;
}

}  // namespace logsde
