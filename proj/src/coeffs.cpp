#include "logsde/coeffs.hpp"

#include <algorithm>
#include <cmath>

#include "logsde/rng.hpp"

namespace logsde {

CoefficientField::CoefficientField(int dim_state, int dim_noise, DriftFn drift,
                                   DiffusionFn diffusion, ModulusClass modulus,
                                   std::optional<double> declared_constant,
                                   std::optional<FieldBounds> bounds)
    : d_(dim_state),
      m_(dim_noise),
      drift_(std::move(drift)),
      diffusion_(std::move(diffusion)),
      modulus_(modulus),
      constant_(declared_constant),
      bounds_(bounds) {
  if (d_ < 1 || m_ < 1) throw validation_error("field dimensions must be positive");
  if (!drift_ || !diffusion_) throw validation_error("field needs drift and diffusion");
}

FieldEval eval_field(const CoefficientField& field, std::span<const double> x) {
  if (static_cast<int>(x.size()) != field.dim_state())
    throw validation_error("input dimension does not match the field");
  if (int bad = first_nonfinite(x); bad >= 0)
    throw validation_error("non-finite input at coordinate " + std::to_string(bad));
  FieldEval out;
  out.drift.assign(field.dim_state(), 0.0);
  out.diffusion.assign(static_cast<std::size_t>(field.dim_state()) * field.dim_noise(), 0.0);
  field.drift_into(x, out.drift);
  field.diffusion_into(x, out.diffusion);
  return out;
}

namespace {

// Partial sum of sin(k*x1)*sin(k*x2)/k^2 by rotation recurrence, with the
// angles re-anchored to std::sin/std::cos every 4096 terms to stop the
// recurrence error from accumulating over long sums.
double sine_series_sum(double x1, double x2, std::int64_t K) {
  constexpr std::int64_t kAnchor = 4096;
  double s1 = 0.0, c1 = 0.0, s2 = 0.0, c2 = 0.0;
  const double ds1 = std::sin(x1), dc1 = std::cos(x1);
  const double ds2 = std::sin(x2), dc2 = std::cos(x2);
  double acc = 0.0;
  for (std::int64_t k = 1; k <= K; ++k) {
    if ((k - 1) % kAnchor == 0) {
      s1 = std::sin(static_cast<double>(k) * x1);
      c1 = std::cos(static_cast<double>(k) * x1);
      s2 = std::sin(static_cast<double>(k) * x2);
      c2 = std::cos(static_cast<double>(k) * x2);
    } else {
      const double ns1 = s1 * dc1 + c1 * ds1;
      const double nc1 = c1 * dc1 - s1 * ds1;
      const double ns2 = s2 * dc2 + c2 * ds2;
      const double nc2 = c2 * dc2 - s2 * ds2;
      s1 = ns1;
      c1 = nc1;
      s2 = ns2;
      c2 = nc2;
    }
    acc += s1 * s2 / (static_cast<double>(k) * static_cast<double>(k));
  }
  return acc;
}

CoefficientField constant_diffusion_field(int d, int m, CoefficientField::DriftFn drift,
                                          double sigma0, ModulusClass modulus,
                                          std::optional<FieldBounds> bounds) {
  auto diffusion = [d, m, sigma0](std::span<const double>, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    const int diag = std::min(d, m);
    for (int i = 0; i < diag; ++i) out[static_cast<std::size_t>(i) * m + i] = sigma0;
  };
  return CoefficientField(d, m, std::move(drift), std::move(diffusion), modulus, {}, bounds);
}

}  // namespace

SineSeriesField::SineSeriesField(std::int64_t k_terms, double sigma0,
                                 std::array<double, 2> lift)
    : k_terms_(k_terms), sigma0_(sigma0) {
  if (k_terms < 1) throw validation_error("sine series needs at least one term");
  const std::int64_t K = k_terms;
  auto drift = [K, lift](std::span<const double> x, std::span<double> out) {
    const double v = sine_series_sum(x[0], x[1], K);
    out[0] = lift[0] * v;
    out[1] = lift[1] * v;
  };
  FieldBounds bounds;
  bounds.sup_drift_norm = kSupF * std::hypot(lift[0], lift[1]);
  bounds.sup_diffusion_norm = std::abs(sigma0) * std::sqrt(2.0);
  field_ = constant_diffusion_field(2, 2, std::move(drift), sigma0, ModulusClass::log_lipschitz,
                                    bounds);
}

double SineSeriesField::f(double x1, double x2) const {
  return sine_series_sum(x1, x2, k_terms_);
}

namespace {

// Additive-recurrence (Kronecker) points in the ball |x| <= R: cube points
// from irrational rotations, rejecting those outside the ball. Deterministic.
std::vector<std::vector<double>> ball_probe_points(int d, double R, int count) {
  static constexpr double kAlpha[8] = {0.6180339887498949, 0.7548776662466927,
                                       0.8191725133961645, 0.8566748838545029,
                                       0.8812714616335695, 0.8986537126286993,
                                       0.9115923534820549, 0.9215993196339830};
  std::vector<std::vector<double>> pts;
  pts.reserve(static_cast<std::size_t>(count) + 2 * d + 1);
  pts.emplace_back(d, 0.0);  // origin
  for (int i = 0; i < d; ++i) {
    std::vector<double> p(d, 0.0);
    p[i] = R;
    pts.push_back(p);
    p[i] = -R;
    pts.push_back(p);
  }
  int accepted = 0;
  for (long n = 1; accepted < count && n < 64L * count + 64; ++n) {
    std::vector<double> p(d);
    double norm_sq = 0.0;
    for (int i = 0; i < d; ++i) {
      const double u = std::fmod(static_cast<double>(n) * kAlpha[i % 8], 1.0);
      p[i] = (2.0 * u - 1.0) * R;
      norm_sq += p[i] * p[i];
    }
    if (norm_sq <= R * R) {
      pts.push_back(std::move(p));
      ++accepted;
    }
  }
  return pts;
}

}  // namespace

CoefficientField truncate_field(const CoefficientField& field, double radius, int probe_count,
                                TruncationSpec* spec_out) {
  if (!(radius > 0.0)) throw validation_error("truncation radius must be positive");
  if (probe_count < 1) throw validation_error("probe count must be positive");
  const int d = field.dim_state();
  const int m = field.dim_noise();

  double m_R = 0.0;
  std::vector<double> b(d), s(static_cast<std::size_t>(d) * m);
  for (const auto& p : ball_probe_points(d, radius, probe_count)) {
    field.drift_into(p, b);
    field.diffusion_into(p, s);
    m_R = std::max(m_R, norm2(b));
    m_R = std::max(m_R, norm2(s));
  }
  if (spec_out) {
    spec_out->radius = radius;
    spec_out->m_R = m_R;
  }

  const double cap = m_R + 1.0;
  auto clip = [cap](std::span<double> v) {
    for (double& x : v) x = std::clamp(x, -cap, cap);
  };
  CoefficientField base = field;
  auto drift = [base, clip](std::span<const double> x, std::span<double> out) {
    base.drift_into(x, out);
    clip(out);
  };
  auto diffusion = [base, clip](std::span<const double> x, std::span<double> out) {
    base.diffusion_into(x, out);
    clip(out);
  };
  FieldBounds bounds;
  bounds.sup_drift_norm = cap * std::sqrt(static_cast<double>(d));
  bounds.sup_diffusion_norm = cap * std::sqrt(static_cast<double>(d) * m);
  return CoefficientField(d, m, std::move(drift), std::move(diffusion), field.modulus_class(),
                          field.declared_constant(), bounds);
}

ModulusEstimate estimate_modulus(const CoefficientField& field, std::int64_t pair_count,
                                 std::uint64_t seed) {
  if (pair_count < 1) throw validation_error("pair count must be positive");
  const int d = field.dim_state();
  const int m = field.dim_noise();
  rng::Stream stream(seed, 0, 0, rng::Purpose::modulus_pairs);

  std::vector<double> x(d), y(d), dir(d);
  std::vector<double> bx(d), by(d);
  std::vector<double> sx(static_cast<std::size_t>(d) * m), sy(static_cast<std::size_t>(d) * m);

  constexpr double kLogMin = -18.420680743952367;  // log(1e-8)
  ModulusEstimate est;
  for (std::int64_t i = 0; i < pair_count; ++i) {
    const auto ctr = static_cast<std::uint64_t>(i);
    // center uniform in [-2,2]^d, direction from normals, distance log-uniform
    double dn = 0.0;
    for (int j = 0; j < d; ++j) {
      x[j] = 4.0 * stream.uniform01(ctr, static_cast<std::uint32_t>(j)) - 2.0;
      dir[j] = stream.normal(ctr, static_cast<std::uint32_t>(d + j));
      dn += dir[j] * dir[j];
    }
    dn = std::sqrt(dn);
    if (dn == 0.0) continue;
    const double u = stream.uniform01(ctr, static_cast<std::uint32_t>(3 * d + 1));
    const double dist = std::exp(kLogMin * (1.0 - u));
    for (int j = 0; j < d; ++j) {
      const double half = 0.5 * dist * dir[j] / dn;
      y[j] = x[j] - half;
      x[j] += half;
    }
    const double sep = dist2(x, y);
    if (sep == 0.0 || sep >= 1.0) continue;  // degenerate or outside the regime
    const double log_inv = std::log(1.0 / sep);

    field.drift_into(x, bx);
    field.drift_into(y, by);
    field.diffusion_into(x, sx);
    field.diffusion_into(y, sy);
    double db = 0.0;
    for (int j = 0; j < d; ++j) db += (bx[j] - by[j]) * (bx[j] - by[j]);
    db = std::sqrt(db);
    double ds = 0.0;
    for (std::size_t j = 0; j < sx.size(); ++j) ds += (sx[j] - sy[j]) * (sx[j] - sy[j]);

    est.c_drift = std::max(est.c_drift, db / (sep * log_inv));
    est.c_sigma = std::max(est.c_sigma, ds / (sep * sep * log_inv));
    ++est.pairs_used;
  }
  return est;
}

namespace {

double param_or(const nlohmann::json& params, const char* key, double fallback) {
  if (params.contains(key)) return params.at(key).get<double>();
  return fallback;
}

CoefficientField make_base_field(const std::string& key, const nlohmann::json& params) {
  if (key == "constant") {
    const int d = static_cast<int>(param_or(params, "d", 1));
    const int m = static_cast<int>(param_or(params, "m", d));
    const double sigma0 = param_or(params, "sigma0", 0.0);
    std::vector<double> bvec(static_cast<std::size_t>(d), param_or(params, "b", 0.0));
    if (params.contains("b_vec")) {
      bvec = params.at("b_vec").get<std::vector<double>>();
      if (static_cast<int>(bvec.size()) != d)
        throw validation_error("constant field: b_vec size must equal d");
    }
    FieldBounds bounds{norm2(bvec),
                       std::abs(sigma0) * std::sqrt(static_cast<double>(std::min(d, m)))};
    auto drift = [bvec](std::span<const double>, std::span<double> out) {
      std::copy(bvec.begin(), bvec.end(), out.begin());
    };
    auto diffusion = [d, m, sigma0](std::span<const double>, std::span<double> out) {
      std::fill(out.begin(), out.end(), 0.0);
      for (int i = 0; i < std::min(d, m); ++i) out[static_cast<std::size_t>(i) * m + i] = sigma0;
    };
    return CoefficientField(d, m, std::move(drift), std::move(diffusion),
                            ModulusClass::lipschitz, 0.0, bounds);
  }
  if (key == "linear") {
    const int d = static_cast<int>(param_or(params, "d", 1));
    const int m = static_cast<int>(param_or(params, "m", d));
    const double gain = param_or(params, "gain", 1.0);
    const double sigma0 = param_or(params, "sigma0", 0.0);
    auto drift = [gain](std::span<const double> x, std::span<double> out) {
      for (std::size_t i = 0; i < x.size(); ++i) out[i] = gain * x[i];
    };
    auto diffusion = [d, m, sigma0](std::span<const double>, std::span<double> out) {
      std::fill(out.begin(), out.end(), 0.0);
      for (int i = 0; i < std::min(d, m); ++i) out[static_cast<std::size_t>(i) * m + i] = sigma0;
    };
    return CoefficientField(d, m, std::move(drift), std::move(diffusion),
                            ModulusClass::lipschitz, std::abs(gain), {});
  }
  if (key == "sine_series") {
    const auto K = static_cast<std::int64_t>(param_or(params, "K", 100000));
    const double sigma0 = param_or(params, "sigma0", 0.0);
    std::array<double, 2> lift{1.0, 1.0};
    if (params.contains("lift")) {
      const auto v = params.at("lift").get<std::vector<double>>();
      if (v.size() != 2) throw validation_error("sine_series lift needs two components");
      lift = {v[0], v[1]};
    }
    return SineSeriesField(K, sigma0, lift).field();
  }
  if (key == "log_growth") {
    // d=1 drift x*log(max(x, e)); grows like x log x for large x.
    const double sigma0 = param_or(params, "sigma0", 0.0);
    auto drift = [](std::span<const double> x, std::span<double> out) {
      const double e = 2.718281828459045;
      out[0] = x[0] * std::log(std::max(x[0], e));
    };
    auto diffusion = [sigma0](std::span<const double>, std::span<double> out) {
      out[0] = sigma0;
    };
    return CoefficientField(1, 1, std::move(drift), std::move(diffusion), ModulusClass::custom,
                            {}, {});
  }
  if (key == "log_sq_growth") {
    // d=1 drift x*log(max(x, e))^2; blows up in finite time from x0 >= e.
    const double sigma0 = param_or(params, "sigma0", 0.0);
    auto drift = [](std::span<const double> x, std::span<double> out) {
      const double e = 2.718281828459045;
      const double l = std::log(std::max(x[0], e));
      out[0] = x[0] * l * l;
    };
    auto diffusion = [sigma0](std::span<const double>, std::span<double> out) {
      out[0] = sigma0;
    };
    return CoefficientField(1, 1, std::move(drift), std::move(diffusion), ModulusClass::custom,
                            {}, {});
  }
  if (key == "quadratic") {
    // d=1 drift x^2, handy for truncation examples.
    const double sigma0 = param_or(params, "sigma0", 0.0);
    auto drift = [](std::span<const double> x, std::span<double> out) { out[0] = x[0] * x[0]; };
    auto diffusion = [sigma0](std::span<const double>, std::span<double> out) {
      out[0] = sigma0;
    };
    return CoefficientField(1, 1, std::move(drift), std::move(diffusion), ModulusClass::custom,
                            {}, {});
  }
  throw validation_error("unknown field key: " + key);
}

}  // namespace

CoefficientField make_field(const std::string& key, const nlohmann::json& params) {
  constexpr std::string_view kTrunc = "truncated:";
  if (key.rfind(kTrunc, 0) == 0) {
    const std::string rest = key.substr(kTrunc.size());
    const auto colon = rest.rfind(':');
    if (colon == std::string::npos)
      throw validation_error("truncated field key needs the form truncated:<base>:<R>");
    const std::string base_key = rest.substr(0, colon);
    double radius = 0.0;
    try {
      radius = std::stod(rest.substr(colon + 1));
    } catch (const std::exception&) {
      throw validation_error("truncated field key has a malformed radius");
    }
    const int probes = static_cast<int>(param_or(params, "probes", 512));
    return truncate_field(make_base_field(base_key, params), radius, probes);
  }
  return make_base_field(key, params);
}

}  // namespace logsde
