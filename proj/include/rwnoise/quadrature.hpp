#pragma once

// Direct numerical evaluation of the Bhattacharyya coefficient between parameter
// posteriors under a flat prior on a box:
//
//   w = ∫ sqrt(L_X(κ) L_Y(κ)) dκ / sqrt(∫ L_X dκ · ∫ L_Y dκ),   L_S(κ) = Π_{s∈S} p(s | κ)
//
// Only the per-sample log-density is needed, so this serves as an oracle for the
// closed-form weights. Each integral is computed separately in log space on a tensor
// trapezoid grid. Axes may be remapped (log for scale parameters, sinh for location
// parameters with heavy conditional tails), and the grid repeatedly zooms onto the
// region where the log-integrand is within `kLogWindow` of its maximum.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "rwnoise/errors.hpp"
#include "rwnoise/noise_models.hpp"

namespace rwnoise {

enum class AxisMap {
  linear,  // κ = u
  log,     // κ = exp(u), requires lo > 0
  sinh,    // κ = center + scale · sinh(u)
};

/// One axis of the parameter box [lo, hi] together with its quadrature parametrization.
struct QuadratureAxis {
  double lo = 0.0;
  double hi = 1.0;
  AxisMap map = AxisMap::linear;
  double center = 0.0;  // sinh only
  double scale = 1.0;   // sinh only
};

struct GenericPdfModel {
  /// log p(sample | κ); may return -inf.
  std::function<double(std::span<const double> sample, std::span<const double> kappa)> log_pdf;
  std::vector<QuadratureAxis> domain;
  /// Trapezoid intervals per axis on the final grid.
  int quadrature_points = 512;
};

namespace detail {

inline constexpr double kLogWindow = 60.0;
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double to_kappa(const QuadratureAxis& a, double u) {
  switch (a.map) {
    case AxisMap::linear: return u;
    case AxisMap::log: return std::exp(u);
    case AxisMap::sinh: return a.center + a.scale * std::sinh(u);
  }
  return u;
}

inline double to_u(const QuadratureAxis& a, double kappa) {
  switch (a.map) {
    case AxisMap::linear: return kappa;
    case AxisMap::log: return std::log(kappa);
    case AxisMap::sinh: return std::asinh((kappa - a.center) / a.scale);
  }
  return kappa;
}

// log |dκ/du|
inline double log_jacobian(const QuadratureAxis& a, double u) {
  switch (a.map) {
    case AxisMap::linear: return 0.0;
    case AxisMap::log: return u;
    case AxisMap::sinh: {
      const double au = std::abs(u);
      return std::log(a.scale) + au + std::log1p(std::exp(-2.0 * au)) - std::log(2.0);
    }
  }
  return 0.0;
}

inline void validate_model(const GenericPdfModel& model) {
  if (!model.log_pdf) throw ConfigError("quadrature: model has no density");
  if (model.domain.empty()) throw ConfigError("quadrature: empty parameter domain");
  if (model.quadrature_points < 16) throw ConfigError("quadrature: need at least 16 points per axis");
  for (const auto& a : model.domain) {
    if (!(a.hi > a.lo)) throw ConfigError("quadrature: parameter box has zero volume");
    if (a.map == AxisMap::log && !(a.lo > 0.0)) throw ConfigError("quadrature: log axis needs lo > 0");
    if (a.map == AxisMap::sinh && !(a.scale > 0.0)) throw ConfigError("quadrature: sinh axis needs scale > 0");
  }
}

struct GridEval {
  std::vector<double> values;  // log integrand incl. Jacobian, row-major over axes
  std::vector<double> u_lo, u_step;
  int points = 0;  // intervals per axis
  double max = kNegInf;
  std::size_t argmax = 0;
};

template <class LogIntegrand>
GridEval evaluate_grid(std::span<const QuadratureAxis> axes, int intervals, const LogIntegrand& f) {
  const std::size_t d = axes.size();
  GridEval g;
  g.points = intervals;
  g.u_lo.resize(d);
  g.u_step.resize(d);
  for (std::size_t i = 0; i < d; ++i) {
    const double lo = to_u(axes[i], axes[i].lo);
    const double hi = to_u(axes[i], axes[i].hi);
    g.u_lo[i] = lo;
    g.u_step[i] = (hi - lo) / intervals;
  }
  const std::size_t per_axis = static_cast<std::size_t>(intervals) + 1;
  std::size_t total = 1;
  for (std::size_t i = 0; i < d; ++i) total *= per_axis;
  g.values.resize(total);

  // Jacobian and κ coordinate per axis node.
  std::vector<std::vector<double>> kappa_at(d, std::vector<double>(per_axis));
  std::vector<std::vector<double>> jac_at(d, std::vector<double>(per_axis));
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < per_axis; ++j) {
      const double u = g.u_lo[i] + g.u_step[i] * static_cast<double>(j);
      kappa_at[i][j] = std::clamp(to_kappa(axes[i], u), axes[i].lo, axes[i].hi);
      jac_at[i][j] = log_jacobian(axes[i], u);
    }

  std::vector<std::size_t> idx(d, 0);
  std::vector<double> kappa(d);
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t rem = flat;
    double jac = 0.0;
    for (std::size_t i = d; i-- > 0;) {
      idx[i] = rem % per_axis;
      rem /= per_axis;
      kappa[i] = kappa_at[i][idx[i]];
      jac += jac_at[i][idx[i]];
    }
    double v = f(std::span<const double>(kappa));
    v = std::isnan(v) ? kNegInf : v + jac;
    g.values[flat] = v;
    if (v > g.max) {
      g.max = v;
      g.argmax = flat;
    }
  }
  return g;
}

template <class LogIntegrand>
double log_integral(std::vector<QuadratureAxis> axes, int final_intervals, const LogIntegrand& f) {
  const std::size_t d = axes.size();
  const int explore = std::max(16, final_intervals / 4);
  const std::size_t per_axis = static_cast<std::size_t>(explore) + 1;

  for (int iter = 0; iter < 12; ++iter) {
    GridEval g = evaluate_grid(axes, explore, f);
    if (!std::isfinite(g.max))
      throw QuadratureDomainError("quadrature: integrand vanishes on the whole parameter box");

    // Index bounding box of the super-level set {g >= max - window}.
    std::vector<std::size_t> lo(d, per_axis), hi(d, 0);
    std::vector<std::size_t> idx(d);
    for (std::size_t flat = 0; flat < g.values.size(); ++flat) {
      if (g.values[flat] < g.max - kLogWindow) continue;
      std::size_t rem = flat;
      for (std::size_t i = d; i-- > 0;) {
        idx[i] = rem % per_axis;
        rem /= per_axis;
        lo[i] = std::min(lo[i], idx[i]);
        hi[i] = std::max(hi[i], idx[i]);
      }
    }
    // κ at the maximum, used to re-center sinh axes.
    std::vector<double> kappa_max(d);
    {
      std::size_t rem = g.argmax;
      for (std::size_t i = d; i-- > 0;) {
        const std::size_t j = rem % per_axis;
        rem /= per_axis;
        kappa_max[i] = to_kappa(axes[i], g.u_lo[i] + g.u_step[i] * static_cast<double>(j));
      }
    }

    bool resolved = true;
    std::vector<QuadratureAxis> next = axes;
    for (std::size_t i = 0; i < d; ++i) {
      const std::size_t a = lo[i] > 0 ? lo[i] - 1 : 0;
      const std::size_t b = std::min(per_axis - 1, hi[i] + 1);
      if (b - a < static_cast<std::size_t>(explore) / 4) resolved = false;
      const double new_lo = to_kappa(axes[i], g.u_lo[i] + g.u_step[i] * static_cast<double>(a));
      const double new_hi = to_kappa(axes[i], g.u_lo[i] + g.u_step[i] * static_cast<double>(b));
      next[i].lo = std::max(axes[i].lo, new_lo);
      next[i].hi = std::min(axes[i].hi, new_hi);
      if (next[i].map == AxisMap::sinh) next[i].center = std::clamp(kappa_max[i], next[i].lo, next[i].hi);
      if (!(next[i].hi > next[i].lo)) {
        // Degenerate box from rounding; keep the previous extent on this axis.
        next[i] = axes[i];
      }
    }
    axes = std::move(next);
    if (resolved) break;
  }

  GridEval g = evaluate_grid(axes, final_intervals, f);
  if (!std::isfinite(g.max))
    throw QuadratureDomainError("quadrature: integrand vanishes on the whole parameter box");
  const std::size_t final_per_axis = static_cast<std::size_t>(final_intervals) + 1;
  double acc = 0.0;
  std::vector<std::size_t> idx(d);
  for (std::size_t flat = 0; flat < g.values.size(); ++flat) {
    const double v = g.values[flat];
    if (v == kNegInf) continue;
    std::size_t rem = flat;
    double weight = 1.0;
    for (std::size_t i = d; i-- > 0;) {
      const std::size_t j = rem % final_per_axis;
      rem /= final_per_axis;
      if (j == 0 || j + 1 == final_per_axis) weight *= 0.5;
    }
    acc += weight * std::exp(v - g.max);
  }
  double log_cell = 0.0;
  for (std::size_t i = 0; i < d; ++i) log_cell += std::log(g.u_step[i]);
  return g.max + std::log(acc) + log_cell;
}

inline double log_likelihood(const GenericPdfModel& model, const SampleSet& s, std::span<const double> kappa) {
  double total = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    total += model.log_pdf(s.sample(i), kappa);
    if (total == kNegInf) break;
  }
  return total;
}

}  // namespace detail

/// Bhattacharyya coefficient of the two parameter posteriors by quadrature.
inline double weight_numeric(const GenericPdfModel& model, const SampleSet& x, const SampleSet& y) {
  detail::validate_model(model);
  detail::require_nonempty(x);
  detail::require_nonempty(y);
  auto lx = [&](std::span<const double> k) { return detail::log_likelihood(model, x, k); };
  auto ly = [&](std::span<const double> k) { return detail::log_likelihood(model, y, k); };
  auto lxy = [&](std::span<const double> k) { return 0.5 * (lx(k) + ly(k)); };
  const double num = detail::log_integral(model.domain, model.quadrature_points, lxy);
  const double den_x = detail::log_integral(model.domain, model.quadrature_points, lx);
  const double den_y = detail::log_integral(model.domain, model.quadrature_points, ly);
  return std::clamp(std::exp(num - 0.5 * (den_x + den_y)), 0.0, 1.0);
}

// ---------------------------------------------------------------------------------------
// Density models with parameter boxes large enough that the closed forms apply.

namespace detail {

inline double max_abs(const SampleSet& s) {
  double m = 0.0;
  for (double v : s.values) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace detail

/// Poisson counts, κ = λ on (0, a] with a = max + 10 sqrt(max + 1).
inline GenericPdfModel poisson_pdf_model(const SampleSet& x, const SampleSet& y) {
  double mx = 0.0;
  for (const auto* s : {&x, &y})
    for (double v : s->values) mx = std::max(mx, static_cast<double>(poisson_count(v)));
  GenericPdfModel model;
  model.log_pdf = [](std::span<const double> sample, std::span<const double> k) {
    const double c = static_cast<double>(poisson_count(sample[0]));
    const double lambda = k[0];
    if (c == 0.0) return -lambda;
    return c * std::log(lambda) - lambda - std::lgamma(c + 1.0);
  };
  const double a = mx + 10.0 * std::sqrt(mx + 1.0);
  model.domain = {{a * 1e-30, a, AxisMap::log}};
  return model;
}

/// m-variate Gaussian with fixed covariance, κ = μ on the box [-a, a]^m with
/// a_i = max|sample| + 10 sqrt(C_ii).
inline GenericPdfModel gaussian_const_pdf_model(const GaussianConstCovConfig& cfg, const SampleSet& x,
                                                const SampleSet& y) {
  const int m = cfg.channels();
  std::vector<double> precision(static_cast<std::size_t>(m * m));
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < m; ++c) precision[static_cast<std::size_t>(r * m + c)] = cfg.precision()(r, c);
  const double log_norm =
      -0.5 * (static_cast<double>(m) * std::log(2.0 * M_PI) + std::log(cfg.covariance().determinant()));
  GenericPdfModel model;
  model.log_pdf = [precision, log_norm, m](std::span<const double> sample, std::span<const double> k) {
    double q = 0.0;
    for (int r = 0; r < m; ++r) {
      double row = 0.0;
      for (int c = 0; c < m; ++c) row += precision[static_cast<std::size_t>(r * m + c)] * (sample[c] - k[c]);
      q += (sample[r] - k[r]) * row;
    }
    return log_norm - 0.5 * q;
  };
  const double reach = std::max(detail::max_abs(x), detail::max_abs(y));
  for (int c = 0; c < m; ++c) {
    const double a = reach + 10.0 * std::sqrt(cfg.covariance()(c, c));
    model.domain.push_back({-a, a, AxisMap::linear});
  }
  return model;
}

/// Scalar Gaussian with unknown mean and variance, κ = (μ, σ²). The conditional posterior
/// of σ² only decays polynomially, so the box is taken very wide: σ² over 90 decades
/// around the pooled variance (log axis) and μ far enough out to hold the mean posterior
/// at the largest σ² (sinh axis centered on the pooled mean).
inline GenericPdfModel gaussian_var_pdf_model(const SampleSet& x, const SampleSet& y) {
  detail::require_scalar(x);
  detail::require_scalar(y);
  GenericPdfModel model;
  model.log_pdf = [](std::span<const double> sample, std::span<const double> k) {
    const double d = sample[0] - k[0];
    return -0.5 * std::log(2.0 * M_PI * k[1]) - d * d / (2.0 * k[1]);
  };
  std::vector<double> all = x.values;
  all.insert(all.end(), y.values.begin(), y.values.end());
  const double mean = detail::mean_scalar(all);
  double var = detail::variance_scalar(all, mean);
  const double vx = detail::variance_scalar(x.values, detail::mean_scalar(x.values));
  const double vy = detail::variance_scalar(y.values, detail::mean_scalar(y.values));
  double v_small = std::min(vx, vy);
  if (!(var > 0.0)) var = 1.0;
  if (!(v_small > 0.0)) v_small = var;
  const double v_lo = var * 1e-30;
  const double v_hi = var * 1e60;
  const double n = static_cast<double>(std::max(x.size(), y.size()));
  const double reach = detail::max_abs(x) + detail::max_abs(y) + 10.0 * std::sqrt(v_hi);
  model.domain = {{-reach, reach, AxisMap::sinh, mean, std::sqrt(v_small / n) / 4.0},
                  {v_lo, v_hi, AxisMap::log}};
  return model;
}

}  // namespace rwnoise
