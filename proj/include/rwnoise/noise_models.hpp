#pragma once

// Bhattacharyya-coefficient edge weights for three pixel noise models, plus the
// classic Gaussian-kernel weight used as a baseline.
//
// Every weight compares the posterior distributions of the latent pixel parameter given
// two disjoint sample sets X and Y drawn around adjacent pixels. With a flat prior on a
// box that grows without bound, the coefficient reduces to closed forms that depend only
// on sufficient statistics of X and Y.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "rwnoise/errors.hpp"
#include "rwnoise/grid.hpp"

namespace rwnoise {

enum class ModelKind { poisson, gaussian_const, gaussian_var, grady };

/// Multiset of m-dimensional samples gathered around `center`.
/// Samples are stored in raster order; `coords` is either empty or parallel to the samples.
struct SampleSet {
  int dim = 1;
  std::vector<double> values;
  std::vector<Pixel> coords;
  Pixel center;

  std::size_t size() const { return dim > 0 ? values.size() / static_cast<std::size_t>(dim) : 0; }
  bool empty() const { return values.empty(); }
  std::span<const double> sample(std::size_t i) const {
    return {values.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
  }

  static SampleSet scalar(std::vector<double> v) {
    SampleSet s;
    s.dim = 1;
    s.values = std::move(v);
    return s;
  }
};

namespace detail {

inline void require_nonempty(const SampleSet& s) {
  if (s.empty() || s.dim < 1 || s.values.size() % static_cast<std::size_t>(s.dim) != 0)
    throw PreconditionError("sample set must be nonempty with a consistent dimension");
}

inline void require_scalar(const SampleSet& s) {
  require_nonempty(s);
  if (s.dim != 1) throw PreconditionError("model requires scalar samples");
}

inline double mean_scalar(std::span<const double> v) {
  double sum = 0.0;
  for (double x : v) sum += x;
  return sum / static_cast<double>(v.size());
}

// Biased (1/n) variance.
inline double variance_scalar(std::span<const double> v, double mean) {
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(v.size());
}

}  // namespace detail

/// Per-channel mean of a sample set, accumulated in raster order.
inline Eigen::VectorXd sample_mean(const SampleSet& s) {
  detail::require_nonempty(s);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(s.dim);
  for (std::size_t i = 0; i < s.size(); ++i) {
    auto x = s.sample(i);
    for (int c = 0; c < s.dim; ++c) mean[c] += x[c];
  }
  return mean / static_cast<double>(s.size());
}

// ---------------------------------------------------------------------------------------
// Poisson

/// Sum of the (count-valued) samples in a set.
struct PoissonStats {
  std::int64_t sum = 0;
};

/// Count value of a stored intensity: nearest nonnegative integer.
inline std::int64_t poisson_count(double v) {
  if (!(v > 0.0)) return 0;
  return static_cast<std::int64_t>(std::llround(v));
}

inline PoissonStats poisson_stats(const SampleSet& s) {
  detail::require_scalar(s);
  PoissonStats st;
  for (double v : s.values) st.sum += poisson_count(v);
  return st;
}

/// Gamma(S_X/2 + S_Y/2 + 1) / sqrt(Gamma(S_X + 1) Gamma(S_Y + 1)), evaluated in log space.
inline double weight_poisson(PoissonStats sx, PoissonStats sy) {
  const double a = static_cast<double>(sx.sum);
  const double b = static_cast<double>(sy.sum);
  const double log_w = std::lgamma((a + b) / 2.0 + 1.0) - (std::lgamma(a + 1.0) + std::lgamma(b + 1.0)) / 2.0;
  return std::min(1.0, std::exp(log_w));
}

/// Coefficient between two Poisson laws with rates S_X and S_Y; within 0.05 of the exact
/// weight once both sums exceed 2.
inline double weight_poisson_approx(PoissonStats sx, PoissonStats sy) {
  const double d = std::sqrt(static_cast<double>(sx.sum)) - std::sqrt(static_cast<double>(sy.sum));
  return std::exp(-0.5 * d * d);
}

// ---------------------------------------------------------------------------------------
// Multivariate Gaussian with a covariance shared by the whole image

class GaussianConstCovConfig {
 public:
  explicit GaussianConstCovConfig(Eigen::MatrixXd covariance) : covariance_(std::move(covariance)) {
    if (covariance_.rows() < 1 || covariance_.rows() != covariance_.cols())
      throw ConfigError("covariance must be a square matrix");
    if (!covariance_.allFinite()) throw ConfigError("covariance has non-finite entries");
    if ((covariance_ - covariance_.transpose()).cwiseAbs().maxCoeff() >
        1e-12 * std::max(1.0, covariance_.cwiseAbs().maxCoeff()))
      throw ConfigError("covariance must be symmetric");
    Eigen::LLT<Eigen::MatrixXd> llt(covariance_);
    if (llt.info() != Eigen::Success) throw ConfigError("covariance must be positive definite");
    precision_ = llt.solve(Eigen::MatrixXd::Identity(channels(), channels()));
    precision_ = (precision_ + precision_.transpose()) / 2.0;
  }

  static GaussianConstCovConfig scalar(double variance) {
    return GaussianConstCovConfig(Eigen::MatrixXd::Constant(1, 1, variance));
  }

  int channels() const { return static_cast<int>(covariance_.rows()); }
  const Eigen::MatrixXd& covariance() const { return covariance_; }
  const Eigen::MatrixXd& precision() const { return precision_; }

  /// (a - b)^T C^{-1} (a - b)
  double mahalanobis_sq(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
    const Eigen::VectorXd d = a - b;
    return d.dot(precision_ * d);
  }

 private:
  Eigen::MatrixXd covariance_;
  Eigen::MatrixXd precision_;
};

/// exp(-1/8 (X̄ - Ȳ)^T (C/n)^{-1} (X̄ - Ȳ)) for sample means of n samples each.
inline double weight_gaussian_const(const Eigen::VectorXd& mean_x, const Eigen::VectorXd& mean_y,
                                    const GaussianConstCovConfig& cfg, std::size_t n) {
  if (n < 1) throw PreconditionError("weight_gaussian_const: n must be >= 1");
  if (mean_x.size() != cfg.channels() || mean_y.size() != cfg.channels())
    throw PreconditionError("weight_gaussian_const: mean dimension does not match covariance");
  return std::exp(-0.125 * static_cast<double>(n) * cfg.mahalanobis_sq(mean_x, mean_y));
}

inline double weight_gaussian_const(const SampleSet& x, const SampleSet& y, const GaussianConstCovConfig& cfg) {
  if (x.size() != y.size()) throw PreconditionError("weight_gaussian_const: |X| must equal |Y|");
  return weight_gaussian_const(sample_mean(x), sample_mean(y), cfg, x.size());
}

// ---------------------------------------------------------------------------------------
// Scalar Gaussian with region-dependent mean and variance

struct GaussianVarConfig {
  /// Lower bound applied to Var(X), Var(Y) and Var(X ∪ Y). Zero disables the floor.
  double variance_floor = 0.0;
};

/// Floor used for images whose intensities span `range`.
inline double variance_floor_for_range(double range) { return 1e-6 * range * range; }

namespace detail {

inline std::size_t require_var_pair(const SampleSet& x, const SampleSet& y) {
  require_scalar(x);
  require_scalar(y);
  if (x.size() != y.size()) throw PreconditionError("weight_gaussian_var: |X| must equal |Y|");
  if (x.size() < 4) throw PreconditionError("weight_gaussian_var: needs at least 4 samples per set");
  return x.size();
}

}  // namespace detail

/// (sqrt(Var X Var Y) / Var(X ∪ Y))^((n-3)/2) with the pooled variance written as
/// (Var X + Var Y)/2 + ((E X - E Y)/2)^2. Biased variances throughout.
inline double weight_gaussian_var(const SampleSet& x, const SampleSet& y, const GaussianVarConfig& cfg = {}) {
  const std::size_t n = detail::require_var_pair(x, y);
  const double mx = detail::mean_scalar(x.values);
  const double my = detail::mean_scalar(y.values);
  const double vx = std::max(detail::variance_scalar(x.values, mx), cfg.variance_floor);
  const double vy = std::max(detail::variance_scalar(y.values, my), cfg.variance_floor);
  const double half_gap = (mx - my) / 2.0;
  const double pooled = std::max((vx + vy) / 2.0 + half_gap * half_gap, cfg.variance_floor);
  if (pooled <= 0.0) return 1.0;  // both sets constant and equal, no floor
  const double log_ratio = 0.5 * std::log(vx) + 0.5 * std::log(vy) - std::log(pooled);
  return std::min(1.0, std::exp(0.5 * (static_cast<double>(n) - 3.0) * log_ratio));
}

/// Same weight from pairwise squared differences:
/// (4 sqrt(ΣΣ(x1-x2)^2 ΣΣ(y1-y2)^2) / ΣΣ(z1-z2)^2)^((n-3)/2), z over X ∪ Y.
inline double weight_gaussian_var_pairwise(const SampleSet& x, const SampleSet& y,
                                           const GaussianVarConfig& cfg = {}) {
  const std::size_t n = detail::require_var_pair(x, y);
  auto pair_sum = [](std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (double u : a)
      for (double v : b) s += (u - v) * (u - v);
    return s;
  };
  const double nn = static_cast<double>(n);
  // ΣΣ over a set of size n equals 2 n^2 Var; over X ∪ Y (size 2n) it equals 8 n^2 Var.
  const double ssx = std::max(pair_sum(x.values, x.values), 2.0 * nn * nn * cfg.variance_floor);
  const double ssy = std::max(pair_sum(y.values, y.values), 2.0 * nn * nn * cfg.variance_floor);
  const double ssz = std::max(ssx + ssy + 2.0 * pair_sum(x.values, y.values), 8.0 * nn * nn * cfg.variance_floor);
  if (ssz <= 0.0) return 1.0;
  const double log_ratio = std::log(4.0) + 0.5 * std::log(ssx) + 0.5 * std::log(ssy) - std::log(ssz);
  return std::min(1.0, std::exp(0.5 * (nn - 3.0) * log_ratio));
}

// ---------------------------------------------------------------------------------------
// Gaussian kernel baseline

class GradyConfig {
 public:
  explicit GradyConfig(double beta) : beta_(beta) {
    if (!(beta > 0.0) || !std::isfinite(beta)) throw ConfigError("grady: beta must be a positive finite number");
  }
  double beta() const { return beta_; }

 private:
  double beta_;
};

/// exp(-beta ||x - y||^2) on intensities already rescaled to [0, 1].
inline double weight_grady(std::span<const double> x, std::span<const double> y, const GradyConfig& cfg) {
  if (x.size() != y.size()) throw PreconditionError("weight_grady: dimension mismatch");
  double d2 = 0.0;
  for (std::size_t c = 0; c < x.size(); ++c) d2 += (x[c] - y[c]) * (x[c] - y[c]);
  return std::exp(-cfg.beta() * d2);
}

// ---------------------------------------------------------------------------------------
// Parameter estimation

struct PoissonEstimate {
  double lambda = 0.0;
};
struct MeanEstimate {
  Eigen::VectorXd mean;
};
struct MeanVarianceEstimate {
  double mean = 0.0;
  double variance = 0.0;  // biased
};
using ParamEstimate = std::variant<PoissonEstimate, MeanEstimate, MeanVarianceEstimate>;

inline ParamEstimate estimate_params(ModelKind kind, const SampleSet& n) {
  switch (kind) {
    case ModelKind::poisson: {
      detail::require_scalar(n);
      double sum = 0.0;
      for (double v : n.values) sum += static_cast<double>(poisson_count(v));
      return PoissonEstimate{sum / static_cast<double>(n.size())};
    }
    case ModelKind::gaussian_const:
      return MeanEstimate{sample_mean(n)};
    case ModelKind::gaussian_var: {
      detail::require_scalar(n);
      const double m = detail::mean_scalar(n.values);
      return MeanVarianceEstimate{m, detail::variance_scalar(n.values, m)};
    }
    case ModelKind::grady:
      break;
  }
  throw PreconditionError("estimate_params: model has no per-neighborhood parameters");
}

// ---------------------------------------------------------------------------------------
// Global covariance for the constant-covariance model

struct CovarianceEstimate {
  Eigen::MatrixXd covariance;
  /// Set when the robust estimate collapsed (e.g. constant image) and εI was returned.
  bool degenerate = false;
};

namespace detail {

inline double median_inplace(std::vector<double>& v) {
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  double upper = *mid;
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), mid);
  return (lower + upper) / 2.0;
}

// (MAD / 0.6745)^2: robust variance of a sample.
inline double mad_variance(std::vector<double> v) {
  const double med = median_inplace(v);
  for (double& x : v) x = std::abs(x - med);
  const double mad = median_inplace(v);
  return (mad / 0.6745) * (mad / 0.6745);
}

}  // namespace detail

/// Noise covariance from horizontal first differences, per channel pair:
/// MAD-based variances of d_i ± d_j give the covariance of d by polarization, and
/// differencing doubles the noise covariance. The result is symmetrized and its
/// eigenvalues clamped to at least ε = 1e-8 · range².
inline CovarianceEstimate estimate_global_covariance(const Image& image,
                                                     const std::optional<Eigen::MatrixXd>& user_override = std::nullopt) {
  if (user_override) return {*user_override, false};
  if (image.width() < 2) throw PreconditionError("estimate_global_covariance: image needs at least 2 columns");
  const int m = image.channels();
  const std::size_t count = static_cast<std::size_t>(image.width() - 1) * static_cast<std::size_t>(image.height());

  std::vector<std::vector<double>> diffs(m, std::vector<double>(count));
  std::size_t k = 0;
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x + 1 < image.width(); ++x, ++k)
      for (int c = 0; c < m; ++c) diffs[c][k] = image.at(x + 1, y, c) - image.at(x, y, c);

  Eigen::MatrixXd cov(m, m);
  for (int i = 0; i < m; ++i) {
    cov(i, i) = detail::mad_variance(diffs[i]) / 2.0;
    for (int j = 0; j < i; ++j) {
      std::vector<double> plus(count), minus(count);
      for (std::size_t t = 0; t < count; ++t) {
        plus[t] = diffs[i][t] + diffs[j][t];
        minus[t] = diffs[i][t] - diffs[j][t];
      }
      const double c = (detail::mad_variance(std::move(plus)) - detail::mad_variance(std::move(minus))) / 8.0;
      cov(i, j) = c;
      cov(j, i) = c;
    }
  }

  double lo = image.data().empty() ? 0.0 : image.data()[0];
  double hi = lo;
  for (double v : image.data()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double range = hi - lo;
  const double eps = range > 0.0 ? 1e-8 * range * range : 1e-8;

  CovarianceEstimate out;
  out.degenerate = cov.diagonal().maxCoeff() <= 0.0;
  if (out.degenerate) {
    out.covariance = eps * Eigen::MatrixXd::Identity(m, m);
    return out;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  Eigen::VectorXd values = eig.eigenvalues().cwiseMax(eps);
  out.covariance = eig.eigenvectors() * values.asDiagonal() * eig.eigenvectors().transpose();
  out.covariance = (out.covariance + out.covariance.transpose()) / 2.0;
  return out;
}

}  // namespace rwnoise
