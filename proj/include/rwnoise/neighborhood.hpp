#pragma once

// Per-pixel neighborhood selection and symmetric splitting of overlapping neighborhoods.
//
// Each pixel picks, among all (2k+1)x(2k+1) windows that contain it and lie inside the
// image, the window whose estimated noise parameters make the pixel's own value most
// likely. Two adjacent pixels then share out the pixels common to both windows along a
// line orthogonal to their connecting edge so the two sample sets are disjoint and of
// equal size.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "rwnoise/errors.hpp"
#include "rwnoise/grid.hpp"
#include "rwnoise/noise_models.hpp"

namespace rwnoise {

/// What the window likelihood needs to know about the noise model.
struct NeighborhoodModel {
  ModelKind kind = ModelKind::gaussian_var;
  std::optional<GaussianConstCovConfig> covariance;  // gaussian_const
  double variance_floor = 0.0;                       // gaussian_var
};

/// Candidate window origins for `pixel`, in raster order.
struct WindowSet {
  Pixel pixel;
  int k = 1;
  std::vector<Pixel> candidates;

  int side() const { return 2 * k + 1; }
};

inline void require_window_fits(int width, int height, int k) {
  if (k < 0) throw PreconditionError("window radius k must be nonnegative");
  const int side = 2 * k + 1;
  if (width < side || height < side)
    throw PreconditionError("image is smaller than the " + std::to_string(side) + "x" + std::to_string(side) +
                            " neighborhood window; use a smaller k");
}

inline WindowSet candidate_windows(int width, int height, Pixel pixel, int k) {
  require_window_fits(width, height, k);
  const int side = 2 * k + 1;
  WindowSet set{pixel, k, {}};
  const int x0 = std::max(0, pixel.x - 2 * k), x1 = std::min(pixel.x, width - side);
  const int y0 = std::max(0, pixel.y - 2 * k), y1 = std::min(pixel.y, height - side);
  for (int oy = y0; oy <= y1; ++oy)
    for (int ox = x0; ox <= x1; ++ox) set.candidates.push_back({ox, oy});
  return set;
}

/// Samples of the window at `origin`, raster order, tagged with their coordinates.
inline SampleSet window_samples(const Image& image, Pixel origin, int side, Pixel center) {
  SampleSet s;
  s.dim = image.channels();
  s.center = center;
  s.values.reserve(static_cast<std::size_t>(side * side * s.dim));
  s.coords.reserve(static_cast<std::size_t>(side * side));
  for (int y = origin.y; y < origin.y + side; ++y)
    for (int x = origin.x; x < origin.x + side; ++x) {
      for (double v : image.pixel(x, y)) s.values.push_back(v);
      s.coords.push_back({x, y});
    }
  return s;
}

/// log p(x | parameters estimated from the window samples).
inline double window_log_likelihood(const SampleSet& window, std::span<const double> x, const NeighborhoodModel& model) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  switch (model.kind) {
    case ModelKind::poisson: {
      const auto est = std::get<PoissonEstimate>(estimate_params(ModelKind::poisson, window));
      const double c = static_cast<double>(poisson_count(x[0]));
      if (est.lambda <= 0.0) return c == 0.0 ? 0.0 : -inf;
      return c * std::log(est.lambda) - est.lambda - std::lgamma(c + 1.0);
    }
    case ModelKind::gaussian_const: {
      if (!model.covariance) throw ConfigError("constant-covariance neighborhood needs a covariance");
      const auto& cfg = *model.covariance;
      const auto est = std::get<MeanEstimate>(estimate_params(ModelKind::gaussian_const, window));
      Eigen::VectorXd v(cfg.channels());
      for (int c = 0; c < cfg.channels(); ++c) v[c] = x[static_cast<std::size_t>(c)];
      return -0.5 * cfg.mahalanobis_sq(v, est.mean) -
             0.5 * (cfg.channels() * std::log(2.0 * M_PI) + std::log(cfg.covariance().determinant()));
    }
    case ModelKind::gaussian_var: {
      const auto est = std::get<MeanVarianceEstimate>(estimate_params(ModelKind::gaussian_var, window));
      const double var = std::max(est.variance, model.variance_floor);
      const double d = x[0] - est.mean;
      if (var <= 0.0) return d == 0.0 ? inf : -inf;
      return -0.5 * std::log(2.0 * M_PI * var) - d * d / (2.0 * var);
    }
    case ModelKind::grady:
      break;
  }
  throw ConfigError("neighborhood selection is not defined for this model");
}

/// Origin of the most likely window; equal likelihoods resolve to the first origin in
/// raster order.
inline Pixel select_window(const Image& image, Pixel pixel, int k, const NeighborhoodModel& model) {
  const WindowSet set = candidate_windows(image.width(), image.height(), pixel, k);
  const auto x = image.pixel(pixel.x, pixel.y);
  Pixel best = set.candidates.front();
  double best_ll = -std::numeric_limits<double>::infinity();
  bool first = true;
  for (Pixel origin : set.candidates) {
    const double ll = window_log_likelihood(window_samples(image, origin, set.side(), pixel), x, model);
    if (first || ll > best_ll) {
      best = origin;
      best_ll = ll;
      first = false;
    }
  }
  return best;
}

inline SampleSet select_neighborhood(const Image& image, Pixel pixel, int k, const NeighborhoodModel& model) {
  return window_samples(image, select_window(image, pixel, k, model), 2 * k + 1, pixel);
}

struct ResolvedPair {
  SampleSet x;
  SampleSet y;
};

namespace detail {

inline double distance(Pixel a, Pixel b) { return std::hypot(double(a.x - b.x), double(a.y - b.y)); }

inline SampleSet subset(const SampleSet& s, const std::vector<std::size_t>& keep) {
  SampleSet out;
  out.dim = s.dim;
  out.center = s.center;
  out.values.reserve(keep.size() * static_cast<std::size_t>(s.dim));
  out.coords.reserve(keep.size());
  for (std::size_t i : keep) {
    auto v = s.sample(i);
    out.values.insert(out.values.end(), v.begin(), v.end());
    out.coords.push_back(s.coords[i]);
  }
  return out;
}

}  // namespace detail

/// Splits the pixels shared by X and Y. Shared pixels are sorted by
/// d(p, A) - d(p, B), where A is the center earlier in raster order, with raster order
/// breaking ties; the lower half goes to A's side and the upper half to B's. With an odd
/// count the median pixel goes to A, then the larger side drops its pixel with the
/// largest |d(p, A) - d(p, B)| (latest in raster order on ties) until both sides match.
/// The partition therefore depends only on geometry, never on argument order.
inline ResolvedPair resolve_overlap(const SampleSet& x, const SampleSet& y) {
  if (x.coords.size() != x.size() || y.coords.size() != y.size())
    throw PreconditionError("resolve_overlap: sample sets need pixel coordinates");
  if (x.dim != y.dim) throw PreconditionError("resolve_overlap: dimension mismatch");

  const bool x_is_a = !(y.center < x.center);
  const SampleSet& a = x_is_a ? x : y;
  const SampleSet& b = x_is_a ? y : x;
  auto key = [&](Pixel p) { return detail::distance(p, a.center) - detail::distance(p, b.center); };

  // Coordinates are unique within a set; mark which of A's samples B also holds.
  std::vector<Pixel> b_sorted = b.coords;
  std::sort(b_sorted.begin(), b_sorted.end());
  auto in_b = [&](Pixel p) { return std::binary_search(b_sorted.begin(), b_sorted.end(), p); };

  struct Shared {
    Pixel p;
    double key;
  };
  std::vector<Shared> shared;
  for (Pixel p : a.coords)
    if (in_b(p)) shared.push_back({p, key(p)});
  if (shared.empty() && a.size() == b.size()) return {x, y};

  std::sort(shared.begin(), shared.end(), [](const Shared& l, const Shared& r) {
    if (l.key != r.key) return l.key < r.key;
    return l.p < r.p;
  });
  const std::size_t half = shared.size() / 2;
  std::vector<Pixel> to_a, to_b;
  for (std::size_t i = 0; i < shared.size(); ++i) {
    if (i < half || (shared.size() % 2 == 1 && i == half))
      to_a.push_back(shared[i].p);
    else
      to_b.push_back(shared[i].p);
  }
  std::sort(to_a.begin(), to_a.end());
  std::sort(to_b.begin(), to_b.end());

  std::vector<Pixel> shared_sorted;
  shared_sorted.reserve(shared.size());
  for (const auto& s : shared) shared_sorted.push_back(s.p);
  std::sort(shared_sorted.begin(), shared_sorted.end());
  auto is_shared = [&](Pixel p) { return std::binary_search(shared_sorted.begin(), shared_sorted.end(), p); };

  auto collect = [&](const SampleSet& s, const std::vector<Pixel>& assigned) {
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const Pixel p = s.coords[i];
      if (!is_shared(p) || std::binary_search(assigned.begin(), assigned.end(), p)) keep.push_back(i);
    }
    return keep;
  };
  std::vector<std::size_t> keep_a = collect(a, to_a);
  std::vector<std::size_t> keep_b = collect(b, to_b);

  auto drop_extreme = [&](const SampleSet& s, std::vector<std::size_t>& keep) {
    std::size_t worst = 0;
    double worst_mag = -1.0;
    for (std::size_t j = 0; j < keep.size(); ++j) {
      const Pixel p = s.coords[keep[j]];
      const double mag = std::abs(key(p));
      if (mag > worst_mag || (mag == worst_mag && s.coords[keep[worst]] < p)) {
        worst = j;
        worst_mag = mag;
      }
    }
    keep.erase(keep.begin() + static_cast<std::ptrdiff_t>(worst));
  };
  while (keep_a.size() > keep_b.size()) drop_extreme(a, keep_a);
  while (keep_b.size() > keep_a.size()) drop_extreme(b, keep_b);

  SampleSet ra = detail::subset(a, keep_a);
  SampleSet rb = detail::subset(b, keep_b);
  if (x_is_a) return {std::move(ra), std::move(rb)};
  return {std::move(rb), std::move(ra)};
}

}  // namespace rwnoise
