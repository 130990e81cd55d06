#pragma once

// Automatic seed placement from a ground-truth map: one seed per connected component at
// its pole of inaccessibility, then one extra seed per round in the largest misclassified
// region of the class with the worst Dice score.

#include <algorithm>
#include <limits>
#include <optional>
#include <vector>

#include "rwnoise/errors.hpp"
#include "rwnoise/graph.hpp"
#include "rwnoise/grid.hpp"
#include "rwnoise/metrics.hpp"

namespace rwnoise {

/// 4-connected components of mask != 0; pixel lists in raster order, components ordered
/// by their first pixel.
inline std::vector<std::vector<std::size_t>> connected_components(const std::vector<char>& mask, int width,
                                                                  int height) {
  std::vector<std::vector<std::size_t>> out;
  std::vector<char> seen(mask.size(), 0);
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < mask.size(); ++start) {
    if (!mask[start] || seen[start]) continue;
    std::vector<std::size_t> comp;
    stack.assign(1, start);
    seen[start] = 1;
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      comp.push_back(i);
      const int x = static_cast<int>(i % width), y = static_cast<int>(i / width);
      auto visit = [&](std::size_t j) {
        if (mask[j] && !seen[j]) {
          seen[j] = 1;
          stack.push_back(j);
        }
      };
      if (x > 0) visit(i - 1);
      if (x + 1 < width) visit(i + 1);
      if (y > 0) visit(i - width);
      if (y + 1 < height) visit(i + width);
    }
    std::sort(comp.begin(), comp.end());
    out.push_back(std::move(comp));
  }
  return out;
}

namespace detail {

// 1-D lower envelope of parabolas (Felzenszwalb & Huttenlocher).
inline void edt_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v, std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  constexpr double inf = std::numeric_limits<double>::infinity();
  int k = 0;
  v[0] = 0;
  z[0] = -inf;
  z[1] = inf;
  for (int q = 1; q < n; ++q) {
    if (f[q] == inf) continue;
    if (f[v[k]] == inf) {
      v[k] = q;
      continue;
    }
    double s = ((f[q] + double(q) * q) - (f[v[k]] + double(v[k]) * v[k])) / (2.0 * q - 2.0 * v[k]);
    while (k > 0 && s <= z[k]) {
      --k;
      s = ((f[q] + double(q) * q) - (f[v[k]] + double(v[k]) * v[k])) / (2.0 * q - 2.0 * v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = inf;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double dq = double(q) - v[k];
    d[q] = f[v[k]] == inf ? inf : dq * dq + f[v[k]];
  }
}

}  // namespace detail

/// Exact squared Euclidean distance from every pixel to the nearest pixel with
/// inside == 0. Pixels beyond the border count as outside.
inline std::vector<double> squared_distance_transform(const std::vector<char>& inside, int width, int height) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  const int w = width + 2, h = height + 2;
  std::vector<double> g(static_cast<std::size_t>(w) * h, 0.0);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      if (inside[static_cast<std::size_t>(y) * width + x]) g[static_cast<std::size_t>(y + 1) * w + x + 1] = inf;
  const int n = std::max(w, h);
  std::vector<double> f(n), d(n), z(n + 1);
  std::vector<int> v(n);
  for (int x = 0; x < w; ++x) {
    f.resize(h);
    d.resize(h);
    for (int y = 0; y < h; ++y) f[y] = g[static_cast<std::size_t>(y) * w + x];
    detail::edt_1d(f, d, v, z);
    for (int y = 0; y < h; ++y) g[static_cast<std::size_t>(y) * w + x] = d[y];
  }
  for (int y = 0; y < h; ++y) {
    f.assign(g.begin() + static_cast<std::ptrdiff_t>(y) * w, g.begin() + static_cast<std::ptrdiff_t>(y + 1) * w);
    d.resize(w);
    detail::edt_1d(f, d, v, z);
    std::copy(d.begin(), d.end(), g.begin() + static_cast<std::ptrdiff_t>(y) * w);
  }
  std::vector<double> out(static_cast<std::size_t>(width) * height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) out[static_cast<std::size_t>(y) * width + x] = g[static_cast<std::size_t>(y + 1) * w + x + 1];
  return out;
}

/// Pixel of `component` farthest from its boundary, skipping `excluded` pixels; the first
/// in raster order wins ties. Empty when every pixel is excluded.
inline std::optional<std::size_t> pole_of_inaccessibility(const std::vector<std::size_t>& component, int width,
                                                          const std::vector<char>* excluded = nullptr) {
  if (component.empty()) return std::nullopt;
  int x0 = width, y0 = std::numeric_limits<int>::max(), x1 = -1, y1 = -1;
  for (std::size_t i : component) {
    const int x = static_cast<int>(i % width), y = static_cast<int>(i / width);
    x0 = std::min(x0, x);
    x1 = std::max(x1, x);
    y0 = std::min(y0, y);
    y1 = std::max(y1, y);
  }
  const int bw = x1 - x0 + 1, bh = y1 - y0 + 1;
  std::vector<char> inside(static_cast<std::size_t>(bw) * bh, 0);
  for (std::size_t i : component) {
    const int x = static_cast<int>(i % width) - x0, y = static_cast<int>(i / width) - y0;
    inside[static_cast<std::size_t>(y) * bw + x] = 1;
  }
  const std::vector<double> dist = squared_distance_transform(inside, bw, bh);
  std::optional<std::size_t> best;
  double best_d = -1.0;
  for (std::size_t i : component) {
    if (excluded && (*excluded)[i]) continue;
    const int x = static_cast<int>(i % width) - x0, y = static_cast<int>(i / width) - y0;
    const double d = dist[static_cast<std::size_t>(y) * bw + x];
    if (d > best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

/// One seed per 4-connected component of every class, at the component's pole of
/// inaccessibility. Classes ascend; components follow raster order of their first pixel.
inline SeedMap place_initial_seeds(const LabelMap& truth) {
  std::vector<int> classes(truth.data().begin(), truth.data().end());
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  if (classes.size() < 2) throw PreconditionError("ground truth needs at least two classes");
  SeedMap seeds;
  const int w = truth.width();
  for (int c : classes) {
    std::vector<char> mask(truth.pixel_count());
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = truth[i] == c;
    for (const auto& comp : connected_components(mask, w, truth.height())) {
      const std::size_t p = *pole_of_inaccessibility(comp, w);
      seeds.push_back({static_cast<int>(p % w), static_cast<int>(p / w), c});
    }
  }
  return seeds;
}

struct NextSeed {
  SeedMap seeds;
  std::optional<Seed> added;
  bool converged = false;
};

/// Adds one seed for the class with the lowest Dice (smaller id on ties) inside the
/// largest component of {truth = c, predicted != c}. Classes whose errors are all false
/// positives have no such region; the next-worst class is tried instead.
inline NextSeed place_next_seed(const LabelMap& truth, const LabelMap& predicted, const SeedMap& current) {
  detail::require_same_shape(truth, predicted);
  const int w = truth.width();
  NextSeed out{current, std::nullopt, false};
  const EvalReport report = evaluate(predicted, truth);

  std::vector<std::pair<double, int>> order;
  for (const auto& [cls, d] : report.dice) order.emplace_back(d, cls);
  std::sort(order.begin(), order.end());

  std::vector<char> seeded(truth.pixel_count(), 0);
  for (const Seed& s : current)
    if (truth.contains(s.x, s.y)) seeded[truth.index(s.x, s.y)] = 1;

  for (const auto& [d, cls] : order) {
    if (d >= 1.0) break;
    std::vector<char> mask(truth.pixel_count());
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = truth[i] == cls && predicted[i] != cls;
    auto comps = connected_components(mask, w, truth.height());
    std::stable_sort(comps.begin(), comps.end(), [](const auto& a, const auto& b) { return a.size() > b.size(); });
    for (const auto& comp : comps) {
      if (const auto p = pole_of_inaccessibility(comp, w, &seeded)) {
        const Seed s{static_cast<int>(*p % w), static_cast<int>(*p / w), cls};
        out.seeds.push_back(s);
        out.added = s;
        return out;
      }
    }
  }
  out.converged = true;
  return out;
}

}  // namespace rwnoise
