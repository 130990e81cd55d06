#pragma once

// Reference computations used only by the tests. Each one takes the slow, direct route
// (pair enumeration, elimination on a dense system, exhaustive search) and shares no
// code with the library path it checks.

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <vector>

#include "rwnoise/grid.hpp"

namespace oracle {

/// Adjusted Rand index by enumerating all pixel pairs.
inline double ari_by_pairs(const std::vector<int>& pred, const std::vector<int>& truth) {
  const std::size_t n = pred.size();
  long double same_both = 0, same_pred = 0, same_truth = 0, total = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool p = pred[i] == pred[j], t = truth[i] == truth[j];
      same_both += p && t;
      same_pred += p;
      same_truth += t;
      total += 1;
    }
  const long double expected = total > 0 ? same_pred * same_truth / total : 0;
  const long double max_index = (same_pred + same_truth) / 2;
  if (max_index - expected == 0) {
    // Identical partitions score 1, anything else 0.
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if ((pred[i] == pred[j]) != (truth[i] == truth[j])) return 0.0;
    return 1.0;
  }
  return static_cast<double>((same_both - expected) / (max_index - expected));
}

/// Variation of information in nats, straight from the contingency table.
inline double voi_nats(const std::vector<int>& pred, const std::vector<int>& truth) {
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> a, b;
  const double n = static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    joint[{pred[i], truth[i]}] += 1;
    a[pred[i]] += 1;
    b[truth[i]] += 1;
  }
  double v = 0.0;
  for (const auto& [key, c] : joint) {
    const double pxy = c / n, px = a[key.first] / n, py = b[key.second] / n;
    v -= pxy * (std::log(pxy / px) + std::log(pxy / py));
  }
  return v;
}

/// Solves A x = b for a dense system by Gaussian elimination with partial pivoting.
inline std::vector<double> solve_dense(std::vector<std::vector<double>> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    std::swap(a[c], a[piv]);
    std::swap(b[c], b[piv]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
      b[r] -= f * b[c];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= a[i][k] * x[k];
    x[i] = s / a[i][i];
  }
  return x;
}

/// Random walker probabilities of `label` on a 4-connected lattice with the given edge
/// weights (horizontal[y*(w-1)+x], vertical[y*w+x]), by a dense solve of L_U x = -B m.
struct SeedPoint {
  int x, y, label;
};
inline std::vector<double> random_walker_dense(int w, int h, const std::vector<double>& horizontal,
                                               const std::vector<double>& vertical,
                                               const std::vector<SeedPoint>& seeds, int label) {
  const int n = w * h;
  std::vector<std::vector<double>> lap(n, std::vector<double>(n, 0.0));
  auto add = [&](int i, int j, double wt) {
    lap[i][i] += wt;
    lap[j][j] += wt;
    lap[i][j] -= wt;
    lap[j][i] -= wt;
  };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x + 1 < w; ++x) add(y * w + x, y * w + x + 1, horizontal[y * (w - 1) + x]);
  for (int y = 0; y + 1 < h; ++y)
    for (int x = 0; x < w; ++x) add(y * w + x, (y + 1) * w + x, vertical[y * w + x]);
  std::vector<int> fixed(n, -1);
  for (const auto& s : seeds) fixed[s.y * w + s.x] = s.label == label ? 1 : 0;
  std::vector<int> unknown;
  for (int i = 0; i < n; ++i)
    if (fixed[i] < 0) unknown.push_back(i);
  std::vector<std::vector<double>> a(unknown.size(), std::vector<double>(unknown.size()));
  std::vector<double> rhs(unknown.size(), 0.0);
  for (std::size_t r = 0; r < unknown.size(); ++r) {
    for (std::size_t c = 0; c < unknown.size(); ++c) a[r][c] = lap[unknown[r]][unknown[c]];
    for (int j = 0; j < n; ++j)
      if (fixed[j] >= 0) rhs[r] -= lap[unknown[r]][j] * fixed[j];
  }
  const auto sol = unknown.empty() ? std::vector<double>{} : solve_dense(a, rhs);
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = fixed[i] >= 0 ? fixed[i] : 0.0;
  for (std::size_t r = 0; r < unknown.size(); ++r) out[unknown[r]] = sol[r];
  return out;
}

/// Biased mean and variance.
inline std::pair<double, double> mean_var(const std::vector<double>& v) {
  double m = 0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return {m, s / static_cast<double>(v.size())};
}

/// log p(x | window) maximized over every in-bounds (2k+1)^2 window containing (px, py),
/// for the scalar variance-aware Gaussian (variance floored at `floor`) and for Poisson.
enum class Likelihood { gaussian_var, poisson };
inline double best_window_log_likelihood(const rwnoise::Image& img, int px, int py, int k, Likelihood kind,
                                         double floor = 0.0) {
  const int side = 2 * k + 1;
  double best = -std::numeric_limits<double>::infinity();
  for (int oy = py - side + 1; oy <= py; ++oy)
    for (int ox = px - side + 1; ox <= px; ++ox) {
      if (ox < 0 || oy < 0 || ox + side > img.width() || oy + side > img.height()) continue;
      std::vector<double> v;
      for (int y = oy; y < oy + side; ++y)
        for (int x = ox; x < ox + side; ++x) v.push_back(img.at(x, y));
      const double value = img.at(px, py);
      double ll;
      if (kind == Likelihood::gaussian_var) {
        auto [m, var] = mean_var(v);
        var = std::max(var, floor);
        if (var <= 0) {
          ll = value == m ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
        } else {
          ll = -0.5 * std::log(2 * M_PI * var) - (value - m) * (value - m) / (2 * var);
        }
      } else {
        double lambda = 0;
        for (double c : v) lambda += std::round(c);
        lambda /= static_cast<double>(v.size());
        const double c = std::round(value);
        if (lambda <= 0)
          ll = c == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
        else
          ll = c * std::log(lambda) - lambda - std::lgamma(c + 1);
      }
      best = std::max(best, ll);
    }
  return best;
}

}  // namespace oracle
