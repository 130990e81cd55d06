#pragma once

// Partition comparison metrics: variation of information, adapted Rand error, accuracy
// and per-class Dice.

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "rwnoise/errors.hpp"
#include "rwnoise/grid.hpp"

namespace rwnoise {

/// Joint and marginal label counts of two maps of equal size.
struct Contingency {
  std::map<std::pair<int, int>, long long> joint;  // (pred, truth) -> count
  std::map<int, long long> pred;
  std::map<int, long long> truth;
  long long n = 0;

  Contingency(std::span<const int> p, std::span<const int> t) {
    if (p.size() != t.size()) throw PreconditionError("label maps differ in size");
    for (std::size_t i = 0; i < p.size(); ++i) {
      ++joint[{p[i], t[i]}];
      ++pred[p[i]];
      ++truth[t[i]];
    }
    n = static_cast<long long>(p.size());
  }

  /// True when both maps induce the same partition of the pixels.
  bool same_partition() const { return joint.size() == pred.size() && joint.size() == truth.size(); }
};

namespace detail {

inline void require_same_shape(const LabelMap& a, const LabelMap& b) {
  if (a.width() != b.width() || a.height() != b.height() || a.channels() != 1 || b.channels() != 1)
    throw PreconditionError("label maps differ in shape");
}

// Sum of -(c/n) ln(c/n) with counts sorted first, so the result depends only on the
// multiset of counts and is bit-identical under label renaming.
template <class Map>
double entropy(const Map& counts, long long n) {
  std::vector<long long> c;
  c.reserve(counts.size());
  for (const auto& kv : counts) c.push_back(kv.second);
  std::sort(c.begin(), c.end());
  double h = 0.0;
  for (long long v : c) {
    const double p = static_cast<double>(v) / static_cast<double>(n);
    h -= p * std::log(p);
  }
  return h;
}

inline __int128 pairs(long long c) { return static_cast<__int128>(c) * (c - 1) / 2; }

}  // namespace detail

/// H(pred|truth) + H(truth|pred) in nats.
inline double voi_unnormalized(std::span<const int> pred, std::span<const int> truth) {
  const Contingency c(pred, truth);
  if (c.n == 0) return 0.0;
  const double v = 2.0 * detail::entropy(c.joint, c.n) - detail::entropy(c.pred, c.n) - detail::entropy(c.truth, c.n);
  return std::max(0.0, v);
}

/// Variation of information divided by ln N, in [0,1]; 0 when N = 1.
inline double voi(std::span<const int> pred, std::span<const int> truth) {
  if (pred.size() <= 1) {
    if (pred.size() != truth.size()) throw PreconditionError("label maps differ in size");
    return 0.0;
  }
  return std::clamp(voi_unnormalized(pred, truth) / std::log(static_cast<double>(pred.size())), 0.0, 1.0);
}

/// Adjusted Rand index from pair counts. When the chance-corrected denominator vanishes
/// the value is 1 for identical partitions and 0 otherwise.
inline double adjusted_rand_index(std::span<const int> pred, std::span<const int> truth) {
  const Contingency c(pred, truth);
  __int128 index = 0, a = 0, b = 0;
  for (const auto& kv : c.joint) index += detail::pairs(kv.second);
  for (const auto& kv : c.pred) a += detail::pairs(kv.second);
  for (const auto& kv : c.truth) b += detail::pairs(kv.second);
  const __int128 total = detail::pairs(c.n);
  // ARI = (index - a b / total) / ((a + b) / 2 - a b / total), scaled by 2 total.
  const __int128 num = 2 * (index * total - a * b);
  const __int128 den = (a + b) * total - 2 * a * b;
  if (den == 0 || total == 0) return c.same_partition() ? 1.0 : 0.0;
  return static_cast<double>(static_cast<long double>(num) / static_cast<long double>(den));
}

/// 1 - ARI; 0 for identical partitions, above 1 for worse-than-chance agreement.
inline double arand(std::span<const int> pred, std::span<const int> truth) {
  return 1.0 - adjusted_rand_index(pred, truth);
}

inline double accuracy(std::span<const int> pred, std::span<const int> truth) {
  if (pred.size() != truth.size()) throw PreconditionError("label maps differ in size");
  if (pred.empty()) return 1.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == truth[i];
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

/// Dice of one class; 1 when the class appears in neither map.
inline double dice(std::span<const int> pred, std::span<const int> truth, int cls) {
  if (pred.size() != truth.size()) throw PreconditionError("label maps differ in size");
  long long both = 0, np = 0, nt = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] == cls, t = truth[i] == cls;
    both += p && t;
    np += p;
    nt += t;
  }
  if (np + nt == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(np + nt);
}

struct EvalReport {
  double voi = 0.0;
  double voi_raw = 0.0;
  double arand = 0.0;
  double accuracy = 0.0;
  std::map<int, double> dice;  // per truth/predicted class

  double worst_dice() const {
    double w = 1.0;
    for (const auto& kv : dice) w = std::min(w, kv.second);
    return w;
  }
};

inline EvalReport evaluate(const LabelMap& pred, const LabelMap& truth) {
  detail::require_same_shape(pred, truth);
  const auto p = pred.data();
  const auto t = truth.data();
  EvalReport r;
  r.voi = voi(p, t);
  r.voi_raw = voi_unnormalized(p, t);
  r.arand = arand(p, t);
  r.accuracy = accuracy(p, t);
  std::vector<int> classes(t.begin(), t.end());
  classes.insert(classes.end(), p.begin(), p.end());
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  for (int c : classes) r.dice[c] = dice(p, t, c);
  return r;
}

}  // namespace rwnoise
