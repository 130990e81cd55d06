#pragma once

// Two-class spiral ground truth, the three noise generators, and the accuracy experiment.

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "rwnoise/errors.hpp"
#include "rwnoise/graph.hpp"
#include "rwnoise/metrics.hpp"
#include "rwnoise/parallel.hpp"
#include "rwnoise/rng.hpp"
#include "rwnoise/seeding.hpp"
#include "rwnoise/trajectory.hpp"

namespace rwnoise {

enum class SpiralVariant { scalar, vector_flow };

/// Two interleaved arms around the image center. The radius is the Chebyshev distance to
/// the center so arms follow the square boundary and reach the corners without breaking.
struct SpiralSpec {
  int size = 64;
  double turns = 2.5;
  SpiralVariant variant = SpiralVariant::scalar;
  double low = 0.0;   // class 0 intensity (scalar variant)
  double high = 1.0;  // class 1 intensity

  /// Radial width of one arm in pixels.
  double arm_width() const { return size / (4.0 * turns); }
};

struct Spiral {
  LabelMap truth;
  Image clean;
  SeedMap center_seeds;  // one per class at the start of its arm
};

namespace detail {

inline double spiral_phase(const SpiralSpec& spec, double dx, double dy) {
  const double two_pi = 2.0 * std::numbers::pi;
  const double pitch = spec.size / (2.0 * spec.turns);
  double theta = std::atan2(dy, dx);
  if (theta < 0) theta += two_pi;
  const double r = std::max(std::abs(dx), std::abs(dy));
  double phi = std::fmod(theta - two_pi * r / pitch, two_pi);
  if (phi < 0) phi += two_pi;
  return phi;
}

// Flips every pixel that no 3x3 window of its own class covers, repeating until none is
// left. Both classes flip in the same pass, so the map keeps its 180 degree antisymmetry
// and the two classes stay the same size. Without this the arms end in tapering slivers
// where they leave the image.
inline void remove_thin_parts(LabelMap& truth) {
  const int w = truth.width(), h = truth.height();
  for (;;) {
    std::vector<char> covered(truth.pixel_count(), 0);
    for (int oy = 0; oy + 3 <= h; ++oy)
      for (int ox = 0; ox + 3 <= w; ++ox) {
        const int cls = truth.at(ox, oy);
        bool uniform = true;
        for (int y = oy; y < oy + 3 && uniform; ++y)
          for (int x = ox; x < ox + 3; ++x) uniform = uniform && truth.at(x, y) == cls;
        if (!uniform) continue;
        for (int y = oy; y < oy + 3; ++y)
          for (int x = ox; x < ox + 3; ++x) covered[truth.index(x, y)] = 1;
      }
    bool changed = false;
    for (std::size_t i = 0; i < covered.size(); ++i)
      if (!covered[i]) {
        truth[i] = 1 - truth[i];
        changed = true;
      }
    if (!changed) return;
  }
}

}  // namespace detail

inline Spiral make_spiral(const SpiralSpec& spec) {
  if (spec.size < 32) throw PreconditionError("spiral size must be at least 32");
  if (!(spec.turns > 0.0)) throw PreconditionError("spiral needs a positive number of turns");
  if (spec.arm_width() < 3.0)
    throw PreconditionError("spiral arm width " + std::to_string(spec.arm_width()) +
                            " px is below 3 px; use fewer turns or a larger size");
  const int n = spec.size;
  const double c = (n - 1) / 2.0;
  const double pitch = n / (2.0 * spec.turns);
  Spiral s;
  s.truth = LabelMap(n, n);
  const int channels = spec.variant == SpiralVariant::scalar ? 1 : 2;
  s.clean = Image(n, n, channels);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) s.truth.at(x, y) = detail::spiral_phase(spec, x - c, y - c) < std::numbers::pi ? 0 : 1;
  detail::remove_thin_parts(s.truth);

  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const int cls = s.truth.at(x, y);
      if (channels == 1) {
        s.clean.at(x, y) = cls == 0 ? spec.low : spec.high;
      } else {
        // Tangent of r = pitch * theta / 2pi: outward along the arm for class 1, inward for 0.
        const double dx = x - c, dy = y - c;
        const double r = std::hypot(dx, dy), theta = std::atan2(dy, dx);
        const double dr = pitch / (2.0 * std::numbers::pi);
        const double tx = dr * std::cos(theta) - r * std::sin(theta);
        const double ty = dr * std::sin(theta) + r * std::cos(theta);
        const double norm = std::hypot(tx, ty) * (cls == 1 ? 1.0 : -1.0);
        s.clean.at(x, y, 0) = tx / norm;
        s.clean.at(x, y, 1) = ty / norm;
      }
    }

  for (int cls = 0; cls < 2; ++cls) {
    std::vector<char> mask(s.truth.pixel_count());
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = s.truth[i] == cls;
    if (connected_components(mask, n, n).size() != 1)
      throw PreconditionError("spiral arm is not connected; use fewer turns or a larger size");
    // Deepest pixel of the arm within one pitch of the center; nearer pixels win ties.
    const std::vector<double> depth = squared_distance_transform(mask, n, n);
    std::optional<std::size_t> best;
    double best_depth = -1.0, best_d = 0.0;
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (!mask[i]) continue;
      const double d = std::hypot(double(i % n) - c, double(i / n) - c);
      if (d > pitch) continue;
      if (!best || depth[i] > best_depth || (depth[i] == best_depth && d < best_d)) {
        best = i;
        best_depth = depth[i];
        best_d = d;
      }
    }
    if (!best) throw PreconditionError("spiral arm does not reach the center");
    s.center_seeds.push_back({static_cast<int>(*best % n), static_cast<int>(*best / n), cls});
  }
  return s;
}

// ---------------------------------------------------------------------------------------
// Noise

enum class NoiseKind { poisson, loupas, gauss2d };

inline std::string noise_name(NoiseKind k) {
  switch (k) {
    case NoiseKind::poisson: return "poisson";
    case NoiseKind::loupas: return "loupas";
    case NoiseKind::gauss2d: return "gauss2d";
  }
  return "unknown";
}

/// Poisson uses (level0, level1) as the two class rates; Loupas uses them as the two
/// class intensities with spread sigma; Gauss2D adds N(0, sigma^2) to a unit vector field.
struct NoiseSpec {
  NoiseKind kind = NoiseKind::poisson;
  double level0 = 8.0;
  double level1 = 16.0;
  double sigma = 0.0;
  std::uint64_t seed = 1;
  int realizations = 1;
  bool loupas_appendix = false;  // variance sqrt(mu) * sigma^2 instead of mu * sigma^2

  void validate() const {
    if (realizations < 1) throw ConfigError("realizations must be at least 1");
    if (kind != NoiseKind::gauss2d && !(level0 < level1)) throw ConfigError("class levels must satisfy level0 < level1");
    if (kind != NoiseKind::poisson && !(sigma >= 0.0)) throw ConfigError("sigma must be nonnegative");
  }

  std::string level_label() const {
    std::ostringstream os;
    if (kind == NoiseKind::poisson)
      os << level0 << ':' << level1;
    else
      os << sigma;
    return os.str();
  }
};

inline Image apply_noise(const Image& clean, const NoiseSpec& spec, int realization) {
  Image out = clean;
  const std::size_t n = clean.pixel_count();
  const int m = clean.channels();
  switch (spec.kind) {
    case NoiseKind::poisson:
      if (m != 1) throw PreconditionError("Poisson noise needs a scalar image");
      for (std::size_t i = 0; i < n; ++i) {
        const double mu = clean[i];
        if (!(mu >= 0.0)) throw PreconditionError("Poisson noise needs nonnegative clean values");
        CounterRng rng(spec.seed, static_cast<std::uint64_t>(realization), i);
        out[i] = mu == 0.0 ? 0.0 : static_cast<double>(std::poisson_distribution<long long>(mu)(rng));
      }
      break;
    case NoiseKind::loupas:
      if (m != 1) throw PreconditionError("Loupas noise needs a scalar image");
      for (std::size_t i = 0; i < n; ++i) {
        const double mu = clean[i];
        if (!(mu >= 0.0)) throw PreconditionError("Loupas noise needs nonnegative clean values");
        CounterRng rng(spec.seed, static_cast<std::uint64_t>(realization), i);
        const double scale = spec.loupas_appendix ? std::pow(mu, 0.25) : std::sqrt(mu);
        out[i] = mu + scale * spec.sigma * std::normal_distribution<double>(0.0, 1.0)(rng);
      }
      break;
    case NoiseKind::gauss2d:
      if (m != 2) throw PreconditionError("Gauss2D noise needs a 2-channel image");
      for (std::size_t i = 0; i < n; ++i) {
        CounterRng rng(spec.seed, static_cast<std::uint64_t>(realization), i);
        std::normal_distribution<double> normal(0.0, 1.0);
        for (int c = 0; c < m; ++c) out.storage()[i * m + c] += spec.sigma * normal(rng);
      }
      break;
  }
  return out;
}

// ---------------------------------------------------------------------------------------
// Experiment

struct ExperimentModel {
  std::string name;
  NoiseModelConfig config;
  bool auto_beta = false;  // Grady with the beta that is best on average over the realizations
};

/// "poisson", "const-gauss", "var-gauss", "grady:<beta>" or "grady:auto".
inline ExperimentModel parse_experiment_model(const std::string& token) {
  if (token.rfind("grady", 0) == 0) {
    const auto colon = token.find(':');
    if (colon == std::string::npos) throw ConfigError("grady needs a beta: grady:<beta> or grady:auto");
    const std::string arg = token.substr(colon + 1);
    if (arg == "auto") return {token, GradyModel{}, true};
    std::size_t used = 0;
    double beta = 0.0;
    try {
      beta = std::stod(arg, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != arg.size() || used == 0) throw ConfigError("invalid grady beta '" + arg + "'");
    GradyConfig{beta};
    return {token, GradyModel{beta}, false};
  }
  return {token, make_model(parse_model_kind(token)), false};
}

struct AccuracyRow {
  std::string model;
  std::string noise_kind;
  std::string noise_level;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  int realizations = 0;
  std::optional<double> beta;  // chosen beta for grady:auto
  std::vector<double> accuracies;
};

struct ExperimentOptions {
  int k = 1;
  int threads = 1;
};

inline Spiral spiral_for_noise(SpiralSpec spec, const NoiseSpec& noise) {
  if (noise.kind == NoiseKind::gauss2d) {
    spec.variant = SpiralVariant::vector_flow;
  } else {
    spec.variant = SpiralVariant::scalar;
    spec.low = noise.level0;
    spec.high = noise.level1;
  }
  return make_spiral(spec);
}

inline std::vector<AccuracyRow> run_spiral_experiment(const SpiralSpec& spiral_spec, const NoiseSpec& noise,
                                                      const std::vector<ExperimentModel>& models,
                                                      const ExperimentOptions& opt = {}) {
  noise.validate();
  const Spiral spiral = spiral_for_noise(spiral_spec, noise);
  std::vector<Image> noisy(static_cast<std::size_t>(noise.realizations));
  parallel_for(noisy.size(), opt.threads,
               [&](std::size_t r) { noisy[r] = apply_noise(spiral.clean, noise, static_cast<int>(r)); });

  SegmentOptions seg;
  seg.k = opt.k;
  seg.threads = 1;

  std::vector<AccuracyRow> rows;
  for (const auto& model : models) {
    AccuracyRow row{model.name, noise_name(noise.kind), noise.level_label(), 0.0, 0.0, noise.realizations, {}, {}};
    NoiseModelConfig cfg = model.config;
    if (model.auto_beta) {
      std::vector<LabeledImage> data;
      for (const auto& img : noisy) data.push_back({img, spiral.truth, spiral.center_seeds});
      SegmentOptions search = seg;
      search.threads = opt.threads;
      const auto found = grady_beta_search(data, default_beta_grid(), Metric::error, search);
      cfg = GradyModel{found.dataset_beta};
      row.beta = found.dataset_beta;
    } else if (const auto* g = std::get_if<GradyModel>(&cfg)) {
      row.beta = g->beta;
    }
    row.accuracies.assign(noisy.size(), 0.0);
    parallel_for(noisy.size(), opt.threads, [&](std::size_t r) {
      const ProbabilityField f = segment(noisy[r], spiral.center_seeds, cfg, seg);
      row.accuracies[r] = accuracy(f.label_map.data(), spiral.truth.data());
    });
    double sum = 0.0;
    for (double a : row.accuracies) sum += a;
    row.mean_accuracy = sum / static_cast<double>(row.accuracies.size());
    double ss = 0.0;
    for (double a : row.accuracies) ss += (a - row.mean_accuracy) * (a - row.mean_accuracy);
    row.std_accuracy = row.accuracies.size() > 1 ? std::sqrt(ss / static_cast<double>(row.accuracies.size() - 1)) : 0.0;
    rows.push_back(std::move(row));
  }
  return rows;
}

inline constexpr const char* kAccuracyCsvHeader = "model,noise_kind,noise_level,mean_accuracy,std_accuracy,realizations";

inline std::string accuracy_csv(const std::vector<AccuracyRow>& rows) {
  std::ostringstream os;
  os << kAccuracyCsvHeader << '\n' << std::setprecision(10);
  for (const auto& r : rows)
    os << r.model << ',' << r.noise_kind << ',' << r.noise_level << ',' << r.mean_accuracy << ',' << r.std_accuracy
       << ',' << r.realizations << '\n';
  return os.str();
}

}  // namespace rwnoise
