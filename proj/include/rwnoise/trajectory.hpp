#pragma once

// Incremental seed-placement runs, their summaries, and the Grady beta search.

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rwnoise/graph.hpp"
#include "rwnoise/metrics.hpp"
#include "rwnoise/parallel.hpp"
#include "rwnoise/seeding.hpp"

namespace rwnoise {

enum class Metric { arand, voi, error };

inline double metric_value(const EvalReport& r, Metric m) {
  switch (m) {
    case Metric::arand: return r.arand;
    case Metric::voi: return r.voi;
    case Metric::error: return 1.0 - r.accuracy;
  }
  return r.arand;
}

inline Metric parse_metric(const std::string& s) {
  if (s == "arand") return Metric::arand;
  if (s == "voi") return Metric::voi;
  if (s == "error") return Metric::error;
  throw ConfigError("unknown metric '" + s + "' (expected arand, voi or error)");
}

struct TrajectoryStep {
  int additional_seeds = 0;
  std::size_t seed_count = 0;
  EvalReport metrics;
};

struct SeedTrajectory {
  std::vector<TrajectoryStep> steps;
  SeedMap final_seeds;
  bool converged = false;

  /// Additional seeds needed before `metric` first drops to `threshold` or below.
  std::optional<int> first_reaching(Metric metric, double threshold) const {
    for (const auto& s : steps)
      if (metric_value(s.metrics, metric) <= threshold) return s.additional_seeds;
    return std::nullopt;
  }
};

/// Segments from the initial seeds, then alternately places the next seed and re-segments
/// until `max_additional` seeds were added or no misclassified pixel is left.
inline SeedTrajectory run_trajectory(const Image& image, const LabelMap& truth, const NoiseModelConfig& model,
                                     int max_additional, const SegmentOptions& opt = {},
                                     std::optional<SeedMap> initial = std::nullopt) {
  if (max_additional < 0) throw PreconditionError("max additional seeds must be nonnegative");
  if (image.width() != truth.width() || image.height() != truth.height())
    throw PreconditionError("image and ground truth differ in size");
  SeedTrajectory t;
  SeedMap seeds = initial ? *initial : place_initial_seeds(truth);
  for (int step = 0;; ++step) {
    const ProbabilityField f = segment(image, seeds, model, opt);
    t.steps.push_back({step, seeds.size(), evaluate(f.label_map, truth)});
    if (step == max_additional) break;
    NextSeed next = place_next_seed(truth, f.label_map, seeds);
    if (next.converged) {
      t.converged = true;
      break;
    }
    seeds = std::move(next.seeds);
  }
  t.final_seeds = std::move(seeds);
  return t;
}

inline constexpr const char* kTrajectoryCsvHeader = "additional_seeds,seed_count,voi,voi_raw,arand,accuracy,worst_dice";

inline std::string trajectory_csv(const SeedTrajectory& t) {
  std::ostringstream os;
  os << kTrajectoryCsvHeader << '\n' << std::setprecision(10);
  for (const auto& s : t.steps)
    os << s.additional_seeds << ',' << s.seed_count << ',' << s.metrics.voi << ',' << s.metrics.voi_raw << ','
       << s.metrics.arand << ',' << s.metrics.accuracy << ',' << s.metrics.worst_dice() << '\n';
  return os.str();
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json dice = nlohmann::json::object();
  for (const auto& [c, d] : r.dice) dice[std::to_string(c)] = d;
  return {{"voi", r.voi}, {"voi_raw", r.voi_raw}, {"arand", r.arand}, {"accuracy", r.accuracy}, {"dice", dice}};
}

inline nlohmann::json to_json(const SeedTrajectory& t) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : t.steps)
    steps.push_back({{"additional_seeds", s.additional_seeds}, {"seed_count", s.seed_count}, {"metrics", to_json(s.metrics)}});
  nlohmann::json seeds = nlohmann::json::array();
  for (const auto& s : t.final_seeds) seeds.push_back({{"x", s.x}, {"y", s.y}, {"label", s.label}});
  return {{"steps", steps}, {"converged", t.converged}, {"seeds", seeds}};
}

// ---------------------------------------------------------------------------------------
// Summaries across images

struct SeedCountSummaryRow {
  int additional_seeds = 0;
  double mean_voi = 0.0;
  double mean_arand = 0.0;
};

/// Mean metrics per additional-seed count. A trajectory that stopped early keeps its last
/// value for later counts.
inline std::vector<SeedCountSummaryRow> summarize_by_seed_count(const std::vector<SeedTrajectory>& runs) {
  std::vector<SeedCountSummaryRow> rows;
  std::size_t longest = 0;
  for (const auto& r : runs) longest = std::max(longest, r.steps.size());
  for (std::size_t s = 0; s < longest; ++s) {
    SeedCountSummaryRow row{static_cast<int>(s), 0.0, 0.0};
    std::size_t count = 0;
    for (const auto& r : runs) {
      if (r.steps.empty()) continue;
      const auto& step = r.steps[std::min(s, r.steps.size() - 1)];
      row.mean_voi += step.metrics.voi;
      row.mean_arand += step.metrics.arand;
      ++count;
    }
    if (count > 0) {
      row.mean_voi /= static_cast<double>(count);
      row.mean_arand /= static_cast<double>(count);
    }
    rows.push_back(row);
  }
  return rows;
}

struct ThresholdSummaryRow {
  Metric metric = Metric::arand;
  double threshold = 0.0;
  std::optional<double> median_seeds;  // over images that reached the threshold
  std::size_t reached = 0;
  std::size_t images = 0;
};

inline std::optional<double> median(std::vector<double> v) {
  if (v.empty()) return std::nullopt;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 == 1 ? v[m] : (v[m - 1] + v[m]) / 2.0;
}

inline std::vector<ThresholdSummaryRow> summarize_thresholds(const std::vector<SeedTrajectory>& runs, Metric metric,
                                                             const std::vector<double>& thresholds) {
  std::vector<ThresholdSummaryRow> rows;
  for (double th : thresholds) {
    std::vector<double> need;
    for (const auto& r : runs)
      if (const auto n = r.first_reaching(metric, th)) need.push_back(*n);
    rows.push_back({metric, th, median(need), need.size(), runs.size()});
  }
  return rows;
}

inline std::string metric_name(Metric m) {
  switch (m) {
    case Metric::arand: return "arand";
    case Metric::voi: return "voi";
    case Metric::error: return "error";
  }
  return "arand";
}

inline std::string seed_count_summary_csv(const std::vector<SeedCountSummaryRow>& rows) {
  std::ostringstream os;
  os << "additional_seeds,mean_voi,mean_arand\n" << std::setprecision(10);
  for (const auto& r : rows) os << r.additional_seeds << ',' << r.mean_voi << ',' << r.mean_arand << '\n';
  return os.str();
}

inline std::string threshold_summary_csv(const std::vector<ThresholdSummaryRow>& rows) {
  std::ostringstream os;
  os << "metric,threshold,median_additional_seeds,reached,images\n" << std::setprecision(10);
  for (const auto& r : rows) {
    os << metric_name(r.metric) << ',' << r.threshold << ',';
    if (r.median_seeds) os << *r.median_seeds;
    os << ',' << r.reached << ',' << r.images << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------------------
// Grady beta search

/// 10^0, 10^0.5, ..., 10^4.
inline std::vector<double> default_beta_grid() {
  std::vector<double> g;
  for (int i = 0; i <= 8; ++i) g.push_back(std::pow(10.0, 0.5 * i));
  return g;
}

struct LabeledImage {
  Image image;
  LabelMap truth;
  std::optional<SeedMap> seeds;  // initial seeds from the ground truth when empty
};

struct BetaSearchResult {
  std::vector<double> grid;
  std::vector<std::vector<double>> scores;  // [image][beta]
  std::vector<double> mean_scores;          // [beta]
  double dataset_beta = 0.0;
  std::vector<double> per_image_beta;
};

/// Scores every beta on every image with fixed seeds and returns the argmin of the mean
/// score together with each image's own argmin. Earlier grid points win ties.
inline BetaSearchResult grady_beta_search(const std::vector<LabeledImage>& dataset,
                                          std::vector<double> grid = default_beta_grid(), Metric metric = Metric::arand,
                                          const SegmentOptions& opt = {}) {
  if (dataset.empty()) throw PreconditionError("beta search needs at least one image");
  if (grid.empty()) throw PreconditionError("beta grid is empty");
  for (double b : grid) GradyConfig{b};
  BetaSearchResult r;
  r.grid = std::move(grid);
  const std::size_t nb = r.grid.size();
  r.scores.assign(dataset.size(), std::vector<double>(nb, 0.0));
  SegmentOptions inner = opt;
  inner.threads = 1;
  parallel_for(dataset.size() * nb, opt.threads, [&](std::size_t job) {
    const std::size_t i = job / nb, b = job % nb;
    const auto& item = dataset[i];
    const SeedMap seeds = item.seeds ? *item.seeds : place_initial_seeds(item.truth);
    const ProbabilityField f = segment(item.image, seeds, GradyModel{r.grid[b]}, inner);
    r.scores[i][b] = metric_value(evaluate(f.label_map, item.truth), metric);
  });
  auto argmin = [&](const std::vector<double>& v) {
    return static_cast<std::size_t>(std::min_element(v.begin(), v.end()) - v.begin());
  };
  r.mean_scores.assign(nb, 0.0);
  for (std::size_t b = 0; b < nb; ++b) {
    for (const auto& s : r.scores) r.mean_scores[b] += s[b];
    r.mean_scores[b] /= static_cast<double>(dataset.size());
  }
  r.dataset_beta = r.grid[argmin(r.mean_scores)];
  for (const auto& s : r.scores) r.per_image_beta.push_back(r.grid[argmin(s)]);
  return r;
}

}  // namespace rwnoise
