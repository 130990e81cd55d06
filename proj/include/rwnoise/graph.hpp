#pragma once

// 4-connected lattice graph, Laplacian assembly and the per-label Dirichlet solve.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "rwnoise/errors.hpp"
#include "rwnoise/grid.hpp"
#include "rwnoise/linear_solver.hpp"
#include "rwnoise/neighborhood.hpp"
#include "rwnoise/noise_models.hpp"
#include "rwnoise/parallel.hpp"

namespace rwnoise {

// ---------------------------------------------------------------------------------------
// Model configuration

struct PoissonModel {};
struct GaussianConstModel {
  std::optional<Eigen::MatrixXd> covariance;  // estimated from the image when empty
};
struct GaussianVarModel {};
struct GradyModel {
  double beta = 90.0;
};

using NoiseModelConfig = std::variant<PoissonModel, GaussianConstModel, GaussianVarModel, GradyModel>;

inline ModelKind kind_of(const NoiseModelConfig& cfg) {
  switch (cfg.index()) {
    case 0: return ModelKind::poisson;
    case 1: return ModelKind::gaussian_const;
    case 2: return ModelKind::gaussian_var;
    default: return ModelKind::grady;
  }
}

inline std::string model_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::poisson: return "poisson";
    case ModelKind::gaussian_const: return "const-gauss";
    case ModelKind::gaussian_var: return "var-gauss";
    case ModelKind::grady: return "grady";
  }
  return "unknown";
}

inline ModelKind parse_model_kind(const std::string& name) {
  if (name == "poisson") return ModelKind::poisson;
  if (name == "const-gauss") return ModelKind::gaussian_const;
  if (name == "var-gauss") return ModelKind::gaussian_var;
  if (name == "grady") return ModelKind::grady;
  throw ConfigError("unknown model '" + name + "' (expected poisson, const-gauss, var-gauss or grady)");
}

inline NoiseModelConfig make_model(ModelKind kind, std::optional<double> beta = std::nullopt) {
  switch (kind) {
    case ModelKind::poisson: return PoissonModel{};
    case ModelKind::gaussian_const: return GaussianConstModel{};
    case ModelKind::gaussian_var: return GaussianVarModel{};
    case ModelKind::grady:
      if (!beta) throw ConfigError("the grady model needs a beta");
      GradyConfig{*beta};
      return GradyModel{*beta};
  }
  throw ConfigError("unknown model");
}

// ---------------------------------------------------------------------------------------
// Lattice graph

/// One weight per undirected 4-neighbor edge. horizontal[y*(W-1)+x] joins (x,y)-(x+1,y);
/// vertical[y*W+x] joins (x,y)-(x,y+1).
struct LatticeGraph {
  int width = 0;
  int height = 0;
  std::vector<double> horizontal;
  std::vector<double> vertical;

  LatticeGraph() = default;
  LatticeGraph(int w, int h, double weight = 1.0)
      : width(w),
        height(h),
        horizontal(static_cast<std::size_t>(std::max(0, w - 1)) * static_cast<std::size_t>(h), weight),
        vertical(static_cast<std::size_t>(w) * static_cast<std::size_t>(std::max(0, h - 1)), weight) {
    if (w < 1 || h < 1) throw PreconditionError("graph needs at least one node");
  }

  std::size_t node_count() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
  std::size_t edge_count() const { return horizontal.size() + vertical.size(); }
  double& right(int x, int y) { return horizontal[static_cast<std::size_t>(y) * (width - 1) + x]; }
  double right(int x, int y) const { return horizontal[static_cast<std::size_t>(y) * (width - 1) + x]; }
  double& down(int x, int y) { return vertical[static_cast<std::size_t>(y) * width + x]; }
  double down(int x, int y) const { return vertical[static_cast<std::size_t>(y) * width + x]; }

  /// f(neighbor index, weight) for each 4-neighbor of node i.
  template <class F>
  void for_each_neighbor(std::size_t i, F&& f) const {
    const int x = static_cast<int>(i % width), y = static_cast<int>(i / width);
    if (y > 0) f(i - width, down(x, y - 1));
    if (x > 0) f(i - 1, right(x - 1, y));
    if (x + 1 < width) f(i + 1, right(x, y));
    if (y + 1 < height) f(i + width, down(x, y));
  }
};

struct BuildOptions {
  int k = 1;
  int threads = 1;
  double weight_floor = 1e-6;
};

namespace detail {

inline std::pair<double, double> value_range(const Image& image) {
  if (image.data().empty()) return {0.0, 0.0};
  const auto [lo, hi] = std::minmax_element(image.data().begin(), image.data().end());
  return {*lo, *hi};
}

}  // namespace detail

/// Rescales a scalar image to [0,1], or divides a vector image by its largest pixel norm.
inline Image normalize_for_grady(const Image& image) {
  Image out = image;
  if (image.channels() == 1) {
    const auto [lo, hi] = detail::value_range(image);
    const double span = hi - lo;
    for (double& v : out.storage()) v = span > 0.0 ? (v - lo) / span : 0.0;
    return out;
  }
  double max_norm = 0.0;
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) {
      double s = 0.0;
      for (double v : image.pixel(x, y)) s += v * v;
      max_norm = std::max(max_norm, std::sqrt(s));
    }
  if (max_norm > 0.0)
    for (double& v : out.storage()) v /= max_norm;
  return out;
}

/// Neighborhood model parameters derived from the image (global covariance, variance floor).
inline NeighborhoodModel neighborhood_model_for(const Image& image, const NoiseModelConfig& cfg) {
  NeighborhoodModel nm;
  nm.kind = kind_of(cfg);
  switch (nm.kind) {
    case ModelKind::poisson:
    case ModelKind::gaussian_var:
      if (image.channels() != 1) throw ConfigError(model_name(nm.kind) + " model needs a scalar image");
      if (nm.kind == ModelKind::gaussian_var) {
        const auto [lo, hi] = detail::value_range(image);
        nm.variance_floor = variance_floor_for_range(hi - lo);
      }
      break;
    case ModelKind::gaussian_const: {
      const auto& override_cov = std::get<GaussianConstModel>(cfg).covariance;
      if (override_cov && override_cov->rows() != image.channels())
        throw ConfigError("covariance size does not match the image channel count");
      nm.covariance.emplace(estimate_global_covariance(image, override_cov).covariance);
      break;
    }
    case ModelKind::grady:
      break;
  }
  return nm;
}

/// Edge weight between adjacent pixels from their selected windows.
inline double neighborhood_edge_weight(const Image& image, const NeighborhoodModel& nm, Pixel p, Pixel q,
                                       Pixel origin_p, Pixel origin_q, int side) {
  const ResolvedPair pair =
      resolve_overlap(window_samples(image, origin_p, side, p), window_samples(image, origin_q, side, q));
  switch (nm.kind) {
    case ModelKind::poisson: return weight_poisson(poisson_stats(pair.x), poisson_stats(pair.y));
    case ModelKind::gaussian_const: return weight_gaussian_const(pair.x, pair.y, *nm.covariance);
    case ModelKind::gaussian_var: return weight_gaussian_var(pair.x, pair.y, GaussianVarConfig{nm.variance_floor});
    case ModelKind::grady: break;
  }
  throw ConfigError("grady weights do not use neighborhoods");
}

inline LatticeGraph build_graph(const Image& image, const NoiseModelConfig& cfg, const BuildOptions& opt = {}) {
  require_window_fits(image.width(), image.height(), opt.k);
  if (!(opt.weight_floor > 0.0 && opt.weight_floor <= 1.0)) throw ConfigError("weight floor must lie in (0, 1]");
  LatticeGraph g(image.width(), image.height());
  const int w = image.width(), h = image.height();
  auto clamp = [&](double v) { return std::clamp(std::isnan(v) ? 0.0 : v, opt.weight_floor, 1.0); };

  if (const auto* grady = std::get_if<GradyModel>(&cfg)) {
    const GradyConfig gc(grady->beta);
    const Image n = normalize_for_grady(image);
    parallel_for(static_cast<std::size_t>(h), opt.threads, [&](std::size_t row) {
      const int y = static_cast<int>(row);
      for (int x = 0; x < w; ++x) {
        if (x + 1 < w) g.right(x, y) = clamp(weight_grady(n.pixel(x, y), n.pixel(x + 1, y), gc));
        if (y + 1 < h) g.down(x, y) = clamp(weight_grady(n.pixel(x, y), n.pixel(x, y + 1), gc));
      }
    });
    return g;
  }

  const NeighborhoodModel nm = neighborhood_model_for(image, cfg);
  const int side = 2 * opt.k + 1;
  std::vector<Pixel> origin(g.node_count());
  parallel_for(origin.size(), opt.threads, [&](std::size_t i) {
    const Pixel p = image.pixel_at(i);
    origin[i] = select_window(image, p, opt.k, nm);
  });
  parallel_for(static_cast<std::size_t>(h), opt.threads, [&](std::size_t row) {
    const int y = static_cast<int>(row);
    for (int x = 0; x < w; ++x) {
      const std::size_t i = image.index(x, y);
      if (x + 1 < w)
        g.right(x, y) = clamp(neighborhood_edge_weight(image, nm, {x, y}, {x + 1, y}, origin[i], origin[i + 1], side));
      if (y + 1 < h)
        g.down(x, y) =
            clamp(neighborhood_edge_weight(image, nm, {x, y}, {x, y + 1}, origin[i], origin[i + w], side));
    }
  });
  return g;
}

// ---------------------------------------------------------------------------------------
// Dirichlet problem

struct Seed {
  int x = 0;
  int y = 0;
  int label = 0;
  friend bool operator==(const Seed&, const Seed&) = default;
};

using SeedMap = std::vector<Seed>;

struct ProbabilityField {
  int width = 0;
  int height = 0;
  std::vector<int> labels;                         // ascending
  std::vector<std::vector<double>> probabilities;  // [label slot][raster index]
  LabelMap label_map;
  double max_sum_deviation = 0.0;    // max |Σ_l p_l - 1| before renormalization
  double max_bound_violation = 0.0;  // how far raw values left [0,1] before clamping
  SolverKind solver = SolverKind::automatic;
  long iterations = 0;
  double residual = 0.0;

  /// Slot of `label` in `labels`, or -1.
  int slot(int label) const {
    const auto it = std::lower_bound(labels.begin(), labels.end(), label);
    return it != labels.end() && *it == label ? static_cast<int>(it - labels.begin()) : -1;
  }
};

/// Sorted distinct labels. Throws on out-of-bounds seeds, negative labels, a pixel
/// seeded with two labels, or fewer than two labels.
inline std::vector<int> validate_seeds(int width, int height, const SeedMap& seeds) {
  std::map<std::pair<int, int>, int> seen;
  std::vector<int> labels;
  for (const Seed& s : seeds) {
    if (s.x < 0 || s.y < 0 || s.x >= width || s.y >= height)
      throw PreconditionError("seed (" + std::to_string(s.x) + ", " + std::to_string(s.y) + ") is outside the image");
    if (s.label < 0) throw PreconditionError("seed labels must be nonnegative");
    const auto [it, fresh] = seen.emplace(std::pair{s.y, s.x}, s.label);
    if (!fresh && it->second != s.label)
      throw PreconditionError("pixel (" + std::to_string(s.x) + ", " + std::to_string(s.y) +
                              ") is seeded with two different labels");
    labels.push_back(s.label);
  }
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  if (labels.size() < 2) throw PreconditionError("segmentation needs seeds for at least two labels");
  return labels;
}

inline ProbabilityField solve_dirichlet(const LatticeGraph& g, const SeedMap& seeds, const SolverOptions& opt = {}) {
  ProbabilityField f;
  f.width = g.width;
  f.height = g.height;
  f.labels = validate_seeds(g.width, g.height, seeds);
  const std::size_t n = g.node_count();
  const std::size_t k = f.labels.size();

  std::vector<int> seed_slot(n, -1);
  for (const Seed& s : seeds) seed_slot[static_cast<std::size_t>(s.y) * g.width + s.x] = f.slot(s.label);
  std::vector<int> unknown(n, -1);
  int u = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (seed_slot[i] < 0) unknown[i] = u++;

  f.probabilities.assign(k, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    if (seed_slot[i] >= 0) f.probabilities[static_cast<std::size_t>(seed_slot[i])][i] = 1.0;

  if (u > 0) {
    CsrMatrix a;
    a.n = u;
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(u, static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < n; ++i) {
      if (unknown[i] < 0) continue;
      const int row = unknown[i];
      double degree = 0.0;
      std::vector<std::pair<int, double>> entries;
      g.for_each_neighbor(i, [&](std::size_t j, double w) {
        degree += w;
        if (unknown[j] >= 0)
          entries.emplace_back(unknown[j], -w);
        else
          rhs(row, seed_slot[j]) += w;
      });
      entries.emplace_back(row, degree);
      std::sort(entries.begin(), entries.end());
      for (const auto& [c, v] : entries) {
        a.cols.push_back(c);
        a.vals.push_back(v);
      }
      a.row_ptr.push_back(static_cast<int>(a.cols.size()));
    }

    Eigen::MatrixXd sol(u, static_cast<Eigen::Index>(k));
    f.solver = resolve_solver(opt, u);
    switch (f.solver) {
      case SolverKind::dense_direct: sol = solve_dense_direct(a, rhs); break;
      case SolverKind::sparse_direct: sol = solve_sparse_direct(a, rhs); break;
      default: {
        std::vector<CgReport> reports(k);
        parallel_for(k, opt.threads, [&](std::size_t l) {
          std::vector<double> b(rhs.col(static_cast<Eigen::Index>(l)).data(),
                                rhs.col(static_cast<Eigen::Index>(l)).data() + u);
          std::vector<double> x(static_cast<std::size_t>(u), 1.0 / static_cast<double>(k));
          reports[l] = conjugate_gradient(a, b, x, opt.tolerance, opt.max_iterations);
          std::copy(x.begin(), x.end(), sol.col(static_cast<Eigen::Index>(l)).data());
        });
        for (const auto& r : reports) {
          f.iterations = std::max(f.iterations, r.iterations);
          f.residual = std::max(f.residual, r.relative_residual);
        }
      }
    }

    for (std::size_t i = 0; i < n; ++i) {
      if (unknown[i] < 0) continue;
      double sum = 0.0;
      for (std::size_t l = 0; l < k; ++l) {
        const double v = sol(unknown[i], static_cast<Eigen::Index>(l));
        f.max_bound_violation = std::max({f.max_bound_violation, -v, v - 1.0});
        sum += v;
        f.probabilities[l][i] = std::clamp(v, 0.0, 1.0);
      }
      f.max_sum_deviation = std::max(f.max_sum_deviation, std::abs(sum - 1.0));
      double clamped = 0.0;
      for (std::size_t l = 0; l < k; ++l) clamped += f.probabilities[l][i];
      for (std::size_t l = 0; l < k; ++l)
        f.probabilities[l][i] = clamped > 0.0 ? f.probabilities[l][i] / clamped : 1.0 / static_cast<double>(k);
    }
  }

  f.label_map = LabelMap(g.width, g.height);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    for (std::size_t l = 1; l < k; ++l)
      if (f.probabilities[l][i] > f.probabilities[best][i]) best = l;
    f.label_map[i] = f.labels[best];
  }
  return f;
}

struct SegmentOptions {
  int k = 1;
  int threads = 1;
  double weight_floor = 1e-6;
  SolverOptions solver;
};

inline ProbabilityField segment(const Image& image, const SeedMap& seeds, const NoiseModelConfig& cfg,
                                const SegmentOptions& opt = {}) {
  validate_seeds(image.width(), image.height(), seeds);
  const LatticeGraph g = build_graph(image, cfg, {opt.k, opt.threads, opt.weight_floor});
  SolverOptions so = opt.solver;
  so.threads = opt.threads;
  return solve_dirichlet(g, seeds, so);
}

}  // namespace rwnoise
