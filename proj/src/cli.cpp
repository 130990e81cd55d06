#include "rwnoise/cli.hpp"

#include "rwnoise/io.hpp"
#include "rwnoise/rwnoise.hpp"
#include "rwnoise/service.hpp"

#include <pthread.h>
#include <csignal>

#include <thread>

#include <CLI11.hpp>

namespace rwnoise {

namespace {

namespace fs = std::filesystem;

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep))
    if (!cur.empty()) out.push_back(cur);
  return out;
}

double to_number(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw ConfigError("invalid " + what + " '" + s + "'");
  return v;
}

std::pair<double, double> to_pair(const std::string& s, const std::string& what) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw ConfigError(what + " must look like a:b, got '" + s + "'");
  return {to_number(s.substr(0, colon), what), to_number(s.substr(colon + 1), what)};
}

// A comma-separated list names the planes of one multi-channel image.
Image load_image(const std::string& spec) {
  const auto parts = split(spec, ',');
  if (parts.empty()) throw ConfigError("empty image path");
  if (parts.size() == 1) return read_image(parts[0]);
  std::vector<Image> planes;
  for (const auto& p : parts) planes.push_back(read_image(p));
  return stack_channels(planes);
}

SolverKind parse_solver(const std::string& s) {
  if (s == "auto") return SolverKind::automatic;
  if (s == "cg") return SolverKind::conjugate_gradient;
  if (s == "sparse") return SolverKind::sparse_direct;
  if (s == "dense") return SolverKind::dense_direct;
  throw ConfigError("unknown solver '" + s + "' (expected auto, cg, sparse or dense)");
}

NoiseModelConfig model_from_flags(const std::string& model, const std::optional<double>& beta) {
  const ModelKind kind = parse_model_kind(model);
  if (kind == ModelKind::grady && !beta) throw ConfigError("--model grady requires --beta <value>, e.g. --beta 90");
  if (kind != ModelKind::grady && beta) throw ConfigError("--beta only applies to --model grady");
  return make_model(kind, beta);
}

// Output path for image i of n: unchanged for a single image, else "<stem>_<i><ext>".
fs::path indexed_path(const fs::path& base, std::size_t i, std::size_t n) {
  if (n == 1) return base;
  fs::path p = base;
  p.replace_filename(base.stem().string() + "_" + std::to_string(i) + base.extension().string());
  return p;
}

struct Outputs {
  std::vector<std::pair<fs::path, std::string>> files;
  void add(fs::path p, std::string bytes) { files.emplace_back(std::move(p), std::move(bytes)); }
  // Everything is encoded before the first write so a failed run leaves no stray files.
  void commit() const {
    for (const auto& [p, bytes] : files) {
      if (p.has_parent_path()) fs::create_directories(p.parent_path());
      write_file_atomic(p, bytes);
    }
  }
};

// ---------------------------------------------------------------------------------------

struct SegmentArgs {
  std::string image, seeds, model = "poisson", out, prob_dir, overlay, solver = "auto";
  std::optional<double> beta;
  int k = 1, threads = 1;
};

int cmd_segment(const SegmentArgs& a, std::ostream& out) {
  const NoiseModelConfig cfg = model_from_flags(a.model, a.beta);
  const Image image = load_image(a.image);
  const SeedMap seeds = parse_seeds(read_file(a.seeds));
  SegmentOptions so;
  so.k = a.k;
  so.threads = a.threads;
  so.solver.kind = parse_solver(a.solver);
  const ProbabilityField f = segment(image, seeds, cfg, so);

  Outputs o;
  o.add(a.out, encode_label_png(f.label_map));
  if (!a.prob_dir.empty())
    for (std::size_t s = 0; s < f.labels.size(); ++s)
      o.add(fs::path(a.prob_dir) / ("prob_" + std::to_string(f.labels[s]) + ".pfm"),
            encode_pfm(f.width, f.height, f.probabilities[s]));
  if (!a.overlay.empty()) o.add(a.overlay, encode_overlay_png(image, f.label_map));
  o.commit();
  out << "labels " << f.labels.size() << ", solver " << solver_name(f.solver) << ", iterations " << f.iterations
      << ", max sum deviation " << f.max_sum_deviation << '\n';
  return kExitOk;
}

struct BenchArgs {
  std::string noise = "poisson", levels, models = "poisson,grady:auto", out, intensities = "0.1:1";
  int n = 20, size = 64, k = 1, threads = 1;
  double turns = 2.5;
  std::uint64_t seed = 1;
  bool loupas_appendix = false;
};

int cmd_bench(const BenchArgs& a, std::ostream& out, std::ostream& err) {
  NoiseSpec base;
  if (a.noise == "poisson")
    base.kind = NoiseKind::poisson;
  else if (a.noise == "loupas")
    base.kind = NoiseKind::loupas;
  else if (a.noise == "gauss2d")
    base.kind = NoiseKind::gauss2d;
  else
    throw ConfigError("unknown noise '" + a.noise + "' (expected poisson, loupas or gauss2d)");
  base.realizations = a.n;
  base.seed = a.seed;
  base.loupas_appendix = a.loupas_appendix;
  if (base.kind == NoiseKind::loupas) std::tie(base.level0, base.level1) = to_pair(a.intensities, "--intensities");

  std::string levels = a.levels;
  if (levels.empty()) levels = base.kind == NoiseKind::poisson ? "8:16" : "0.5";
  std::vector<NoiseSpec> specs;
  for (const auto& lv : split(levels, ',')) {
    NoiseSpec s = base;
    if (s.kind == NoiseKind::poisson)
      std::tie(s.level0, s.level1) = to_pair(lv, "--levels");
    else
      s.sigma = to_number(lv, "--levels");
    s.validate();
    specs.push_back(s);
  }
  std::vector<ExperimentModel> models;
  for (const auto& m : split(a.models, ',')) models.push_back(parse_experiment_model(m));
  if (models.empty()) throw ConfigError("--models is empty");

  SpiralSpec sp;
  sp.size = a.size;
  sp.turns = a.turns;
  std::vector<AccuracyRow> rows;
  for (const auto& s : specs) {
    auto r = run_spiral_experiment(sp, s, models, {a.k, a.threads});
    rows.insert(rows.end(), r.begin(), r.end());
  }
  const std::string csv = accuracy_csv(rows);
  if (a.out.empty()) {
    out << csv;
  } else {
    Outputs o;
    o.add(a.out, csv);
    o.commit();
  }
  for (const auto& row : rows)
    if (row.beta) err << row.model << " at " << row.noise_level << ": beta " << row.beta.value() << '\n';
  return kExitOk;
}

struct EvalArgs {
  std::vector<std::string> images, truths;
  std::string model = "poisson", beta, out, json, summary_prefix, metric = "arand", thresholds = "0.2,0.1,0.05";
  int max_seeds = 10, k = 1, threads = 1;
};

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  if (a.images.size() != a.truths.size()) throw ConfigError("give one --truth per --image");
  const ModelKind kind = parse_model_kind(a.model);
  if (kind == ModelKind::grady && a.beta.empty())
    throw ConfigError("--model grady requires --beta <value|auto>, e.g. --beta 90");
  if (kind != ModelKind::grady && !a.beta.empty()) throw ConfigError("--beta only applies to --model grady");
  const Metric metric = parse_metric(a.metric);
  std::vector<double> thresholds;
  for (const auto& t : split(a.thresholds, ',')) thresholds.push_back(to_number(t, "--thresholds"));

  std::vector<LabeledImage> data;
  for (std::size_t i = 0; i < a.images.size(); ++i) {
    LabeledImage li{load_image(a.images[i]), read_label_map(a.truths[i]), std::nullopt};
    if (li.image.width() != li.truth.width() || li.image.height() != li.truth.height())
      throw PreconditionError("image '" + a.images[i] + "' and its truth differ in size");
    data.push_back(std::move(li));
  }
  SegmentOptions so;
  so.k = a.k;
  so.threads = a.threads;

  NoiseModelConfig cfg;
  if (kind == ModelKind::grady && a.beta == "auto") {
    const BetaSearchResult found = grady_beta_search(data, default_beta_grid(), metric, so);
    cfg = GradyModel{found.dataset_beta};
    err << "dataset beta " << found.dataset_beta << '\n';
  } else {
    cfg = make_model(kind, kind == ModelKind::grady ? std::optional(to_number(a.beta, "--beta")) : std::nullopt);
  }

  std::vector<SeedTrajectory> runs;
  for (const auto& d : data) runs.push_back(run_trajectory(d.image, d.truth, cfg, a.max_seeds, so));

  Outputs o;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (!a.out.empty())
      o.add(indexed_path(a.out, i, runs.size()), trajectory_csv(runs[i]));
    else
      out << trajectory_csv(runs[i]);
  }
  if (!a.json.empty()) {
    nlohmann::json j = nlohmann::json::array();
    for (std::size_t i = 0; i < runs.size(); ++i) {
      auto t = to_json(runs[i]);
      t["image"] = a.images[i];
      j.push_back(t);
    }
    o.add(a.json, j.dump(2));
  }
  if (!a.summary_prefix.empty()) {
    o.add(a.summary_prefix + "_by_seeds.csv", seed_count_summary_csv(summarize_by_seed_count(runs)));
    o.add(a.summary_prefix + "_thresholds.csv", threshold_summary_csv(summarize_thresholds(runs, metric, thresholds)));
  }
  o.commit();
  return kExitOk;
}

struct ServeArgs {
  std::string host = "127.0.0.1", static_dir;
  int port = 8080, threads = 1;
  std::size_t max_pixels = 4'194'304, max_sessions = 32;
  double ttl_minutes = 30.0;
};

int cmd_serve(const ServeArgs& a, std::ostream& out) {
  ServiceOptions so;
  so.max_pixels = a.max_pixels;
  so.max_sessions = a.max_sessions;
  if (!(a.ttl_minutes > 0)) throw ConfigError("--ttl-minutes must be positive");
  so.idle_ttl = std::chrono::seconds(static_cast<long long>(a.ttl_minutes * 60.0));
  if (!a.static_dir.empty()) so.static_dir = a.static_dir;
  so.solver_threads = a.threads;

  // Signals are taken synchronously by this thread; workers inherit the blocked mask.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  SegmentationService service(so);
  const int port = service.bind(a.host, a.port);
  if (port < 0) throw std::runtime_error("cannot listen on " + a.host + ":" + std::to_string(a.port));
  std::thread worker([&] { service.run(); });
  service.wait_until_ready();
  out << "listening on http://" << a.host << ':' << port << std::endl;
  int sig = 0;
  sigwait(&set, &sig);
  service.stop();
  worker.join();
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Noise-model-aware random walker segmentation", "rwnoise"};
  app.require_subcommand(1);

  SegmentArgs sa;
  auto* seg = app.add_subcommand("segment", "Segment one image from a seed file");
  seg->add_option("--image", sa.image, "Image path; comma-separate paths to stack channels")->required();
  seg->add_option("--seeds", sa.seeds, "JSON seed list")->required();
  seg->add_option("--model", sa.model, "poisson, const-gauss, var-gauss or grady")->capture_default_str();
  seg->add_option("--beta", sa.beta, "Grady beta (required with --model grady)");
  seg->add_option("--k", sa.k, "Window radius")->capture_default_str()->check(CLI::PositiveNumber);
  seg->add_option("--threads", sa.threads, "Worker threads (0 = all cores)")->capture_default_str();
  seg->add_option("--out", sa.out, "Label map PNG")->required();
  seg->add_option("--prob-dir", sa.prob_dir, "Directory for per-label probability PFMs");
  seg->add_option("--overlay", sa.overlay, "Overlay PNG");
  seg->add_option("--solver", sa.solver, "auto, cg, sparse or dense")->capture_default_str();

  BenchArgs ba;
  auto* bench = app.add_subcommand("bench-spiral", "Spiral accuracy benchmark");
  bench->add_option("--noise", ba.noise, "poisson, loupas or gauss2d")->capture_default_str();
  bench->add_option("--levels", ba.levels, "Poisson rates a:b[,a:b...] or sigmas s[,s...]");
  bench->add_option("--n", ba.n, "Realizations per level")->capture_default_str()->check(CLI::PositiveNumber);
  bench->add_option("--models", ba.models, "Comma-separated: poisson, const-gauss, var-gauss, grady:<beta>, grady:auto")
      ->capture_default_str();
  bench->add_option("--size", ba.size, "Spiral side length")->capture_default_str();
  bench->add_option("--turns", ba.turns, "Spiral turns")->capture_default_str();
  bench->add_option("--seed", ba.seed, "Noise RNG seed")->capture_default_str();
  bench->add_option("--k", ba.k, "Window radius")->capture_default_str()->check(CLI::PositiveNumber);
  bench->add_option("--threads", ba.threads, "Worker threads (0 = all cores)")->capture_default_str();
  bench->add_option("--out", ba.out, "CSV path (stdout when omitted)");
  bench->add_option("--intensities", ba.intensities, "Loupas class intensities a:b")->capture_default_str();
  bench->add_flag("--loupas-appendix", ba.loupas_appendix, "Loupas variance sqrt(mu)*sigma^2");

  EvalArgs ea;
  auto* ev = app.add_subcommand("eval", "Seed trajectories against ground truth");
  ev->add_option("--image", ea.images, "Image path (repeatable)")->required();
  ev->add_option("--truth", ea.truths, "Ground-truth label map (one per image)")->required();
  ev->add_option("--model", ea.model, "poisson, const-gauss, var-gauss or grady")->capture_default_str();
  ev->add_option("--beta", ea.beta, "Grady beta, or 'auto' for the dataset-best beta");
  ev->add_option("--max-seeds", ea.max_seeds, "Additional seeds")->capture_default_str()->check(CLI::NonNegativeNumber);
  ev->add_option("--k", ea.k, "Window radius")->capture_default_str()->check(CLI::PositiveNumber);
  ev->add_option("--threads", ea.threads, "Worker threads (0 = all cores)")->capture_default_str();
  ev->add_option("--out", ea.out, "Trajectory CSV (stdout when omitted)");
  ev->add_option("--json", ea.json, "Trajectories as JSON");
  ev->add_option("--summary-prefix", ea.summary_prefix, "Write <prefix>_by_seeds.csv and <prefix>_thresholds.csv");
  ev->add_option("--metric", ea.metric, "arand, voi or error (beta search and thresholds)")->capture_default_str();
  ev->add_option("--thresholds", ea.thresholds, "Comma-separated metric thresholds")->capture_default_str();

  ServeArgs va;
  auto* serve = app.add_subcommand("serve", "Run the HTTP session service");
  serve->add_option("--port", va.port, "TCP port (0 = any free port)")->capture_default_str();
  serve->add_option("--host", va.host, "Bind address")->capture_default_str();
  serve->add_option("--static", va.static_dir, "Directory served at /");
  serve->add_option("--max-pixels", va.max_pixels, "Largest accepted image")->capture_default_str();
  serve->add_option("--max-sessions", va.max_sessions, "Session cap before LRU eviction")->capture_default_str();
  serve->add_option("--ttl-minutes", va.ttl_minutes, "Idle session lifetime")->capture_default_str();
  serve->add_option("--threads", va.threads, "Solver threads per request")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitBadInput;
  }

  try {
    if (seg->parsed()) return cmd_segment(sa, out);
    if (bench->parsed()) return cmd_bench(ba, out, err);
    if (ev->parsed()) return cmd_eval(ea, out, err);
    if (serve->parsed()) return cmd_serve(va, out);
  } catch (const SolverError& e) {
    err << "error: " << e.what() << '\n';
    return kExitSolver;
  } catch (const std::invalid_argument& e) {  // ConfigError, PreconditionError, unreadable input files
    err << "error: " << e.what() << '\n';
    return kExitBadInput;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << '\n';
    return kExitBadInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace rwnoise
