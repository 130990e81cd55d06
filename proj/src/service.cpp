#include "rwnoise/service.hpp"

// Eigen first: <resolv.h>, pulled in by httplib, defines a `_res` macro.
#include "rwnoise/io.hpp"
#include "rwnoise/rwnoise.hpp"

#include <httplib.h>

#include <atomic>
#include <list>
#include <mutex>
#include <random>
#include <thread>
#include <unordered_map>

#include <json.hpp>

namespace rwnoise {

namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

struct HttpError {
  int status;
  std::string message;
};

[[noreturn]] void fail(int status, const std::string& message) { throw HttpError{status, message}; }

struct Result {
  long revision = 0;
  ProbabilityField field;
  double timing_ms = 0.0;
  std::string labels_png;
};

struct ModelSetting {
  NoiseModelConfig config;
  int k = 1;
};

struct Session {
  std::string id;
  Image image;
  std::optional<LabelMap> truth;

  std::mutex mu;  // guards seeds, model
  SeedMap seeds;
  ModelSetting model;
  std::atomic<long> revision{0};
  std::atomic<bool> solving{false};

  mutable std::mutex result_mu;  // only held to swap or copy the pointer
  std::shared_ptr<const Result> result;

  std::shared_ptr<const Result> last_result() const {
    std::lock_guard lock(result_mu);
    return result;
  }
};

std::string new_session_id() {
  static std::mutex mu;
  static std::random_device rd;
  static std::mt19937_64 gen(static_cast<std::uint64_t>(rd()) << 32 ^ rd());
  std::lock_guard lock(mu);
  char buf[33];
  std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(gen()),
                static_cast<unsigned long long>(gen()));
  return buf;
}

json model_json(const ModelSetting& m) {
  json j = {{"name", model_name(kind_of(m.config))}, {"k", m.k}};
  if (const auto* g = std::get_if<GradyModel>(&m.config)) j["beta"] = g->beta;
  return j;
}

ModelSetting parse_model_setting(const std::string& name, std::optional<double> beta, int k) {
  ModelSetting m;
  try {
    m.config = make_model(parse_model_kind(name), beta);
  } catch (const std::invalid_argument& e) {
    fail(400, e.what());
  }
  if (k < 1) fail(400, "k must be a positive integer");
  m.k = k;
  return m;
}

// Rejects models that cannot run on this image before a session or update is accepted.
void check_model_fits(const Image& image, const ModelSetting& m) {
  try {
    require_window_fits(image.width(), image.height(), m.k);
    if (kind_of(m.config) != ModelKind::grady) neighborhood_model_for(image, m.config);
  } catch (const std::invalid_argument& e) {
    fail(400, e.what());
  }
}

double parse_number(const std::string& text, const char* what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) fail(400, std::string("invalid ") + what + " '" + text + "'");
  return v;
}

int parse_int(const std::string& text, const char* what) {
  const double v = parse_number(text, what);
  if (v != std::floor(v) || std::abs(v) > 1e6) fail(400, std::string(what) + " must be an integer");
  return static_cast<int>(v);
}

// Bounds, label range and per-pixel consistency; a single label is fine while painting.
void check_seed_list(const Image& image, const SeedMap& seeds) {
  if (seeds.empty()) fail(422, "seed list is empty");
  std::map<std::pair<int, int>, int> seen;
  for (const Seed& s : seeds) {
    if (!image.contains(s.x, s.y))
      fail(422, "seed (" + std::to_string(s.x) + ", " + std::to_string(s.y) + ") lies outside the image");
    if (s.label < 0 || s.label > 255) fail(422, "seed labels must lie in 0..255");
    const auto [it, inserted] = seen.emplace(std::pair{s.x, s.y}, s.label);
    if (!inserted && it->second != s.label)
      fail(422, "pixel (" + std::to_string(s.x) + ", " + std::to_string(s.y) + ") carries two labels");
  }
}

LabelMap parse_truth_json(const json& j, const Image& image) {
  if (!j.is_array() || j.empty()) fail(400, "truth must be an array of rows");
  const int h = static_cast<int>(j.size());
  const int w = j[0].is_array() ? static_cast<int>(j[0].size()) : 0;
  if (w != image.width() || h != image.height()) fail(422, "truth and image differ in size");
  LabelMap t(w, h);
  for (int y = 0; y < h; ++y) {
    if (!j[y].is_array() || static_cast<int>(j[y].size()) != w) fail(400, "truth rows must have equal length");
    for (int x = 0; x < w; ++x) {
      if (!j[y][x].is_number_integer()) fail(400, "truth entries must be integers");
      t.at(x, y) = j[y][x].get<int>();
    }
  }
  return t;
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

}  // namespace

struct SegmentationService::Impl {
  ServiceOptions opt;
  httplib::Server server;

  mutable std::mutex store_mu;
  std::list<std::string> lru;  // most recent first
  struct Entry {
    std::shared_ptr<Session> session;
    std::list<std::string>::iterator pos;
    Clock::time_point last_access;
  };
  std::unordered_map<std::string, Entry> sessions;

  explicit Impl(ServiceOptions o) : opt(std::move(o)) {
    if (opt.max_sessions == 0) throw ConfigError("max sessions must be positive");
    if (opt.max_pixels == 0) throw ConfigError("max pixels must be positive");
    routes();
  }

  // Store ----------------------------------------------------------------------------

  void purge_expired_locked(Clock::time_point now) {
    while (!lru.empty()) {
      auto it = sessions.find(lru.back());
      if (now - it->second.last_access < opt.idle_ttl) break;
      sessions.erase(it);
      lru.pop_back();
    }
  }

  void insert(std::shared_ptr<Session> s) {
    std::lock_guard lock(store_mu);
    const auto now = Clock::now();
    purge_expired_locked(now);
    while (sessions.size() >= opt.max_sessions) {
      sessions.erase(lru.back());
      lru.pop_back();
    }
    const std::string id = s->id;
    lru.push_front(id);
    sessions[id] = Entry{std::move(s), lru.begin(), now};
  }

  std::shared_ptr<Session> find(const std::string& id) {
    std::lock_guard lock(store_mu);
    const auto now = Clock::now();
    purge_expired_locked(now);
    auto it = sessions.find(id);
    if (it == sessions.end()) fail(404, "unknown session");
    lru.splice(lru.begin(), lru, it->second.pos);
    it->second.last_access = now;
    return it->second.session;
  }

  bool erase(const std::string& id) {
    std::lock_guard lock(store_mu);
    auto it = sessions.find(id);
    if (it == sessions.end()) return false;
    lru.erase(it->second.pos);
    sessions.erase(it);
    return true;
  }

  // Handlers -------------------------------------------------------------------------

  template <class F>
  httplib::Server::Handler wrap(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
      try {
        f(req, res);
      } catch (const HttpError& e) {
        send_json(res, e.status, {{"error", e.message}});
      } catch (const SolverError& e) {
        send_json(res, 500, {{"error", e.what()}});
      } catch (const std::exception& e) {
        send_json(res, 500, {{"error", std::string("internal error: ") + e.what()}});
      }
    };
  }

  json summary(Session& s) {
    json j;
    {
      std::lock_guard lock(s.mu);
      j = {{"id", s.id},
           {"width", s.image.width()},
           {"height", s.image.height()},
           {"channels", s.image.channels()},
           {"model", model_json(s.model)},
           {"seeds", json::parse(seeds_to_json(s.seeds))},
           {"revision", s.revision.load()},
           {"has_truth", s.truth.has_value()}};
    }
    if (const auto r = s.last_result()) {
      j["result"] = {{"revision", r->revision},
                     {"stale", r->revision != s.revision.load()},
                     {"labels", r->field.labels},
                     {"timing_ms", r->timing_ms}};
    } else {
      j["result"] = nullptr;
    }
    return j;
  }

  void create(const httplib::Request& req, httplib::Response& res) {
    const auto files = req.get_file_values("image");
    if (files.empty()) fail(400, "multipart field 'image' is required");
    if (files.size() > 2) fail(400, "at most two image planes are supported");
    auto s = std::make_shared<Session>();
    try {
      if (files.size() == 1) {
        s->image = decode_image(files[0].content);
      } else {
        s->image = stack_channels({decode_image(files[0].content), decode_image(files[1].content)});
      }
    } catch (const std::exception& e) {
      fail(400, std::string("cannot decode image: ") + e.what());
    }
    if (s->image.pixel_count() > opt.max_pixels)
      fail(413, "image has " + std::to_string(s->image.pixel_count()) + " pixels, the limit is " +
                    std::to_string(opt.max_pixels));

    auto field = [&](const char* key) -> std::optional<std::string> {
      if (!req.has_file(key)) return std::nullopt;
      return req.get_file_value(key).content;
    };
    const std::string name = field("model").value_or("poisson");
    std::optional<double> beta;
    if (const auto b = field("beta"); b && !b->empty()) beta = parse_number(*b, "beta");
    const int k = field("k") ? parse_int(*field("k"), "k") : 1;
    s->model = parse_model_setting(name, beta, k);
    check_model_fits(s->image, s->model);

    if (req.has_file("truth")) {
      try {
        s->truth = decode_label_map(req.get_file_value("truth").content);
      } catch (const std::exception& e) {
        fail(400, std::string("cannot decode truth: ") + e.what());
      }
      if (s->truth->width() != s->image.width() || s->truth->height() != s->image.height())
        fail(400, "truth and image differ in size");
    }
    s->id = new_session_id();
    json body = summary(*s);
    insert(std::move(s));
    send_json(res, 201, body);
  }

  void put_seeds(const httplib::Request& req, httplib::Response& res) {
    auto s = find(req.matches[1]);
    SeedMap seeds;
    try {
      seeds = parse_seeds(req.body);
    } catch (const std::exception& e) {
      fail(400, std::string("invalid seed list: ") + e.what());
    }
    check_seed_list(s->image, seeds);
    long rev;
    {
      std::lock_guard lock(s->mu);
      s->seeds = std::move(seeds);
      rev = ++s->revision;
    }
    send_json(res, 200, {{"revision", rev}});
  }

  void segment_session(const httplib::Request& req, httplib::Response& res) {
    auto s = find(req.matches[1]);
    if (s->solving.exchange(true)) fail(409, "a solve for this session is already running");
    struct Release {
      Session& s;
      ~Release() { s.solving = false; }
    } release{*s};

    SeedMap seeds;
    ModelSetting model;
    long rev;
    {
      std::lock_guard lock(s->mu);
      if (!req.body.empty()) {
        json body;
        try {
          body = json::parse(req.body);
        } catch (const json::exception& e) {
          fail(400, std::string("invalid JSON: ") + e.what());
        }
        if (!body.is_object()) fail(400, "segment body must be a JSON object");
        if (body.contains("model") || body.contains("beta") || body.contains("k")) {
          const std::string name = body.value("model", model_name(kind_of(s->model.config)));
          std::optional<double> beta;
          if (body.contains("beta") && !body["beta"].is_null()) {
            if (!body["beta"].is_number()) fail(400, "beta must be a number");
            beta = body["beta"].get<double>();
          } else if (const auto* g = std::get_if<GradyModel>(&s->model.config); g && name == "grady") {
            beta = g->beta;
          }
          int k = s->model.k;
          if (body.contains("k")) {
            if (!body["k"].is_number_integer()) fail(400, "k must be an integer");
            k = body["k"].get<int>();
          }
          ModelSetting next = parse_model_setting(name, beta, k);
          check_model_fits(s->image, next);
          if (model_json(next) != model_json(s->model)) {
            s->model = next;
            ++s->revision;
          }
        }
      }
      seeds = s->seeds;
      model = s->model;
      rev = s->revision;
    }
    try {
      validate_seeds(s->image.width(), s->image.height(), seeds);
    } catch (const PreconditionError& e) {
      fail(422, e.what());
    }

    if (opt.solve_delay.count() > 0) std::this_thread::sleep_for(opt.solve_delay);
    const auto t0 = Clock::now();
    SegmentOptions so;
    so.k = model.k;
    so.threads = opt.solver_threads;
    auto r = std::make_shared<Result>();
    r->revision = rev;
    r->field = segment(s->image, seeds, model.config, so);
    r->timing_ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    r->labels_png = encode_label_png(r->field.label_map);
    {
      std::lock_guard lock(s->result_mu);
      s->result = r;
    }
    send_json(res, 200,
              {{"revision", rev},
               {"timing_ms", r->timing_ms},
               {"labels", r->field.labels},
               {"solver", solver_name(r->field.solver)},
               {"iterations", r->field.iterations}});
  }

  std::shared_ptr<const Result> result_for(Session& s, httplib::Response& res) {
    auto r = s.last_result();
    if (!r) fail(404, "no segmentation result yet");
    res.set_header("X-Revision", std::to_string(r->revision));
    res.set_header("X-Stale", r->revision != s.revision.load() ? "true" : "false");
    return r;
  }

  void suggest(const httplib::Request& req, httplib::Response& res) {
    auto s = find(req.matches[1]);
    std::optional<LabelMap> truth = s->truth;
    if (!req.body.empty()) {
      json body;
      try {
        body = json::parse(req.body);
      } catch (const json::exception& e) {
        fail(400, std::string("invalid JSON: ") + e.what());
      }
      if (body.is_object() && body.contains("truth") && !body["truth"].is_null())
        truth = parse_truth_json(body["truth"], s->image);
    }
    if (!truth) fail(422, "no ground truth attached to this session");
    const auto r = s->last_result();
    if (!r) fail(422, "segment the session before asking for a suggestion");
    SeedMap seeds;
    {
      std::lock_guard lock(s->mu);
      seeds = s->seeds;
    }
    const NextSeed next = place_next_seed(*truth, r->field.label_map, seeds);
    if (next.converged || !next.added) {
      send_json(res, 200, {{"converged", true}, {"revision", r->revision}});
      return;
    }
    send_json(res, 200,
              {{"x", next.added->x}, {"y", next.added->y}, {"label", next.added->label}, {"revision", r->revision}});
  }

  void routes() {
    const std::string sid = R"(/api/sessions/([0-9a-f]+))";

    server.Post("/api/sessions", wrap([this](const auto& req, auto& res) { create(req, res); }));
    server.Get(sid, wrap([this](const auto& req, auto& res) {
                 auto s = find(req.matches[1]);
                 send_json(res, 200, summary(*s));
               }));
    server.Delete(sid, wrap([this](const auto& req, auto& res) {
                    if (!erase(req.matches[1])) fail(404, "unknown session");
                    res.status = 204;
                  }));
    server.Put(sid + "/seeds", wrap([this](const auto& req, auto& res) { put_seeds(req, res); }));
    server.Post(sid + "/segment", wrap([this](const auto& req, auto& res) { segment_session(req, res); }));
    server.Get(sid + "/labels.png", wrap([this](const auto& req, auto& res) {
                 auto s = find(req.matches[1]);
                 const auto r = result_for(*s, res);
                 res.set_content(r->labels_png, "image/png");
               }));
    server.Get(sid + "/overlay.png", wrap([this](const auto& req, auto& res) {
                 auto s = find(req.matches[1]);
                 const auto r = result_for(*s, res);
                 res.set_content(encode_overlay_png(s->image, r->field.label_map), "image/png");
               }));
    server.Get(sid + R"(/prob/(-?\d+)\.pfm)", wrap([this](const auto& req, auto& res) {
                 auto s = find(req.matches[1]);
                 const auto r = result_for(*s, res);
                 const int label = parse_int(req.matches[2], "label");
                 const auto& labels = r->field.labels;
                 const auto it = std::find(labels.begin(), labels.end(), label);
                 if (it == labels.end()) fail(404, "label " + std::to_string(label) + " is not in the result");
                 const auto& p = r->field.probabilities[static_cast<std::size_t>(it - labels.begin())];
                 res.set_content(encode_pfm(r->field.width, r->field.height, p), "application/octet-stream");
               }));
    server.Post(sid + "/suggest", wrap([this](const auto& req, auto& res) { suggest(req, res); }));

    server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    server.set_post_routing_handler([this](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Origin", opt.cors_origin);
      res.set_header("Access-Control-Allow-Methods", "GET, POST, PUT, DELETE, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
      res.set_header("Access-Control-Expose-Headers", "X-Stale, X-Revision");
    });
    server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr) {
      send_json(res, 500, {{"error", "internal error"}});
    });
    if (opt.static_dir && !server.set_mount_point("/", opt.static_dir->string()))
      throw ConfigError("static directory '" + opt.static_dir->string() + "' does not exist");
  }
};

SegmentationService::SegmentationService(ServiceOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {}
SegmentationService::~SegmentationService() { stop(); }

int SegmentationService::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool SegmentationService::run() { return impl_->server.listen_after_bind(); }
void SegmentationService::stop() {
  if (impl_) impl_->server.stop();
}
void SegmentationService::wait_until_ready() const { impl_->server.wait_until_ready(); }

std::size_t SegmentationService::session_count() const {
  std::lock_guard lock(impl_->store_mu);
  return impl_->sessions.size();
}

}  // namespace rwnoise
