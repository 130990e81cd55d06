#pragma once

// In-memory segmentation sessions behind an HTTP/1.1 JSON API.
//
//   POST   /api/sessions                  multipart: image (1 or 2 files), model, beta, k, truth
//   GET    /api/sessions/{id}             summary
//   DELETE /api/sessions/{id}
//   PUT    /api/sessions/{id}/seeds       JSON seed list, full replacement
//   POST   /api/sessions/{id}/segment     optional JSON {model, beta, k}
//   GET    /api/sessions/{id}/labels.png | overlay.png | prob/{label}.pfm
//   POST   /api/sessions/{id}/suggest     optional JSON {truth: [[...], ...]}

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

namespace rwnoise {

struct ServiceOptions {
  std::size_t max_pixels = 4'194'304;
  std::size_t max_sessions = 32;
  std::chrono::seconds idle_ttl{30 * 60};
  std::optional<std::filesystem::path> static_dir;
  int solver_threads = 1;
  std::string cors_origin = "*";
  std::chrono::milliseconds solve_delay{0};  // test hook: sleep inside every solve
};

class SegmentationService {
 public:
  explicit SegmentationService(ServiceOptions options = {});
  ~SegmentationService();
  SegmentationService(const SegmentationService&) = delete;
  SegmentationService& operator=(const SegmentationService&) = delete;

  /// Binds to `port`, or to a free port when `port` is 0. Returns the bound port, or -1.
  int bind(const std::string& host, int port);
  /// Serves until stop() is called. Requires a successful bind().
  bool run();
  void stop();
  void wait_until_ready() const;

  std::size_t session_count() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace rwnoise
