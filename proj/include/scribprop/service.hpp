#pragma once

#include "scribprop/trainer.hpp"

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

namespace scribprop {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::optional<std::filesystem::path> model_path;
  std::chrono::seconds idle_ttl{30 * 60};
  std::string cors_origin = "*";
  std::optional<std::filesystem::path> static_dir;
  int max_image_side = 4096;
  /// Superpixel, pairwise and predictor-unary settings used by every session.
  TrainConfig defaults;
};

/// HTTP session service for interactive propagation:
///   POST   /sessions                      create from upload or {"path": ...}
///   PUT    /sessions/{id}/scribbles       replace the scribble set
///   POST   /sessions/{id}/propagate       run graph-cut propagation
///   GET    /sessions/{id}/labels.png      last propagated label map
///   GET    /sessions/{id}/superpixels.png boundary overlay
///   GET    /sessions/{id}/scribbles       canonical scribble JSON
///   DELETE /sessions/{id}
class SessionService {
 public:
  explicit SessionService(ServiceConfig config);
  ~SessionService();
  SessionService(const SessionService&) = delete;
  SessionService& operator=(const SessionService&) = delete;

  /// Blocks serving on config.host:config.port. Returns false if binding fails.
  bool listen();
  /// Binds an ephemeral port and serves on a background thread; returns the port.
  int start_background();
  void stop();

  std::size_t session_count() const;
  /// Drops sessions idle for longer than the TTL; returns how many.
  std::size_t expire_idle();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace scribprop
