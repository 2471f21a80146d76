#include "scribprop/service.hpp"

#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <map>
#include <mutex>
#include <random>
#include <shared_mutex>
#include <sstream>
#include <thread>

namespace scribprop {

namespace {

using Clock = std::chrono::steady_clock;
using nlohmann::json;
using nlohmann::ordered_json;

struct PropagateKey {
  std::uint64_t revision = 0;
  bool use_pairwise = true;
  std::string predictor;
  double lambda = 1.0;

  friend bool operator==(const PropagateKey&, const PropagateKey&) = default;
};

struct Session {
  std::string id;
  SuperpixelMap superpixels;
  FeatureMatrix features;
  std::vector<AdjacencyEdge> adjacency;
  std::string overlay_png;
  int width = 0;
  int height = 0;

  mutable std::shared_mutex mutex;
  ScribbleSet scribbles;
  std::uint64_t revision = 0;
  std::optional<PropagateKey> last_key;
  double last_energy = 0.0;
  std::string labels_png;
  std::atomic<Clock::rep> last_access{0};

  void touch() { last_access = Clock::now().time_since_epoch().count(); }
};

void send_json(httplib::Response& res, int status, const ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  ordered_json body;
  body["error"] = message;
  send_json(res, status, body);
}

std::string random_token() {
  static std::mutex m;
  static std::mt19937_64 rng{std::random_device{}()};
  std::lock_guard lock(m);
  std::ostringstream ss;
  ss << std::hex << rng() << rng();
  return ss.str();
}

}  // namespace

struct SessionService::Impl {
  ServiceConfig config;
  httplib::Server server;
  std::optional<ReferencePredictor> model;
  mutable std::mutex sessions_mutex;
  std::map<std::string, std::shared_ptr<Session>> sessions;
  std::thread background;

  explicit Impl(ServiceConfig cfg) : config(std::move(cfg)) {
    validate(config.defaults);
    if (config.model_path) model.emplace(load_model(*config.model_path));
    routes();
  }

  std::shared_ptr<Session> find(const std::string& id) {
    expire();
    std::lock_guard lock(sessions_mutex);
    auto it = sessions.find(id);
    if (it == sessions.end()) return nullptr;
    it->second->touch();
    return it->second;
  }

  std::size_t expire() {
    const auto now = Clock::now().time_since_epoch().count();
    const auto ttl = std::chrono::duration_cast<Clock::duration>(config.idle_ttl).count();
    std::lock_guard lock(sessions_mutex);
    return std::erase_if(sessions, [&](const auto& kv) { return now - kv.second->last_access.load() > ttl; });
  }

  void create_session(const httplib::Request& req, httplib::Response& res) {
    expire();
    SuperpixelParams params = config.defaults.superpixel;
    std::string bytes;
    try {
      auto number = [&](const json& doc, const char* key, double fallback) {
        if (req.has_param(key)) return std::stod(req.get_param_value(key));
        if (doc.is_object() && doc.contains(key)) return doc.at(key).get<double>();
        return fallback;
      };
      json doc;
      const auto type = req.get_header_value("Content-Type");
      if (type.rfind("application/json", 0) == 0) {
        doc = json::parse(req.body);
        if (!doc.contains("path") || !doc.at("path").is_string()) {
          return send_error(res, 400, "expected an image upload or {\"path\": ...}");
        }
        bytes = read_file(doc.at("path").get<std::string>());
      } else {
        bytes = req.body;
      }
      params.k = number(doc, "k", params.k);
      params.sigma = number(doc, "sigma", params.sigma);
      params.min_size = static_cast<int>(number(doc, "min_size", params.min_size));
      validate(params);
    } catch (const Error& e) {
      return send_error(res, 400, e.what());
    } catch (const std::exception& e) {
      return send_error(res, 400, std::string("bad request: ") + e.what());
    }

    RgbImage image;
    try {
      const auto [w, h] = probe_image_size(bytes);
      if (w > config.max_image_side || h > config.max_image_side) {
        return send_error(res, 413, "image side exceeds " + std::to_string(config.max_image_side));
      }
      image = decode_image(bytes);
    } catch (const Error& e) {
      return send_error(res, 400, e.what());
    }

    auto session = std::make_shared<Session>();
    session->id = random_token();
    session->width = image.width;
    session->height = image.height;
    session->superpixels = segment_fh(image, params);
    session->features = superpixel_features(image, session->superpixels, config.defaults.pairwise.normalization);
    session->adjacency = adjacency(session->superpixels);
    session->overlay_png = encode_png(boundary_overlay(image, session->superpixels));
    session->scribbles.width = image.width;
    session->scribbles.height = image.height;
    session->touch();
    {
      std::lock_guard lock(sessions_mutex);
      sessions[session->id] = session;
    }
    ordered_json body;
    body["id"] = session->id;
    body["width"] = session->width;
    body["height"] = session->height;
    body["superpixel_count"] = session->superpixels.count;
    send_json(res, 201, body);
  }

  void put_scribbles(const httplib::Request& req, httplib::Response& res) {
    auto session = find(req.path_params.at("id"));
    if (!session) return send_error(res, 404, "unknown session");
    ScribbleSet set;
    try {
      set = parse_scribbles(req.body);
    } catch (const Error& e) {
      return send_error(res, 422, e.what());
    }
    if (set.width != session->width || set.height != session->height) {
      return send_error(res, 422, "scribble dimensions differ from the session image");
    }
    std::unique_lock lock(session->mutex);
    session->scribbles = std::move(set);
    ++session->revision;
    ordered_json body;
    body["revision"] = session->revision;
    send_json(res, 200, body);
  }

  void propagate(const httplib::Request& req, httplib::Response& res) {
    auto session = find(req.path_params.at("id"));
    if (!session) return send_error(res, 404, "unknown session");
    PropagateKey key;
    try {
      const json doc = req.body.empty() ? json::object() : json::parse(req.body);
      key.use_pairwise = doc.value("use_pairwise", true);
      key.predictor = doc.value("predictor", std::string("none"));
      key.lambda = doc.value("lambda", config.defaults.pairwise.lambda);
    } catch (const std::exception& e) {
      return send_error(res, 400, std::string("bad request body: ") + e.what());
    }
    if (key.predictor != "none" && key.predictor != "model") {
      return send_error(res, 400, "predictor must be \"none\" or \"model\"");
    }
    if (key.predictor == "model" && !model) return send_error(res, 400, "no model configured on this server");

    TrainConfig cfg = config.defaults;
    cfg.use_pairwise = key.use_pairwise;
    cfg.pairwise.lambda = key.lambda;
    try {
      validate(cfg.pairwise);
    } catch (const Error& e) {
      return send_error(res, 400, e.what());
    }

    // One writer per session: concurrent requests for the same revision and
    // body find the cached result once the first finishes.
    std::unique_lock lock(session->mutex);
    key.revision = session->revision;
    if (session->scribbles.scribbles.empty()) return send_error(res, 409, "session has no scribbles");
    if (!(session->last_key && *session->last_key == key)) {
      try {
        const auto edges = weighted_edges(session->features, session->adjacency, cfg.pairwise);
        const Predictor* predictor = key.predictor == "model" ? &*model : nullptr;
        auto result = propagate_graph(session->superpixels, session->features, edges, session->scribbles, predictor, cfg);
        session->labels_png = encode_labelmap_png(result.labels);
        session->last_energy = result.energy;
        session->last_key = key;
      } catch (const Error& e) {
        const int status = e.code() == ErrorCode::NoFeasibleLabeling || e.code() == ErrorCode::NoScribbles ? 409 : 422;
        return send_error(res, status, e.what());
      }
    }
    ordered_json body;
    body["revision"] = key.revision;
    body["energy"] = session->last_energy;
    body["labels_url"] = "/sessions/" + session->id + "/labels.png";
    send_json(res, 200, body);
  }

  void routes() {
    server.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Origin", config.cors_origin);
      res.set_header("Access-Control-Allow-Methods", "GET, POST, PUT, DELETE, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
      if (req.method == "OPTIONS") {
        res.status = 204;
        return httplib::Server::HandlerResponse::Handled;
      }
      return httplib::Server::HandlerResponse::Unhandled;
    });
    server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      try {
        std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        send_error(res, 500, e.what());
      } catch (...) {
        send_error(res, 500, "internal error");
      }
    });
    server.set_payload_max_length(256u << 20);

    server.Post("/sessions", [this](const auto& req, auto& res) { create_session(req, res); });
    server.Put("/sessions/:id/scribbles", [this](const auto& req, auto& res) { put_scribbles(req, res); });
    server.Post("/sessions/:id/propagate", [this](const auto& req, auto& res) { propagate(req, res); });
    server.Get("/sessions/:id/labels.png", [this](const auto& req, auto& res) {
      auto session = find(req.path_params.at("id"));
      if (!session) return send_error(res, 404, "unknown session");
      std::shared_lock lock(session->mutex);
      if (!session->last_key) return send_error(res, 409, "no propagation has run yet");
      res.set_content(session->labels_png, "image/png");
    });
    server.Get("/sessions/:id/superpixels.png", [this](const auto& req, auto& res) {
      auto session = find(req.path_params.at("id"));
      if (!session) return send_error(res, 404, "unknown session");
      res.set_content(session->overlay_png, "image/png");
    });
    server.Get("/sessions/:id/scribbles", [this](const auto& req, auto& res) {
      auto session = find(req.path_params.at("id"));
      if (!session) return send_error(res, 404, "unknown session");
      std::shared_lock lock(session->mutex);
      res.set_content(serialize_scribbles(session->scribbles), "application/json");
    });
    server.Delete("/sessions/:id", [this](const auto& req, auto& res) {
      std::lock_guard lock(sessions_mutex);
      if (sessions.erase(req.path_params.at("id")) == 0) return send_error(res, 404, "unknown session");
      res.status = 204;
    });
    if (config.static_dir) server.set_mount_point("/", config.static_dir->string());
  }
};

SessionService::SessionService(ServiceConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}

SessionService::~SessionService() { stop(); }

bool SessionService::listen() { return impl_->server.listen(impl_->config.host, impl_->config.port); }

int SessionService::start_background() {
  const int port = impl_->server.bind_to_any_port(impl_->config.host);
  if (port < 0) throw Error(ErrorCode::IoFailure, "cannot bind " + impl_->config.host);
  impl_->background = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port;
}

void SessionService::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->background.joinable()) impl_->background.join();
}

std::size_t SessionService::session_count() const {
  std::lock_guard lock(impl_->sessions_mutex);
  return impl_->sessions.size();
}

std::size_t SessionService::expire_idle() { return impl_->expire(); }

}  // namespace scribprop
