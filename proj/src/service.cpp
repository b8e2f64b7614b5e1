// Copyright 2026 The envlight Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "envlight/service.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <condition_variable>
#include <cstdio>
#include <map>
#include <mutex>
#include <random>
#include <shared_mutex>
#include <stop_token>
#include <thread>
#include <unordered_map>

#include "envlight/errors.hpp"
#include "envlight/hdr_io.hpp"
#include "envlight/render.hpp"
#include "envlight/sg_model.hpp"
#include "httplib.h"
#include "json.hpp"

namespace envlight {

namespace {

using json = nlohmann::json;
using Clock = std::chrono::system_clock;

class ConflictError : public Error {
 public:
  ConflictError(const std::string& what, std::uint64_t revision)
      : Error(what), revision_(revision) {}
  std::uint64_t revision() const { return revision_; }

 private:
  std::uint64_t revision_;
};

std::int64_t to_seconds(Clock::time_point t) {
  return std::chrono::duration_cast<std::chrono::seconds>(t.time_since_epoch()).count();
}

Clock::time_point from_seconds(std::int64_t s) {
  return Clock::time_point(std::chrono::seconds(s));
}

std::string new_token() {
  std::random_device rd;
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (int i = 0; i < 8; ++i) {
    const unsigned v = rd();
    for (int k = 0; k < 4; ++k) out.push_back(kHex[(v >> (4 * k)) & 0xf]);
  }
  return out;
}

std::string_view as_text(const Bytes& b) {
  return {reinterpret_cast<const char*>(b.data()), b.size()};
}

Bytes as_bytes(const std::string& s) { return Bytes(s.begin(), s.end()); }

void write_atomic(const std::filesystem::path& path, const Bytes& bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  write_file(tmp, bytes);
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot replace '" + path.string() + "': " + ec.message());
}

struct Snapshot {
  std::shared_ptr<const EnvMap> texture;
  SgSet lights;
  std::uint64_t revision = 0;
};

struct Session {
  std::string id;
  mutable std::shared_mutex mu;
  std::shared_ptr<const EnvMap> texture;
  SgSet lights;
  int next_id = 0;
  std::uint64_t revision = 0;
  Clock::time_point created;
  std::atomic<std::int64_t> last_access{0};

  std::mutex cache_mu;
  std::uint64_t cache_revision = 0;
  std::map<std::string, std::shared_ptr<const Bytes>> cache;

  void touch() { last_access.store(to_seconds(Clock::now())); }

  Snapshot snapshot() const {
    std::shared_lock lock(mu);
    return {texture, lights, revision};
  }
};

EnvMap composite(const Snapshot& s) {
  return relight_composite(*s.texture, render_sg_map(s.lights, s.texture->height()));
}

double query_number(const httplib::Request& req, const char* key, double fallback) {
  if (!req.has_param(key)) return fallback;
  const std::string text = req.get_param_value(key);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) {
    throw ValidationError(std::string(key) + " must be a finite number", key);
  }
  return v;
}

int query_int(const httplib::Request& req, const char* key, int fallback, int lo, int hi) {
  const double v = query_number(req, key, fallback);
  if (v != std::floor(v) || v < lo || v > hi) {
    throw ValidationError(std::string(key) + " must be an integer in [" + std::to_string(lo) +
                              ", " + std::to_string(hi) + "]",
                          key);
  }
  return static_cast<int>(v);
}

double query_positive(const httplib::Request& req, const char* key, double fallback) {
  const double v = query_number(req, key, fallback);
  if (!(v > 0.0)) throw ValidationError(std::string(key) + " must be positive", key);
  return v;
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

json lights_json(const SgSet& lights, std::uint64_t revision) {
  json doc = json::parse(serialize_lights(lights));
  doc["revision"] = revision;
  return doc;
}

json light_json(int id, const SgLight& light, std::uint64_t revision) {
  json doc = json::parse(serialize_light(id, light));
  doc["revision"] = revision;
  return doc;
}

void send_error(httplib::Response& res, int status, const std::string& message,
                const std::string& field = {}) {
  json body = {{"error", message}};
  if (!field.empty()) body["field"] = field;
  send_json(res, status, body);
}

}  // namespace

struct LightService::Impl {
  ServiceConfig config;
  httplib::Server server;
  mutable std::shared_mutex registry_mu;
  std::unordered_map<std::string, std::shared_ptr<Session>> sessions;
  int bound_port = -1;
  std::thread server_thread;
  std::jthread janitor;

  explicit Impl(ServiceConfig c) : config(std::move(c)) {
    restore();
    routes();
    janitor = std::jthread([this](std::stop_token stop) {
      std::mutex m;
      std::condition_variable_any cv;
      std::unique_lock lock(m);
      while (!stop.stop_requested()) {
        cv.wait_for(lock, stop, std::chrono::seconds(60), [] { return false; });
        if (!stop.stop_requested()) evict(Clock::now());
      }
    });
  }

  // -------------------------------------------------------------------------
  // Sessions

  std::shared_ptr<Session> find(const std::string& id) {
    std::shared_lock lock(registry_mu);
    const auto it = sessions.find(id);
    if (it == sessions.end()) throw NotFoundError("unknown session '" + id + "'");
    it->second->touch();
    return it->second;
  }

  std::filesystem::path session_dir(const Session& s) const { return config.data_dir / s.id; }

  void persist_texture(const Session& s) {
    if (config.data_dir.empty()) return;
    std::filesystem::create_directories(session_dir(s));
    write_atomic(session_dir(s) / "texture.hdr", encode_hdr(s.texture->image()));
  }

  void persist_state(const Session& s) {
    if (config.data_dir.empty()) return;
    std::filesystem::create_directories(session_dir(s));
    write_atomic(session_dir(s) / "lights.json", as_bytes(serialize_lights(s.lights)));
    const json meta = {{"revision", s.revision},
                       {"next_id", s.next_id},
                       {"created", to_seconds(s.created)},
                       {"last_access", s.last_access.load()}};
    write_atomic(session_dir(s) / "meta.json", as_bytes(meta.dump()));
  }

  void restore() {
    if (config.data_dir.empty()) return;
    std::filesystem::create_directories(config.data_dir);
    for (const auto& entry : std::filesystem::directory_iterator(config.data_dir)) {
      if (!entry.is_directory()) continue;
      try {
        auto s = std::make_shared<Session>();
        s->id = entry.path().filename().string();
        s->texture = std::make_shared<const EnvMap>(read_hdr(entry.path() / "texture.hdr"));
        s->lights = parse_lights(as_text(read_file(entry.path() / "lights.json")));
        const json meta = json::parse(as_text(read_file(entry.path() / "meta.json")));
        s->revision = meta.at("revision").get<std::uint64_t>();
        s->next_id = std::max(meta.at("next_id").get<int>(), s->lights.next_id());
        s->created = from_seconds(meta.at("created").get<std::int64_t>());
        s->last_access.store(meta.at("last_access").get<std::int64_t>());
        sessions.emplace(s->id, std::move(s));
      } catch (const std::exception& e) {
        std::fprintf(stderr, "skipping session directory %s: %s\n",
                     entry.path().string().c_str(), e.what());
      }
    }
  }

  std::size_t evict(Clock::time_point now) {
    const std::int64_t cutoff = to_seconds(now - config.idle_timeout);
    std::vector<std::shared_ptr<Session>> dropped;
    {
      std::unique_lock lock(registry_mu);
      for (auto it = sessions.begin(); it != sessions.end();) {
        if (it->second->last_access.load() < cutoff) {
          dropped.push_back(it->second);
          it = sessions.erase(it);
        } else {
          ++it;
        }
      }
    }
    if (!config.data_dir.empty()) {
      for (const auto& s : dropped) {
        std::error_code ec;
        std::filesystem::remove_all(session_dir(*s), ec);
      }
    }
    return dropped.size();
  }

  static void check_if_match(const httplib::Request& req, const Session& s) {
    if (!req.has_header("If-Match")) return;
    std::string tag = req.get_header_value("If-Match");
    if (tag == "*") return;
    if (tag.starts_with("W/")) tag.erase(0, 2);
    tag.erase(std::remove(tag.begin(), tag.end(), '"'), tag.end());
    if (tag != std::to_string(s.revision)) {
      throw ConflictError("revision " + tag + " is stale; current revision is " +
                              std::to_string(s.revision),
                          s.revision);
    }
  }

  /// Called with the session lock held exclusively.
  void commit(Session& s, bool texture_changed) {
    ++s.revision;
    s.touch();
    if (texture_changed) persist_texture(s);
    persist_state(s);
  }

  static void set_etag(httplib::Response& res, std::uint64_t revision) {
    res.set_header("ETag", "\"" + std::to_string(revision) + "\"");
  }

  std::shared_ptr<const Bytes> cached(Session& s, std::uint64_t revision, const std::string& key,
                                      const std::function<Bytes()>& produce) {
    {
      std::lock_guard lock(s.cache_mu);
      if (s.cache_revision == revision) {
        const auto it = s.cache.find(key);
        if (it != s.cache.end()) return it->second;
      }
    }
    auto bytes = std::make_shared<const Bytes>(produce());
    std::lock_guard lock(s.cache_mu);
    if (revision > s.cache_revision) {
      s.cache.clear();
      s.cache_revision = revision;
    }
    if (revision == s.cache_revision && s.cache.size() < 32) s.cache.emplace(key, bytes);
    return bytes;
  }

  // -------------------------------------------------------------------------
  // Routes

  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  static Handler guarded(Handler h) {
    return [h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
      try {
        h(req, res);
      } catch (const ConflictError& e) {
        send_json(res, 409, {{"error", e.what()}, {"revision", e.revision()}});
      } catch (const ValidationError& e) {
        send_error(res, 400, e.what(), e.field());
      } catch (const NotFoundError& e) {
        send_error(res, 404, e.what());
      } catch (const ParseError& e) {
        send_error(res, 400, e.what());
      } catch (const DomainError& e) {
        send_error(res, 400, e.what());
      } catch (const DimensionError& e) {
        send_error(res, 400, e.what());
      } catch (const NumericalError& e) {
        send_error(res, 422, e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, e.what());
      }
    };
  }

  void routes() {
    server.set_payload_max_length(config.max_upload_bytes);
    server.set_default_headers({{"Access-Control-Allow-Origin", config.cors_origin},
                                {"Access-Control-Expose-Headers", "ETag"}});
    server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Methods", "GET, POST, PATCH, DELETE, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type, If-Match");
      res.status = 204;
    });

    server.Post("/api/sessions", guarded([this](const httplib::Request&, httplib::Response& res) {
      auto s = std::make_shared<Session>();
      s->texture = std::make_shared<const EnvMap>(config.default_texture_height);
      s->created = Clock::now();
      s->touch();
      {
        std::unique_lock lock(registry_mu);
        do {
          s->id = new_token();
        } while (sessions.contains(s->id));
        sessions.emplace(s->id, s);
      }
      persist_texture(*s);
      persist_state(*s);
      set_etag(res, 0);
      send_json(res, 201, {{"id", s->id}, {"revision", 0}});
    }));

    server.Get(R"(/api/sessions/([^/]+))",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 const Snapshot snap = find(req.matches[1])->snapshot();
                 set_etag(res, snap.revision);
                 send_json(res, 200,
                           {{"id", std::string(req.matches[1])},
                            {"width", snap.texture->width()},
                            {"height", snap.texture->height()},
                            {"light_count", snap.lights.size()},
                            {"revision", snap.revision}});
               }));

    server.Post(R"(/api/sessions/([^/]+)/panorama)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const auto s = find(req.matches[1]);
                  const Bytes body(req.body.begin(), req.body.end());
                  auto texture = std::make_shared<const EnvMap>(
                      EnvMap::from_image(decode_image(body)));
                  std::unique_lock lock(s->mu);
                  check_if_match(req, *s);
                  s->texture = std::move(texture);
                  commit(*s, true);
                  set_etag(res, s->revision);
                  send_json(res, 200,
                            {{"width", s->texture->width()},
                             {"height", s->texture->height()},
                             {"revision", s->revision}});
                }));

    server.Post(R"(/api/sessions/([^/]+)/fit)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const auto s = find(req.matches[1]);
                  const std::string_view body =
                      req.body.empty() ? std::string_view("{}") : std::string_view(req.body);
                  const FitOptions opts = apply_fit_overrides(config.fit_defaults, body);
                  const Snapshot snap = s->snapshot();
                  const FitResult result = fit(*snap.texture, opts);
                  std::unique_lock lock(s->mu);
                  check_if_match(req, *s);
                  SgSet lights;
                  for (const auto& e : result.lights.entries()) {
                    lights.insert(s->next_id++, e.light);
                  }
                  s->lights = std::move(lights);
                  commit(*s, false);
                  set_etag(res, s->revision);
                  json doc = lights_json(s->lights, s->revision);
                  doc["termination"] = termination_name(result.trace.termination);
                  doc["epochs"] = result.trace.loss.size();
                  send_json(res, 200, doc);
                }));

    server.Get(R"(/api/sessions/([^/]+)/lights)",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 const Snapshot snap = find(req.matches[1])->snapshot();
                 set_etag(res, snap.revision);
                 send_json(res, 200, lights_json(snap.lights, snap.revision));
               }));

    server.Post(R"(/api/sessions/([^/]+)/lights)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const auto s = find(req.matches[1]);
                  const SgLight light = parse_light(req.body);
                  std::unique_lock lock(s->mu);
                  check_if_match(req, *s);
                  const int id = s->next_id;
                  s->lights.insert(id, light);
                  ++s->next_id;
                  commit(*s, false);
                  set_etag(res, s->revision);
                  send_json(res, 201, light_json(id, light, s->revision));
                }));

    server.Get(R"(/api/sessions/([^/]+)/lights/(-?\d+))",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 const Snapshot snap = find(req.matches[1])->snapshot();
                 const int id = light_id(req.matches[2]);
                 set_etag(res, snap.revision);
                 send_json(res, 200, light_json(id, snap.lights.get(id), snap.revision));
               }));

    server.Patch(R"(/api/sessions/([^/]+)/lights/(-?\d+))",
                 guarded([this](const httplib::Request& req, httplib::Response& res) {
                   const auto s = find(req.matches[1]);
                   const int id = light_id(req.matches[2]);
                   const LightPatch patch = parse_light_patch(req.body);
                   std::unique_lock lock(s->mu);
                   check_if_match(req, *s);
                   SgLight light = s->lights.get(id);
                   if (patch.color) light.color = *patch.color;
                   if (patch.direction) light.direction = Direction::normalize(*patch.direction);
                   if (patch.sigma) light.sigma = *patch.sigma;
                   if (patch.scale) light.color = *patch.scale * light.color;
                   validate_light(light);
                   s->lights.get(id) = light;
                   commit(*s, false);
                   set_etag(res, s->revision);
                   send_json(res, 200, light_json(id, light, s->revision));
                 }));

    server.Delete(R"(/api/sessions/([^/]+)/lights/(-?\d+))",
                  guarded([this](const httplib::Request& req, httplib::Response& res) {
                    const auto s = find(req.matches[1]);
                    const int id = light_id(req.matches[2]);
                    std::unique_lock lock(s->mu);
                    check_if_match(req, *s);
                    s->lights.remove(id);
                    commit(*s, false);
                    set_etag(res, s->revision);
                    res.status = 204;
                  }));

    server.Get(R"(/api/sessions/([^/]+)/preview)",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 const auto s = find(req.matches[1]);
                 const int width = query_int(req, "width", 512, 16, 4096);
                 if (width % 2 != 0) throw ValidationError("width must be even", "width");
                 const double exposure = query_positive(req, "exposure", 1.0);
                 const double gamma = query_positive(req, "gamma", 2.2);
                 const Snapshot snap = s->snapshot();
                 const std::string key = "preview/" + std::to_string(width) + "/" +
                                         json(exposure).dump() + "/" + json(gamma).dump();
                 const auto png = cached(*s, snap.revision, key, [&] {
                   const EnvMap env = resample(composite(snap), width / 2);
                   return encode_png(tonemap(env.image(), exposure, gamma));
                 });
                 set_etag(res, snap.revision);
                 res.set_content(reinterpret_cast<const char*>(png->data()), png->size(),
                                 "image/png");
               }));

    server.Get(R"(/api/sessions/([^/]+)/render)",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 const auto s = find(req.matches[1]);
                 const std::string scene_name =
                     req.has_param("scene") ? req.get_param_value("scene") : "spheres9_top";
                 const SceneSpec scene = preset_scene(scene_name);
                 RenderConfig cfg;
                 cfg.width = query_int(req, "width", 256, 8, 2048);
                 cfg.height = query_int(req, "height", cfg.width, 8, 2048);
                 cfg.exposure = query_positive(req, "exposure", 1.0);
                 cfg.gamma = query_positive(req, "gamma", 2.2);
                 const Snapshot snap = s->snapshot();
                 const std::string key = "render/" + scene_name + "/" +
                                         std::to_string(cfg.width) + "x" +
                                         std::to_string(cfg.height) + "/" +
                                         json(cfg.exposure).dump() + "/" + json(cfg.gamma).dump();
                 const auto png = cached(*s, snap.revision, key, [&] {
                   const Image hdr = render_scene(composite(snap), scene, cfg);
                   return encode_png(tonemap(hdr, cfg.exposure, cfg.gamma));
                 });
                 set_etag(res, snap.revision);
                 res.set_content(reinterpret_cast<const char*>(png->data()), png->size(),
                                 "image/png");
               }));

    server.Get(R"(/api/sessions/([^/]+)/envmap\.hdr)",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 const Snapshot snap = find(req.matches[1])->snapshot();
                 const Bytes hdr = encode_hdr(composite(snap).image());
                 set_etag(res, snap.revision);
                 res.set_content(reinterpret_cast<const char*>(hdr.data()), hdr.size(),
                                 "image/vnd.radiance");
               }));
  }

  static int light_id(const std::string& text) {
    int id = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), id);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
      throw NotFoundError("unknown light '" + text + "'");
    }
    return id;
  }
};

LightService::LightService(ServiceConfig config)
    : impl_(std::make_unique<Impl>(std::move(config))) {}

LightService::~LightService() { stop(); }

int LightService::bind() {
  if (impl_->bound_port >= 0) return impl_->bound_port;
  const ServiceConfig& c = impl_->config;
  if (c.port == 0) {
    impl_->bound_port = impl_->server.bind_to_any_port(c.host);
  } else if (impl_->server.bind_to_port(c.host, c.port)) {
    impl_->bound_port = c.port;
  }
  if (impl_->bound_port <= 0) {
    impl_->bound_port = -1;
    throw IoError("cannot bind " + c.host + ":" + std::to_string(c.port));
  }
  return impl_->bound_port;
}

void LightService::listen() {
  bind();
  impl_->server.listen_after_bind();
}

int LightService::start() {
  const int p = bind();
  impl_->server_thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return p;
}

void LightService::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->server_thread.joinable()) impl_->server_thread.join();
}

int LightService::port() const { return impl_->bound_port; }

std::size_t LightService::session_count() const {
  std::shared_lock lock(impl_->registry_mu);
  return impl_->sessions.size();
}

std::size_t LightService::evict_idle(std::chrono::system_clock::time_point now) {
  return impl_->evict(now);
}

}  // namespace envlight
