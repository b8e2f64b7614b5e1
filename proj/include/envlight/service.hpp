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


#pragma once

// HTTP front end for interactive light editing. Each session holds a
// texture panorama and a light set; every mutation bumps the session
// revision, which clients can pass back in If-Match for optimistic
// concurrency. Preview and render endpoints work on a snapshot taken under a
// shared lock, so slow renders never block edits.

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <string>

#include "envlight/sg_fit.hpp"

namespace envlight {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;                        // 0 picks a free port
  std::filesystem::path data_dir;         // empty: memory only
  std::size_t max_upload_bytes = 256u << 20;
  std::chrono::seconds idle_timeout{24 * 3600};
  std::string cors_origin = "*";
  int default_texture_height = 64;        // texture of a fresh session
  FitOptions fit_defaults;
};

class LightService {
 public:
  explicit LightService(ServiceConfig config);
  ~LightService();
  LightService(const LightService&) = delete;
  LightService& operator=(const LightService&) = delete;

  /// Binds the socket and returns the port. Throws IoError on failure.
  int bind();
  /// Serves until stop(); binds first if needed.
  void listen();
  /// bind() plus listen() on a background thread.
  int start();
  void stop();
  int port() const;

  std::size_t session_count() const;
  /// Drops sessions idle since before `now - idle_timeout`, including their
  /// persisted files. Returns how many were dropped.
  std::size_t evict_idle(std::chrono::system_clock::time_point now);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace envlight
