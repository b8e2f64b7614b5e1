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

#include <gtest/gtest.h>

#include <filesystem>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "envlight/hdr_io.hpp"
#include "envlight/render.hpp"
#include "envlight/service.hpp"
#include "test_support.hpp"

namespace envlight {
namespace {

using namespace testing;
using nlohmann::json;
namespace fs = std::filesystem;

std::string to_string(const Bytes& b) { return {b.begin(), b.end()}; }

class ServiceTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("envlight_service_" +
            std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
  }
  void TearDown() override {
    service_.reset();
    fs::remove_all(dir_);
  }

  void start(ServiceConfig cfg = {}) {
    cfg.port = 0;
    cfg.default_texture_height = 16;
    service_ = std::make_unique<LightService>(cfg);
    port_ = service_->start();
  }

  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port_);
    c.set_read_timeout(120, 0);
    return c;
  }

  std::string create() {
    auto res = client().Post("/api/sessions");
    EXPECT_EQ(res->status, 201);
    return json::parse(res->body)["id"];
  }

  static std::string light_body(const Rgb& c, const Vec3& d, double sigma) {
    return json{{"color", {c.r, c.g, c.b}}, {"direction", {d.x, d.y, d.z}}, {"sigma", sigma}}
        .dump();
  }

  int add_light(const std::string& sid, const Rgb& c, const Vec3& d, double sigma) {
    auto res = client().Post("/api/sessions/" + sid + "/lights", light_body(c, d, sigma),
                             "application/json");
    EXPECT_EQ(res->status, 201) << res->body;
    return json::parse(res->body)["id"];
  }

  std::uint64_t revision(const std::string& sid) {
    auto res = client().Get("/api/sessions/" + sid);
    return json::parse(res->body)["revision"];
  }

  fs::path dir_;
  std::unique_ptr<LightService> service_;
  int port_ = 0;
};

TEST_F(ServiceTest, UploadFitEditFlow) {
  start();
  const std::string sid = create();
  EXPECT_EQ(sid.size(), 32u);

  Rng rng(1000);
  const SgSet gt = separated_lights(rng, 2, 60 * kDeg, 0.3, 0.4, 30 * kDeg, 1.5);
  const std::string hdr = to_string(encode_hdr(render_sg_map(gt, 64).image()));
  auto c = client();
  auto up = c.Post("/api/sessions/" + sid + "/panorama", hdr, "image/vnd.radiance");
  ASSERT_EQ(up->status, 200) << up->body;
  EXPECT_EQ(json::parse(up->body)["width"], 128);
  EXPECT_EQ(json::parse(up->body)["height"], 64);

  auto fitted = c.Post("/api/sessions/" + sid + "/fit",
                       R"({"target_height": 64, "max_epochs": 400})", "application/json");
  ASSERT_EQ(fitted->status, 200) << fitted->body;
  const json lights = json::parse(c.Get("/api/sessions/" + sid + "/lights")->body);
  EXPECT_EQ(lights["lights"].size(), 2u);
  std::set<int> ids;
  for (const auto& l : lights["lights"]) ids.insert(l["id"].get<int>());
  EXPECT_EQ(ids.size(), lights["lights"].size());
  EXPECT_EQ(lights["revision"], json::parse(fitted->body)["revision"]);

  const int k = *ids.begin();
  const std::string path = "/api/sessions/" + sid + "/lights/" + std::to_string(k);
  auto bad = c.Patch(path, R"({"sigma": -1})", "application/json");
  EXPECT_EQ(bad->status, 400);
  EXPECT_EQ(json::parse(bad->body)["field"], "sigma");
  auto neg = c.Patch(path, R"({"color": [-1, 0, 0]})", "application/json");
  EXPECT_EQ(neg->status, 400);
  EXPECT_EQ(c.Patch(path, R"({"wat": 1})", "application/json")->status, 400);

  auto moved = c.Patch(path, R"({"direction": [0, 0, 5]})", "application/json");
  ASSERT_EQ(moved->status, 200);
  EXPECT_EQ(json::parse(moved->body)["direction"], json::array({0.0, 0.0, 1.0}));

  EXPECT_EQ(c.Delete(path)->status, 204);
  EXPECT_EQ(c.Get(path)->status, 404);
  EXPECT_EQ(c.Delete(path)->status, 404);
  EXPECT_EQ(c.Get("/api/sessions/ffff/lights")->status, 404);
  EXPECT_EQ(c.Post("/api/sessions/" + sid + "/panorama", "junk", "text/plain")->status, 400);
}

TEST_F(ServiceTest, IfMatchRejectsStaleRevision) {
  start();
  const std::string sid = create();
  const int k = add_light(sid, {1, 1, 1}, {0, 1, 0}, 0.4);
  const std::string path = "/api/sessions/" + sid + "/lights/" + std::to_string(k);
  auto c = client();
  auto stale = c.Patch(path, {{"If-Match", "\"0\""}}, R"({"sigma": 0.5})", "application/json");
  EXPECT_EQ(stale->status, 409);
  EXPECT_EQ(json::parse(stale->body)["revision"], 1);
  auto fresh = c.Patch(path, {{"If-Match", "\"1\""}}, R"({"sigma": 0.5})", "application/json");
  EXPECT_EQ(fresh->status, 200);
  EXPECT_EQ(fresh->get_header_value("ETag"), "\"2\"");
  EXPECT_EQ(revision(sid), 2u);
}

TEST_F(ServiceTest, OversizedUploadIs413) {
  ServiceConfig cfg;
  cfg.max_upload_bytes = 1024;
  start(cfg);
  const std::string sid = create();
  auto res = client().Post("/api/sessions/" + sid + "/panorama", std::string(4096, 'x'),
                           "application/octet-stream");
  EXPECT_EQ(res->status, 413);
}

TEST_F(ServiceTest, ConcurrentPatchesAreSerialized) {
  start();
  const std::string a = create();
  const std::string b = create();
  const int ka = add_light(a, {1, 1, 1}, {0, 1, 0}, 0.4);
  const int kb = add_light(b, {0.5, 0.5, 0.5}, {1, 0, 0}, 0.3);
  const std::uint64_t rev_a = revision(a);
  const std::string lights_b = client().Get("/api/sessions/" + b + "/lights")->body;

  constexpr int kRequests = 100;
  std::atomic<int> accepted{0};
  std::vector<std::thread> workers;
  for (int t = 0; t < 10; ++t) {
    workers.emplace_back([&] {
      auto c = client();
      for (int i = 0; i < kRequests / 10; ++i) {
        auto res = c.Patch("/api/sessions/" + a + "/lights/" + std::to_string(ka),
                           R"({"scale": 1.01})", "application/json");
        if (res && res->status == 200) ++accepted;
      }
    });
  }
  for (auto& w : workers) w.join();

  EXPECT_EQ(accepted.load(), kRequests);
  EXPECT_EQ(revision(a), rev_a + accepted.load());
  // Every update multiplies by the same factor, so any serial order gives the
  // same color and a lost update would show up as a smaller one.
  double want = 1.0;
  for (int i = 0; i < kRequests; ++i) want = 1.01 * want;
  const json la = json::parse(
      client().Get("/api/sessions/" + a + "/lights/" + std::to_string(ka))->body);
  EXPECT_EQ(la["color"][0].get<double>(), want);
  EXPECT_EQ(client().Get("/api/sessions/" + b + "/lights")->body, lights_b);
  EXPECT_EQ(kb, 0);
}

TEST_F(ServiceTest, PreviewIsAFunctionOfState) {
  start();
  Rng rng(3);
  const std::string tex = to_string(encode_hdr(random_env(rng, 32, 2.0).image()));
  const std::string a = create();
  const std::string b = create();
  auto c = client();
  for (const auto& sid : {a, b}) {
    ASSERT_EQ(c.Post("/api/sessions/" + sid + "/panorama", tex, "image/vnd.radiance")->status,
              200);
  }
  const std::string query = "/preview?width=64&exposure=0.8&gamma=2.2";
  const auto bare = c.Get("/api/sessions/" + a + query);
  ASSERT_EQ(bare->status, 200);
  EXPECT_EQ(bare->get_header_value("Content-Type"), "image/png");
  const EnvMap texture = EnvMap::from_image(decode_hdr(Bytes(tex.begin(), tex.end())));
  EXPECT_EQ(bare->body, to_string(encode_png(tonemap(resample(texture, 32).image(), 0.8, 2.2))));

  for (const auto& sid : {a, b}) add_light(sid, {3, 2, 1}, {0.2, 0.9, 0.1}, 0.35);
  const auto pa = c.Get("/api/sessions/" + a + query);
  const auto pb = c.Get("/api/sessions/" + b + query);
  EXPECT_EQ(pa->body, pb->body);
  EXPECT_NE(pa->body, bare->body);
  EXPECT_EQ(c.Get("/api/sessions/" + a + query)->body, pa->body);
  EXPECT_EQ(c.Get("/api/sessions/" + a + "/preview?width=63")->status, 400);

  const auto render = c.Get("/api/sessions/" + a + "/render?scene=spheres3_front&width=32");
  ASSERT_EQ(render->status, 200);
  EXPECT_EQ(decode_png(Bytes(render->body.begin(), render->body.end())).width(), 32);
  EXPECT_EQ(c.Get("/api/sessions/" + a + "/render?scene=teapot")->status, 404);

  const auto env = c.Get("/api/sessions/" + a + "/envmap.hdr");
  ASSERT_EQ(env->status, 200);
  EXPECT_EQ(env->get_header_value("Content-Type"), "image/vnd.radiance");
  EXPECT_EQ(decode_hdr(Bytes(env->body.begin(), env->body.end())).height(), 32);
}

TEST_F(ServiceTest, CorsHeaders) {
  ServiceConfig cfg;
  cfg.cors_origin = "http://localhost:5173";
  start(cfg);
  auto c = client();
  const auto res = c.Post("/api/sessions");
  EXPECT_EQ(res->get_header_value("Access-Control-Allow-Origin"), "http://localhost:5173");
  const auto pre = c.Options("/api/sessions");
  EXPECT_EQ(pre->status, 204);
  EXPECT_NE(pre->get_header_value("Access-Control-Allow-Methods").find("PATCH"),
            std::string::npos);
}

TEST_F(ServiceTest, SessionsSurviveRestart) {
  ServiceConfig cfg;
  cfg.data_dir = dir_;
  start(cfg);
  const std::string sid = create();
  Rng rng(4);
  const std::string tex = to_string(encode_hdr(random_env(rng, 16, 1.0).image()));
  ASSERT_EQ(client().Post("/api/sessions/" + sid + "/panorama", tex, "image/vnd.radiance")->status,
            200);
  add_light(sid, {1, 2, 3}, {0, 0, 1}, 0.5);
  const std::string lights = client().Get("/api/sessions/" + sid + "/lights")->body;
  const std::string envmap = client().Get("/api/sessions/" + sid + "/envmap.hdr")->body;
  service_.reset();

  start(cfg);
  EXPECT_EQ(service_->session_count(), 1u);
  EXPECT_EQ(client().Get("/api/sessions/" + sid + "/lights")->body, lights);
  EXPECT_EQ(client().Get("/api/sessions/" + sid + "/envmap.hdr")->body, envmap);
  EXPECT_EQ(add_light(sid, {1, 1, 1}, {1, 0, 0}, 0.5), 1);

  EXPECT_EQ(service_->evict_idle(std::chrono::system_clock::now()), 0u);
  EXPECT_EQ(service_->evict_idle(std::chrono::system_clock::now() + std::chrono::hours(25)), 1u);
  EXPECT_EQ(service_->session_count(), 0u);
  EXPECT_EQ(client().Get("/api/sessions/" + sid)->status, 404);
  EXPECT_FALSE(fs::exists(dir_ / sid));
}

}  // namespace
}  // namespace envlight
