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

#include "cli.hpp"

#include <cmath>
#include <iostream>
#include <numbers>
#include <sstream>

#include "CLI11.hpp"
#include "envlight/errors.hpp"
#include "envlight/geometry.hpp"
#include "envlight/hdr_io.hpp"
#include "envlight/metrics.hpp"
#include "envlight/render.hpp"
#include "envlight/service.hpp"
#include "envlight/sg_fit.hpp"
#include "envlight/sg_model.hpp"

namespace envlight::cli {

namespace {

namespace fs = std::filesystem;

constexpr double kDeg = std::numbers::pi / 180.0;

std::string lower_ext(const fs::path& p) {
  std::string ext = p.extension().string();
  for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext;
}

std::string read_text(const fs::path& path) {
  const Bytes b = read_file(path);
  return {b.begin(), b.end()};
}

void write_text(const fs::path& path, const std::string& text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void emit(const std::string& out_path, const std::string& text, std::ostream& out) {
  if (out_path.empty() || out_path == "-") {
    out << text;
  } else {
    write_text(out_path, text);
  }
}

/// .hdr or .pfm by extension.
void write_hdr_image(const fs::path& path, const Image& image) {
  const std::string ext = lower_ext(path);
  if (ext == ".pfm") {
    write_pfm(path, image);
  } else if (ext == ".hdr") {
    write_hdr(path, image);
  } else {
    throw ValidationError("output must end in .hdr or .pfm: " + path.string(), "out");
  }
}

SgSet load_lights(const fs::path& path) { return parse_lights(read_text(path)); }

template <std::size_t N>
std::array<double, N> parse_list(const std::string& text, const char* field) {
  std::array<double, N> v{};
  std::stringstream ss(text);
  std::string item;
  std::size_t n = 0;
  while (std::getline(ss, item, ',')) {
    if (n == N) break;
    try {
      std::size_t used = 0;
      v[n] = std::stod(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ValidationError(std::string(field) + ": '" + item + "' is not a number", field);
    }
    ++n;
  }
  if (n != N || ss.rdbuf()->in_avail() > 0) {
    throw ValidationError(std::string(field) + " expects " + std::to_string(N) +
                              " comma-separated numbers",
                          field);
  }
  return v;
}

std::vector<double> parse_numbers(const std::string& text, const char* field) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ValidationError(std::string(field) + ": '" + item + "' is not a number", field);
    }
  }
  if (v.empty()) throw ValidationError(std::string(field) + " is empty", field);
  return v;
}

struct FitFlags {
  std::string input, out, trace;
  FitOptions opts;
};

void add_fit_flags(CLI::App* cmd, FitFlags& f) {
  cmd->add_option("--input", f.input, "HDR panorama (.hdr or .pfm)")->required();
  cmd->add_option("--out", f.out, "Lights JSON (default: stdout)");
  cmd->add_option("--trace", f.trace, "Write the optimizer trace as JSON");
  FitOptions& o = f.opts;
  cmd->add_option("--height", o.target_height, "Fitting resolution (panorama height)")
      ->capture_default_str();
  cmd->add_option("--blur-sigma", o.blur_sigma, "Highlight blur in pixels")
      ->capture_default_str();
  cmd->add_option("--threshold-pct", o.threshold_percentile, "Highlight percentile")
      ->capture_default_str();
  cmd->add_option("--init-sigma", o.init_sigma, "Initial bandwidth")->capture_default_str();
  cmd->add_option("--lambda1", o.lambda1, "Data term weight")->capture_default_str();
  cmd->add_option("--lr", o.learning_rate, "Learning rate")->capture_default_str();
  cmd->add_option("--plateau", o.plateau_epochs, "Epochs without improvement before decay")
      ->capture_default_str();
  cmd->add_option("--lr-decay", o.lr_decay_factor, "Learning-rate divisor")
      ->capture_default_str();
  cmd->add_option("--max-epochs", o.max_epochs, "Epoch limit")->capture_default_str();
  cmd->add_option("--min-lr", o.min_lr, "Stop below this learning rate")->capture_default_str();
  cmd->add_option("--nms-interval", o.nms_interval, "Epochs between light fusion passes")
      ->capture_default_str();
  cmd->add_option("--max-lights", o.max_lights, "Light budget")->capture_default_str();
  cmd->add_option("--lambda-unit", o.lambda_unit, "Axis length penalty")->capture_default_str();
  cmd->add_option("--lambda-neg", o.lambda_neg, "Negative color penalty")->capture_default_str();
  cmd->add_option("--lambda-band", o.lambda_band, "Bandwidth range penalty")
      ->capture_default_str();
  cmd->add_option("--lambda-sat", o.lambda_sat, "Saturation penalty")->capture_default_str();
}

std::string trace_json(const FitTrace& t) {
  std::ostringstream s;
  s.precision(17);
  auto list = [&](const char* name, const auto& v) {
    s << "\"" << name << "\":[";
    for (std::size_t i = 0; i < v.size(); ++i) s << (i ? "," : "") << v[i];
    s << "]";
  };
  s << "{\"termination\":\"" << termination_name(t.termination) << "\",";
  list("loss", t.loss);
  s << ",";
  list("best_loss", t.best_loss);
  s << ",";
  list("learning_rate", t.learning_rate);
  s << ",";
  list("light_count", t.light_count);
  s << ",";
  list("fuse_epochs", t.fuse_epochs);
  s << "}\n";
  return s.str();
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const IoError*>(&e)) return kExitIo;
  if (dynamic_cast<const std::filesystem::filesystem_error*>(&e)) return kExitIo;
  return kExitValidation;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spherical gaussian lighting toolkit"};
  app.name(args.empty() ? "envlight" : fs::path(args[0]).filename().string());
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  std::function<void()> action;

  // fit
  FitFlags fit_flags;
  auto* fit_cmd = app.add_subcommand("fit", "Fit spherical gaussian lights to a panorama");
  add_fit_flags(fit_cmd, fit_flags);
  fit_cmd->callback([&] {
    action = [&] {
      const EnvMap env = read_env(fit_flags.input);
      const FitResult r = fit(env, fit_flags.opts);
      emit(fit_flags.out, serialize_lights(r.lights) + "\n", out);
      if (!fit_flags.trace.empty()) write_text(fit_flags.trace, trace_json(r.trace));
      err << "fit: " << r.lights.size() << " lights, " << r.trace.loss.size() << " epochs, "
          << termination_name(r.trace.termination) << "\n";
    };
  });

  // render-sg
  std::string rs_lights, rs_out;
  int rs_height = 128;
  auto* rs_cmd = app.add_subcommand("render-sg", "Render a light set to an environment map");
  rs_cmd->add_option("--lights", rs_lights, "Lights JSON")->required();
  rs_cmd->add_option("--height", rs_height, "Panorama height")->capture_default_str();
  rs_cmd->add_option("--out", rs_out, "Output .hdr or .pfm")->required();
  rs_cmd->callback([&] {
    action = [&] {
      write_hdr_image(rs_out, render_sg_map(load_lights(rs_lights), rs_height).image());
    };
  });

  // composite
  std::string cp_texture, cp_lights, cp_out;
  auto* cp_cmd = app.add_subcommand("composite", "Add rendered lights onto a texture panorama");
  cp_cmd->add_option("--texture", cp_texture, "Texture panorama")->required();
  cp_cmd->add_option("--lights", cp_lights, "Lights JSON")->required();
  cp_cmd->add_option("--out", cp_out, "Output .hdr or .pfm")->required();
  cp_cmd->callback([&] {
    action = [&] {
      const EnvMap texture = read_env(cp_texture);
      const EnvMap light_map = render_sg_map(load_lights(cp_lights), texture.height());
      write_hdr_image(cp_out, relight_composite(texture, light_map).image());
    };
  });

  // render-scene
  std::string sc_env, sc_scene = "spheres9_top", sc_out;
  RenderConfig sc_cfg;
  auto* sc_cmd = app.add_subcommand("render-scene", "Render an evaluation scene under a panorama");
  sc_cmd->add_option("--env", sc_env, "Environment panorama")->required();
  sc_cmd->add_option("--scene", sc_scene, "spheres9_top or spheres3_front")
      ->capture_default_str();
  sc_cmd->add_option("--out", sc_out, "Output .png (tonemapped), .hdr or .pfm")->required();
  sc_cmd->add_option("--width", sc_cfg.width)->capture_default_str();
  sc_cmd->add_option("--height", sc_cfg.height)->capture_default_str();
  sc_cmd->add_option("--exposure", sc_cfg.exposure)->capture_default_str();
  sc_cmd->add_option("--gamma", sc_cfg.gamma)->capture_default_str();
  sc_cmd->add_option("--shade-height", sc_cfg.shade_env_height, "Diffuse gather resolution")
      ->capture_default_str();
  sc_cmd->add_option("--mirror-depth", sc_cfg.mirror_depth)->capture_default_str();
  sc_cmd->add_flag("--sphere-shadows", sc_cfg.sphere_shadows,
                   "Let spheres shadow each other, not only the plane");
  sc_cmd->callback([&] {
    action = [&] {
      const SceneSpec scene = preset_scene(sc_scene);
      sc_cfg.validate();
      const Image hdr = render_scene(read_env(sc_env), scene, sc_cfg);
      if (lower_ext(sc_out) == ".png") {
        export_png(tonemap(hdr, sc_cfg.exposure, sc_cfg.gamma), sc_out);
      } else {
        write_hdr_image(sc_out, hdr);
      }
    };
  });

  // edit
  std::string ed_lights, ed_op, ed_out, ed_color, ed_direction;
  int ed_id = -1;
  double ed_sigma = 0.45, ed_factor = 1.0;
  auto* ed_cmd = app.add_subcommand("edit", "Apply one edit to a light set");
  ed_cmd->add_option("--lights", ed_lights, "Lights JSON")->required();
  ed_cmd->add_option("--op", ed_op, "add, remove, move, color, sigma or scale")
      ->required()
      ->check(CLI::IsMember({"add", "remove", "move", "color", "sigma", "scale"}));
  ed_cmd->add_option("--id", ed_id, "Target light id");
  auto* ed_color_opt = ed_cmd->add_option("--color", ed_color, "r,g,b");
  auto* ed_dir_opt = ed_cmd->add_option("--direction", ed_direction, "x,y,z (normalized)");
  auto* ed_sigma_opt = ed_cmd->add_option("--sigma", ed_sigma, "Bandwidth");
  auto* ed_factor_opt = ed_cmd->add_option("--factor", ed_factor, "Intensity scale");
  ed_cmd->add_option("--out", ed_out, "Output JSON (default: stdout)");
  ed_cmd->callback([&] {
    auto need = [&](CLI::Option* opt) {
      if (opt->count() == 0) {
        throw CLI::RequiredError("--op " + ed_op + " needs " + opt->get_name());
      }
    };
    auto need_id = [&] {
      if (ed_id < 0) throw CLI::RequiredError("--op " + ed_op + " needs --id");
    };
    if (ed_op == "add") {
      need(ed_color_opt);
      need(ed_dir_opt);
    } else {
      need_id();
      if (ed_op == "move") need(ed_dir_opt);
      if (ed_op == "color") need(ed_color_opt);
      if (ed_op == "sigma") need(ed_sigma_opt);
      if (ed_op == "scale") need(ed_factor_opt);
    }
    action = [&] {
      const SgSet set = load_lights(ed_lights);
      EditOp op;
      const auto vec = [&](const char* f) {
        const auto v = parse_list<3>(ed_direction, f);
        return Vec3{v[0], v[1], v[2]};
      };
      const auto rgb = [&](const char* f) {
        const auto v = parse_list<3>(ed_color, f);
        return Rgb{v[0], v[1], v[2]};
      };
      if (ed_op == "add") {
        const Vec3 d = vec("direction");
        if (!(norm(d) > 0.0)) throw ValidationError("direction must be non-zero", "direction");
        op = edit::Add{{rgb("color"), Direction::normalize(d), ed_sigma}};
      } else if (ed_op == "remove") {
        op = edit::Remove{ed_id};
      } else if (ed_op == "move") {
        op = edit::SetDirection{ed_id, vec("direction")};
      } else if (ed_op == "color") {
        op = edit::SetColor{ed_id, rgb("color")};
      } else if (ed_op == "sigma") {
        op = edit::SetBandwidth{ed_id, ed_sigma};
      } else {
        op = edit::ScaleIntensity{ed_id, ed_factor};
      }
      emit(ed_out, serialize_lights(apply_edit(set, op)) + "\n", out);
    };
  });

  // eval
  std::string ev_manifest, ev_out;
  auto* ev_cmd = app.add_subcommand("eval", "Evaluate lighting pairs listed in a manifest");
  ev_cmd->add_option("--manifest", ev_manifest, "Manifest JSON")->required();
  ev_cmd->add_option("--out", ev_out, "CSV report (default: manifest output, else stdout)");
  ev_cmd->callback([&] {
    action = [&] {
      const EvalManifest m = read_manifest(ev_manifest);
      const std::string csv = run_manifest(m);
      emit(!ev_out.empty() ? ev_out : m.output.string(), csv, out);
    };
  });

  // crop
  std::string cr_pano, cr_azimuths = "0,120,240", cr_out, cr_format = "hdr";
  double cr_fov = 60.0, cr_elevation = 0.0, cr_exposure = 1.0, cr_gamma = 2.2;
  int cr_size = 256;
  auto* cr_cmd = app.add_subcommand("crop", "Extract pinhole views from a panorama");
  cr_cmd->add_option("--pano", cr_pano, "Panorama")->required();
  cr_cmd->add_option("--azimuths", cr_azimuths, "Comma-separated degrees")
      ->capture_default_str();
  cr_cmd->add_option("--fov", cr_fov, "Horizontal field of view in degrees")
      ->capture_default_str();
  cr_cmd->add_option("--elevation", cr_elevation, "Degrees")->capture_default_str();
  cr_cmd->add_option("--size", cr_size, "Square crop size in pixels")->capture_default_str();
  cr_cmd->add_option("--format", cr_format, "hdr, pfm or png")
      ->check(CLI::IsMember({"hdr", "pfm", "png"}))
      ->capture_default_str();
  cr_cmd->add_option("--exposure", cr_exposure, "PNG only")->capture_default_str();
  cr_cmd->add_option("--gamma", cr_gamma, "PNG only")->capture_default_str();
  cr_cmd->add_option("--out", cr_out, "Output directory")->required();
  cr_cmd->callback([&] {
    action = [&] {
      if (cr_size < 1) throw ValidationError("size must be positive", "size");
      const std::vector<double> az = parse_numbers(cr_azimuths, "azimuths");
      const EnvMap pano = read_env(cr_pano);
      const auto views = extract_views(pano, az, cr_elevation * kDeg, cr_fov * kDeg, cr_size);
      std::error_code ec;
      fs::create_directories(cr_out, ec);
      if (ec) throw IoError("cannot create '" + cr_out + "': " + ec.message());
      for (std::size_t i = 0; i < views.size(); ++i) {
        std::ostringstream name;
        name << "view_" << i << "_az" << az[i] << "." << cr_format;
        const fs::path path = fs::path(cr_out) / name.str();
        if (cr_format == "png") {
          export_png(tonemap(views[i], cr_exposure, cr_gamma), path);
        } else {
          write_hdr_image(path, views[i]);
        }
        out << path.string() << "\n";
      }
    };
  });

  // ingest
  std::string in_dir, in_pattern = "*", in_out;
  auto* in_cmd = app.add_subcommand("ingest", "Index the HDR files in a directory");
  in_cmd->add_option("--dir", in_dir, "Directory")->required();
  in_cmd->add_option("--pattern", in_pattern, "Filename glob")->capture_default_str();
  in_cmd->add_option("--out", in_out, "Index JSON (default: stdout)");
  in_cmd->callback([&] {
    action = [&] { emit(in_out, ingest_dir(in_dir, in_pattern).to_json() + "\n", out); };
  });

  // serve
  ServiceConfig sv;
  std::string sv_data_dir;
  double sv_max_upload_mb = 256.0;
  auto* sv_cmd = app.add_subcommand("serve", "Run the light editing HTTP service");
  sv_cmd->add_option("--host", sv.host)->capture_default_str();
  sv_cmd->add_option("--port", sv.port)->capture_default_str();
  sv_cmd->add_option("--data-dir", sv_data_dir, "Persist sessions here");
  sv_cmd->add_option("--max-upload-mb", sv_max_upload_mb)->capture_default_str();
  sv_cmd->add_option("--cors-origin", sv.cors_origin)->capture_default_str();
  sv_cmd->callback([&] {
    action = [&] {
      if (!(sv_max_upload_mb > 0.0)) throw ValidationError("max-upload-mb must be positive");
      sv.data_dir = sv_data_dir;
      sv.max_upload_bytes = static_cast<std::size_t>(sv_max_upload_mb * 1024 * 1024);
      LightService service(sv);
      const int port = service.bind();
      err << "listening on http://" << sv.host << ":" << port << "\n";
      service.listen();
    };
  });

  std::vector<std::string> argv(args.begin() + (args.empty() ? 0 : 1), args.end());
  std::reverse(argv.begin(), argv.end());
  try {
    app.parse(argv);
  } catch (const CLI::Success&) {
    CLI::App* shown = &app;
    for (CLI::App* sub : app.get_subcommands()) shown = sub;
    out << shown->help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    CLI::App* shown = &app;
    for (CLI::App* sub : app.get_subcommands()) shown = sub;
    err << shown->help();
    return kExitUsage;
  }

  try {
    action();
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

}  // namespace envlight::cli
