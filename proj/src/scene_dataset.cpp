#include "nerfsteg/scene_dataset.hpp"

#include <cmath>
#include <json.hpp>

namespace nerfsteg {

using nlohmann::json;

void SceneSpec::validate() const {
  for (std::size_t i = 0; i < spheres.size(); ++i) {
    const auto& s = spheres[i];
    const std::string tag = "scene: sphere " + std::to_string(i);
    if (!(s.radius > 0.0)) throw std::invalid_argument(tag + " has non-positive radius");
    if (!(s.density >= 0.0)) throw std::invalid_argument(tag + " has negative density");
    for (int c = 0; c < 3; ++c)
      if (std::abs(s.center[c]) + s.radius > 1.5)
        throw std::invalid_argument(tag + " extends outside the [-1.5, 1.5]^3 bounds");
  }
}

SceneSpec default_scene() {
  SceneSpec scene;
  scene.spheres = {
      {Vec3(0.0, 0.0, 0.0), 0.5, {0.9f, 0.2f, 0.2f}, 40.0},
      {Vec3(0.6, 0.1, 0.3), 0.3, {0.2f, 0.9f, 0.2f}, 40.0},
      {Vec3(-0.5, -0.2, 0.4), 0.25, {0.2f, 0.3f, 0.9f}, 40.0},
  };
  scene.background = {1.0f, 1.0f, 1.0f};
  return scene;
}

FieldSample procedural_field(const SceneSpec& scene, const Vec3& x) {
  for (const auto& s : scene.spheres)
    if ((x - s.center).norm() <= s.radius) return {s.rgb, s.density};
  return {scene.background, 0.0};
}

void ProceduralSource::evaluate(std::span<const float> points, std::span<const float>, std::span<float> rgb,
                                std::span<float> sigma) const {
  const std::size_t n = sigma.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 x(points[3 * i], points[3 * i + 1], points[3 * i + 2]);
    const auto s = procedural_field(scene_, x);
    sigma[i] = static_cast<float>(s.sigma);
    for (std::size_t c = 0; c < 3; ++c) rgb[3 * i + c] = s.rgb[c];
  }
}

RenderSettings procedural_render_settings(const SceneSpec& scene) {
  RenderSettings s;
  s.n_coarse = 128;
  s.n_fine = 0;
  s.jitter = false;
  s.background = scene.background;
  return s;
}

std::vector<std::pair<double, double>> training_view_angles(const ViewSamplingOptions& options) {
  Rng rng(options.seed);
  std::vector<std::pair<double, double>> angles;
  angles.reserve(options.n_views);
  for (std::size_t v = 0; v < options.n_views; ++v) {
    const double theta = rng.uniform(-180.0, 180.0);
    const double phi = rng.uniform(-90.0, -10.0);
    angles.emplace_back(theta, phi);
  }
  return angles;
}

std::vector<PosedImage> generate_training_views(const SceneSpec& scene, const ViewSamplingOptions& options) {
  if (options.n_views == 0) throw std::invalid_argument("generate_training_views: n_views must be at least 1");
  scene.validate();
  const ProceduralSource source(scene);
  const auto settings = procedural_render_settings(scene);
  const double focal = options.focal_px > 0.0 ? options.focal_px : default_focal(options.width);
  std::vector<PosedImage> views;
  for (const auto& [theta, phi] : training_view_angles(options)) {
    ViewKey key;
    key.theta_deg = theta;
    key.phi_deg = phi;
    key.radius = options.radius;
    key.focal_px = focal;
    key.width = options.width;
    key.height = options.height;
    PosedImage view;
    view.image = render_image(source, nullptr, key, settings);
    view.camera_to_world = pose_from_angles(theta, phi, options.radius);
    view.focal_px = focal;
    views.push_back(std::move(view));
  }
  return views;
}

namespace {

const json& require_field(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) throw FormatError(where + ": missing field '" + key + "'");
  return obj.at(key);
}

}  // namespace

std::vector<PosedImage> load_nerf_synthetic(const std::filesystem::path& dir, const LoadOptions& options) {
  if (options.downscale == 0) throw std::invalid_argument("load_nerf_synthetic: downscale must be positive");
  const auto transforms = dir / ("transforms_" + options.split + ".json");
  json doc;
  try {
    doc = json::parse(read_file(transforms));
  } catch (const json::exception& e) {
    throw FormatError(transforms.string() + ": malformed JSON (" + e.what() + ")");
  } catch (const std::runtime_error& e) {
    throw FormatError(transforms.string() + ": " + e.what());
  }
  const std::string where = transforms.filename().string();
  const auto& angle = require_field(doc, "camera_angle_x", where);
  if (!angle.is_number()) throw FormatError(where + ": field 'camera_angle_x' must be a number");
  const double camera_angle_x = angle.get<double>();
  const auto& frames = require_field(doc, "frames", where);
  if (!frames.is_array() || frames.empty()) throw FormatError(where + ": field 'frames' must be a non-empty array");

  std::vector<PosedImage> out;
  out.reserve(frames.size());
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const std::string fw = where + ": frames[" + std::to_string(f) + "]";
    const auto& frame = frames[f];
    const auto& fp = require_field(frame, "file_path", fw);
    const auto& tm = require_field(frame, "transform_matrix", fw);
    if (!fp.is_string()) throw FormatError(fw + ".file_path must be a string");
    if (!tm.is_array() || tm.size() != 4) throw FormatError(fw + ".transform_matrix must be 4x4");
    PosedImage view;
    for (int r = 0; r < 4; ++r) {
      if (!tm[r].is_array() || tm[r].size() != 4) throw FormatError(fw + ".transform_matrix must be 4x4");
      for (int c = 0; c < 4; ++c) {
        if (!tm[r][c].is_number()) throw FormatError(fw + ".transform_matrix has a non-numeric entry");
        view.camera_to_world(r, c) = tm[r][c].get<double>();
      }
    }
    std::filesystem::path img_path = dir / fp.get<std::string>();
    if (!img_path.has_extension()) img_path += ".png";
    if (!std::filesystem::exists(img_path))
      throw FormatError(fw + ": image/pose mismatch, image " + img_path.string() + " does not exist");
    Tensor img = read_image(img_path, options.background);
    std::size_t th = img.dim(1) / options.downscale, tw = img.dim(2) / options.downscale;
    if (options.target_width > 0) {
      tw = options.target_width;
      th = static_cast<std::size_t>(
          std::lround(static_cast<double>(img.dim(1)) * static_cast<double>(tw) / static_cast<double>(img.dim(2))));
    }
    if (th == 0 || tw == 0) throw FormatError(fw + ": image too small for the requested downscale");
    view.image = resize_bilinear(img, th, tw);
    view.focal_px = 0.5 * static_cast<double>(tw) / std::tan(0.5 * camera_angle_x);
    out.push_back(std::move(view));
  }
  return out;
}

void save_nerf_synthetic(const std::filesystem::path& dir, const std::vector<PosedImage>& views,
                         const std::string& split) {
  if (views.empty()) throw std::invalid_argument("save_nerf_synthetic: no views");
  std::filesystem::create_directories(dir / split);
  const double width = static_cast<double>(views.front().width());
  json doc;
  doc["camera_angle_x"] = 2.0 * std::atan(0.5 * width / views.front().focal_px);
  doc["frames"] = json::array();
  for (std::size_t v = 0; v < views.size(); ++v) {
    const std::string rel = "./" + split + "/r_" + std::to_string(v);
    write_png(dir / (rel + ".png"), views[v].image);
    json m = json::array();
    for (int r = 0; r < 4; ++r) {
      json row = json::array();
      for (int c = 0; c < 4; ++c) row.push_back(views[v].camera_to_world(r, c));
      m.push_back(row);
    }
    doc["frames"].push_back({{"file_path", rel}, {"transform_matrix", m}});
  }
  write_file(dir / ("transforms_" + split + ".json"), doc.dump(2));
}

}  // namespace nerfsteg
