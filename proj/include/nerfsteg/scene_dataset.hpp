#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nerfsteg/image_io.hpp"
#include "nerfsteg/volume_renderer.hpp"

namespace nerfsteg {

/// A training image with its camera.
struct PosedImage {
  Tensor image;  // 3 x H x W in [0, 1]
  Mat4 camera_to_world = Mat4::Identity();
  double focal_px = 0.0;

  std::size_t height() const { return image.dim(1); }
  std::size_t width() const { return image.dim(2); }
};

struct Sphere {
  Vec3 center = Vec3::Zero();
  double radius = 0.5;
  Color rgb{1.0f, 1.0f, 1.0f};
  double density = 40.0;
};

struct SceneSpec {
  std::vector<Sphere> spheres;
  Color background{1.0f, 1.0f, 1.0f};

  /// Radii positive, densities non-negative, every sphere within [-1.5, 1.5]^3.
  void validate() const;
};

/// Three overlapping coloured spheres on a white background.
SceneSpec default_scene();

struct FieldSample {
  Color rgb{};
  double sigma = 0.0;
};

/// Analytic field: the first sphere with |x - c| <= r decides colour and
/// density; empty space has the background colour and zero density.
FieldSample procedural_field(const SceneSpec& scene, const Vec3& x);

class ProceduralSource final : public RadianceSource {
 public:
  explicit ProceduralSource(SceneSpec scene) : scene_(std::move(scene)) {}
  void evaluate(std::span<const float> points, std::span<const float> dirs, std::span<float> rgb,
                std::span<float> sigma) const override;
  const SceneSpec& scene() const { return scene_; }

 private:
  SceneSpec scene_;
};

/// Settings used to photograph the analytic scene: 128 midpoint samples per
/// ray, no hierarchical pass.
RenderSettings procedural_render_settings(const SceneSpec& scene);

struct ViewSamplingOptions {
  std::size_t n_views = 20;
  std::size_t height = 64;
  std::size_t width = 64;
  double radius = 4.0;
  double focal_px = 0.0;  // 0 selects default_focal(width)
  std::uint64_t seed = 0;
};

/// Views with theta ~ U[-180, 180) and phi ~ U[-90, -10] degrees.
std::vector<PosedImage> generate_training_views(const SceneSpec& scene, const ViewSamplingOptions& options);

/// The angles drawn by generate_training_views for the same options.
std::vector<std::pair<double, double>> training_view_angles(const ViewSamplingOptions& options);

struct LoadOptions {
  std::size_t downscale = 1;     // integer reduction factor
  std::size_t target_width = 0;  // if non-zero, resize to this square size instead
  std::string split = "train";
  float background = 1.0f;
};

/// Reads a NeRF-Synthetic scene directory (transforms_<split>.json plus
/// images). Throws FormatError naming the offending field.
std::vector<PosedImage> load_nerf_synthetic(const std::filesystem::path& dir, const LoadOptions& options);

/// Writes views as a NeRF-Synthetic directory (PNG images, JSON poses).
/// All views must share one focal length and width.
void save_nerf_synthetic(const std::filesystem::path& dir, const std::vector<PosedImage>& views,
                         const std::string& split = "train");

}  // namespace nerfsteg
