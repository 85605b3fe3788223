#pragma once

// Orbit camera keys, pinhole ray generation and emission-absorption
// quadrature with coarse-to-fine importance sampling.

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "nerfsteg/random.hpp"
#include "nerfsteg/tensor.hpp"

namespace nerfsteg {

using Vec3 = Eigen::Vector3d;
using Mat4 = Eigen::Matrix4d;
using Color = std::array<float, 3>;

/// Focal length of the NeRF-Synthetic rig (camera_angle_x = 0.6911112) at `width`.
double default_focal(std::size_t width);

/// Camera viewpoint; the steganographic key.
struct ViewKey {
  double theta_deg = 30.0;
  double phi_deg = -30.0;
  double radius = 4.0;
  double focal_px = default_focal(64);
  std::size_t width = 64;
  std::size_t height = 64;
  double near = 2.0;
  double far = 6.0;

  /// Throws std::invalid_argument when an invariant is violated.
  void validate() const;

  ViewKey with_offset(double dtheta, double dphi) const;
};


struct Ray {
  Vec3 origin;
  Vec3 direction;  // unit length
  double t_near = 2.0;
  double t_far = 6.0;
};

/// Orbit pose: F * R_theta * R_phi * translate(0, 0, radius).
Mat4 pose_from_angles(double theta_deg, double phi_deg, double radius);

/// Ray through pixel (col, row) of a pinhole camera with pose `c2w`.
Ray pixel_ray(const Mat4& c2w, std::size_t col, std::size_t row, std::size_t width, std::size_t height,
              double focal_px, double t_near, double t_far);

/// Row-major height x width grid of rays.
std::vector<Ray> camera_rays(const ViewKey& key);

/// Anything that maps (point, view direction) to (rgb, density).
class RadianceSource {
 public:
  virtual ~RadianceSource() = default;
  /// points and dirs are N x 3 row-major; rgb is N x 3, sigma is N.
  virtual void evaluate(std::span<const float> points, std::span<const float> dirs, std::span<float> rgb,
                        std::span<float> sigma) const = 0;
};

struct RenderSettings {
  std::size_t n_coarse = 64;
  std::size_t n_fine = 64;
  Color background{1.0f, 1.0f, 1.0f};
  bool jitter = true;
  std::uint64_t seed = 0;
};

struct CompositeResult {
  Color rgb{};
  std::vector<double> weights;        // w_i = T_i * alpha_i
  std::vector<double> transmittance;  // T_i before sample i
  double residual = 1.0;              // transmittance left after the last sample
};

/// Quadrature along one ray. ts must be sorted; delta_i = t_{i+1} - t_i and
/// the last delta runs to t_far. Throws NumericError on non-finite inputs.
CompositeResult composite(std::span<const double> ts, std::span<const float> sigma, std::span<const float> rgb,
                          double t_far, const Color& background);

/// n sorted samples in [t_near, t_far]: one per equal-width bin, at a random
/// offset when `rng` is given, at the bin midpoint otherwise.
std::vector<double> stratified_samples(double t_near, double t_far, std::size_t n, Rng* rng);

/// Inverse-CDF sampling of the piecewise-constant density whose mass in
/// bin [t_i, t_{i+1}) (last bin ends at t_far) is proportional to weights[i].
/// Falls back to uniform over [t_near, t_far] when all weights are zero.
std::vector<double> hierarchical_resample(std::span<const double> coarse_ts, std::span<const double> weights,
                                          std::size_t n_fine, double t_near, double t_far, Rng& rng);

struct RayRender {
  Color rgb_coarse{};
  Color rgb_fine{};
  std::vector<double> coarse_ts;
  std::vector<double> coarse_weights;
};

/// Renders a single ray; `fine` may be null, in which case the coarse
/// source also shades the merged sample set. n_fine == 0 skips the fine pass.
RayRender render_ray(const RadianceSource& coarse, const RadianceSource* fine, const Ray& ray,
                     const RenderSettings& settings, Rng& rng);

/// Fine colour of every pixel, clamped to [0, 1]; returns a 3 x H x W image.
/// Pixel p draws its jitter from mix_seed(settings.seed, p).
Tensor render_image(const RadianceSource& coarse, const RadianceSource* fine, const ViewKey& key,
                    const RenderSettings& settings);

/// Batched differentiable compositing for training. sigma is [R*S x 1],
/// rgb is [R*S x 3] (ray-major), ts holds R*S sorted depths. Returns
/// [R x 3] colours; weights (R*S) are written to `weights_out` if non-null.
template <typename T>
BasicTensor<T> composite_rays(const BasicTensor<T>& sigma, const BasicTensor<T>& rgb, std::span<const double> ts,
                              std::span<const double> t_far, std::size_t samples_per_ray, const Color& background,
                              std::vector<double>* weights_out = nullptr);

}  // namespace nerfsteg
