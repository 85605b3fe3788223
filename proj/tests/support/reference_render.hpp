#pragma once

// Straight-line single-ray renderer of the analytic scene, written without
// the batched machinery, used as an oracle.

#include <algorithm>
#include <cmath>

#include "nerfsteg/scene_dataset.hpp"

namespace nerfsteg::testing {

inline Tensor reference_render(const SceneSpec& scene, const ViewKey& key, std::size_t samples = 128) {
  const Mat4 c2w = pose_from_angles(key.theta_deg, key.phi_deg, key.radius);
  const Vec3 origin = c2w.block<3, 1>(0, 3);
  Tensor img({3, key.height, key.width});
  const std::size_t plane = key.height * key.width;
  for (std::size_t row = 0; row < key.height; ++row)
    for (std::size_t col = 0; col < key.width; ++col) {
      const Vec3 cam((static_cast<double>(col) + 0.5 - 0.5 * static_cast<double>(key.width)) / key.focal_px,
                     -(static_cast<double>(row) + 0.5 - 0.5 * static_cast<double>(key.height)) / key.focal_px,
                     -1.0);
      const Vec3 dir = (c2w.block<3, 3>(0, 0) * cam).normalized();
      const double bin = (key.far - key.near) / static_cast<double>(samples);
      double trans = 1.0, acc[3] = {0, 0, 0};
      for (std::size_t i = 0; i < samples; ++i) {
        const double t = key.near + (static_cast<double>(i) + 0.5) * bin;
        const double t_next = i + 1 < samples ? key.near + (static_cast<double>(i) + 1.5) * bin : key.far;
        const Vec3 p = origin + t * dir;
        // Points travel through the renderer as float.
        const Vec3 pf(static_cast<float>(p[0]), static_cast<float>(p[1]), static_cast<float>(p[2]));
        const auto s = procedural_field(scene, pf);
        const double alpha = 1.0 - std::exp(-static_cast<double>(static_cast<float>(s.sigma)) * (t_next - t));
        for (int c = 0; c < 3; ++c) acc[c] += trans * alpha * s.rgb[c];
        trans *= 1.0 - alpha;
      }
      for (int c = 0; c < 3; ++c)
        img[c * plane + row * key.width + col] =
            std::clamp(static_cast<float>(acc[c] + trans * scene.background[c]), 0.0f, 1.0f);
    }
  return img;
}

}  // namespace nerfsteg::testing
