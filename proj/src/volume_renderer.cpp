#include "nerfsteg/volume_renderer.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace nerfsteg {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kSyntheticCameraAngleX = 0.6911112070083618;
constexpr std::size_t kRaysPerChunk = 256;

}  // namespace

void ViewKey::validate() const {
  if (!std::isfinite(theta_deg) || theta_deg < -180.0 || theta_deg > 180.0)
    throw std::invalid_argument("view key: theta_deg must lie in [-180, 180]");
  if (!std::isfinite(phi_deg) || phi_deg < -180.0 || phi_deg > 0.0)
    throw std::invalid_argument("view key: phi_deg must lie in [-180, 0]");
  if (!(radius > 0.0) || !std::isfinite(radius)) throw std::invalid_argument("view key: radius must be positive");
  if (!(focal_px > 0.0) || !std::isfinite(focal_px))
    throw std::invalid_argument("view key: focal_px must be positive");
  if (width < 8 || height < 8) throw std::invalid_argument("view key: width and height must be at least 8");
  if (!(near >= 0.0) || !(near < far)) throw std::invalid_argument("view key: require 0 <= near < far");
}

ViewKey ViewKey::with_offset(double dtheta, double dphi) const {
  ViewKey k = *this;
  k.theta_deg += dtheta;
  // Wrap theta back into [-180, 180]; phi is clipped to its valid range.
  while (k.theta_deg > 180.0) k.theta_deg -= 360.0;
  while (k.theta_deg < -180.0) k.theta_deg += 360.0;
  k.phi_deg = std::clamp(k.phi_deg + dphi, -180.0, 0.0);
  return k;
}

double default_focal(std::size_t width) {
  return 0.5 * static_cast<double>(width) / std::tan(0.5 * kSyntheticCameraAngleX);
}

Mat4 pose_from_angles(double theta_deg, double phi_deg, double radius) {
  const double th = theta_deg * kDegToRad, ph = phi_deg * kDegToRad;
  Mat4 translate = Mat4::Identity();
  translate(2, 3) = radius;
  Mat4 rot_phi = Mat4::Identity();
  rot_phi(1, 1) = std::cos(ph);
  rot_phi(1, 2) = -std::sin(ph);
  rot_phi(2, 1) = std::sin(ph);
  rot_phi(2, 2) = std::cos(ph);
  Mat4 rot_theta = Mat4::Identity();
  rot_theta(0, 0) = std::cos(th);
  rot_theta(0, 2) = -std::sin(th);
  rot_theta(2, 0) = std::sin(th);
  rot_theta(2, 2) = std::cos(th);
  Mat4 flip = Mat4::Zero();
  flip(0, 0) = -1.0;
  flip(1, 2) = 1.0;
  flip(2, 1) = 1.0;
  flip(3, 3) = 1.0;
  return flip * rot_theta * rot_phi * translate;
}

Ray pixel_ray(const Mat4& c2w, std::size_t col, std::size_t row, std::size_t width, std::size_t height,
              double focal_px, double t_near, double t_far) {
  const Vec3 cam((static_cast<double>(col) + 0.5 - 0.5 * static_cast<double>(width)) / focal_px,
                 -(static_cast<double>(row) + 0.5 - 0.5 * static_cast<double>(height)) / focal_px, -1.0);
  Ray ray;
  ray.direction = (c2w.block<3, 3>(0, 0) * cam).normalized();
  ray.origin = c2w.block<3, 1>(0, 3);
  ray.t_near = t_near;
  ray.t_far = t_far;
  return ray;
}

std::vector<Ray> camera_rays(const ViewKey& key) {
  key.validate();
  const Mat4 c2w = pose_from_angles(key.theta_deg, key.phi_deg, key.radius);
  std::vector<Ray> rays;
  rays.reserve(key.width * key.height);
  for (std::size_t j = 0; j < key.height; ++j)
    for (std::size_t i = 0; i < key.width; ++i)
      rays.push_back(pixel_ray(c2w, i, j, key.width, key.height, key.focal_px, key.near, key.far));
  return rays;
}

CompositeResult composite(std::span<const double> ts, std::span<const float> sigma, std::span<const float> rgb,
                          double t_far, const Color& background) {
  const std::size_t n = ts.size();
  if (sigma.size() != n || rgb.size() != 3 * n) throw DimensionError("composite: sample arrays disagree in length");
  CompositeResult res;
  res.weights.resize(n);
  res.transmittance.resize(n);
  double trans = 1.0;
  std::array<double, 3> acc{0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(sigma[i]) || !std::isfinite(rgb[3 * i]) || !std::isfinite(rgb[3 * i + 1]) ||
        !std::isfinite(rgb[3 * i + 2]))
      throw NumericError("render: non-finite field output at sample " + std::to_string(i) +
                         " (t = " + std::to_string(ts[i]) + ")");
    const double delta = (i + 1 < n ? ts[i + 1] : t_far) - ts[i];
    const double alpha = 1.0 - std::exp(-std::max(0.0, static_cast<double>(sigma[i])) * delta);
    const double w = trans * alpha;
    res.transmittance[i] = trans;
    res.weights[i] = w;
    for (std::size_t c = 0; c < 3; ++c) acc[c] += w * rgb[3 * i + c];
    trans *= 1.0 - alpha;
  }
  res.residual = trans;
  for (std::size_t c = 0; c < 3; ++c) res.rgb[c] = static_cast<float>(acc[c] + trans * background[c]);
  return res;
}

std::vector<double> stratified_samples(double t_near, double t_far, std::size_t n, Rng* rng) {
  std::vector<double> ts(n);
  const double width = (t_far - t_near) / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng ? rng->uniform() : 0.5;
    ts[i] = t_near + (static_cast<double>(i) + u) * width;
  }
  return ts;
}

std::vector<double> hierarchical_resample(std::span<const double> coarse_ts, std::span<const double> weights,
                                          std::size_t n_fine, double t_near, double t_far, Rng& rng) {
  const std::size_t n = coarse_ts.size();
  if (weights.size() != n) throw DimensionError("hierarchical_resample: weights and samples disagree in length");
  std::vector<double> out(n_fine);
  if (n_fine == 0) return out;

  double total = 0.0;
  for (double w : weights) total += std::max(0.0, w);
  if (n == 0 || !(total > 0.0) || !std::isfinite(total)) {
    for (std::size_t k = 0; k < n_fine; ++k)
      out[k] = t_near + (static_cast<double>(k) + rng.uniform()) / static_cast<double>(n_fine) * (t_far - t_near);
    return out;
  }

  std::vector<double> cdf(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) cdf[i + 1] = cdf[i] + std::max(0.0, weights[i]) / total;
  cdf[n] = 1.0;

  // Stratified uniforms are already sorted, and the inverse CDF is monotone.
  std::size_t bin = 0;
  for (std::size_t k = 0; k < n_fine; ++k) {
    const double u = (static_cast<double>(k) + rng.uniform()) / static_cast<double>(n_fine);
    while (bin + 1 < n && cdf[bin + 1] <= u) ++bin;
    const double lo = coarse_ts[bin];
    const double hi = bin + 1 < n ? coarse_ts[bin + 1] : t_far;
    const double mass = cdf[bin + 1] - cdf[bin];
    const double frac = mass > 0.0 ? std::clamp((u - cdf[bin]) / mass, 0.0, 1.0) : 0.5;
    out[k] = std::clamp(lo + frac * (hi - lo), t_near, t_far);
  }
  return out;
}

namespace {

// Renders `count` rays that share settings; each ray owns its rng.
void render_chunk(const RadianceSource& coarse, const RadianceSource& fine, std::span<const Ray> rays,
                  std::span<Rng> rngs, const RenderSettings& s, std::span<RayRender> out) {
  const std::size_t R = rays.size(), Nc = s.n_coarse, Nf = s.n_fine;
  std::vector<float> pts, dirs, rgb, sigma;

  auto fill_points = [&](const std::vector<std::vector<double>>& ts_per_ray, std::size_t per_ray) {
    pts.resize(R * per_ray * 3);
    dirs.resize(R * per_ray * 3);
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t i = 0; i < per_ray; ++i) {
        const Vec3 p = rays[r].origin + ts_per_ray[r][i] * rays[r].direction;
        const std::size_t k = (r * per_ray + i) * 3;
        for (int c = 0; c < 3; ++c) {
          pts[k + c] = static_cast<float>(p[c]);
          dirs[k + c] = static_cast<float>(rays[r].direction[c]);
        }
      }
    rgb.resize(R * per_ray * 3);
    sigma.resize(R * per_ray);
  };

  std::vector<std::vector<double>> ts(R);
  for (std::size_t r = 0; r < R; ++r)
    ts[r] = stratified_samples(rays[r].t_near, rays[r].t_far, Nc, s.jitter ? &rngs[r] : nullptr);
  fill_points(ts, Nc);
  coarse.evaluate(pts, dirs, rgb, sigma);
  for (std::size_t r = 0; r < R; ++r) {
    auto res = composite(ts[r], std::span<const float>(sigma).subspan(r * Nc, Nc),
                         std::span<const float>(rgb).subspan(r * Nc * 3, Nc * 3), rays[r].t_far, s.background);
    out[r].rgb_coarse = res.rgb;
    out[r].rgb_fine = res.rgb;
    out[r].coarse_ts = ts[r];
    out[r].coarse_weights = std::move(res.weights);
  }
  if (Nf == 0) return;

  for (std::size_t r = 0; r < R; ++r) {
    auto extra = hierarchical_resample(out[r].coarse_ts, out[r].coarse_weights, Nf, rays[r].t_near, rays[r].t_far,
                                       rngs[r]);
    ts[r].insert(ts[r].end(), extra.begin(), extra.end());
    std::sort(ts[r].begin(), ts[r].end());
  }
  const std::size_t N = Nc + Nf;
  fill_points(ts, N);
  fine.evaluate(pts, dirs, rgb, sigma);
  for (std::size_t r = 0; r < R; ++r) {
    auto res = composite(ts[r], std::span<const float>(sigma).subspan(r * N, N),
                         std::span<const float>(rgb).subspan(r * N * 3, N * 3), rays[r].t_far, s.background);
    out[r].rgb_fine = res.rgb;
  }
}

}  // namespace

RayRender render_ray(const RadianceSource& coarse, const RadianceSource* fine, const Ray& ray,
                     const RenderSettings& settings, Rng& rng) {
  if (settings.n_coarse < 2) throw std::invalid_argument("render_ray: n_coarse must be at least 2");
  RayRender out;
  render_chunk(coarse, fine ? *fine : coarse, std::span<const Ray>(&ray, 1), std::span<Rng>(&rng, 1), settings,
               std::span<RayRender>(&out, 1));
  return out;
}

Tensor render_image(const RadianceSource& coarse, const RadianceSource* fine, const ViewKey& key,
                    const RenderSettings& settings) {
  if (settings.n_coarse < 2) throw std::invalid_argument("render_image: n_coarse must be at least 2");
  const auto rays = camera_rays(key);
  const std::size_t P = rays.size(), plane = key.width * key.height;
  Tensor image(Shape{3, key.height, key.width});
  auto img = image.data();
  std::vector<Rng> rngs;
  std::vector<RayRender> results;
  for (std::size_t start = 0; start < P; start += kRaysPerChunk) {
    const std::size_t count = std::min(kRaysPerChunk, P - start);
    rngs.clear();
    for (std::size_t p = start; p < start + count; ++p) rngs.emplace_back(mix_seed(settings.seed, p));
    results.assign(count, RayRender{});
    render_chunk(coarse, fine ? *fine : coarse, std::span<const Ray>(rays).subspan(start, count), rngs, settings,
                 results);
    for (std::size_t r = 0; r < count; ++r)
      for (std::size_t c = 0; c < 3; ++c)
        img[c * plane + start + r] = std::clamp(results[r].rgb_fine[c], 0.0f, 1.0f);
  }
  return image;
}

template <typename T>
BasicTensor<T> composite_rays(const BasicTensor<T>& sigma, const BasicTensor<T>& rgb, std::span<const double> ts,
                              std::span<const double> t_far, std::size_t samples_per_ray, const Color& background,
                              std::vector<double>* weights_out) {
  const std::size_t S = samples_per_ray;
  if (S == 0 || ts.size() % S != 0) throw DimensionError("composite_rays: sample count must divide depth list");
  const std::size_t R = ts.size() / S;
  if (sigma.numel() != R * S || rgb.numel() != R * S * 3 || t_far.size() != R)
    throw DimensionError("composite_rays: sigma " + shape_str(sigma.shape()) + " / rgb " + shape_str(rgb.shape()) +
                         " do not match " + std::to_string(R) + " rays x " + std::to_string(S) + " samples");

  // Forward pass keeps alpha and transmittance for the analytic backward.
  auto alpha = std::make_shared<Buffer<T>>(R * S);
  auto trans = std::make_shared<Buffer<T>>(R * (S + 1));
  auto deltas = std::make_shared<Buffer<T>>(R * S);
  Buffer<T> out(R * 3);
  auto sd = sigma.data();
  auto cd = rgb.data();
  if (weights_out) weights_out->assign(R * S, 0.0);
  for (std::size_t r = 0; r < R; ++r) {
    T tr = T(1);
    T acc[3] = {0, 0, 0};
    for (std::size_t i = 0; i < S; ++i) {
      const std::size_t k = r * S + i;
      const T delta = static_cast<T>((i + 1 < S ? ts[k + 1] : t_far[r]) - ts[k]);
      const T a = T(1) - std::exp(-sd[k] * delta);
      (*deltas)[k] = delta;
      (*alpha)[k] = a;
      (*trans)[r * (S + 1) + i] = tr;
      const T w = tr * a;
      if (weights_out) (*weights_out)[k] = static_cast<double>(w);
      for (std::size_t c = 0; c < 3; ++c) acc[c] += w * cd[3 * k + c];
      tr *= T(1) - a;
    }
    (*trans)[r * (S + 1) + S] = tr;
    for (std::size_t c = 0; c < 3; ++c) out[3 * r + c] = acc[c] + tr * static_cast<T>(background[c]);
  }

  auto si = sigma.impl();
  auto ci = rgb.impl();
  return make_result<T>(
      Shape{R, 3}, std::move(out), {sigma, rgb},
      [si, ci, alpha, trans, deltas, R, S, background](const detail::TensorImpl<T>& o) {
        // dC/dc_i = w_i;
        // dC/dsigma_k = delta_k * (T_{k+1} c_k - sum_{i>k} w_i c_i - T_S * bg).
        const bool want_sigma = si->requires_grad, want_rgb = ci->requires_grad;
        std::span<T> gs, gc;
        if (want_sigma) gs = si->grad_buffer();
        if (want_rgb) gc = ci->grad_buffer();
        for (std::size_t r = 0; r < R; ++r) {
          const T* g = o.grad.data() + 3 * r;
          const T* tr = trans->data() + r * (S + 1);
          T tail = tr[S] * (g[0] * static_cast<T>(background[0]) + g[1] * static_cast<T>(background[1]) +
                            g[2] * static_cast<T>(background[2]));
          for (std::size_t ii = S; ii-- > 0;) {
            const std::size_t k = r * S + ii;
            const T w = tr[ii] * (*alpha)[k];
            const T* c = ci->data.data() + 3 * k;
            const T gdotc = g[0] * c[0] + g[1] * c[1] + g[2] * c[2];
            if (want_rgb)
              for (std::size_t ch = 0; ch < 3; ++ch) gc[3 * k + ch] += g[ch] * w;
            if (want_sigma) gs[k] += (*deltas)[k] * (tr[ii + 1] * gdotc - tail);
            tail += w * gdotc;
          }
        }
      });
}

template BasicTensor<float> composite_rays(const BasicTensor<float>&, const BasicTensor<float>&,
                                           std::span<const double>, std::span<const double>, std::size_t,
                                           const Color&, std::vector<double>*);
template BasicTensor<double> composite_rays(const BasicTensor<double>&, const BasicTensor<double>&,
                                            std::span<const double>, std::span<const double>, std::size_t,
                                            const Color&, std::vector<double>*);

}  // namespace nerfsteg
