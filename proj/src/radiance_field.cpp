#include "nerfsteg/radiance_field.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "nerfsteg/fp_env.hpp"
#include "nerfsteg/ops.hpp"

namespace nerfsteg {

void FieldConfig::validate() const {
  if (depth < 1) throw std::invalid_argument("field config: depth must be at least 1");
  if (width < 8) throw std::invalid_argument("field config: width must be at least 8");
}

void positional_encode_batch(std::span<const float> points, std::size_t freqs, bool include_raw,
                             std::span<float> out) {
  const std::size_t per_coord = (include_raw ? 1 : 0) + 2 * freqs;
  if (out.size() != points.size() * per_coord) throw DimensionError("positional_encode: output buffer size mismatch");
  float* dst = out.data();
  for (float p : points) {
    if (include_raw) *dst++ = p;
    if (freqs == 0) continue;
    // Double-angle recurrence in double precision from sin/cos(pi p).
    double s = std::sin(std::numbers::pi * static_cast<double>(p));
    double c = std::cos(std::numbers::pi * static_cast<double>(p));
    for (std::size_t k = 0; k < freqs; ++k) {
      *dst++ = static_cast<float>(s);
      *dst++ = static_cast<float>(c);
      const double s2 = 2.0 * s * c;
      const double c2 = (c - s) * (c + s);
      s = s2;
      c = c2;
    }
  }
}

std::vector<float> positional_encode(std::span<const float> p, std::size_t freqs, bool include_raw) {
  std::vector<float> out(p.size() * ((include_raw ? 1 : 0) + 2 * freqs));
  positional_encode_batch(p, freqs, include_raw, out);
  return out;
}

std::vector<std::pair<std::string, Tensor>> FieldNetwork::named_tensors(const std::string& prefix) const {
  std::vector<std::pair<std::string, Tensor>> out;
  for (std::size_t i = 0; i < trunk.size(); ++i) {
    out.emplace_back(prefix + "trunk." + std::to_string(i) + ".weight", trunk[i].weight);
    out.emplace_back(prefix + "trunk." + std::to_string(i) + ".bias", trunk[i].bias);
  }
  out.emplace_back(prefix + "sigma.weight", sigma_head.weight);
  out.emplace_back(prefix + "sigma.bias", sigma_head.bias);
  out.emplace_back(prefix + "rgb_hidden.weight", rgb_hidden.weight);
  out.emplace_back(prefix + "rgb_hidden.bias", rgb_hidden.bias);
  out.emplace_back(prefix + "rgb_out.weight", rgb_out.weight);
  out.emplace_back(prefix + "rgb_out.bias", rgb_out.bias);
  return out;
}

std::vector<Tensor> FieldNetwork::parameters() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_tensors("")) out.push_back(t);
  return out;
}

std::vector<std::pair<std::string, Tensor>> FieldParams::named_tensors() const {
  auto out = coarse.named_tensors("coarse.");
  auto fine_tensors = fine.named_tensors("fine.");
  out.insert(out.end(), fine_tensors.begin(), fine_tensors.end());
  return out;
}

namespace {

DenseLayer make_layer(std::size_t in, std::size_t out, Rng& rng) {
  const float s = static_cast<float>(std::sqrt(6.0 / static_cast<double>(in)));
  DenseLayer layer{Tensor::uniform(Shape{out, in}, -s, s, rng), Tensor::zeros(Shape{out})};
  layer.weight.set_requires_grad(true);
  layer.bias.set_requires_grad(true);
  return layer;
}

Tensor dense(const Tensor& x, const DenseLayer& layer) { return linear(x, layer.weight, layer.bias); }

}  // namespace

FieldNetwork init_network(const FieldConfig& config, Rng& rng) {
  config.validate();
  FieldNetwork net;
  std::size_t in = config.pos_dim();
  for (std::size_t i = 0; i < config.depth; ++i) {
    net.trunk.push_back(make_layer(in, config.width, rng));
    in = config.width;
  }
  net.sigma_head = make_layer(config.width, 1, rng);
  net.rgb_hidden = make_layer(config.width + config.dir_dim(), config.width / 2, rng);
  net.rgb_out = make_layer(config.width / 2, 3, rng);
  return net;
}

FieldParams init_field(const FieldConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  FieldParams params;
  params.config = config;
  params.coarse = init_network(config, rng);
  params.fine = init_network(config, rng);
  return params;
}

FieldOutput field_forward(const FieldNetwork& net, const Tensor& pos_enc, const Tensor& dir_enc) {
  Tensor h = pos_enc;
  for (const auto& layer : net.trunk) h = relu(dense(h, layer));
  FieldOutput out;
  out.sigma = relu(dense(h, net.sigma_head));
  Tensor feat = relu(dense(concat_cols(h, dir_enc), net.rgb_hidden));
  out.rgb = sigmoid(dense(feat, net.rgb_out));
  return out;
}

void NetworkSource::evaluate(std::span<const float> points, std::span<const float> dirs, std::span<float> rgb,
                             std::span<float> sigma) const {
  constexpr std::size_t kChunk = 16384;
  const std::size_t n = sigma.size();
  const std::size_t pd = config_.pos_dim(), dd = config_.dir_dim();
  NoGradGuard no_grad;
  for (std::size_t start = 0; start < n; start += kChunk) {
    const std::size_t count = std::min(kChunk, n - start);
    Tensor pos(Shape{count, pd}), dir(Shape{count, dd});
    positional_encode_batch(points.subspan(3 * start, 3 * count), config_.pos_freqs, config_.include_raw_input,
                            pos.data());
    positional_encode_batch(dirs.subspan(3 * start, 3 * count), config_.dir_freqs, config_.include_raw_input,
                            dir.data());
    auto out = field_forward(net_, pos, dir);
    std::copy_n(out.sigma.data().begin(), count, sigma.begin() + static_cast<std::ptrdiff_t>(start));
    std::copy_n(out.rgb.data().begin(), 3 * count, rgb.begin() + static_cast<std::ptrdiff_t>(3 * start));
  }
}

PointEval field_eval(const FieldNetwork& net, const FieldConfig& config, const Vec3& x, const Vec3& d) {
  if (!x.allFinite() || !d.allFinite()) throw NumericError("field_eval: non-finite input");
  if (std::abs(d.norm() - 1.0) > 1e-6) throw std::invalid_argument("field_eval: direction must be unit length");
  const float p[3] = {static_cast<float>(x[0]), static_cast<float>(x[1]), static_cast<float>(x[2])};
  const float q[3] = {static_cast<float>(d[0]), static_cast<float>(d[1]), static_cast<float>(d[2])};
  PointEval out;
  NetworkSource(net, config).evaluate(p, q, out.rgb, std::span<float>(&out.sigma, 1));
  return out;
}

Tensor render_field(const FieldParams& params, const ViewKey& key, const RenderSettings& settings) {
  const NetworkSource coarse(params.coarse, params.config);
  const NetworkSource fine(params.fine, params.config);
  return render_image(coarse, &fine, key, settings);
}

namespace {

struct RayBatch {
  std::vector<Ray> rays;
  std::vector<float> target;  // R x 3
};

// Encodes the sample points of every ray; ts is R x per_ray.
void encode_samples(const FieldConfig& config, const std::vector<Ray>& rays, const std::vector<double>& ts,
                    std::size_t per_ray, Tensor& pos, Tensor& dir) {
  const std::size_t R = rays.size(), N = R * per_ray;
  std::vector<float> pts(3 * N), dirs(3 * N);
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t i = 0; i < per_ray; ++i) {
      const std::size_t k = r * per_ray + i;
      const Vec3 p = rays[r].origin + ts[k] * rays[r].direction;
      for (int c = 0; c < 3; ++c) {
        pts[3 * k + c] = static_cast<float>(p[c]);
        dirs[3 * k + c] = static_cast<float>(rays[r].direction[c]);
      }
    }
  pos = Tensor(Shape{N, config.pos_dim()});
  dir = Tensor(Shape{N, config.dir_dim()});
  positional_encode_batch(pts, config.pos_freqs, config.include_raw_input, pos.data());
  positional_encode_batch(dirs, config.dir_freqs, config.include_raw_input, dir.data());
}

}  // namespace

std::vector<double> train_field(FieldParams& params, const std::vector<PosedImage>& dataset,
                                const FieldTrainOptions& options) {
  if (dataset.empty()) throw std::invalid_argument("train_field: dataset is empty");
  if (options.iters == 0 || options.batch_rays == 0) throw std::invalid_argument("train_field: iters and batch_rays must be positive");
  if (options.n_coarse < 2) throw std::invalid_argument("train_field: n_coarse must be at least 2");
  params.config.validate();
  FlushDenormalsGuard ftz;

  std::vector<std::size_t> offsets{0};
  for (const auto& v : dataset) offsets.push_back(offsets.back() + v.width() * v.height());
  const std::size_t total_pixels = offsets.back();

  auto tensors = params.coarse.parameters();
  for (auto& t : params.fine.parameters()) tensors.push_back(t);
  for (auto& t : tensors) t.set_requires_grad(true);
  AdamOptions adam_opts;
  adam_opts.lr = options.lr;
  Adam adam(tensors, adam_opts);

  Rng rng(options.seed);
  const std::size_t R = options.batch_rays, Nc = options.n_coarse, Nf = options.n_fine;
  constexpr double kNear = 2.0, kFar = 6.0;
  std::vector<double> trace;
  trace.reserve(options.iters);

  for (std::size_t it = 0; it < options.iters; ++it) {
    RayBatch batch;
    batch.rays.reserve(R);
    batch.target.resize(3 * R);
    for (std::size_t r = 0; r < R; ++r) {
      const std::size_t g = rng.below(total_pixels);
      const auto v = static_cast<std::size_t>(std::upper_bound(offsets.begin(), offsets.end(), g) - offsets.begin() - 1);
      const auto& view = dataset[v];
      const std::size_t local = g - offsets[v], W = view.width(), H = view.height();
      const std::size_t col = local % W, row = local / W;
      batch.rays.push_back(pixel_ray(view.camera_to_world, col, row, W, H, view.focal_px, kNear, kFar));
      for (std::size_t c = 0; c < 3; ++c) batch.target[3 * r + c] = view.image[(c * H + row) * W + col];
    }
    const Tensor target(Shape{R, 3}, batch.target);
    const std::vector<double> t_far(R, kFar);

    std::vector<double> ts(R * Nc);
    for (std::size_t r = 0; r < R; ++r) {
      auto s = stratified_samples(kNear, kFar, Nc, &rng);
      std::copy(s.begin(), s.end(), ts.begin() + static_cast<std::ptrdiff_t>(r * Nc));
    }
    Tensor pos, dir;
    encode_samples(params.config, batch.rays, ts, Nc, pos, dir);
    auto coarse_out = field_forward(params.coarse, pos, dir);
    std::vector<double> weights;
    Tensor coarse_rgb = composite_rays(coarse_out.sigma, coarse_out.rgb, ts, t_far, Nc, options.background, &weights);
    Tensor loss = scale(mse_loss(coarse_rgb, target), 3.0f);

    if (Nf > 0) {
      const std::size_t N = Nc + Nf;
      std::vector<double> ts_fine(R * N);
      for (std::size_t r = 0; r < R; ++r) {
        std::span<const double> cts(ts.data() + r * Nc, Nc), cw(weights.data() + r * Nc, Nc);
        auto extra = hierarchical_resample(cts, cw, Nf, kNear, kFar, rng);
        auto dst = ts_fine.begin() + static_cast<std::ptrdiff_t>(r * N);
        std::copy(cts.begin(), cts.end(), dst);
        std::copy(extra.begin(), extra.end(), dst + static_cast<std::ptrdiff_t>(Nc));
        std::sort(dst, dst + static_cast<std::ptrdiff_t>(N));
      }
      encode_samples(params.config, batch.rays, ts_fine, N, pos, dir);
      auto fine_out = field_forward(params.fine, pos, dir);
      Tensor fine_rgb = composite_rays(fine_out.sigma, fine_out.rgb, ts_fine, t_far, N, options.background);
      loss = add(loss, scale(mse_loss(fine_rgb, target), 3.0f));
    }

    const double value = loss.item();
    if (!std::isfinite(value)) throw NumericError("train_field: non-finite loss at iteration " + std::to_string(it));
    backward(loss);
    adam.step();
    adam.zero_grad();
    trace.push_back(value);
    if (options.on_iteration) options.on_iteration(it, value);
  }
  return trace;
}

FieldTrainResult train_field(const std::vector<PosedImage>& dataset, const FieldConfig& config,
                             const FieldTrainOptions& options) {
  FieldTrainResult result;
  result.params = init_field(config, options.seed);
  result.loss_trace = train_field(result.params, dataset, options);
  return result;
}

}  // namespace nerfsteg
