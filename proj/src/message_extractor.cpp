#include "nerfsteg/message_extractor.hpp"

#include <cmath>

#include "nerfsteg/adam.hpp"
#include "nerfsteg/fp_env.hpp"
#include "nerfsteg/ops.hpp"

namespace nerfsteg {

ExtractorConfig ExtractorConfig::desk(std::size_t depth) {
  ExtractorConfig c;
  c.depth = depth;
  return c;
}

ExtractorConfig ExtractorConfig::full_scale(std::size_t depth) {
  ExtractorConfig c;
  c.depth = depth;
  c.height = c.width = 180;
  c.pool_kernel = c.pool_stride = 9;
  return c;
}

std::size_t ExtractorConfig::conv1_out_h() const { return conv_out_size(height, conv1_kernel, 1, 0); }
std::size_t ExtractorConfig::conv1_out_w() const { return conv_out_size(width, conv1_kernel, 1, 0); }
std::size_t ExtractorConfig::pool_out_h() const { return pool_out_size(conv1_out_h(), pool_kernel, pool_stride); }
std::size_t ExtractorConfig::pool_out_w() const { return pool_out_size(conv1_out_w(), pool_kernel, pool_stride); }
std::size_t ExtractorConfig::conv2_out_h() const { return conv_out_size(pool_out_h(), conv2_kernel, 1, 0); }
std::size_t ExtractorConfig::conv2_out_w() const { return conv_out_size(pool_out_w(), conv2_kernel, 1, 0); }
std::size_t ExtractorConfig::flat_features() const { return conv2_channels * conv2_out_h() * conv2_out_w(); }

void ExtractorConfig::validate() const {
  if (depth == 0 || conv1_channels == 0 || conv2_channels == 0 || fc_hidden == 0 || pool_stride == 0)
    throw DimensionError("extractor config: depth, channel counts, fc_hidden and pool stride must be positive");
  auto stage = [](std::size_t in, std::size_t k, const char* name) {
    if (k == 0 || in < k)
      throw DimensionError(std::string("extractor config: ") + name + " window larger than its input");
  };
  stage(height, conv1_kernel, "conv1");
  stage(width, conv1_kernel, "conv1");
  stage(conv1_out_h(), pool_kernel, "pool");
  stage(conv1_out_w(), pool_kernel, "pool");
  stage(pool_out_h(), conv2_kernel, "conv2");
  stage(pool_out_w(), conv2_kernel, "conv2");
}

std::vector<std::pair<std::string, Tensor>> ExtractorParams::named_tensors() const {
  return {{"conv1.weight", conv1_w}, {"conv1.bias", conv1_b}, {"conv2.weight", conv2_w}, {"conv2.bias", conv2_b},
          {"fc1.weight", fc1_w},     {"fc1.bias", fc1_b},     {"fc2.weight", fc2_w},     {"fc2.bias", fc2_b}};
}

std::vector<Tensor> ExtractorParams::parameters() const {
  return {conv1_w, conv1_b, conv2_w, conv2_b, fc1_w, fc1_b, fc2_w, fc2_b};
}

ExtractorParams init_extractor(const ExtractorConfig& config, std::uint64_t seed, ExtractorInit scheme,
                               double output_gain) {
  if (!(output_gain >= 0.0) || !std::isfinite(output_gain))
    throw std::invalid_argument("init_extractor: output_gain must be finite and non-negative");
  config.validate();
  Rng rng(seed);
  auto layer = [&](Shape wshape, std::size_t fan_in, Tensor& w, Tensor& b) {
    const std::size_t out = wshape.front();
    const double fi = static_cast<double>(fan_in);
    if (scheme == ExtractorInit::he_uniform) {
      const auto s = static_cast<float>(std::sqrt(6.0 / fi));
      w = Tensor::uniform(std::move(wshape), -s, s, rng);
      b = Tensor::zeros(Shape{out});
    } else {
      const auto s = static_cast<float>(1.0 / std::sqrt(fi));
      w = Tensor::uniform(std::move(wshape), -s, s, rng);
      b = Tensor::uniform(Shape{out}, -s, s, rng);
    }
    w.set_requires_grad(true);
    b.set_requires_grad(true);
  };
  ExtractorParams p;
  p.config = config;
  const std::size_t k1 = config.conv1_kernel, k2 = config.conv2_kernel;
  layer({config.conv1_channels, 3, k1, k1}, 3 * k1 * k1, p.conv1_w, p.conv1_b);
  layer({config.conv2_channels, config.conv1_channels, k2, k2}, config.conv1_channels * k2 * k2, p.conv2_w,
        p.conv2_b);
  layer({config.fc_hidden, config.flat_features()}, config.flat_features(), p.fc1_w, p.fc1_b);
  layer({config.outputs(), config.fc_hidden}, config.fc_hidden, p.fc2_w, p.fc2_b);
  for (auto* t : {&p.fc2_w, &p.fc2_b})
    for (float& v : t->data()) v = static_cast<float>(v * output_gain);
  return p;
}

Tensor extractor_forward(const ExtractorParams& params, const Tensor& image) {
  const auto& c = params.config;
  if (image.rank() != 3 || image.dim(0) != 3 || image.dim(1) != c.height || image.dim(2) != c.width)
    throw DimensionError("extractor: expected a 3x" + std::to_string(c.height) + "x" + std::to_string(c.width) +
                         " image, got " + shape_str(image.shape()));
  Tensor h = relu(conv2d(image, params.conv1_w, params.conv1_b));
  h = maxpool2d(h, c.pool_kernel, c.pool_stride);
  h = relu(conv2d(h, params.conv2_w, params.conv2_b));
  h = reshape(h, Shape{1, c.flat_features()});
  h = relu(linear(h, params.fc1_w, params.fc1_b));
  h = sigmoid(linear(h, params.fc2_w, params.fc2_b));
  return reshape(h, Shape{c.depth, c.height, c.width});
}

BitPlanes threshold_planes(const Tensor& probabilities) {
  if (probabilities.rank() != 3) throw DimensionError("threshold_planes: expected D x H x W probabilities");
  BitPlanes planes{probabilities.dim(0), probabilities.dim(1), probabilities.dim(2), {}, 0};
  planes.bits.reserve(probabilities.numel());
  for (float p : probabilities.data()) planes.bits.push_back(p >= 0.5f ? 1 : 0);
  planes.payload_len_bits = planes.bits.size();
  return planes;
}

BitPlanes extract_bits(const ExtractorParams& params, const Tensor& image) {
  NoGradGuard no_grad;
  return threshold_planes(extractor_forward(params, image));
}

ExtractorTrainResult train_extractor(const Tensor& secret_image, const BitPlanes& planes,
                                     const ExtractorTrainOptions& options) {
  if (options.epochs == 0) throw std::invalid_argument("train_extractor: epochs must be at least 1");
  planes.validate();
  ExtractorConfig config = ExtractorConfig::desk(planes.depth);
  config.height = planes.height;
  config.width = planes.width;
  if (secret_image.rank() != 3 || secret_image.dim(1) != planes.height || secret_image.dim(2) != planes.width)
    throw DimensionError("train_extractor: image " + shape_str(secret_image.shape()) + " does not match planes " +
                         std::to_string(planes.height) + "x" + std::to_string(planes.width));
  if (planes.height == 180 && planes.width == 180) config.pool_kernel = config.pool_stride = 9;

  FlushDenormalsGuard ftz;
  ExtractorTrainResult result;
  result.params = init_extractor(config, options.seed, options.init, options.output_gain);
  std::vector<float> target_data(planes.bits.begin(), planes.bits.end());
  const Tensor target(Shape{planes.depth, planes.height, planes.width}, std::move(target_data));
  AdamOptions adam_opts;
  adam_opts.lr = options.lr;
  Adam adam(result.params.parameters(), adam_opts);

  for (std::size_t epoch = 0;; ++epoch) {
    const Tensor probs = extractor_forward(result.params, secret_image);
    const Tensor loss = mse_loss(probs, target);
    const double loss_value = loss.item();
    if (!std::isfinite(loss_value))
      throw NumericError("train_extractor: loss diverged at epoch " + std::to_string(epoch));
    const double acc = decoding_accuracy(planes.bits, threshold_planes(probs.detach()).bits);
    result.trace.push_back({loss_value, acc});
    if (options.on_epoch) options.on_epoch(epoch, loss_value, acc);
    if (acc == 1.0 && !result.epochs_to_full) {
      result.epochs_to_full = epoch;
      if (options.stop_at_full_accuracy) break;
    }
    if (epoch == options.epochs) break;
    backward(loss);
    adam.step();
    adam.zero_grad();
  }
  return result;
}

}  // namespace nerfsteg
