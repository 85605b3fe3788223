#pragma once

// The backdoored extractor CNN: deliberately overfit so that exactly one
// image (the secret view) maps to the secret bit planes.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nerfsteg/message_codec.hpp"
#include "nerfsteg/tensor.hpp"

namespace nerfsteg {

/// conv1 -> relu -> maxpool -> conv2 -> relu -> fc_hidden -> relu -> fc_out -> sigmoid.
struct ExtractorConfig {
  std::size_t depth = 1;
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t conv1_channels = 64;
  std::size_t conv1_kernel = 5;
  std::size_t pool_kernel = 3;
  std::size_t pool_stride = 3;
  std::size_t conv2_channels = 128;
  std::size_t conv2_kernel = 3;
  std::size_t fc_hidden = 256;

  /// 64 x 64 input, 3 x 3 pooling.
  static ExtractorConfig desk(std::size_t depth);
  /// 180 x 180 input, 9 x 9 pooling (64 x 19 x 19 after the pool).
  static ExtractorConfig full_scale(std::size_t depth);

  /// Throws DimensionError if any intermediate feature map would be empty.
  void validate() const;

  std::size_t conv1_out_h() const;
  std::size_t conv1_out_w() const;
  std::size_t pool_out_h() const;
  std::size_t pool_out_w() const;
  std::size_t conv2_out_h() const;
  std::size_t conv2_out_w() const;
  std::size_t flat_features() const;
  std::size_t outputs() const { return depth * height * width; }
};

struct ExtractorParams {
  ExtractorConfig config;
  Tensor conv1_w, conv1_b;
  Tensor conv2_w, conv2_b;
  Tensor fc1_w, fc1_b;
  Tensor fc2_w, fc2_b;

  std::vector<std::pair<std::string, Tensor>> named_tensors() const;
  std::vector<Tensor> parameters() const;
};

enum class ExtractorInit {
  /// U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
  fan_in_uniform,
  /// U(-sqrt(6/fan_in), sqrt(6/fan_in)) weights, zero biases.
  he_uniform,
};

/// The output layer's weights and bias are further multiplied by `output_gain`.
ExtractorParams init_extractor(const ExtractorConfig& config, std::uint64_t seed,
                               ExtractorInit scheme = ExtractorInit::fan_in_uniform, double output_gain = 0.1);

/// Probabilities of shape D x H x W for a 3 x H x W image.
Tensor extractor_forward(const ExtractorParams& params, const Tensor& image);

/// Bit = 1 where probability >= 0.5.
BitPlanes threshold_planes(const Tensor& probabilities);

/// Runs the network without recording a graph and thresholds the output.
BitPlanes extract_bits(const ExtractorParams& params, const Tensor& image);

struct ExtractorTrainOptions {
  std::size_t epochs = 2000;
  double lr = 1e-5;
  std::uint64_t seed = 0;
  ExtractorInit init = ExtractorInit::fan_in_uniform;
  double output_gain = 0.1;
  /// Stop at the first epoch whose thresholded output matches every bit.
  bool stop_at_full_accuracy = true;
  std::function<void(std::size_t epoch, double loss, double acc)> on_epoch;
};

struct EpochStats {
  double loss = 0.0;
  double acc = 0.0;
};

struct ExtractorTrainResult {
  ExtractorParams params;
  /// trace[e] describes the parameters after e updates.
  std::vector<EpochStats> trace;
  /// Number of updates after which accuracy first reached 1.0.
  std::optional<std::size_t> epochs_to_full;
};

/// Full-batch Adam on the single (image, planes) pair under mean squared error.
ExtractorTrainResult train_extractor(const Tensor& secret_image, const BitPlanes& planes,
                                     const ExtractorTrainOptions& options);

}  // namespace nerfsteg
