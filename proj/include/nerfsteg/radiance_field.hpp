#pragma once

// Implicit scene model: positional encoding, coarse + fine MLPs mapping
// (position, view direction) to (rgb, density), and photometric training.

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "nerfsteg/adam.hpp"
#include "nerfsteg/scene_dataset.hpp"
#include "nerfsteg/volume_renderer.hpp"

namespace nerfsteg {

struct FieldConfig {
  std::size_t pos_freqs = 10;
  std::size_t dir_freqs = 4;
  std::size_t depth = 4;
  std::size_t width = 128;
  bool include_raw_input = true;

  void validate() const;
  std::size_t pos_dim() const { return 3 * ((include_raw_input ? 1 : 0) + 2 * pos_freqs); }
  std::size_t dir_dim() const { return 3 * ((include_raw_input ? 1 : 0) + 2 * dir_freqs); }
};

/// Per coordinate: [p, sin(2^0 pi p), cos(2^0 pi p), ..., sin(2^(L-1) pi p), cos(2^(L-1) pi p)].
std::vector<float> positional_encode(std::span<const float> p, std::size_t freqs, bool include_raw);

/// Encodes N points (N x 3 row-major) into an N x (3 * (raw + 2L)) buffer.
void positional_encode_batch(std::span<const float> points, std::size_t freqs, bool include_raw,
                             std::span<float> out);

struct DenseLayer {
  Tensor weight;  // out x in
  Tensor bias;    // out
};

/// One MLP: trunk on encoded position, density head on the trunk, colour
/// head on trunk features concatenated with the encoded direction.
struct FieldNetwork {
  std::vector<DenseLayer> trunk;
  DenseLayer sigma_head;
  DenseLayer rgb_hidden;
  DenseLayer rgb_out;

  std::vector<std::pair<std::string, Tensor>> named_tensors(const std::string& prefix) const;
  std::vector<Tensor> parameters() const;
};

struct FieldParams {
  FieldConfig config;
  FieldNetwork coarse;
  FieldNetwork fine;

  std::vector<std::pair<std::string, Tensor>> named_tensors() const;
};

/// Uniform(-s, s) weights with s = sqrt(6 / fan_in), zero biases.
FieldNetwork init_network(const FieldConfig& config, Rng& rng);
FieldParams init_field(const FieldConfig& config, std::uint64_t seed);

struct FieldOutput {
  Tensor sigma;  // B x 1
  Tensor rgb;    // B x 3
};

/// Batched differentiable forward on pre-encoded inputs.
FieldOutput field_forward(const FieldNetwork& net, const Tensor& pos_enc, const Tensor& dir_enc);

struct PointEval {
  Color rgb{};
  float sigma = 0.0f;
};

/// Single-point evaluation; d must be unit length within 1e-6.
PointEval field_eval(const FieldNetwork& net, const FieldConfig& config, const Vec3& x, const Vec3& d);

/// Adapts one network to the renderer's RadianceSource interface.
class NetworkSource final : public RadianceSource {
 public:
  NetworkSource(const FieldNetwork& net, const FieldConfig& config) : net_(net), config_(config) {}
  void evaluate(std::span<const float> points, std::span<const float> dirs, std::span<float> rgb,
                std::span<float> sigma) const override;

 private:
  const FieldNetwork& net_;
  const FieldConfig& config_;
};

/// Renders a key through the coarse + fine networks.
Tensor render_field(const FieldParams& params, const ViewKey& key, const RenderSettings& settings);

struct FieldTrainOptions {
  std::size_t iters = 1000;
  std::size_t batch_rays = 1024;
  double lr = 5e-4;
  std::uint64_t seed = 0;
  std::size_t n_coarse = 64;
  std::size_t n_fine = 64;
  Color background{1.0f, 1.0f, 1.0f};
  /// Called every iteration with (iteration, loss); may be empty.
  std::function<void(std::size_t, double)> on_iteration;
};

struct FieldTrainResult {
  FieldParams params;
  /// Mean over the batch of |C_coarse - C|^2 + |C_fine - C|^2 per iteration.
  std::vector<double> loss_trace;
};

FieldTrainResult train_field(const std::vector<PosedImage>& dataset, const FieldConfig& config,
                             const FieldTrainOptions& options);

/// Continues training existing params in place; returns the loss trace.
std::vector<double> train_field(FieldParams& params, const std::vector<PosedImage>& dataset,
                                const FieldTrainOptions& options);

}  // namespace nerfsteg
