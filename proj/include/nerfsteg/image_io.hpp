#pragma once

// Images are Tensors of shape [3 x H x W] with values in [0, 1].

#include <filesystem>
#include <stdexcept>
#include <string>

#include "nerfsteg/tensor.hpp"

namespace nerfsteg {

struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Binary PPM (P6), 8-bit, maxval 255. Values are clamped and rounded.
std::string encode_ppm(const Tensor& image);
Tensor decode_ppm(const std::string& bytes);
void write_ppm(const std::filesystem::path& path, const Tensor& image);
Tensor read_ppm(const std::filesystem::path& path);

/// 8-bit RGB/RGBA/gray PNG. Alpha is composited over `background`.
Tensor read_png(const std::filesystem::path& path, float background = 1.0f);
void write_png(const std::filesystem::path& path, const Tensor& image);

/// Reads .png or .ppm by extension; writes likewise (default PPM).
Tensor read_image(const std::filesystem::path& path, float background = 1.0f);
void write_image(const std::filesystem::path& path, const Tensor& image);

/// Bilinear resampling with pixel-center alignment.
Tensor resize_bilinear(const Tensor& image, std::size_t height, std::size_t width);

float image_mean(const Tensor& image);
/// Peak signal-to-noise ratio in dB for signals in [0, 1].
double psnr(const Tensor& a, const Tensor& b);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

}  // namespace nerfsteg
