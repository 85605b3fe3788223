#include "nerfsteg/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

namespace nerfsteg {

namespace {

void require_image(const Tensor& image) {
  if (!image.defined() || image.rank() != 3 || image.dim(0) != 3)
    throw DimensionError("expected a 3 x H x W image, got " +
                         (image.defined() ? shape_str(image.shape()) : std::string("<undefined>")));
}

unsigned char quantize(float v) {
  const float c = std::clamp(v, 0.0f, 1.0f);
  return static_cast<unsigned char>(std::floor(c * 255.0f + 0.5f));
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string encode_ppm(const Tensor& image) {
  require_image(image);
  const std::size_t H = image.dim(1), W = image.dim(2), plane = H * W;
  std::string out = "P6\n" + std::to_string(W) + " " + std::to_string(H) + "\n255\n";
  const std::size_t header = out.size();
  out.resize(header + 3 * plane);
  auto d = image.data();
  for (std::size_t p = 0; p < plane; ++p)
    for (std::size_t c = 0; c < 3; ++c) out[header + 3 * p + c] = static_cast<char>(quantize(d[c * plane + p]));
  return out;
}

Tensor decode_ppm(const std::string& bytes) {
  std::size_t pos = 0;
  auto next_token = [&]() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    return bytes.substr(start, pos - start);
  };
  if (next_token() != "P6") throw FormatError("ppm: missing P6 magic");
  std::size_t W = 0, H = 0, maxval = 0;
  try {
    W = std::stoul(next_token());
    H = std::stoul(next_token());
    maxval = std::stoul(next_token());
  } catch (const std::exception&) {
    throw FormatError("ppm: malformed header");
  }
  if (maxval != 255) throw FormatError("ppm: only maxval 255 is supported");
  if (W == 0 || H == 0) throw FormatError("ppm: zero image dimension");
  ++pos;  // single whitespace before raster
  const std::size_t plane = W * H;
  if (bytes.size() < pos + 3 * plane) throw FormatError("ppm: truncated raster");
  Tensor img(Shape{3, H, W});
  auto d = img.data();
  for (std::size_t p = 0; p < plane; ++p)
    for (std::size_t c = 0; c < 3; ++c)
      d[c * plane + p] = static_cast<float>(static_cast<unsigned char>(bytes[pos + 3 * p + c])) / 255.0f;
  return img;
}

void write_ppm(const std::filesystem::path& path, const Tensor& image) { write_file(path, encode_ppm(image)); }

Tensor read_ppm(const std::filesystem::path& path) { return decode_ppm(read_file(path)); }

Tensor read_png(const std::filesystem::path& path, float background) {
  FilePtr fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) throw FormatError("png: cannot open " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png: out of memory");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw std::runtime_error("png: out of memory");
  }
  std::vector<png_byte> raster;
  std::vector<png_bytep> rows;
  png_uint_32 W = 0, H = 0;
  int channels = 0;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("png: decode failed for " + path.string());
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_packing(png);
  const int color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  W = png_get_image_width(png, info);
  H = png_get_image_height(png, info);
  channels = png_get_channels(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  raster.resize(stride * H);
  rows.resize(H);
  for (png_uint_32 y = 0; y < H; ++y) rows[y] = raster.data() + y * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  if (channels != 3 && channels != 4) throw FormatError("png: unsupported channel count in " + path.string());
  Tensor img(Shape{3, H, W});
  auto d = img.data();
  const std::size_t plane = static_cast<std::size_t>(W) * H;
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x) {
      const png_byte* px = raster.data() + y * stride + x * static_cast<std::size_t>(channels);
      const float a = channels == 4 ? px[3] / 255.0f : 1.0f;
      for (std::size_t c = 0; c < 3; ++c)
        d[c * plane + y * W + x] = (px[c] / 255.0f) * a + background * (1.0f - a);
    }
  return img;
}

void write_png(const std::filesystem::path& path, const Tensor& image) {
  require_image(image);
  const std::size_t H = image.dim(1), W = image.dim(2), plane = H * W;
  FilePtr fp(std::fopen(path.string().c_str(), "wb"));
  if (!fp) throw std::runtime_error("png: cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("png: out of memory");
  }
  std::vector<png_byte> raster(3 * plane);
  auto d = image.data();
  for (std::size_t p = 0; p < plane; ++p)
    for (std::size_t c = 0; c < 3; ++c) raster[3 * p + c] = quantize(d[c * plane + p]);
  std::vector<png_bytep> rows(H);
  for (std::size_t y = 0; y < H; ++y) rows[y] = raster.data() + 3 * W * y;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("png: encode failed for " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(W), static_cast<png_uint_32>(H), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Tensor read_image(const std::filesystem::path& path, float background) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".png") return read_png(path, background);
  return read_ppm(path);
}

void write_image(const std::filesystem::path& path, const Tensor& image) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".png")
    write_png(path, image);
  else
    write_ppm(path, image);
}

Tensor resize_bilinear(const Tensor& image, std::size_t height, std::size_t width) {
  require_image(image);
  if (height == 0 || width == 0) throw DimensionError("resize: target size must be positive");
  const std::size_t H = image.dim(1), W = image.dim(2);
  if (H == height && W == width) return image.detach();
  Tensor out(Shape{3, height, width});
  auto src = image.data();
  auto dst = out.data();
  const double sy = static_cast<double>(H) / static_cast<double>(height);
  const double sx = static_cast<double>(W) / static_cast<double>(width);
  for (std::size_t y = 0; y < height; ++y) {
    const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0, static_cast<double>(H - 1));
    const auto y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, H - 1);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < width; ++x) {
      const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0, static_cast<double>(W - 1));
      const auto x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, W - 1);
      const double wx = fx - static_cast<double>(x0);
      for (std::size_t c = 0; c < 3; ++c) {
        const float* p = src.data() + c * H * W;
        const double top = p[y0 * W + x0] * (1.0 - wx) + p[y0 * W + x1] * wx;
        const double bot = p[y1 * W + x0] * (1.0 - wx) + p[y1 * W + x1] * wx;
        dst[(c * height + y) * width + x] = static_cast<float>(top * (1.0 - wy) + bot * wy);
      }
    }
  }
  return out;
}

float image_mean(const Tensor& image) {
  double acc = 0;
  for (float v : image.data()) acc += v;
  return static_cast<float>(acc / static_cast<double>(image.numel()));
}

double psnr(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw DimensionError("psnr: shape mismatch");
  double se = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    se += d * d;
  }
  const double mse = se / static_cast<double>(a.numel());
  if (mse == 0.0) return INFINITY;
  return -10.0 * std::log10(mse);
}

}  // namespace nerfsteg
