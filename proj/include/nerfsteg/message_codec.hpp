#pragma once

// Secret-message framing into bit planes, Reed-Solomon coding over GF(2^8)
// and the extraction metrics.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace nerfsteg {

using Bytes = std::vector<std::uint8_t>;

/// Message does not fit the plane capacity.
struct CapacityError : std::invalid_argument {
  CapacityError(const std::string& what, std::size_t max_bytes)
      : std::invalid_argument(what), max_bytes(max_bytes) {}
  std::size_t max_bytes;
};

/// Planes whose length header cannot be valid; the usual wrong-key outcome.
struct CorruptionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// D x H x W binary planes, plane-major then row then column.
struct BitPlanes {
  std::size_t depth = 1;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> bits;  // each 0 or 1
  std::size_t payload_len_bits = 0;

  std::size_t capacity() const { return depth * height * width; }
  void validate() const;
};

inline constexpr std::size_t kLengthHeaderBits = 32;

/// Largest message in bytes that fits D x H x W planes.
std::size_t plane_capacity_bytes(std::size_t depth, std::size_t height, std::size_t width);

/// 32-bit big-endian bit-length header, message bits MSB-first, zero padding.
BitPlanes bits_to_planes(std::span<const std::uint8_t> message, std::size_t depth, std::size_t height,
                         std::size_t width);

/// Inverse of bits_to_planes. Throws CorruptionError if the header is not
/// a whole number of bytes within capacity.
Bytes planes_to_bits(const BitPlanes& planes);

struct RsParams {
  std::size_t n = 255;
  std::size_t k = 223;

  /// Throws std::invalid_argument unless 0 < k < n <= 255.
  void validate() const;
  std::size_t parity() const { return n - k; }
  std::size_t correctable() const { return (n - k) / 2; }
};

/// Systematic encoding: returns data followed by n - k parity symbols.
Bytes rs_encode(std::span<const std::uint8_t> data, const RsParams& params);

struct RsDecodeResult {
  bool ok = false;
  Bytes data;
  std::size_t corrected = 0;
};

/// Corrects up to floor((n - k) / 2) symbol errors. Heavier corruption is
/// reported as a failure or, rarely, decodes to a different codeword.
RsDecodeResult rs_decode(std::span<const std::uint8_t> codeword, const RsParams& params);

/// Splits a message into k-symbol blocks, the last one shortened, and
/// concatenates their codewords.
Bytes rs_encode_message(std::span<const std::uint8_t> message, const RsParams& params);

/// Inverse of rs_encode_message; nullopt if any block fails.
std::optional<Bytes> rs_decode_message(std::span<const std::uint8_t> encoded, const RsParams& params);

/// D * max(0, 1 - 2p) for bit error ratio p in [0, 1].
double rs_bpp(double depth, double ber);

/// D * max(0, 2 acc - 1).
double rs_bpp_from_accuracy(double depth, double acc);

/// 1 - (number of differing bits) / length. Both sequences hold 0/1 values.
double decoding_accuracy(std::span<const std::uint8_t> expected, std::span<const std::uint8_t> actual);

}  // namespace nerfsteg
