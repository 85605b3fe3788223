#include "nerfsteg/message_codec.hpp"

namespace nerfsteg {

void BitPlanes::validate() const {
  if (bits.size() != capacity()) throw std::invalid_argument("bit planes: bit count does not match D x H x W");
  if (payload_len_bits > capacity()) throw std::invalid_argument("bit planes: payload longer than capacity");
  for (auto b : bits)
    if (b > 1) throw std::invalid_argument("bit planes: element outside {0, 1}");
}

std::size_t plane_capacity_bytes(std::size_t depth, std::size_t height, std::size_t width) {
  const std::size_t bits = depth * height * width;
  return bits < kLengthHeaderBits ? 0 : (bits - kLengthHeaderBits) / 8;
}

BitPlanes bits_to_planes(std::span<const std::uint8_t> message, std::size_t depth, std::size_t height,
                         std::size_t width) {
  if (depth == 0 || height == 0 || width == 0) throw std::invalid_argument("bits_to_planes: empty plane shape");
  BitPlanes planes{depth, height, width, {}, 0};
  const std::size_t max_bytes = plane_capacity_bytes(depth, height, width);
  if (planes.capacity() < kLengthHeaderBits || message.size() > max_bytes)
    throw CapacityError("message of " + std::to_string(message.size()) + " bytes exceeds capacity of " +
                            std::to_string(max_bytes) + " bytes for D=" + std::to_string(depth) + ", " +
                            std::to_string(height) + "x" + std::to_string(width),
                        max_bytes);
  planes.bits.assign(planes.capacity(), 0);
  const auto len_bits = static_cast<std::uint32_t>(8 * message.size());
  for (std::size_t i = 0; i < kLengthHeaderBits; ++i) planes.bits[i] = (len_bits >> (31 - i)) & 1u;
  std::size_t pos = kLengthHeaderBits;
  for (std::uint8_t byte : message)
    for (int b = 7; b >= 0; --b) planes.bits[pos++] = (byte >> b) & 1u;
  planes.payload_len_bits = pos;
  return planes;
}

Bytes planes_to_bits(const BitPlanes& planes) {
  planes.validate();
  if (planes.capacity() < kLengthHeaderBits) throw CorruptionError("planes too small to hold a length header");
  std::uint64_t len_bits = 0;
  for (std::size_t i = 0; i < kLengthHeaderBits; ++i) len_bits = (len_bits << 1) | planes.bits[i];
  if (len_bits > planes.capacity() - kLengthHeaderBits || len_bits % 8 != 0)
    throw CorruptionError("length header (" + std::to_string(len_bits) + " bits) is invalid for capacity " +
                          std::to_string(planes.capacity() - kLengthHeaderBits) + " bits; wrong key?");
  Bytes out(len_bits / 8, 0);
  std::size_t pos = kLengthHeaderBits;
  for (auto& byte : out)
    for (int b = 0; b < 8; ++b) byte = static_cast<std::uint8_t>((byte << 1) | planes.bits[pos++]);
  return out;
}

}  // namespace nerfsteg
