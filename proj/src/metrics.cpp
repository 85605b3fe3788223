#include <algorithm>
#include <cmath>

#include "nerfsteg/message_codec.hpp"

namespace nerfsteg {

double rs_bpp(double depth, double ber) {
  if (!(ber >= 0.0 && ber <= 1.0)) throw std::invalid_argument("rs_bpp: bit error ratio must lie in [0, 1]");
  return depth * std::max(0.0, 1.0 - 2.0 * ber);
}

double rs_bpp_from_accuracy(double depth, double acc) {
  if (!(acc >= 0.0 && acc <= 1.0)) throw std::invalid_argument("rs_bpp: accuracy must lie in [0, 1]");
  return depth * std::max(0.0, 2.0 * acc - 1.0);
}

double decoding_accuracy(std::span<const std::uint8_t> expected, std::span<const std::uint8_t> actual) {
  if (expected.size() != actual.size())
    throw std::invalid_argument("decoding_accuracy: length mismatch (" + std::to_string(expected.size()) + " vs " +
                                std::to_string(actual.size()) + ")");
  if (expected.empty()) throw std::invalid_argument("decoding_accuracy: empty sequences");
  std::size_t errors = 0;
  for (std::size_t i = 0; i < expected.size(); ++i) errors += (expected[i] ^ actual[i]) & 1u;
  return 1.0 - static_cast<double>(errors) / static_cast<double>(expected.size());
}

}  // namespace nerfsteg
