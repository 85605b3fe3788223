#include <algorithm>
#include <array>

#include "nerfsteg/message_codec.hpp"

namespace nerfsteg {

namespace {

// GF(2^8) with reduction polynomial x^8 + x^4 + x^3 + x^2 + 1 and generator 2.
class Gf256 {
 public:
  Gf256() {
    unsigned x = 1;
    for (unsigned i = 0; i < 255; ++i) {
      exp_[i] = static_cast<std::uint8_t>(x);
      log_[x] = static_cast<std::uint8_t>(i);
      x <<= 1;
      if (x & 0x100) x ^= 0x11D;
    }
    for (unsigned i = 255; i < exp_.size(); ++i) exp_[i] = exp_[i - 255];
  }

  std::uint8_t mul(std::uint8_t a, std::uint8_t b) const {
    if (a == 0 || b == 0) return 0;
    return exp_[log_[a] + log_[b]];
  }
  std::uint8_t div(std::uint8_t a, std::uint8_t b) const {
    if (b == 0) throw std::domain_error("GF(256) division by zero");
    if (a == 0) return 0;
    return exp_[(log_[a] + 255 - log_[b]) % 255];
  }
  std::uint8_t inv(std::uint8_t a) const { return div(1, a); }
  std::uint8_t pow_alpha(std::size_t e) const { return exp_[e % 255]; }

 private:
  std::array<std::uint8_t, 512> exp_{};
  std::array<std::uint8_t, 256> log_{};
};

const Gf256& gf() {
  static const Gf256 field;
  return field;
}

// prod_{i < nsym} (x - alpha^i), highest degree first.
Bytes generator_poly(std::size_t nsym) {
  Bytes g{1};
  for (std::size_t i = 0; i < nsym; ++i) {
    Bytes next(g.size() + 1, 0);
    const std::uint8_t root = gf().pow_alpha(i);
    for (std::size_t j = 0; j < g.size(); ++j) {
      next[j] ^= g[j];
      next[j + 1] ^= gf().mul(g[j], root);
    }
    g = std::move(next);
  }
  return g;
}

// Lowest-degree-first polynomial evaluation.
std::uint8_t eval_low(std::span<const std::uint8_t> p, std::uint8_t x) {
  std::uint8_t y = 0;
  for (std::size_t i = p.size(); i-- > 0;) y = static_cast<std::uint8_t>(gf().mul(y, x) ^ p[i]);
  return y;
}

std::vector<std::uint8_t> syndromes(std::span<const std::uint8_t> cw, std::size_t nsym) {
  std::vector<std::uint8_t> s(nsym, 0);
  for (std::size_t i = 0; i < nsym; ++i) {
    const std::uint8_t x = gf().pow_alpha(i);
    std::uint8_t y = 0;
    for (std::uint8_t c : cw) y = static_cast<std::uint8_t>(gf().mul(y, x) ^ c);
    s[i] = y;
  }
  return s;
}

bool all_zero(std::span<const std::uint8_t> v) {
  return std::all_of(v.begin(), v.end(), [](std::uint8_t x) { return x == 0; });
}

// Berlekamp-Massey; returns the error locator lowest degree first.
std::vector<std::uint8_t> berlekamp_massey(std::span<const std::uint8_t> s) {
  std::vector<std::uint8_t> c{1}, b{1};
  std::size_t L = 0, m = 1;
  std::uint8_t bd = 1;
  for (std::size_t r = 0; r < s.size(); ++r) {
    std::uint8_t d = s[r];
    for (std::size_t i = 1; i <= L && i < c.size(); ++i) d ^= gf().mul(c[i], s[r - i]);
    if (d == 0) {
      ++m;
      continue;
    }
    const std::uint8_t coef = gf().div(d, bd);
    std::vector<std::uint8_t> t = c;
    if (c.size() < b.size() + m) c.resize(b.size() + m, 0);
    for (std::size_t i = 0; i < b.size(); ++i) c[i + m] ^= gf().mul(coef, b[i]);
    if (2 * L <= r) {
      L = r + 1 - L;
      b = std::move(t);
      bd = d;
      m = 1;
    } else {
      ++m;
    }
  }
  while (c.size() > 1 && c.back() == 0) c.pop_back();
  return c;
}

}  // namespace

void RsParams::validate() const {
  if (!(0 < k && k < n && n <= 255))
    throw std::invalid_argument("RS parameters must satisfy 0 < k < n <= 255 (got n=" + std::to_string(n) +
                                ", k=" + std::to_string(k) + ")");
}

Bytes rs_encode(std::span<const std::uint8_t> data, const RsParams& params) {
  params.validate();
  if (data.size() != params.k)
    throw std::invalid_argument("rs_encode: expected " + std::to_string(params.k) + " data symbols, got " +
                                std::to_string(data.size()));
  const std::size_t nsym = params.parity();
  const Bytes g = generator_poly(nsym);
  Bytes rem(nsym, 0);
  for (std::uint8_t d : data) {
    const std::uint8_t factor = d ^ rem[0];
    for (std::size_t j = 0; j + 1 < nsym; ++j) rem[j] = rem[j + 1] ^ gf().mul(g[j + 1], factor);
    rem[nsym - 1] = gf().mul(g[nsym], factor);
  }
  Bytes out(data.begin(), data.end());
  out.insert(out.end(), rem.begin(), rem.end());
  return out;
}

RsDecodeResult rs_decode(std::span<const std::uint8_t> codeword, const RsParams& params) {
  params.validate();
  if (codeword.size() != params.n)
    throw std::invalid_argument("rs_decode: expected " + std::to_string(params.n) + " symbols, got " +
                                std::to_string(codeword.size()));
  const std::size_t n = params.n, nsym = params.parity();
  Bytes cw(codeword.begin(), codeword.end());
  const auto s = syndromes(cw, nsym);
  RsDecodeResult result;
  if (all_zero(s)) {
    result.ok = true;
    result.data.assign(cw.begin(), cw.begin() + static_cast<std::ptrdiff_t>(params.k));
    return result;
  }

  const auto lambda = berlekamp_massey(s);
  const std::size_t n_errors = lambda.size() - 1;
  if (n_errors == 0 || 2 * n_errors > nsym) return result;

  // Chien search over the n positions in use; array index j holds x^(n-1-j).
  std::vector<std::size_t> powers;
  for (std::size_t p = 0; p < n; ++p)
    if (eval_low(lambda, gf().pow_alpha(255 - p)) == 0) powers.push_back(p);
  if (powers.size() != n_errors) return result;

  // Forney: Omega = S * Lambda mod x^nsym; e = X * Omega(X^-1) / Lambda'(X^-1).
  std::vector<std::uint8_t> omega(nsym, 0);
  for (std::size_t i = 0; i < nsym; ++i)
    for (std::size_t j = 0; j < lambda.size() && i + j < nsym; ++j) omega[i + j] ^= gf().mul(s[i], lambda[j]);
  std::vector<std::uint8_t> dlambda(lambda.size() > 1 ? lambda.size() - 1 : 1, 0);
  for (std::size_t i = 1; i < lambda.size(); i += 2) dlambda[i - 1] = lambda[i];

  for (std::size_t p : powers) {
    const std::uint8_t x = gf().pow_alpha(p);
    const std::uint8_t x_inv = gf().inv(x);
    const std::uint8_t denom = eval_low(dlambda, x_inv);
    if (denom == 0) return result;
    const std::uint8_t magnitude = gf().mul(x, gf().div(eval_low(omega, x_inv), denom));
    cw[n - 1 - p] ^= magnitude;
  }
  if (!all_zero(syndromes(cw, nsym))) return result;

  result.ok = true;
  result.corrected = n_errors;
  result.data.assign(cw.begin(), cw.begin() + static_cast<std::ptrdiff_t>(params.k));
  return result;
}

Bytes rs_encode_message(std::span<const std::uint8_t> message, const RsParams& params) {
  params.validate();
  Bytes out;
  for (std::size_t pos = 0; pos < message.size(); pos += params.k) {
    const std::size_t len = std::min(params.k, message.size() - pos);
    const RsParams block{len + params.parity(), len};
    const auto cw = rs_encode(message.subspan(pos, len), block);
    out.insert(out.end(), cw.begin(), cw.end());
  }
  return out;
}

std::optional<Bytes> rs_decode_message(std::span<const std::uint8_t> encoded, const RsParams& params) {
  params.validate();
  Bytes out;
  std::size_t pos = 0;
  while (pos < encoded.size()) {
    const std::size_t len = std::min(params.n, encoded.size() - pos);
    if (len <= params.parity()) return std::nullopt;
    const RsParams block{len, len - params.parity()};
    const auto r = rs_decode(encoded.subspan(pos, len), block);
    if (!r.ok) return std::nullopt;
    out.insert(out.end(), r.data.begin(), r.data.end());
    pos += len;
  }
  return out;
}

}  // namespace nerfsteg
