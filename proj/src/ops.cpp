#include "nerfsteg/ops.hpp"

#include <Eigen/Core>
#include <cmath>
#include <string>

namespace nerfsteg {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;
template <typename T>
using VecMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>;
template <typename T>
using ConstVecMap = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>;

template <typename T>
using ImplPtr = std::shared_ptr<detail::TensorImpl<T>>;

void require(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

template <typename T>
void require_same_shape(const BasicTensor<T>& a, const BasicTensor<T>& b, const char* op) {
  require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                                      shape_str(b.shape()));
}

template <typename T>
T stable_sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

}  // namespace

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape(a, b, "add");
  Buffer<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  ImplPtr<T> ai = a.impl(), bi = b.impl();
  return make_result<T>(a.shape(), std::move(out), {a, b}, [ai, bi](const detail::TensorImpl<T>& o) {
    for (auto* in : {ai.get(), bi.get()}) {
      if (!in->requires_grad) continue;
      auto g = in->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
    }
  });
}

template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape(a, b, "sub");
  Buffer<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  ImplPtr<T> ai = a.impl(), bi = b.impl();
  return make_result<T>(a.shape(), std::move(out), {a, b}, [ai, bi](const detail::TensorImpl<T>& o) {
    if (ai->requires_grad) {
      auto g = ai->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
    }
    if (bi->requires_grad) {
      auto g = bi->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= o.grad[i];
    }
  });
}

template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape(a, b, "mul");
  Buffer<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  ImplPtr<T> ai = a.impl(), bi = b.impl();
  return make_result<T>(a.shape(), std::move(out), {a, b}, [ai, bi](const detail::TensorImpl<T>& o) {
    if (ai->requires_grad) {
      auto g = ai->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * bi->data[i];
    }
    if (bi->requires_grad) {
      auto g = bi->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * ai->data[i];
    }
  });
}

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& a, T s) {
  Buffer<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * s;
  ImplPtr<T> ai = a.impl();
  return make_result<T>(a.shape(), std::move(out), {a}, [ai, s](const detail::TensorImpl<T>& o) {
    auto g = ai->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * s;
  });
}

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x) {
  Buffer<T> out(x.numel());
  auto xd = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xd[i] > T(0) ? xd[i] : T(0);
  ImplPtr<T> xi = x.impl();
  return make_result<T>(x.shape(), std::move(out), {x}, [xi](const detail::TensorImpl<T>& o) {
    auto g = xi->grad_buffer();
    // Subgradient at exactly 0 is taken as 0.
    for (std::size_t i = 0; i < g.size(); ++i)
      if (xi->data[i] > T(0)) g[i] += o.grad[i];
  });
}

template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& x) {
  Buffer<T> out(x.numel());
  auto xd = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = stable_sigmoid(xd[i]);
  ImplPtr<T> xi = x.impl();
  return make_result<T>(x.shape(), std::move(out), {x}, [xi](const detail::TensorImpl<T>& o) {
    auto g = xi->grad_buffer();
    // sigma'(x) from x itself stays non-zero where sigma(x) rounds to 0 or 1.
    for (std::size_t i = 0; i < g.size(); ++i) {
      const T e = std::exp(-std::abs(xi->data[i]));
      g[i] += o.grad[i] * (e / ((T(1) + e) * (T(1) + e)));
    }
  });
}

template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& x) {
  T acc = 0;
  for (T v : x.data()) acc += v;
  ImplPtr<T> xi = x.impl();
  return make_result<T>(Shape{1}, Buffer<T>{acc}, {x}, [xi](const detail::TensorImpl<T>& o) {
    for (auto& g : xi->grad_buffer()) g += o.grad[0];
  });
}

template <typename T>
BasicTensor<T> mean(const BasicTensor<T>& x) {
  return scale(sum(x), T(1) / static_cast<T>(x.numel()));
}

template <typename T>
BasicTensor<T> reshape(const BasicTensor<T>& x, Shape shape) {
  require(shape_numel(shape) == x.numel(),
          "reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  Buffer<T> out(x.data().begin(), x.data().end());
  ImplPtr<T> xi = x.impl();
  return make_result<T>(std::move(shape), std::move(out), {x}, [xi](const detail::TensorImpl<T>& o) {
    auto g = xi->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
  });
}

template <typename T>
BasicTensor<T> concat_cols(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require(a.rank() == 2 && b.rank() == 2 && a.dim(0) == b.dim(0),
          "concat_cols: incompatible " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  const std::size_t rows = a.dim(0), na = a.dim(1), nb = b.dim(1), n = na + nb;
  Buffer<T> out(rows * n);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(a.data().begin() + r * na, na, out.begin() + r * n);
    std::copy_n(b.data().begin() + r * nb, nb, out.begin() + r * n + na);
  }
  ImplPtr<T> ai = a.impl(), bi = b.impl();
  return make_result<T>(Shape{rows, n}, std::move(out), {a, b},
                        [ai, bi, rows, na, nb, n](const detail::TensorImpl<T>& o) {
                          if (ai->requires_grad) {
                            auto g = ai->grad_buffer();
                            for (std::size_t r = 0; r < rows; ++r)
                              for (std::size_t c = 0; c < na; ++c) g[r * na + c] += o.grad[r * n + c];
                          }
                          if (bi->requires_grad) {
                            auto g = bi->grad_buffer();
                            for (std::size_t r = 0; r < rows; ++r)
                              for (std::size_t c = 0; c < nb; ++c) g[r * nb + c] += o.grad[r * n + na + c];
                          }
                        });
}

template <typename T>
BasicTensor<T> linear(const BasicTensor<T>& X, const BasicTensor<T>& W, const BasicTensor<T>& b) {
  require(X.rank() == 2 && W.rank() == 2 && b.rank() == 1 && X.dim(1) == W.dim(1) && b.dim(0) == W.dim(0),
          "linear: incompatible shapes X" + shape_str(X.shape()) + " W" + shape_str(W.shape()) + " b" +
              shape_str(b.shape()));
  const auto B = static_cast<Eigen::Index>(X.dim(0));
  const auto N = static_cast<Eigen::Index>(X.dim(1));
  const auto M = static_cast<Eigen::Index>(W.dim(0));
  Buffer<T> out(static_cast<std::size_t>(B * M));
  {
    MatMap<T> Y(out.data(), B, M);
    ConstMatMap<T> Xm(X.data().data(), B, N), Wm(W.data().data(), M, N);
    ConstVecMap<T> bv(b.data().data(), M);
    if (B == 1) {
      VecMap<T>(out.data(), M).noalias() = Wm * Xm.row(0).transpose();
    } else {
      Y.noalias() = Xm * Wm.transpose();
    }
    Y.rowwise() += bv.transpose();
  }
  ImplPtr<T> xi = X.impl(), wi = W.impl(), bi = b.impl();
  return make_result<T>(Shape{X.dim(0), W.dim(0)}, std::move(out), {X, W, b},
                        [xi, wi, bi, B, N, M](const detail::TensorImpl<T>& o) {
                          ConstMatMap<T> dY(o.grad.data(), B, M);
                          if (xi->requires_grad) {
                            MatMap<T> dX(xi->grad_buffer().data(), B, N);
                            dX.noalias() += dY * ConstMatMap<T>(wi->data.data(), M, N);
                          }
                          if (wi->requires_grad) {
                            MatMap<T> dW(wi->grad_buffer().data(), M, N);
                            ConstMatMap<T> Xm(xi->data.data(), B, N);
                            if (B == 1)
                              dW.noalias() += dY.row(0).transpose() * Xm.row(0);
                            else
                              dW.noalias() += dY.transpose() * Xm;
                          }
                          if (bi->requires_grad) {
                            VecMap<T> db(bi->grad_buffer().data(), M);
                            db += dY.colwise().sum().transpose();
                          }
                        });
}

template <typename T>
BasicTensor<T> affine(const BasicTensor<T>& x, const BasicTensor<T>& W, const BasicTensor<T>& b) {
  require(x.rank() == 1, "affine: x must be a vector, got " + shape_str(x.shape()));
  require(W.rank() == 2 && W.dim(1) == x.dim(0),
          "affine: W" + shape_str(W.shape()) + " incompatible with x" + shape_str(x.shape()));
  auto y = linear(reshape(x, Shape{1, x.dim(0)}), W, b);
  return reshape(y, Shape{W.dim(0)});
}

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& kernels, const BasicTensor<T>& bias,
                      std::size_t stride, std::size_t padding) {
  require(input.rank() == 3, "conv2d: input must be C x H x W, got " + shape_str(input.shape()));
  require(kernels.rank() == 4 && kernels.dim(2) == kernels.dim(3),
          "conv2d: kernels must be C_out x C_in x K x K, got " + shape_str(kernels.shape()));
  require(kernels.dim(1) == input.dim(0), "conv2d: input has " + std::to_string(input.dim(0)) +
                                              " channels but kernels expect " + std::to_string(kernels.dim(1)));
  require(bias.rank() == 1 && bias.dim(0) == kernels.dim(0), "conv2d: bias must have C_out entries");
  if (stride == 0) throw std::invalid_argument("conv2d: stride must be positive");
  const std::size_t C = input.dim(0), H = input.dim(1), W = input.dim(2);
  const std::size_t Co = kernels.dim(0), K = kernels.dim(2);
  require(H + 2 * padding >= K && W + 2 * padding >= K,
          "conv2d: kernel " + std::to_string(K) + " larger than padded input " + shape_str(input.shape()));
  const std::size_t Ho = conv_out_size(H, K, stride, padding), Wo = conv_out_size(W, K, stride, padding);
  const std::size_t rows = C * K * K, P = Ho * Wo;

  // im2col: column p holds the receptive field of output pixel p.
  auto col = std::make_shared<Buffer<T>>(rows * P, T(0));
  {
    auto in = input.data();
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t ky = 0; ky < K; ++ky)
        for (std::size_t kx = 0; kx < K; ++kx) {
          T* dst = col->data() + ((c * K + ky) * K + kx) * P;
          for (std::size_t oy = 0; oy < Ho; ++oy) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(padding);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
            for (std::size_t ox = 0; ox < Wo; ++ox) {
              const std::ptrdiff_t ix =
                  static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(padding);
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
              dst[oy * Wo + ox] = in[(c * H + static_cast<std::size_t>(iy)) * W + static_cast<std::size_t>(ix)];
            }
          }
        }
  }

  const auto eCo = static_cast<Eigen::Index>(Co), eRows = static_cast<Eigen::Index>(rows),
             eP = static_cast<Eigen::Index>(P);
  Buffer<T> out(Co * P);
  {
    MatMap<T> Y(out.data(), eCo, eP);
    Y.noalias() = ConstMatMap<T>(kernels.data().data(), eCo, eRows) * ConstMatMap<T>(col->data(), eRows, eP);
    Y.colwise() += ConstVecMap<T>(bias.data().data(), eCo);
  }

  ImplPtr<T> ii = input.impl(), ki = kernels.impl(), bi = bias.impl();
  return make_result<T>(
      Shape{Co, Ho, Wo}, std::move(out), {input, kernels, bias},
      [ii, ki, bi, col, C, H, W, K, Ho, Wo, stride, padding, eCo, eRows, eP](const detail::TensorImpl<T>& o) {
        ConstMatMap<T> dY(o.grad.data(), eCo, eP);
        if (ki->requires_grad) {
          MatMap<T>(ki->grad_buffer().data(), eCo, eRows).noalias() +=
              dY * ConstMatMap<T>(col->data(), eRows, eP).transpose();
        }
        if (bi->requires_grad) VecMap<T>(bi->grad_buffer().data(), eCo) += dY.rowwise().sum();
        if (ii->requires_grad) {
          RowMat<T> dcol = ConstMatMap<T>(ki->data.data(), eCo, eRows).transpose() * dY;
          auto g = ii->grad_buffer();
          const std::size_t P = Ho * Wo;
          for (std::size_t c = 0; c < C; ++c)
            for (std::size_t ky = 0; ky < K; ++ky)
              for (std::size_t kx = 0; kx < K; ++kx) {
                const T* src = dcol.data() + ((c * K + ky) * K + kx) * P;
                for (std::size_t oy = 0; oy < Ho; ++oy) {
                  const std::ptrdiff_t iy =
                      static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(padding);
                  if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
                  for (std::size_t ox = 0; ox < Wo; ++ox) {
                    const std::ptrdiff_t ix =
                        static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(padding);
                    if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
                    g[(c * H + static_cast<std::size_t>(iy)) * W + static_cast<std::size_t>(ix)] += src[oy * Wo + ox];
                  }
                }
              }
        }
      });
}

template <typename T>
BasicTensor<T> maxpool2d(const BasicTensor<T>& input, std::size_t k, std::size_t stride) {
  require(input.rank() == 3, "maxpool2d: input must be C x H x W, got " + shape_str(input.shape()));
  if (k == 0 || stride == 0) throw std::invalid_argument("maxpool2d: window and stride must be positive");
  const std::size_t C = input.dim(0), H = input.dim(1), W = input.dim(2);
  require(k <= H && k <= W, "maxpool2d: window " + std::to_string(k) + " exceeds input " + shape_str(input.shape()));
  const std::size_t Ho = pool_out_size(H, k, stride), Wo = pool_out_size(W, k, stride);
  Buffer<T> out(C * Ho * Wo);
  auto argmax = std::make_shared<std::vector<std::size_t>>(out.size());
  auto in = input.data();
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t oy = 0; oy < Ho; ++oy)
      for (std::size_t ox = 0; ox < Wo; ++ox) {
        std::size_t best = (c * H + oy * stride) * W + ox * stride;
        for (std::size_t ky = 0; ky < k; ++ky)
          for (std::size_t kx = 0; kx < k; ++kx) {
            const std::size_t idx = (c * H + oy * stride + ky) * W + ox * stride + kx;
            if (in[idx] > in[best]) best = idx;
          }
        const std::size_t o = (c * Ho + oy) * Wo + ox;
        out[o] = in[best];
        (*argmax)[o] = best;
      }
  ImplPtr<T> ii = input.impl();
  return make_result<T>(Shape{C, Ho, Wo}, std::move(out), {input}, [ii, argmax](const detail::TensorImpl<T>& o) {
    auto g = ii->grad_buffer();
    for (std::size_t i = 0; i < argmax->size(); ++i) g[(*argmax)[i]] += o.grad[i];
  });
}

template <typename T>
BasicTensor<T> mse_loss(const BasicTensor<T>& pred, const BasicTensor<T>& target) {
  require_same_shape(pred, target, "mse_loss");
  const std::size_t n = pred.numel();
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const T d = pred[i] - target[i];
    acc += d * d;
  }
  ImplPtr<T> pi = pred.impl(), ti = target.impl();
  return make_result<T>(Shape{1}, Buffer<T>{acc / static_cast<T>(n)}, {pred, target},
                        [pi, ti, n](const detail::TensorImpl<T>& o) {
                          const T s = T(2) * o.grad[0] / static_cast<T>(n);
                          if (pi->requires_grad) {
                            auto g = pi->grad_buffer();
                            for (std::size_t i = 0; i < n; ++i) g[i] += s * (pi->data[i] - ti->data[i]);
                          }
                          if (ti->requires_grad) {
                            auto g = ti->grad_buffer();
                            for (std::size_t i = 0; i < n; ++i) g[i] -= s * (pi->data[i] - ti->data[i]);
                          }
                        });
}

#define NERFSTEG_INSTANTIATE_OPS(T)                                                                          \
  template BasicTensor<T> add(const BasicTensor<T>&, const BasicTensor<T>&);                                 \
  template BasicTensor<T> sub(const BasicTensor<T>&, const BasicTensor<T>&);                                 \
  template BasicTensor<T> mul(const BasicTensor<T>&, const BasicTensor<T>&);                                 \
  template BasicTensor<T> scale(const BasicTensor<T>&, T);                                                   \
  template BasicTensor<T> relu(const BasicTensor<T>&);                                                       \
  template BasicTensor<T> sigmoid(const BasicTensor<T>&);                                                    \
  template BasicTensor<T> sum(const BasicTensor<T>&);                                                        \
  template BasicTensor<T> mean(const BasicTensor<T>&);                                                       \
  template BasicTensor<T> reshape(const BasicTensor<T>&, Shape);                                             \
  template BasicTensor<T> concat_cols(const BasicTensor<T>&, const BasicTensor<T>&);                         \
  template BasicTensor<T> affine(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&);       \
  template BasicTensor<T> linear(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&);       \
  template BasicTensor<T> conv2d(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,        \
                                 std::size_t, std::size_t);                                                  \
  template BasicTensor<T> maxpool2d(const BasicTensor<T>&, std::size_t, std::size_t);                        \
  template BasicTensor<T> mse_loss(const BasicTensor<T>&, const BasicTensor<T>&);

NERFSTEG_INSTANTIATE_OPS(float)
NERFSTEG_INSTANTIATE_OPS(double)

}  // namespace nerfsteg
