#include "cesynth/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cesynth/simd/kernels.hpp"

namespace cesynth::nn {
namespace {

void require_rank4(const Shape& s, const char* op) {
  if (s.size() != 4) throw UsageError(std::string(op) + ": expected N x C x H x W input, got " + shape_str(s));
}

struct ConvGeometry {
  std::size_t n, channels, height, width;  // image side
  std::size_t kernel, stride, pad;
  std::size_t grid_h, grid_w;  // column grid (conv output positions)
  std::size_t rows() const { return channels * kernel * kernel; }
  std::size_t cols() const { return n * grid_h * grid_w; }
};

// Gathers k x k patches of the image into a (C*k*k) x (N*Hg*Wg) matrix.
template <class T>
void im2col(const T* img, const ConvGeometry& g, T* cols) {
  const std::size_t plane = g.grid_h * g.grid_w;
  const std::size_t ncols = g.cols();
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t ky = 0; ky < g.kernel; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel; ++kx) {
        T* row = cols + ((c * g.kernel + ky) * g.kernel + kx) * ncols;
        for (std::size_t n = 0; n < g.n; ++n) {
          const T* src = img + (n * g.channels + c) * g.height * g.width;
          T* dst = row + n * plane;
          for (std::size_t oy = 0; oy < g.grid_h; ++oy) {
            const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad);
            T* out = dst + oy * g.grid_w;
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) {
              std::fill(out, out + g.grid_w, T{0});
              continue;
            }
            const T* line = src + static_cast<std::size_t>(iy) * g.width;
            for (std::size_t ox = 0; ox < g.grid_w; ++ox) {
              const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad);
              out[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.width)) ? T{0} : line[ix];
            }
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters (accumulates) columns back into the image.
template <class T>
void col2im(const T* cols, const ConvGeometry& g, T* img) {
  const std::size_t plane = g.grid_h * g.grid_w;
  const std::size_t ncols = g.cols();
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t ky = 0; ky < g.kernel; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel; ++kx) {
        const T* row = cols + ((c * g.kernel + ky) * g.kernel + kx) * ncols;
        for (std::size_t n = 0; n < g.n; ++n) {
          T* dst = img + (n * g.channels + c) * g.height * g.width;
          const T* src = row + n * plane;
          for (std::size_t oy = 0; oy < g.grid_h; ++oy) {
            const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) continue;
            T* line = dst + static_cast<std::size_t>(iy) * g.width;
            const T* in = src + oy * g.grid_w;
            for (std::size_t ox = 0; ox < g.grid_w; ++ox) {
              const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad);
              if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(g.width)) line[ix] += in[ox];
            }
          }
        }
      }
    }
  }
}

// N x C x P  <->  C x (N*P)
template <class T>
void nchw_to_cn(const T* src, std::size_t n, std::size_t c, std::size_t plane, T* dst) {
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t ch = 0; ch < c; ++ch)
      std::copy_n(src + (i * c + ch) * plane, plane, dst + ch * n * plane + i * plane);
}

template <class T>
void cn_to_nchw(const T* src, std::size_t n, std::size_t c, std::size_t plane, T* dst) {
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t ch = 0; ch < c; ++ch)
      std::copy_n(src + ch * n * plane + i * plane, plane, dst + (i * c + ch) * plane);
}

template <class T>
void add_channel_bias(Tensor<T>& y, const Tensor<T>& bias) {
  const std::size_t n = y.dim(0), c = y.dim(1), plane = y.dim(2) * y.dim(3);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t ch = 0; ch < c; ++ch) {
      T* p = y.data() + (i * c + ch) * plane;
      const T b = bias[ch];
      for (std::size_t j = 0; j < plane; ++j) p[j] += b;
    }
}

template <class T>
void accumulate_channel_sums(const Tensor<T>& dy, Tensor<T>& db) {
  const std::size_t n = dy.dim(0), c = dy.dim(1), plane = dy.dim(2) * dy.dim(3);
  for (std::size_t ch = 0; ch < c; ++ch) {
    double acc = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const T* p = dy.data() + (i * c + ch) * plane;
      for (std::size_t j = 0; j < plane; ++j) acc += p[j];
    }
    db[ch] += static_cast<T>(acc);
  }
}

template <class T>
void accumulate(Node<T>& target, const Tensor<T>& delta) {
  auto& g = target.grad_buffer();
  simd::axpy<T>(g.size(), T{1}, delta.data(), g.data());
}

template <class T>
Var<T> unary(const Var<T>& x, auto&& fwd, auto&& deriv) {
  Tensor<T> y(x->shape());
  const auto& xv = x->value;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = fwd(xv[i]);
  return record<T>(std::move(y), {x}, [deriv](Node<T>& self) {
    auto& in = *self.inputs[0];
    auto& g = in.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * deriv(in.value[i], self.value[i]);
  });
}

}  // namespace

template <class T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& bias, std::size_t stride, std::size_t pad) {
  require_rank4(x->shape(), "conv2d");
  require_rank4(w->shape(), "conv2d weight");
  const std::size_t n = x->shape()[0], cin = x->shape()[1], h = x->shape()[2], wd = x->shape()[3];
  const std::size_t cout = w->shape()[0], k = w->shape()[2];
  if (w->shape()[1] != cin || w->shape()[3] != k) {
    throw UsageError("conv2d: weight " + shape_str(w->shape()) + " incompatible with input " + shape_str(x->shape()));
  }
  if (h + 2 * pad < k || wd + 2 * pad < k || stride == 0) throw UsageError("conv2d: kernel larger than padded input");
  const ConvGeometry geo{n, cin, h, wd, k, stride, pad, (h + 2 * pad - k) / stride + 1, (wd + 2 * pad - k) / stride + 1};
  const std::size_t plane = geo.grid_h * geo.grid_w;

  std::vector<T> cols(geo.rows() * geo.cols());
  im2col(x->value.data(), geo, cols.data());
  std::vector<T> out(cout * geo.cols());
  simd::gemm<T>({false, false, cout, geo.cols(), geo.rows(), T{1}, w->value.data(), geo.rows(), cols.data(),
                 geo.cols(), T{0}, out.data(), geo.cols()});
  Tensor<T> y({n, cout, geo.grid_h, geo.grid_w});
  cn_to_nchw(out.data(), n, cout, plane, y.data());
  std::vector<Var<T>> inputs{x, w};
  if (bias) {
    if (bias->value.size() != cout) throw UsageError("conv2d: bias size mismatch");
    add_channel_bias(y, bias->value);
    inputs.push_back(bias);
  }

  return record<T>(std::move(y), std::move(inputs), [geo, cout](Node<T>& self) {
    auto& xn = *self.inputs[0];
    auto& wn = *self.inputs[1];
    const std::size_t plane = geo.grid_h * geo.grid_w;
    std::vector<T> dy(cout * geo.cols());
    nchw_to_cn(self.grad.data(), geo.n, cout, plane, dy.data());
    if (self.inputs.size() > 2 && self.inputs[2]->requires_grad) {
      accumulate_channel_sums(self.grad, self.inputs[2]->grad_buffer());
    }
    if (wn.requires_grad) {
      std::vector<T> cols(geo.rows() * geo.cols());
      im2col(xn.value.data(), geo, cols.data());
      simd::gemm<T>({false, true, cout, geo.rows(), geo.cols(), T{1}, dy.data(), geo.cols(), cols.data(),
                     geo.cols(), T{1}, wn.grad_buffer().data(), geo.rows()});
    }
    if (xn.requires_grad) {
      std::vector<T> dcols(geo.rows() * geo.cols());
      simd::gemm<T>({true, false, geo.rows(), geo.cols(), cout, T{1}, wn.value.data(), geo.rows(), dy.data(),
                     geo.cols(), T{0}, dcols.data(), geo.cols()});
      col2im(dcols.data(), geo, xn.grad_buffer().data());
    }
  });
}

template <class T>
Var<T> conv_transpose2d(const Var<T>& x, const Var<T>& w, const Var<T>& bias, std::size_t stride, std::size_t pad,
                        std::size_t output_pad) {
  require_rank4(x->shape(), "conv_transpose2d");
  require_rank4(w->shape(), "conv_transpose2d weight");
  const std::size_t n = x->shape()[0], cin = x->shape()[1], h = x->shape()[2], wd = x->shape()[3];
  const std::size_t cout = w->shape()[1], k = w->shape()[2];
  if (w->shape()[0] != cin) {
    throw UsageError("conv_transpose2d: weight " + shape_str(w->shape()) + " incompatible with input " +
                     shape_str(x->shape()));
  }
  const std::size_t ho = (h - 1) * stride + k + output_pad - 2 * pad;
  const std::size_t wo = (wd - 1) * stride + k + output_pad - 2 * pad;
  // The output image plays the role of a conv input whose column grid is x.
  const ConvGeometry geo{n, cout, ho, wo, k, stride, pad, h, wd};
  const std::size_t plane_in = h * wd;

  std::vector<T> xin(cin * geo.cols());
  nchw_to_cn(x->value.data(), n, cin, plane_in, xin.data());
  std::vector<T> cols(geo.rows() * geo.cols());
  simd::gemm<T>({true, false, geo.rows(), geo.cols(), cin, T{1}, w->value.data(), geo.rows(), xin.data(),
                 geo.cols(), T{0}, cols.data(), geo.cols()});
  Tensor<T> y({n, cout, ho, wo});
  col2im(cols.data(), geo, y.data());
  std::vector<Var<T>> inputs{x, w};
  if (bias) {
    if (bias->value.size() != cout) throw UsageError("conv_transpose2d: bias size mismatch");
    add_channel_bias(y, bias->value);
    inputs.push_back(bias);
  }

  return record<T>(std::move(y), std::move(inputs), [geo, cin](Node<T>& self) {
    auto& xn = *self.inputs[0];
    auto& wn = *self.inputs[1];
    const std::size_t plane_in = geo.grid_h * geo.grid_w;
    if (self.inputs.size() > 2 && self.inputs[2]->requires_grad) {
      accumulate_channel_sums(self.grad, self.inputs[2]->grad_buffer());
    }
    std::vector<T> dcols(geo.rows() * geo.cols());
    im2col(self.grad.data(), geo, dcols.data());
    if (wn.requires_grad) {
      std::vector<T> xin(cin * geo.cols());
      nchw_to_cn(xn.value.data(), geo.n, cin, plane_in, xin.data());
      simd::gemm<T>({false, true, cin, geo.rows(), geo.cols(), T{1}, xin.data(), geo.cols(), dcols.data(),
                     geo.cols(), T{1}, wn.grad_buffer().data(), geo.rows()});
    }
    if (xn.requires_grad) {
      std::vector<T> dx(cin * geo.cols());
      simd::gemm<T>({false, false, cin, geo.cols(), geo.rows(), T{1}, wn.value.data(), geo.rows(), dcols.data(),
                     geo.cols(), T{0}, dx.data(), geo.cols()});
      Tensor<T> dxt(xn.shape());
      cn_to_nchw(dx.data(), geo.n, cin, plane_in, dxt.data());
      accumulate(xn, dxt);
    }
  });
}

template <class T>
Var<T> batch_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, Tensor<T>& running_mean,
                  Tensor<T>& running_var, bool training, T momentum, T eps) {
  require_rank4(x->shape(), "batch_norm");
  const std::size_t n = x->shape()[0], c = x->shape()[1], plane = x->shape()[2] * x->shape()[3];
  const std::size_t count = n * plane;
  if (gamma->value.size() != c || beta->value.size() != c || running_mean.size() != c || running_var.size() != c) {
    throw UsageError("batch_norm: parameter size does not match " + std::to_string(c) + " channels");
  }

  std::vector<T> invstd(c);
  Tensor<T> xhat(x->shape());
  Tensor<T> y(x->shape());
  for (std::size_t ch = 0; ch < c; ++ch) {
    double mean, var;
    if (training) {
      double s = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const T* p = x->value.data() + (i * c + ch) * plane;
        for (std::size_t j = 0; j < plane; ++j) s += p[j];
      }
      mean = s / static_cast<double>(count);
      double ss = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const T* p = x->value.data() + (i * c + ch) * plane;
        for (std::size_t j = 0; j < plane; ++j) ss += (p[j] - mean) * (p[j] - mean);
      }
      var = ss / static_cast<double>(count);
      const double unbiased = count > 1 ? var * static_cast<double>(count) / static_cast<double>(count - 1) : var;
      running_mean[ch] = static_cast<T>((1 - momentum) * running_mean[ch] + momentum * mean);
      running_var[ch] = static_cast<T>((1 - momentum) * running_var[ch] + momentum * unbiased);
    } else {
      mean = running_mean[ch];
      var = running_var[ch];
    }
    invstd[ch] = static_cast<T>(1.0 / std::sqrt(var + eps));
    const T g = gamma->value[ch], b = beta->value[ch];
    const T m = static_cast<T>(mean);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t off = (i * c + ch) * plane;
      for (std::size_t j = 0; j < plane; ++j) {
        const T xh = (x->value[off + j] - m) * invstd[ch];
        xhat[off + j] = xh;
        y[off + j] = g * xh + b;
      }
    }
  }

  return record<T>(std::move(y), {x, gamma, beta},
                   [xhat = std::move(xhat), invstd = std::move(invstd), training, n, c, plane](Node<T>& self) {
                     auto& xn = *self.inputs[0];
                     auto& gn = *self.inputs[1];
                     auto& bn = *self.inputs[2];
                     const double count = static_cast<double>(n * plane);
                     for (std::size_t ch = 0; ch < c; ++ch) {
                       double sum_dy = 0, sum_dy_xhat = 0;
                       for (std::size_t i = 0; i < n; ++i) {
                         const std::size_t off = (i * c + ch) * plane;
                         for (std::size_t j = 0; j < plane; ++j) {
                           sum_dy += self.grad[off + j];
                           sum_dy_xhat += self.grad[off + j] * xhat[off + j];
                         }
                       }
                       if (gn.requires_grad) gn.grad_buffer()[ch] += static_cast<T>(sum_dy_xhat);
                       if (bn.requires_grad) bn.grad_buffer()[ch] += static_cast<T>(sum_dy);
                       if (!xn.requires_grad) continue;
                       auto& dx = xn.grad_buffer();
                       const T scale = gn.value[ch] * invstd[ch];
                       for (std::size_t i = 0; i < n; ++i) {
                         const std::size_t off = (i * c + ch) * plane;
                         for (std::size_t j = 0; j < plane; ++j) {
                           if (training) {
                             dx[off + j] += static_cast<T>(scale / count *
                                                           (count * self.grad[off + j] - sum_dy -
                                                            xhat[off + j] * sum_dy_xhat));
                           } else {
                             dx[off + j] += scale * self.grad[off + j];
                           }
                         }
                       }
                     }
                   });
}

template <class T>
Var<T> leaky_relu(const Var<T>& x, T slope) {
  return unary<T>(
      x, [slope](T v) { return v > T{0} ? v : slope * v; },
      [slope](T v, T) { return v > T{0} ? T{1} : slope; });
}

template <class T>
Var<T> relu(const Var<T>& x) {
  return unary<T>(
      x, [](T v) { return v > T{0} ? v : T{0}; }, [](T v, T) { return v > T{0} ? T{1} : T{0}; });
}

template <class T>
Var<T> sigmoid(const Var<T>& x) {
  return unary<T>(
      x,
      [](T v) {
        if (v >= T{0}) return T{1} / (T{1} + std::exp(-v));
        const T e = std::exp(v);
        return e / (T{1} + e);
      },
      [](T, T y) { return y * (T{1} - y); });
}

template <class T>
Var<T> concat_channels(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw UsageError("concat_channels: no inputs");
  const Shape& s0 = parts[0]->shape();
  require_rank4(s0, "concat_channels");
  std::size_t total = 0;
  for (const auto& p : parts) {
    const Shape& s = p->shape();
    if (s.size() != 4 || s[0] != s0[0] || s[2] != s0[2] || s[3] != s0[3]) {
      throw UsageError("concat_channels: shape mismatch " + shape_str(s0) + " vs " + shape_str(s));
    }
    total += s[1];
  }
  const std::size_t n = s0[0], plane = s0[2] * s0[3];
  Tensor<T> y({n, total, s0[2], s0[3]});
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t c = p->shape()[1];
    for (std::size_t i = 0; i < n; ++i)
      std::copy_n(p->value.data() + i * c * plane, c * plane, y.data() + (i * total + offset) * plane);
    offset += c;
  }
  return record<T>(std::move(y), parts, [n, plane, total](Node<T>& self) {
    std::size_t offset = 0;
    for (auto& in : self.inputs) {
      const std::size_t c = in->shape()[1];
      if (in->requires_grad) {
        auto& g = in->grad_buffer();
        for (std::size_t i = 0; i < n; ++i)
          simd::axpy<T>(c * plane, T{1}, self.grad.data() + (i * total + offset) * plane, g.data() + i * c * plane);
      }
      offset += c;
    }
  });
}

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a->shape(), b->shape(), "add");
  Tensor<T> y = a->value;
  simd::axpy<T>(y.size(), T{1}, b->value.data(), y.data());
  return record<T>(std::move(y), {a, b}, [](Node<T>& self) {
    for (auto& in : self.inputs)
      if (in->requires_grad) accumulate(*in, self.grad);
  });
}

template <class T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a->shape(), b->shape(), "sub");
  Tensor<T> y = a->value;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= b->value[i];
  return record<T>(std::move(y), {a, b}, [](Node<T>& self) {
    if (self.inputs[0]->requires_grad) accumulate(*self.inputs[0], self.grad);
    if (self.inputs[1]->requires_grad) {
      auto& g = self.inputs[1]->grad_buffer();
      simd::axpy<T>(g.size(), T{-1}, self.grad.data(), g.data());
    }
  });
}

template <class T>
Var<T> scale(const Var<T>& x, T factor) {
  Tensor<T> y = x->value;
  for (auto& v : y.values()) v *= factor;
  return record<T>(std::move(y), {x}, [factor](Node<T>& self) {
    auto& g = self.inputs[0]->grad_buffer();
    simd::axpy<T>(g.size(), factor, self.grad.data(), g.data());
  });
}

template <class T>
Var<T> global_avg_pool(const Var<T>& x) {
  require_rank4(x->shape(), "global_avg_pool");
  const std::size_t n = x->shape()[0], c = x->shape()[1], plane = x->shape()[2] * x->shape()[3];
  Tensor<T> y({n, c, 1, 1});
  for (std::size_t i = 0; i < n * c; ++i) {
    double s = 0;
    const T* p = x->value.data() + i * plane;
    for (std::size_t j = 0; j < plane; ++j) s += p[j];
    y[i] = static_cast<T>(s / static_cast<double>(plane));
  }
  return record<T>(std::move(y), {x}, [n, c, plane](Node<T>& self) {
    auto& g = self.inputs[0]->grad_buffer();
    const T inv = T{1} / static_cast<T>(plane);
    for (std::size_t i = 0; i < n * c; ++i) {
      const T d = self.grad[i] * inv;
      T* p = g.data() + i * plane;
      for (std::size_t j = 0; j < plane; ++j) p[j] += d;
    }
  });
}

template <class T>
Var<T> global_max_pool(const Var<T>& x) {
  require_rank4(x->shape(), "global_max_pool");
  const std::size_t n = x->shape()[0], c = x->shape()[1], plane = x->shape()[2] * x->shape()[3];
  Tensor<T> y({n, c, 1, 1});
  std::vector<std::size_t> argmax(n * c);
  for (std::size_t i = 0; i < n * c; ++i) {
    const T* p = x->value.data() + i * plane;
    std::size_t best = 0;
    for (std::size_t j = 1; j < plane; ++j)
      if (p[j] > p[best]) best = j;
    argmax[i] = i * plane + best;
    y[i] = p[best];
  }
  return record<T>(std::move(y), {x}, [argmax = std::move(argmax)](Node<T>& self) {
    auto& g = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < argmax.size(); ++i) g[argmax[i]] += self.grad[i];
  });
}

template <class T>
Var<T> mul_channelwise(const Var<T>& x, const Var<T>& a) {
  require_rank4(x->shape(), "mul_channelwise");
  const std::size_t n = x->shape()[0], c = x->shape()[1], plane = x->shape()[2] * x->shape()[3];
  if (a->shape() != Shape{n, c, 1, 1}) {
    throw UsageError("apply_attention: channel mismatch, weights " + shape_str(a->shape()) + " for features " +
                     shape_str(x->shape()));
  }
  Tensor<T> y(x->shape());
  for (std::size_t i = 0; i < n * c; ++i) {
    const T w = a->value[i];
    const T* p = x->value.data() + i * plane;
    T* q = y.data() + i * plane;
    for (std::size_t j = 0; j < plane; ++j) q[j] = p[j] * w;
  }
  return record<T>(std::move(y), {x, a}, [n, c, plane](Node<T>& self) {
    auto& xn = *self.inputs[0];
    auto& an = *self.inputs[1];
    for (std::size_t i = 0; i < n * c; ++i) {
      const T* dy = self.grad.data() + i * plane;
      if (xn.requires_grad) simd::axpy<T>(plane, an.value[i], dy, xn.grad_buffer().data() + i * plane);
      if (an.requires_grad) an.grad_buffer()[i] += simd::dot<T>(plane, dy, xn.value.data() + i * plane);
    }
  });
}

template <class T>
Var<T> weighted_mean_abs_error(const Var<T>& a, const Var<T>& b, const Tensor<T>& weights) {
  require_same_shape(a->shape(), b->shape(), "l1 loss");
  require_same_shape(a->shape(), weights.shape(), "l1 loss weights");
  const std::size_t count = a->value.size();
  double s = 0;
  for (std::size_t i = 0; i < count; ++i) s += static_cast<double>(weights[i]) * std::abs(a->value[i] - b->value[i]);
  Tensor<T> y({1}, static_cast<T>(s / static_cast<double>(count)));
  return record<T>(std::move(y), {a, b}, [weights, count](Node<T>& self) {
    auto& an = *self.inputs[0];
    auto& bn = *self.inputs[1];
    const T scale = self.grad[0] / static_cast<T>(count);
    for (std::size_t i = 0; i < count; ++i) {
      const T diff = an.value[i] - bn.value[i];
      const T sign = diff > T{0} ? T{1} : (diff < T{0} ? T{-1} : T{0});
      const T d = scale * weights[i] * sign;
      if (an.requires_grad) an.grad_buffer()[i] += d;
      if (bn.requires_grad) bn.grad_buffer()[i] -= d;
    }
  });
}

template <class T>
Var<T> mean_abs_error(const Var<T>& a, const Var<T>& b) {
  return weighted_mean_abs_error(a, b, Tensor<T>(a->shape(), T{1}));
}

namespace {
template <class T>
Var<T> mean_log_impl(const Var<T>& x, T lo, T hi, bool complement) {
  const std::size_t count = x->value.size();
  double s = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const T v = std::clamp(x->value[i], lo, hi);
    s += complement ? std::log1p(-static_cast<double>(v)) : std::log(static_cast<double>(v));
  }
  Tensor<T> y({1}, static_cast<T>(s / static_cast<double>(count)));
  return record<T>(std::move(y), {x}, [lo, hi, complement, count](Node<T>& self) {
    auto& xn = *self.inputs[0];
    auto& g = xn.grad_buffer();
    const T scale = self.grad[0] / static_cast<T>(count);
    for (std::size_t i = 0; i < count; ++i) {
      const T v = xn.value[i];
      if (v < lo || v > hi) continue;
      g[i] += complement ? -scale / (T{1} - v) : scale / v;
    }
  });
}
}  // namespace

template <class T>
Var<T> mean_log_clamped(const Var<T>& x, T lo, T hi) {
  return mean_log_impl(x, lo, hi, false);
}

template <class T>
Var<T> mean_log1m_clamped(const Var<T>& x, T lo, T hi) {
  return mean_log_impl(x, lo, hi, true);
}

template <class T>
Var<T> weighted_sum(const Var<T>& x, const Tensor<T>& w) {
  require_same_shape(x->shape(), w.shape(), "weighted_sum");
  Tensor<T> y({1}, simd::dot<T>(w.size(), x->value.data(), w.data()));
  return record<T>(std::move(y), {x}, [w](Node<T>& self) {
    auto& g = self.inputs[0]->grad_buffer();
    simd::axpy<T>(g.size(), self.grad[0], w.data(), g.data());
  });
}

#define CESYNTH_INSTANTIATE_OPS(T)                                                                              \
  template Var<T> conv2d<T>(const Var<T>&, const Var<T>&, const Var<T>&, std::size_t, std::size_t);             \
  template Var<T> conv_transpose2d<T>(const Var<T>&, const Var<T>&, const Var<T>&, std::size_t, std::size_t,    \
                                      std::size_t);                                                             \
  template Var<T> batch_norm<T>(const Var<T>&, const Var<T>&, const Var<T>&, Tensor<T>&, Tensor<T>&, bool, T, T); \
  template Var<T> leaky_relu<T>(const Var<T>&, T);                                                              \
  template Var<T> relu<T>(const Var<T>&);                                                                       \
  template Var<T> sigmoid<T>(const Var<T>&);                                                                    \
  template Var<T> concat_channels<T>(const std::vector<Var<T>>&);                                               \
  template Var<T> add<T>(const Var<T>&, const Var<T>&);                                                         \
  template Var<T> sub<T>(const Var<T>&, const Var<T>&);                                                         \
  template Var<T> scale<T>(const Var<T>&, T);                                                                   \
  template Var<T> global_avg_pool<T>(const Var<T>&);                                                            \
  template Var<T> global_max_pool<T>(const Var<T>&);                                                            \
  template Var<T> mul_channelwise<T>(const Var<T>&, const Var<T>&);                                             \
  template Var<T> mean_abs_error<T>(const Var<T>&, const Var<T>&);                                              \
  template Var<T> weighted_mean_abs_error<T>(const Var<T>&, const Var<T>&, const Tensor<T>&);                   \
  template Var<T> mean_log_clamped<T>(const Var<T>&, T, T);                                                     \
  template Var<T> mean_log1m_clamped<T>(const Var<T>&, T, T);                                                   \
  template Var<T> weighted_sum<T>(const Var<T>&, const Tensor<T>&);

CESYNTH_INSTANTIATE_OPS(float)
CESYNTH_INSTANTIATE_OPS(double)

}  // namespace cesynth::nn
