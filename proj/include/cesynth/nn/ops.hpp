#pragma once

#include <vector>

#include "cesynth/nn/autograd.hpp"

// Differentiable tensor operations. Feature maps are N x C x H x W; scalars
// (losses) are shape [1].
namespace cesynth::nn {

/// Square-kernel convolution. w is Cout x Cin x k x k; bias may be null.
template <class T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& bias, std::size_t stride, std::size_t pad);

/// Transposed convolution. w is Cin x Cout x k x k. Output side is
/// (H - 1) * stride - 2 * pad + k + output_pad.
template <class T>
Var<T> conv_transpose2d(const Var<T>& x, const Var<T>& w, const Var<T>& bias, std::size_t stride, std::size_t pad,
                        std::size_t output_pad);

/// Per-channel batch normalisation. In training mode the batch statistics are
/// used and folded into the running estimates; otherwise the running estimates
/// are used and the op is affine.
template <class T>
Var<T> batch_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, Tensor<T>& running_mean,
                  Tensor<T>& running_var, bool training, T momentum, T eps);

template <class T> Var<T> leaky_relu(const Var<T>& x, T slope);
template <class T> Var<T> relu(const Var<T>& x);
template <class T> Var<T> sigmoid(const Var<T>& x);

template <class T> Var<T> concat_channels(const std::vector<Var<T>>& parts);
template <class T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <class T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <class T> Var<T> scale(const Var<T>& x, T factor);

/// Global average / max over H x W, giving N x C x 1 x 1.
template <class T> Var<T> global_avg_pool(const Var<T>& x);
template <class T> Var<T> global_max_pool(const Var<T>& x);

/// x * a with a (N x C x 1 x 1) broadcast over H x W.
template <class T> Var<T> mul_channelwise(const Var<T>& x, const Var<T>& a);

/// mean(|a - b|)
template <class T> Var<T> mean_abs_error(const Var<T>& a, const Var<T>& b);
/// mean(weights * |a - b|), weights a constant tensor shaped like a.
template <class T> Var<T> weighted_mean_abs_error(const Var<T>& a, const Var<T>& b, const Tensor<T>& weights);

/// mean(log(clamp(x, lo, hi))); no gradient where the clamp is active.
template <class T> Var<T> mean_log_clamped(const Var<T>& x, T lo, T hi);
/// mean(log(1 - clamp(x, lo, hi))); no gradient where the clamp is active.
template <class T> Var<T> mean_log1m_clamped(const Var<T>& x, T lo, T hi);

/// sum(x * w) for a constant w; handy for projecting outputs to a scalar.
template <class T> Var<T> weighted_sum(const Var<T>& x, const Tensor<T>& w);

}  // namespace cesynth::nn
