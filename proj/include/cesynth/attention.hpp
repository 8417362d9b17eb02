#pragma once

#include "cesynth/nn/layers.hpp"

namespace cesynth {

/// Shared two-layer bottleneck C -> C/r -> C with ReLU between, applied to
/// N x C x 1 x 1 descriptors (1x1 convolutions on a 1x1 map are dense layers).
template <class T>
class SharedMlp {
 public:
  SharedMlp() = default;
  SharedMlp(std::size_t channels, std::size_t reduction, Rng& rng, const nn::InitOptions& init);

  nn::Var<T> operator()(const nn::Var<T>& pooled) const { return fc2(nn::relu(fc1(pooled))); }
  std::size_t channels() const { return channels_; }
  void register_into(nn::ParameterRegistry<T>& reg, const std::string& prefix) const;

  /// Sets every weight and bias to zero (the MLP then maps everything to 0).
  void zero();

  nn::Conv2d<T> fc1, fc2;

 private:
  std::size_t channels_ = 0;
};

/// sigmoid(mlp(avgpool(f)) + mlp(maxpool(f))) with global pooling over H x W.
/// Returns per-channel weights shaped N x C x 1 x 1, each strictly in (0, 1)
/// up to floating-point saturation of the sigmoid.
template <class T>
nn::Var<T> channel_attention(const nn::Var<T>& features, const SharedMlp<T>& mlp);

/// features * weights, broadcast over H x W.
template <class T>
nn::Var<T> apply_attention(const nn::Var<T>& features, const nn::Var<T>& weights) {
  return nn::mul_channelwise(features, weights);
}

}  // namespace cesynth
