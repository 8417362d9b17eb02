#pragma once

#include <string>
#include <vector>

#include "cesynth/nn/autograd.hpp"
#include "cesynth/nn/ops.hpp"
#include "cesynth/rng.hpp"

namespace cesynth::nn {

enum class Phase { kTrain, kEval };

struct InitOptions {
  double weight_std = 0.02;  // truncated normal, cut at 2 sigma
  double bn_momentum = 0.1;
  double bn_eps = 1e-5;
};

/// Named handles to every learnable parameter and persistent buffer of a model.
template <class T>
class ParameterRegistry {
 public:
  struct Param {
    std::string name;
    Var<T> var;
  };
  struct Buffer {
    std::string name;
    Tensor<T>* tensor;
  };

  void add_param(std::string name, Var<T> var) { params_.push_back({std::move(name), std::move(var)}); }
  void add_buffer(std::string name, Tensor<T>* tensor) { buffers_.push_back({std::move(name), tensor}); }

  const std::vector<Param>& params() const { return params_; }
  const std::vector<Buffer>& buffers() const { return buffers_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.var->value.size();
    return n;
  }

  void zero_grad() const {
    for (const auto& p : params_) p.var->grad = Tensor<T>();
  }

 private:
  std::vector<Param> params_;
  std::vector<Buffer> buffers_;
};

template <class T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride, std::size_t pad, Rng& rng,
         const InitOptions& init);

  Var<T> operator()(const Var<T>& x) const { return conv2d(x, weight, bias, stride_, pad_); }
  void register_into(ParameterRegistry<T>& reg, const std::string& prefix) const;

  Var<T> weight;
  Var<T> bias;

 private:
  std::size_t stride_ = 1, pad_ = 0;
};

template <class T>
class ConvTranspose2d {
 public:
  ConvTranspose2d() = default;
  /// 3x3, stride 2, padding 1, output padding 1: doubles the spatial size.
  ConvTranspose2d(std::size_t in, std::size_t out, Rng& rng, const InitOptions& init);

  Var<T> operator()(const Var<T>& x) const { return conv_transpose2d(x, weight, bias, 2, 1, 1); }
  void register_into(ParameterRegistry<T>& reg, const std::string& prefix) const;

  Var<T> weight;
  Var<T> bias;
};

template <class T>
class BatchNorm2d {
 public:
  BatchNorm2d() = default;
  BatchNorm2d(std::size_t channels, const InitOptions& init);

  Var<T> operator()(const Var<T>& x, Phase phase) {
    return batch_norm(x, gamma, beta, running_mean, running_var, phase == Phase::kTrain, momentum_, eps_);
  }
  void register_into(ParameterRegistry<T>& reg, const std::string& prefix);

  Var<T> gamma;
  Var<T> beta;
  Tensor<T> running_mean;
  Tensor<T> running_var;

 private:
  T momentum_ = T(0.1), eps_ = T(1e-5);
};

enum class Activation { kLeakyRelu, kRelu };

template <class T>
Var<T> activate(const Var<T>& x, Activation act) {
  return act == Activation::kLeakyRelu ? leaky_relu(x, T(0.2)) : relu(x);
}

/// conv 3x3 -> batch norm -> activation.
template <class T>
class ConvBnAct {
 public:
  ConvBnAct() = default;
  ConvBnAct(std::size_t in, std::size_t out, std::size_t stride, Activation act, Rng& rng, const InitOptions& init)
      : conv(in, out, 3, stride, 1, rng, init), bn(out, init), act_(act) {}

  Var<T> operator()(const Var<T>& x, Phase phase) { return activate(bn(conv(x), phase), act_); }
  void register_into(ParameterRegistry<T>& reg, const std::string& prefix) {
    conv.register_into(reg, prefix + ".conv");
    bn.register_into(reg, prefix + ".bn");
  }

  Conv2d<T> conv;
  BatchNorm2d<T> bn;

 private:
  Activation act_ = Activation::kLeakyRelu;
};

/// Encoder group: 3x3 stride-1 then 3x3 stride-2 convolutions, each followed
/// by batch norm and LeakyReLU(0.2). Halves the spatial size.
template <class T>
class EncoderGroup {
 public:
  EncoderGroup() = default;
  EncoderGroup(std::size_t in, std::size_t out, Rng& rng, const InitOptions& init)
      : first_(in, out, 1, Activation::kLeakyRelu, rng, init), second_(out, out, 2, Activation::kLeakyRelu, rng, init) {}

  Var<T> operator()(const Var<T>& x, Phase phase) { return second_(first_(x, phase), phase); }
  void register_into(ParameterRegistry<T>& reg, const std::string& prefix) {
    first_.register_into(reg, prefix + ".0");
    second_.register_into(reg, prefix + ".1");
  }

 private:
  ConvBnAct<T> first_, second_;
};

/// Decoder group: 3x3 stride-1 convolution then 3x3 stride-2 transposed
/// convolution, each followed by batch norm and ReLU. Doubles the spatial size.
template <class T>
class DecoderGroup {
 public:
  DecoderGroup() = default;
  DecoderGroup(std::size_t in, std::size_t mid, std::size_t out, Rng& rng, const InitOptions& init)
      : first_(in, mid, 1, Activation::kRelu, rng, init), up_(mid, out, rng, init), up_bn_(out, init) {}

  Var<T> operator()(const Var<T>& x, Phase phase) { return relu(up_bn_(up_(first_(x, phase)), phase)); }
  void register_into(ParameterRegistry<T>& reg, const std::string& prefix) {
    first_.register_into(reg, prefix + ".0");
    up_.register_into(reg, prefix + ".1.conv");
    up_bn_.register_into(reg, prefix + ".1.bn");
  }

 private:
  ConvBnAct<T> first_;
  ConvTranspose2d<T> up_;
  BatchNorm2d<T> up_bn_;
};

}  // namespace cesynth::nn
