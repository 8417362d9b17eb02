#include "cesynth/nn/layers.hpp"

namespace cesynth::nn {
namespace {

template <class T>
Tensor<T> truncated_normal(Shape shape, Rng& rng, double stddev) {
  Tensor<T> t(std::move(shape));
  for (auto& v : t.values()) v = static_cast<T>(rng.truncated_normal(stddev));
  return t;
}

}  // namespace

template <class T>
Conv2d<T>::Conv2d(std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride, std::size_t pad, Rng& rng,
                  const InitOptions& init)
    : weight(parameter(truncated_normal<T>({out, in, kernel, kernel}, rng, init.weight_std))),
      bias(parameter(Tensor<T>({out}))),
      stride_(stride),
      pad_(pad) {}

template <class T>
void Conv2d<T>::register_into(ParameterRegistry<T>& reg, const std::string& prefix) const {
  reg.add_param(prefix + ".weight", weight);
  reg.add_param(prefix + ".bias", bias);
}

template <class T>
ConvTranspose2d<T>::ConvTranspose2d(std::size_t in, std::size_t out, Rng& rng, const InitOptions& init)
    : weight(parameter(truncated_normal<T>({in, out, 3, 3}, rng, init.weight_std))), bias(parameter(Tensor<T>({out}))) {}

template <class T>
void ConvTranspose2d<T>::register_into(ParameterRegistry<T>& reg, const std::string& prefix) const {
  reg.add_param(prefix + ".weight", weight);
  reg.add_param(prefix + ".bias", bias);
}

template <class T>
BatchNorm2d<T>::BatchNorm2d(std::size_t channels, const InitOptions& init)
    : gamma(parameter(Tensor<T>({channels}, T{1}))),
      beta(parameter(Tensor<T>({channels}))),
      running_mean({channels}),
      running_var({channels}, T{1}),
      momentum_(static_cast<T>(init.bn_momentum)),
      eps_(static_cast<T>(init.bn_eps)) {}

template <class T>
void BatchNorm2d<T>::register_into(ParameterRegistry<T>& reg, const std::string& prefix) {
  reg.add_param(prefix + ".gamma", gamma);
  reg.add_param(prefix + ".beta", beta);
  reg.add_buffer(prefix + ".running_mean", &running_mean);
  reg.add_buffer(prefix + ".running_var", &running_var);
}

template class Conv2d<float>;
template class Conv2d<double>;
template class ConvTranspose2d<float>;
template class ConvTranspose2d<double>;
template class BatchNorm2d<float>;
template class BatchNorm2d<double>;

}  // namespace cesynth::nn
