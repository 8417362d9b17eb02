#include "cesynth/attention.hpp"

namespace cesynth {

template <class T>
SharedMlp<T>::SharedMlp(std::size_t channels, std::size_t reduction, Rng& rng, const nn::InitOptions& init)
    : channels_(channels) {
  if (reduction == 0 || channels / reduction == 0) {
    throw UsageError("attention: hidden width " + std::to_string(channels) + "/" + std::to_string(reduction) +
                     " must be at least 1");
  }
  fc1 = nn::Conv2d<T>(channels, channels / reduction, 1, 1, 0, rng, init);
  fc2 = nn::Conv2d<T>(channels / reduction, channels, 1, 1, 0, rng, init);
}

template <class T>
void SharedMlp<T>::register_into(nn::ParameterRegistry<T>& reg, const std::string& prefix) const {
  fc1.register_into(reg, prefix + ".fc1");
  fc2.register_into(reg, prefix + ".fc2");
}

template <class T>
void SharedMlp<T>::zero() {
  for (auto* v : {&fc1.weight, &fc1.bias, &fc2.weight, &fc2.bias}) (*v)->value.fill(T{0});
}

template <class T>
nn::Var<T> channel_attention(const nn::Var<T>& features, const SharedMlp<T>& mlp) {
  if (features->shape().size() != 4 || features->shape()[1] != mlp.channels()) {
    throw UsageError("channel_attention: features " + shape_str(features->shape()) + " do not have " +
                     std::to_string(mlp.channels()) + " channels");
  }
  auto avg = mlp(nn::global_avg_pool(features));
  auto max = mlp(nn::global_max_pool(features));
  return nn::sigmoid(nn::add(avg, max));
}

template class SharedMlp<float>;
template class SharedMlp<double>;
template nn::Var<float> channel_attention<float>(const nn::Var<float>&, const SharedMlp<float>&);
template nn::Var<double> channel_attention<double>(const nn::Var<double>&, const SharedMlp<double>&);

}  // namespace cesynth
