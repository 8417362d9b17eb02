#include "cesynth/adversarial.hpp"

#include <cmath>
#include <iomanip>

namespace cesynth {

template <class T>
Discriminator<T>::Discriminator(const ModelConfig& config) : image_size_(config.image_size) {
  config.validate();
  Rng rng(mix_seed(config.seed, 2));
  std::size_t in = kSequenceCount + 1;
  for (auto c : config.disc_channels) {
    layers_.emplace_back(in, c, 2, nn::Activation::kLeakyRelu, rng, config.init);
    in = c;
  }
  head_ = nn::Conv2d<T>(in, 1, 1, 1, 0, rng, config.init);
}

template <class T>
nn::Var<T> Discriminator<T>::operator()(const GeneratorInputs<T>& condition, const nn::Var<T>& candidate,
                                        nn::Phase phase) {
  const std::size_t factor = std::size_t{1} << layers_.size();
  const Shape& s = candidate->shape();
  if (s.size() != 4 || s[2] % factor != 0 || s[3] % factor != 0) {
    throw UsageError("discriminate: input side " + shape_str(s) + " is not divisible by " + std::to_string(factor));
  }
  std::vector<nn::Var<T>> parts;
  for (std::size_t i = 0; i < kSequenceCount; ++i) parts.push_back(condition.sequence(i));
  parts.push_back(candidate);
  nn::Var<T> h = nn::concat_channels(parts);
  for (auto& layer : layers_) h = layer(h, phase);
  return nn::sigmoid(head_(h));
}

template <class T>
nn::ParameterRegistry<T> Discriminator<T>::parameters() {
  nn::ParameterRegistry<T> reg;
  for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i].register_into(reg, "disc.l" + std::to_string(i));
  head_.register_into(reg, "disc.head");
  return reg;
}

template <class T>
void Discriminator<T>::zero_final_layer() {
  head_.weight->value.fill(T{0});
  head_.bias->value.fill(T{0});
}

template <class T>
nn::Var<T> masked_l1(const nn::Var<T>& y, const nn::Var<T>& g, const Tensor<T>& mask, T weight) {
  require_same_shape(y->shape(), g->shape(), "masked_l1");
  require_same_shape(y->shape(), mask.shape(), "masked_l1 mask");
  Tensor<T> weights(mask.shape());
  for (std::size_t i = 0; i < mask.size(); ++i) weights[i] = T{1} + (weight - T{1}) * mask[i];
  return nn::weighted_mean_abs_error(y, g, weights);
}

template <class T>
LossReport GeneratorLoss<T>::report() const {
  LossReport r;
  r.adversarial_g = adversarial->value[0];
  r.l1_term = l1->value[0];
  r.total_g = total->value[0];
  return r;
}

template <class T>
GeneratorLoss<T> generator_loss(const nn::Var<T>& scores_fake, const nn::Var<T>& y, const nn::Var<T>& g,
                                const Tensor<T>& mask, T lambda_l1, T mask_weight, bool non_saturating) {
  if (lambda_l1 < T{0}) throw UsageError("generator_loss: lambda_l1 must be non-negative");
  const T lo = static_cast<T>(kScoreClamp), hi = static_cast<T>(1.0 - kScoreClamp);
  GeneratorLoss<T> out;
  out.adversarial = non_saturating ? nn::scale(nn::mean_log_clamped(scores_fake, lo, hi), T{-1})
                                   : nn::mean_log1m_clamped(scores_fake, lo, hi);
  out.l1 = masked_l1(y, g, mask, mask_weight);
  out.total = nn::add(out.adversarial, nn::scale(out.l1, lambda_l1));
  if (!std::isfinite(out.total->value[0])) throw NumericFault("generator loss is not finite");
  return out;
}

template <class T>
nn::Var<T> discriminator_loss(const nn::Var<T>& scores_real, const nn::Var<T>& scores_fake) {
  require_same_shape(scores_real->shape(), scores_fake->shape(), "discriminator_loss");
  const T lo = static_cast<T>(kScoreClamp), hi = static_cast<T>(1.0 - kScoreClamp);
  auto objective = nn::add(nn::mean_log_clamped(scores_real, lo, hi), nn::mean_log1m_clamped(scores_fake, lo, hi));
  auto loss = nn::scale(objective, T{-1});
  if (!std::isfinite(loss->value[0])) throw NumericFault("discriminator loss is not finite");
  return loss;
}

TrainingLog::TrainingLog(const std::filesystem::path& path) : out_(path, std::ios::trunc) {
  if (!out_) throw DataError("cannot open training log '" + path.string() + "'");
  out_ << "step,epoch,adversarial_g,l1_term,total_g,loss_d\n";
}

void TrainingLog::append(const LossReport& r) {
  out_ << r.step << ',' << r.epoch << ',' << std::setprecision(9) << r.adversarial_g << ',' << r.l1_term << ','
       << r.total_g << ',' << r.loss_d << '\n';
  out_.flush();
}

template class Discriminator<float>;
template class Discriminator<double>;
template struct GeneratorLoss<float>;
template struct GeneratorLoss<double>;
template nn::Var<float> masked_l1<float>(const nn::Var<float>&, const nn::Var<float>&, const Tensor<float>&, float);
template nn::Var<double> masked_l1<double>(const nn::Var<double>&, const nn::Var<double>&, const Tensor<double>&,
                                           double);
template GeneratorLoss<float> generator_loss<float>(const nn::Var<float>&, const nn::Var<float>&,
                                                    const nn::Var<float>&, const Tensor<float>&, float, float, bool);
template GeneratorLoss<double> generator_loss<double>(const nn::Var<double>&, const nn::Var<double>&,
                                                      const nn::Var<double>&, const Tensor<double>&, double, double,
                                                      bool);
template nn::Var<float> discriminator_loss<float>(const nn::Var<float>&, const nn::Var<float>&);
template nn::Var<double> discriminator_loss<double>(const nn::Var<double>&, const nn::Var<double>&);

}  // namespace cesynth
