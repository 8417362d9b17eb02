#include "cesynth/generator.hpp"

#include <cmath>

namespace cesynth {

std::string_view to_string(AblationMode mode) {
  switch (mode) {
    case AblationMode::kIF: return "IF";
    case AblationMode::kHF: return "HF";
    case AblationMode::kHFWD: return "HFWD";
    case AblationMode::kFull: return "FULL";
  }
  return "?";
}

AblationMode parse_ablation_mode(std::string_view name) {
  for (auto mode : kAblationLadder)
    if (to_string(mode) == name) return mode;
  throw UsageError("unknown ablation mode '" + std::string(name) + "' (expected IF, HF, HFWD or FULL)");
}

std::string_view sequence_name(std::size_t index) {
  static constexpr std::array<std::string_view, kSequenceCount> names{"dwi_b0", "dwi_b150", "dwi_b800", "dwi_b1500",
                                                                      "t1"};
  return names.at(index);
}

void ModelConfig::validate() const {
  if (channels.empty()) throw UsageError("model config: at least one scale is required");
  for (auto c : channels)
    if (c == 0) throw UsageError("model config: channel widths must be positive");
  const std::size_t factor = std::size_t{1} << channels.size();
  if (image_size == 0 || image_size % factor != 0) {
    throw UsageError("model config: image_size " + std::to_string(image_size) + " is not divisible by 2^" +
                     std::to_string(channels.size()) + " = " + std::to_string(factor));
  }
  if (disc_channels.empty()) throw UsageError("model config: discriminator needs at least one layer");
  const std::size_t disc_factor = std::size_t{1} << disc_channels.size();
  if (image_size % disc_factor != 0) {
    throw UsageError("model config: image_size " + std::to_string(image_size) + " is not divisible by " +
                     std::to_string(disc_factor) + " (discriminator has " + std::to_string(disc_channels.size()) +
                     " stride-2 layers)");
  }
  if (b_pairs.empty()) throw UsageError("model config: at least one b-value pair is required");
  for (const auto& p : b_pairs) {
    p.validate();
    b_value_index(p.low);
    b_value_index(p.high);
  }
  if (mode == AblationMode::kFull) {
    for (auto c : channels) {
      const std::size_t concat = (kSequenceCount + b_pairs.size()) * c;
      if (attention_reduction == 0 || concat / attention_reduction == 0) {
        throw UsageError("model config: attention reduction leaves an empty hidden layer");
      }
    }
  }
}

// ---------------------------------------------------------------------------

template <class T>
SequenceEncoder<T>::SequenceEncoder(std::size_t in_channels, const std::vector<std::size_t>& channels, Rng& rng,
                                    const nn::InitOptions& init) {
  std::size_t in = in_channels;
  for (auto c : channels) {
    groups_.emplace_back(in, c, rng, init);
    in = c;
  }
}

template <class T>
std::vector<nn::Var<T>> SequenceEncoder<T>::operator()(const nn::Var<T>& x, nn::Phase phase) {
  std::vector<nn::Var<T>> out;
  nn::Var<T> h = x;
  for (auto& g : groups_) {
    h = g(h, phase);
    out.push_back(h);
  }
  return out;
}

template <class T>
void SequenceEncoder<T>::register_into(nn::ParameterRegistry<T>& reg, const std::string& prefix) {
  for (std::size_t s = 0; s < groups_.size(); ++s) groups_[s].register_into(reg, prefix + ".g" + std::to_string(s));
}

template <class T>
ReconstructionDecoder<T>::ReconstructionDecoder(const std::vector<std::size_t>& channels, Rng& rng,
                                                const nn::InitOptions& init) {
  for (std::size_t s = channels.size(); s-- > 0;) {
    const std::size_t out = s == 0 ? channels[0] : channels[s - 1];
    groups_.emplace_back(channels[s], channels[s], out, rng, init);
  }
  head_ = nn::Conv2d<T>(channels[0], 1, 3, 1, 1, rng, init);
}

template <class T>
nn::Var<T> ReconstructionDecoder<T>::operator()(const std::vector<nn::Var<T>>& features, nn::Phase phase) {
  nn::Var<T> h = features.back();
  for (auto& g : groups_) h = g(h, phase);
  return nn::sigmoid(head_(h));
}

template <class T>
void ReconstructionDecoder<T>::register_into(nn::ParameterRegistry<T>& reg, const std::string& prefix) {
  for (std::size_t i = 0; i < groups_.size(); ++i) groups_[i].register_into(reg, prefix + ".g" + std::to_string(i));
  head_.register_into(reg, prefix + ".head");
}

// ---------------------------------------------------------------------------

template <class T>
FusionBlock<T>::FusionBlock(std::size_t channels, AblationMode mode, const std::vector<BValuePair>& pairs,
                            std::size_t attention_reduction, Rng& rng, const nn::InitOptions& init)
    : channels_(channels) {
  if (mode == AblationMode::kIF) throw UsageError("fusion blocks are not used in IF mode");
  if (mode == AblationMode::kHFWD || mode == AblationMode::kFull) wdm_.emplace(channels, pairs, rng, init);
  if (mode == AblationMode::kFull) attention_.emplace(concat_channels(), attention_reduction, rng, init);
  mix_ = nn::Conv2d<T>(concat_channels(), channels, 1, 1, 0, rng, init);
}

template <class T>
std::size_t FusionBlock<T>::concat_channels() const {
  return channels_ * (kSequenceCount + (wdm_ ? wdm_->pairs().size() : 0));
}

template <class T>
typename FusionBlock<T>::Output FusionBlock<T>::operator()(const std::vector<nn::Var<T>>& features, nn::Phase phase) {
  if (features.size() != kSequenceCount) throw UsageError("fuse_scale: expected five sequence feature maps");
  for (const auto& f : features) {
    require_same_shape(f->shape(), features[0]->shape(), "fuse_scale sequence features");
    if (f->shape()[1] != channels_) throw UsageError("fuse_scale: feature width does not match the block");
  }

  std::vector<nn::Var<T>> parts{features[kT1Index]};
  for (std::size_t i = 0; i < 4; ++i) parts.push_back(features[i]);
  if (wdm_) {
    const std::vector<nn::Var<T>> dwi(features.begin(), features.begin() + 4);
    for (auto& d : (*wdm_)(dwi, phase)) parts.push_back(std::move(d));
  }
  nn::Var<T> concat = nn::concat_channels(parts);
  Output out;
  if (attention_) {
    out.attention = channel_attention(concat, *attention_);
    concat = apply_attention(concat, out.attention);
  }
  out.fused = mix_(concat);
  return out;
}

template <class T>
void FusionBlock<T>::register_into(nn::ParameterRegistry<T>& reg, const std::string& prefix) {
  if (wdm_) wdm_->register_into(reg, prefix + ".wdm");
  if (attention_) attention_->register_into(reg, prefix + ".attention");
  mix_.register_into(reg, prefix + ".mix");
}

// ---------------------------------------------------------------------------

template <class T>
SynthesisDecoder<T>::SynthesisDecoder(const std::vector<std::size_t>& channels, Rng& rng, const nn::InitOptions& init) {
  const std::size_t scales = channels.size();
  for (std::size_t s = scales; s-- > 0;) {
    const std::size_t in = s + 1 == scales ? channels[s] : 2 * channels[s];
    const std::size_t out = s == 0 ? channels[0] : channels[s - 1];
    groups_.emplace_back(in, channels[s], out, rng, init);
  }
  head_ = nn::Conv2d<T>(channels[0], 1, 3, 1, 1, rng, init);
}

template <class T>
nn::Var<T> SynthesisDecoder<T>::operator()(const std::vector<nn::Var<T>>& fused, const std::vector<bool>& skip_enabled,
                                           nn::Phase phase) {
  const std::size_t scales = fused.size();
  nn::Var<T> h = fused.back();
  for (std::size_t i = 0; i < groups_.size(); ++i) {
    const std::size_t s = scales - 1 - i;
    if (i > 0) {
      nn::Var<T> skip = skip_enabled[s] ? fused[s] : nn::constant(Tensor<T>(fused[s]->shape()));
      h = nn::concat_channels<T>({h, skip});
    }
    h = groups_[i](h, phase);
  }
  return nn::sigmoid(head_(h));
}

template <class T>
void SynthesisDecoder<T>::register_into(nn::ParameterRegistry<T>& reg, const std::string& prefix) {
  for (std::size_t i = 0; i < groups_.size(); ++i) groups_[i].register_into(reg, prefix + ".g" + std::to_string(i));
  head_.register_into(reg, prefix + ".head");
}

// ---------------------------------------------------------------------------

template <class T>
Generator<T>::Generator(const ModelConfig& config) : config_(config), skip_enabled_(config.scales(), true) {
  config_.validate();
  Rng rng(mix_seed(config_.seed, 1));
  const auto& init = config_.init;
  if (config_.mode == AblationMode::kIF) {
    encoders_.emplace_back(kSequenceCount, config_.channels, rng, init);
  } else {
    for (std::size_t i = 0; i < kSequenceCount; ++i) encoders_.emplace_back(1, config_.channels, rng, init);
    for (std::size_t i = 0; i < kSequenceCount; ++i) reconstructors_.emplace_back(config_.channels, rng, init);
    for (auto c : config_.channels)
      fusion_.emplace_back(c, config_.mode, config_.b_pairs, config_.attention_reduction, rng, init);
  }
  decoder_ = SynthesisDecoder<T>(config_.channels, rng, init);
}

template <class T>
GeneratorOutput<T> Generator<T>::operator()(const GeneratorInputs<T>& inputs, nn::Phase phase) {
  const Shape& shape = inputs.t1->shape();
  if (shape.size() != 4 || shape[1] != 1 || shape[2] != config_.image_size || shape[3] != config_.image_size) {
    throw UsageError("synthesize: expected N x 1 x " + std::to_string(config_.image_size) + " x " +
                     std::to_string(config_.image_size) + " inputs, got " + shape_str(shape));
  }
  for (std::size_t i = 0; i < kSequenceCount; ++i) {
    require_same_shape(inputs.sequence(i)->shape(), shape, "synthesize inputs");
  }

  GeneratorOutput<T> out;
  if (config_.mode == AblationMode::kIF) {
    std::vector<nn::Var<T>> seqs;
    for (std::size_t i = 0; i < kSequenceCount; ++i) seqs.push_back(inputs.sequence(i));
    out.fused = encoders_[0](nn::concat_channels(seqs), phase);
  } else {
    std::vector<std::vector<nn::Var<T>>> features;
    for (std::size_t i = 0; i < kSequenceCount; ++i) {
      features.push_back(encoders_[i](inputs.sequence(i), phase));
      out.reconstructions.push_back(reconstructors_[i](features.back(), phase));
    }
    for (std::size_t s = 0; s < config_.scales(); ++s) {
      std::vector<nn::Var<T>> at_scale;
      for (const auto& f : features) at_scale.push_back(f[s]);
      auto fused = fusion_[s](at_scale, phase);
      out.fused.push_back(fused.fused);
      if (fused.attention) out.attention.push_back(fused.attention);
    }
  }
  for (std::size_t s = 0; s < out.fused.size(); ++s) {
    for (T v : out.fused[s]->value.values()) {
      if (!std::isfinite(v)) throw NumericFault("non-finite fused features at scale " + std::to_string(s + 1));
    }
  }
  out.synthesized = decoder_(out.fused, skip_enabled_, phase);
  for (T v : out.synthesized->value.values()) {
    if (!std::isfinite(v)) throw NumericFault("non-finite synthesized image");
  }
  return out;
}

template <class T>
nn::ParameterRegistry<T> Generator<T>::parameters() {
  nn::ParameterRegistry<T> reg;
  for (std::size_t i = 0; i < encoders_.size(); ++i) {
    const std::string name = config_.mode == AblationMode::kIF ? "input" : std::string(sequence_name(i));
    encoders_[i].register_into(reg, "gen.enc." + name);
  }
  for (std::size_t i = 0; i < reconstructors_.size(); ++i)
    reconstructors_[i].register_into(reg, "gen.rec." + std::string(sequence_name(i)));
  for (std::size_t s = 0; s < fusion_.size(); ++s) fusion_[s].register_into(reg, "gen.fuse" + std::to_string(s + 1));
  decoder_.register_into(reg, "gen.dec");
  return reg;
}

template class SequenceEncoder<float>;
template class SequenceEncoder<double>;
template class ReconstructionDecoder<float>;
template class ReconstructionDecoder<double>;
template class FusionBlock<float>;
template class FusionBlock<double>;
template class SynthesisDecoder<float>;
template class SynthesisDecoder<double>;
template class Generator<float>;
template class Generator<double>;

}  // namespace cesynth
