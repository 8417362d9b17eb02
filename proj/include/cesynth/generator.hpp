#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cesynth/attention.hpp"
#include "cesynth/nn/layers.hpp"
#include "cesynth/wdm.hpp"

namespace cesynth {

/// Ablation ladder, from input-level fusion up to the full model.
enum class AblationMode { kIF, kHF, kHFWD, kFull };

inline constexpr std::array<AblationMode, 4> kAblationLadder{AblationMode::kIF, AblationMode::kHF, AblationMode::kHFWD,
                                                             AblationMode::kFull};

std::string_view to_string(AblationMode mode);
AblationMode parse_ablation_mode(std::string_view name);

/// Architecture knobs shared by generator and discriminator.
struct ModelConfig {
  std::size_t image_size = 64;
  std::vector<std::size_t> channels{32, 64, 128, 256};  // generator width per scale
  std::vector<std::size_t> disc_channels{32, 64, 128, 256, 512};
  AblationMode mode = AblationMode::kFull;
  std::vector<BValuePair> b_pairs{kDefaultBPairs.begin(), kDefaultBPairs.end()};
  std::size_t attention_reduction = 8;
  nn::InitOptions init;
  std::uint64_t seed = 0;

  std::size_t scales() const { return channels.size(); }
  /// Throws UsageError on an invalid combination.
  void validate() const;
};

inline constexpr std::size_t kSequenceCount = 5;  // four DWI volumes then T1
inline constexpr std::size_t kT1Index = 4;
std::string_view sequence_name(std::size_t index);

/// The five co-registered inputs, each N x 1 x H x W.
template <class T>
struct GeneratorInputs {
  std::array<nn::Var<T>, 4> dwi;
  nn::Var<T> t1;

  const nn::Var<T>& sequence(std::size_t i) const { return i == kT1Index ? t1 : dwi[i]; }
};

template <class T>
struct GeneratorOutput {
  nn::Var<T> synthesized;                     // N x 1 x H x W in (0, 1)
  std::vector<nn::Var<T>> reconstructions;    // per sequence; empty in IF mode
  std::vector<nn::Var<T>> attention;          // per scale; FULL mode only
  std::vector<nn::Var<T>> fused;              // per scale
};

/// Encoder branch: one EncoderGroup per scale.
template <class T>
class SequenceEncoder {
 public:
  SequenceEncoder() = default;
  SequenceEncoder(std::size_t in_channels, const std::vector<std::size_t>& channels, Rng& rng,
                  const nn::InitOptions& init);

  /// Feature maps for scales 1..S; scale s has channels[s-1] x H/2^s x W/2^s.
  std::vector<nn::Var<T>> operator()(const nn::Var<T>& x, nn::Phase phase);
  void register_into(nn::ParameterRegistry<T>& reg, const std::string& prefix);

 private:
  std::vector<nn::EncoderGroup<T>> groups_;
};

/// Autoencoder decoder for one branch, from the deepest features back to the input.
template <class T>
class ReconstructionDecoder {
 public:
  ReconstructionDecoder() = default;
  ReconstructionDecoder(const std::vector<std::size_t>& channels, Rng& rng, const nn::InitOptions& init);

  nn::Var<T> operator()(const std::vector<nn::Var<T>>& features, nn::Phase phase);
  void register_into(nn::ParameterRegistry<T>& reg, const std::string& prefix);

 private:
  std::vector<nn::DecoderGroup<T>> groups_;  // deepest first
  nn::Conv2d<T> head_;
};

/// Fusion at one scale: concatenate [T1, DWI x4, weighted differences],
/// reweight with channel attention, then mix down with a 1x1 convolution.
/// Weighted differences and attention are present or absent per ablation mode.
template <class T>
class FusionBlock {
 public:
  struct Output {
    nn::Var<T> fused;
    nn::Var<T> attention;  // null unless attention is enabled
  };

  FusionBlock() = default;
  FusionBlock(std::size_t channels, AblationMode mode, const std::vector<BValuePair>& pairs,
              std::size_t attention_reduction, Rng& rng, const nn::InitOptions& init);

  /// `features` are per-sequence maps in sequence order (DWI b0..b1500, T1).
  Output operator()(const std::vector<nn::Var<T>>& features, nn::Phase phase);
  void register_into(nn::ParameterRegistry<T>& reg, const std::string& prefix);

  std::size_t concat_channels() const;
  std::optional<WeightedDifferenceModule<T>>& wdm() { return wdm_; }
  std::optional<SharedMlp<T>>& attention_mlp() { return attention_; }
  nn::Conv2d<T>& mix() { return mix_; }

 private:
  std::size_t channels_ = 0;
  std::optional<WeightedDifferenceModule<T>> wdm_;
  std::optional<SharedMlp<T>> attention_;
  nn::Conv2d<T> mix_;
};

/// U-Net style decoder over the fused maps, ending in a sigmoid image.
template <class T>
class SynthesisDecoder {
 public:
  SynthesisDecoder() = default;
  SynthesisDecoder(const std::vector<std::size_t>& channels, Rng& rng, const nn::InitOptions& init);

  /// `skip_enabled[s]` false replaces the scale-s skip input with zeros.
  nn::Var<T> operator()(const std::vector<nn::Var<T>>& fused, const std::vector<bool>& skip_enabled, nn::Phase phase);
  void register_into(nn::ParameterRegistry<T>& reg, const std::string& prefix);

 private:
  std::vector<nn::DecoderGroup<T>> groups_;  // deepest first
  nn::Conv2d<T> head_;
};

template <class T>
class Generator {
 public:
  explicit Generator(const ModelConfig& config);

  GeneratorOutput<T> operator()(const GeneratorInputs<T>& inputs, nn::Phase phase);

  /// Fresh registry of all parameters and batch-norm buffers, in a fixed order.
  nn::ParameterRegistry<T> parameters();
  const ModelConfig& config() const { return config_; }

  /// Per-scale switch for skip connections into the synthesis decoder; the
  /// deepest scale is the decoder input and is never skipped.
  std::vector<bool>& skip_enabled() { return skip_enabled_; }

  std::vector<FusionBlock<T>>& fusion_blocks() { return fusion_; }
  SequenceEncoder<T>& encoder(std::size_t i) { return encoders_.at(i); }

 private:
  ModelConfig config_;
  std::vector<SequenceEncoder<T>> encoders_;
  std::vector<ReconstructionDecoder<T>> reconstructors_;
  std::vector<FusionBlock<T>> fusion_;
  SynthesisDecoder<T> decoder_;
  std::vector<bool> skip_enabled_;
};

}  // namespace cesynth
