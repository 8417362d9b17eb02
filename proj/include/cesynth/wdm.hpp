#pragma once

#include <array>
#include <vector>

#include "cesynth/nn/layers.hpp"
#include "cesynth/tensor.hpp"

namespace cesynth {

/// A lower/higher diffusion weighting pair in s/mm^2.
struct BValuePair {
  double low = 0.0;
  double high = 0.0;

  /// Throws UsageError unless high > low >= 0.
  void validate() const;
  double span() const { return high - low; }
  friend bool operator==(const BValuePair&, const BValuePair&) = default;
};

/// Consecutive pairs over {0, 150, 800, 1500}.
inline constexpr std::array<BValuePair, 3> kDefaultBPairs{{{0.0, 150.0}, {150.0, 800.0}, {800.0, 1500.0}}};

struct AdcMap {
  Volume values;  // mm^2/s
  BValuePair pair;
};

/// Two-point apparent diffusion coefficient,
/// [ln max(s_low, eps) - ln max(s_high, eps)] / (b_high - b_low), per voxel.
AdcMap adc_map(const Volume& s_low, const Volume& s_high, BValuePair pair, double eps = 1e-8);

/// Learned analogue of the ADC: [net_low(f_low) - net_high(f_high)] / (b_high - b_low).
/// The nets are any callables mapping a feature map to one of the same shape.
template <class T, class NetLow, class NetHigh>
nn::Var<T> weighted_difference(const nn::Var<T>& f_low, const nn::Var<T>& f_high, BValuePair pair, NetLow&& net_low,
                               NetHigh&& net_high) {
  pair.validate();
  require_same_shape(f_low->shape(), f_high->shape(), "weighted_difference inputs");
  auto low = net_low(f_low);
  auto high = net_high(f_high);
  require_same_shape(low->shape(), f_low->shape(), "weighted_difference low-b network output");
  require_same_shape(high->shape(), f_high->shape(), "weighted_difference high-b network output");
  return nn::scale(nn::sub(low, high), static_cast<T>(1.0 / pair.span()));
}

/// Per-b-value feature transform: channel-preserving 3x3 conv, batch norm, LeakyReLU(0.2).
template <class T>
class DifferenceNet {
 public:
  DifferenceNet() = default;
  DifferenceNet(std::size_t channels, Rng& rng, const nn::InitOptions& init)
      : block_(channels, channels, 1, nn::Activation::kLeakyRelu, rng, init) {}

  nn::Var<T> operator()(const nn::Var<T>& x, nn::Phase phase) { return block_(x, phase); }
  void register_into(nn::ParameterRegistry<T>& reg, const std::string& prefix) { block_.register_into(reg, prefix); }
  nn::ConvBnAct<T>& block() { return block_; }

 private:
  nn::ConvBnAct<T> block_;
};

/// Weighted difference features for one scale: one (net_low, net_high) per b-pair.
template <class T>
class WeightedDifferenceModule {
 public:
  WeightedDifferenceModule() = default;
  WeightedDifferenceModule(std::size_t channels, std::vector<BValuePair> pairs, Rng& rng, const nn::InitOptions& init);

  /// `dwi_features[i]` belongs to kBValues[i]; returns one map per pair.
  std::vector<nn::Var<T>> operator()(const std::vector<nn::Var<T>>& dwi_features, nn::Phase phase);
  void register_into(nn::ParameterRegistry<T>& reg, const std::string& prefix);

  const std::vector<BValuePair>& pairs() const { return pairs_; }
  DifferenceNet<T>& net_low(std::size_t i) { return low_[i]; }
  DifferenceNet<T>& net_high(std::size_t i) { return high_[i]; }

 private:
  std::vector<BValuePair> pairs_;
  std::vector<DifferenceNet<T>> low_, high_;
};

/// Index into kBValues of a b-value; throws UsageError if absent.
std::size_t b_value_index(double b);

}  // namespace cesynth
