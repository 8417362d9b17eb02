#include "cesynth/wdm.hpp"

#include <cmath>

#include "cesynth/phantom.hpp"

namespace cesynth {

void BValuePair::validate() const {
  if (!(low >= 0.0) || !(high > low)) {
    throw UsageError("b-value pair (" + std::to_string(low) + ", " + std::to_string(high) +
                     ") must satisfy high > low >= 0");
  }
}

AdcMap adc_map(const Volume& s_low, const Volume& s_high, BValuePair pair, double eps) {
  pair.validate();
  require_same_shape(s_low.shape(), s_high.shape(), "adc_map");
  if (!(eps > 0.0)) throw UsageError("adc_map: eps must be positive");
  AdcMap out{Volume(s_low.shape()), pair};
  const double inv_span = 1.0 / pair.span();
  for (std::size_t i = 0; i < s_low.size(); ++i) {
    const double lo = std::max(static_cast<double>(s_low[i]), eps);
    const double hi = std::max(static_cast<double>(s_high[i]), eps);
    out.values[i] = static_cast<float>((std::log(lo) - std::log(hi)) * inv_span);
  }
  return out;
}

std::size_t b_value_index(double b) {
  for (std::size_t i = 0; i < kBValues.size(); ++i)
    if (kBValues[i] == b) return i;
  throw UsageError("b-value " + std::to_string(b) + " is not one of 0, 150, 800, 1500");
}

template <class T>
WeightedDifferenceModule<T>::WeightedDifferenceModule(std::size_t channels, std::vector<BValuePair> pairs, Rng& rng,
                                                      const nn::InitOptions& init)
    : pairs_(std::move(pairs)) {
  for (const auto& p : pairs_) {
    p.validate();
    b_value_index(p.low);
    b_value_index(p.high);
    low_.emplace_back(channels, rng, init);
    high_.emplace_back(channels, rng, init);
  }
}

template <class T>
std::vector<nn::Var<T>> WeightedDifferenceModule<T>::operator()(const std::vector<nn::Var<T>>& dwi_features,
                                                                nn::Phase phase) {
  if (dwi_features.size() != kBValues.size()) throw UsageError("weighted difference needs one feature map per b-value");
  std::vector<nn::Var<T>> out;
  out.reserve(pairs_.size());
  for (std::size_t i = 0; i < pairs_.size(); ++i) {
    const auto& f_low = dwi_features[b_value_index(pairs_[i].low)];
    const auto& f_high = dwi_features[b_value_index(pairs_[i].high)];
    out.push_back(weighted_difference<T>(
        f_low, f_high, pairs_[i], [&](const nn::Var<T>& x) { return low_[i](x, phase); },
        [&](const nn::Var<T>& x) { return high_[i](x, phase); }));
  }
  return out;
}

template <class T>
void WeightedDifferenceModule<T>::register_into(nn::ParameterRegistry<T>& reg, const std::string& prefix) {
  for (std::size_t i = 0; i < pairs_.size(); ++i) {
    low_[i].register_into(reg, prefix + ".pair" + std::to_string(i) + ".low");
    high_[i].register_into(reg, prefix + ".pair" + std::to_string(i) + ".high");
  }
}

template class WeightedDifferenceModule<float>;
template class WeightedDifferenceModule<double>;

}  // namespace cesynth
