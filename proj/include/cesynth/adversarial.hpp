#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <vector>

#include "cesynth/generator.hpp"

namespace cesynth {

/// Scores are clamped to [kScoreClamp, 1 - kScoreClamp] before any logarithm.
inline constexpr double kScoreClamp = 1e-7;

/// Conditional discriminator over [DWI x4, T1, candidate]: stride-2 3x3
/// convolutions with batch norm and LeakyReLU(0.2), then a 1x1 projection and
/// sigmoid giving a score map of side image_size / 2^layers.
template <class T>
class Discriminator {
 public:
  explicit Discriminator(const ModelConfig& config);

  nn::Var<T> operator()(const GeneratorInputs<T>& condition, const nn::Var<T>& candidate, nn::Phase phase);
  nn::ParameterRegistry<T> parameters();

  /// Zeroes the final projection, so every score becomes exactly 0.5.
  void zero_final_layer();

 private:
  std::vector<nn::ConvBnAct<T>> layers_;
  nn::Conv2d<T> head_;
  std::size_t image_size_ = 0;
};

struct LossReport {
  double adversarial_g = 0.0;
  double l1_term = 0.0;  // masked l1, before the lambda_1 factor
  double total_g = 0.0;  // adversarial_g + lambda_1 * l1_term
  double loss_d = 0.0;
  std::size_t epoch = 0;
  std::size_t step = 0;
};

/// mean(|y - g| * (1 + (weight - 1) * mask))
template <class T>
nn::Var<T> masked_l1(const nn::Var<T>& y, const nn::Var<T>& g, const Tensor<T>& mask, T weight = T(100));

template <class T>
struct GeneratorLoss {
  nn::Var<T> adversarial;
  nn::Var<T> l1;
  nn::Var<T> total;
  LossReport report() const;
};

/// Generator objective: mean log(1 - D) + lambda_1 * masked_l1. With
/// `non_saturating` the adversarial term is -mean log D instead.
template <class T>
GeneratorLoss<T> generator_loss(const nn::Var<T>& scores_fake, const nn::Var<T>& y, const nn::Var<T>& g,
                                const Tensor<T>& mask, T lambda_l1 = T(100), T mask_weight = T(100),
                                bool non_saturating = false);

/// Negated discriminator objective: -(mean log D(real) + mean log(1 - D(fake))).
template <class T>
nn::Var<T> discriminator_loss(const nn::Var<T>& scores_real, const nn::Var<T>& scores_fake);

template <class T>
struct AdversarialLosses {
  nn::Var<T> scores_real;
  nn::Var<T> scores_fake;
  nn::Var<T> loss_d;
  GeneratorLoss<T> loss_g;
};

/// Scores the real and the fake batch once each. Both objectives read the
/// same fake scores. `discriminate(condition, candidate)` returns a score map.
template <class T, class Discriminate>
AdversarialLosses<T> adversarial_losses(Discriminate&& discriminate, const GeneratorInputs<T>& condition,
                                        const nn::Var<T>& real, const nn::Var<T>& fake, const Tensor<T>& mask,
                                        T lambda_l1, T mask_weight, bool non_saturating) {
  AdversarialLosses<T> out;
  out.scores_real = discriminate(condition, real);
  out.scores_fake = discriminate(condition, fake);
  out.loss_d = discriminator_loss(out.scores_real, out.scores_fake);
  out.loss_g = generator_loss(out.scores_fake, real, fake, mask, lambda_l1, mask_weight, non_saturating);
  return out;
}

/// Appends LossReports as CSV rows: step,epoch,adversarial_g,l1_term,total_g,loss_d.
class TrainingLog {
 public:
  explicit TrainingLog(const std::filesystem::path& path);
  void append(const LossReport& r);

 private:
  std::ofstream out_;
};

}  // namespace cesynth
