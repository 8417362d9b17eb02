#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "cesynth/generator.hpp"

namespace cesynth {

/// Every training hyperparameter. Defaults are desk scale: batch 4, 30 epochs.
struct TrainConfig {
  double lambda_l1 = 100.0;
  double reconstruction_weight = 5.0;
  double mask_weight = 100.0;
  std::size_t batch_size = 4;
  std::size_t epochs = 30;
  double lr0 = 1e-3;
  double lr_decay = 0.8;
  std::size_t lr_decay_every = 5;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  bool non_saturating = false;
  double train_fraction = 0.8;
  ModelConfig model;  // architecture, ablation mode and seed

  std::uint64_t seed() const { return model.seed; }
  void validate() const;
};

/// Learning rate for a zero-based epoch: lr0 * lr_decay^floor(epoch / lr_decay_every).
double lr_at(std::size_t epoch, const TrainConfig& config);

nlohmann::json to_json(const TrainConfig& config);
/// Rejects unknown keys (naming them); missing keys keep their defaults.
TrainConfig train_config_from_json(const nlohmann::json& j);
TrainConfig load_train_config(const std::filesystem::path& path);

/// FNV-1a of the canonical JSON form, as 16 hex digits.
std::string config_hash(const TrainConfig& config);
std::string fnv1a_hex(const std::string& bytes);

}  // namespace cesynth
