#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "cesynth/config.hpp"
#include "cesynth/nn/layers.hpp"

namespace cesynth {

inline constexpr int kCheckpointVersion = 1;

/// Loaded checkpoint: config, epoch and every named tensor.
struct Checkpoint {
  TrainConfig config;
  std::string config_hash;
  std::size_t epoch = 0;
  std::map<std::string, Tensor<float>> tensors;

  /// Copies stored values into every parameter and buffer of `reg`; throws
  /// DataError if a name is missing or a shape differs.
  void load_into(const nn::ParameterRegistry<float>& reg) const;
};

/// Writes `dir`/manifest.json plus one TNSR per tensor. The directory is
/// assembled under a temporary name and renamed into place.
void save_checkpoint(const std::filesystem::path& dir, const TrainConfig& config, std::size_t epoch,
                     const std::vector<const nn::ParameterRegistry<float>*>& registries);

Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace cesynth
