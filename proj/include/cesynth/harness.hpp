#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "cesynth/adversarial.hpp"
#include "cesynth/checkpoint.hpp"
#include "cesynth/config.hpp"
#include "cesynth/metrics.hpp"
#include "cesynth/phantom.hpp"

namespace cesynth {

/// Generator plus discriminator with registries built once. Not movable:
/// the registries point into the layers.
class Model {
 public:
  explicit Model(const ModelConfig& config);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  Generator<float> generator;
  Discriminator<float> discriminator;
  nn::ParameterRegistry<float> gen_params;
  nn::ParameterRegistry<float> disc_params;
};

/// Builds the model stored in a checkpoint and loads its tensors.
std::unique_ptr<Model> load_model(const std::filesystem::path& checkpoint_dir, TrainConfig* config_out = nullptr);

void save_model(const std::filesystem::path& dir, const Model& model, const TrainConfig& config, std::size_t epoch);

/// Adam over a registry; moment buffers start at zero.
class Adam {
 public:
  Adam(const nn::ParameterRegistry<float>& reg, double beta1, double beta2, double eps);
  /// Updates every parameter holding a gradient.
  void step(double lr);
  std::size_t steps() const { return t_; }

 private:
  std::vector<nn::Var<float>> params_;
  std::vector<Tensor<float>> m_, v_;
  double beta1_, beta2_, eps_;
  std::size_t t_ = 0;
};

/// Stacks cases into N x 1 x H x W tensors.
struct Batch {
  GeneratorInputs<float> inputs;
  nn::Var<float> ce;
  Tensor<float> mask;
};
Batch make_batch(const std::vector<const CaseSample*>& cases);

/// Deterministic train/test split: cases are ordered by a hash of (seed,
/// case_id) and the first round(fraction * n) go to training.
struct DataSplit {
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
  std::string hash;
};
DataSplit split_cases(const std::vector<CaseSample>& cases, std::uint64_t seed, double train_fraction);
std::vector<const CaseSample*> select_cases(const std::vector<CaseSample>& cases, const std::vector<std::string>& ids);
std::vector<const CaseSample*> all_cases(const std::vector<CaseSample>& cases);

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double lr = 0.0;
  double adversarial_g = 0.0;
  double l1_term = 0.0;
  double total_g = 0.0;
  double reconstruction = 0.0;
  double loss_d = 0.0;
  double seconds = 0.0;
};

struct TrainOptions {
  std::filesystem::path out_dir;  // receives train_log.csv and checkpoints/
  bool keep_all_checkpoints = true;
  std::function<void(const EpochStats&)> on_epoch;
};

struct TrainResult {
  std::unique_ptr<Model> model;
  std::vector<EpochStats> epochs;
  std::filesystem::path final_checkpoint;
  std::size_t steps = 0;
};

/// 1:1 alternating D/G Adam updates per batch. Both losses read the same
/// discriminator scores for the fake batch. Checkpoints after every epoch; a
/// non-finite loss throws NumericFault naming the last good checkpoint.
TrainResult train(const std::vector<const CaseSample*>& cases, const TrainConfig& config, const TrainOptions& options);

std::filesystem::path checkpoint_path(const std::filesystem::path& out_dir, std::size_t epoch);

/// Synthetic CE for one case, inference mode.
Volume synthesize(Generator<float>& generator, const CaseSample& sample);

/// Hot-spot threshold on the synthetic difference image, half the smallest
/// phantom enhancement gain.
inline constexpr double kHotspotThreshold = 0.15;

/// Voxels of difference_image(t1, synthetic) above the threshold inside the breast mask.
Volume hotspot_mask(const CaseSample& sample, const Volume& synthetic, double threshold = kHotspotThreshold);

struct EvalResult {
  std::vector<MetricsReport> reports;
  MetricsSummary summary;
  double lesion_dice = 0.0;  // pooled over all cases
};

EvalResult evaluate(Generator<float>& generator, const std::vector<const CaseSample*>& cases, bool masked = true,
                    double hotspot_threshold = kHotspotThreshold);

struct AblationRow {
  AblationMode mode = AblationMode::kFull;
  MetricsSummary summary;
  double lesion_dice = 0.0;
  std::string split_hash;
};

struct AblationOptions {
  std::filesystem::path out_dir;  // one sub-directory per mode plus ablation.csv
  std::function<void(AblationMode, const EpochStats&)> on_epoch;
};

/// Trains and evaluates every mode of the ladder on one shared split.
std::vector<AblationRow> run_ablation(const std::vector<CaseSample>& cases, const TrainConfig& base,
                                      const AblationOptions& options);

/// Columns mode,ssim,psnr,nmse with "mean±std" cells, one row per mode.
void write_ablation_csv(const std::filesystem::path& path, const std::vector<AblationRow>& rows);

}  // namespace cesynth
