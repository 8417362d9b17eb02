#include "cesynth/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "cesynth/json_io.hpp"

namespace cesynth {
using nlohmann::json;

void TrainConfig::validate() const {
  auto non_negative = [](double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw UsageError(std::string("config: ") + name + " must be >= 0");
  };
  non_negative(lambda_l1, "lambda_l1");
  non_negative(reconstruction_weight, "reconstruction_weight");
  non_negative(mask_weight, "mask_weight");
  if (batch_size == 0) throw UsageError("config: batch_size must be positive");
  if (epochs == 0) throw UsageError("config: epochs must be positive");
  if (!(lr0 > 0.0)) throw UsageError("config: lr0 must be positive");
  if (!(lr_decay > 0.0)) throw UsageError("config: lr_decay must be positive");
  if (lr_decay_every == 0) throw UsageError("config: lr_decay_every must be positive");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw UsageError("config: Adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw UsageError("config: adam_eps must be positive");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw UsageError("config: train_fraction must lie in (0, 1)");
  model.validate();
}

double lr_at(std::size_t epoch, const TrainConfig& config) {
  double lr = config.lr0;
  for (std::size_t k = epoch / config.lr_decay_every; k > 0; --k) lr *= config.lr_decay;
  return lr;
}

json to_json(const TrainConfig& c) {
  json pairs = json::array();
  for (const auto& p : c.model.b_pairs) pairs.push_back({p.low, p.high});
  return {{"lambda_l1", c.lambda_l1},
          {"reconstruction_weight", c.reconstruction_weight},
          {"mask_weight", c.mask_weight},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"lr0", c.lr0},
          {"lr_decay", c.lr_decay},
          {"lr_decay_every", c.lr_decay_every},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"adam_eps", c.adam_eps},
          {"non_saturating", c.non_saturating},
          {"train_fraction", c.train_fraction},
          {"seed", c.model.seed},
          {"ablation_mode", std::string(to_string(c.model.mode))},
          {"image_size", c.model.image_size},
          {"channels", c.model.channels},
          {"disc_channels", c.model.disc_channels},
          {"b_pairs", pairs},
          {"attention_reduction", c.model.attention_reduction},
          {"init_std", c.model.init.weight_std},
          {"bn_momentum", c.model.init.bn_momentum},
          {"bn_eps", c.model.init.bn_eps}};
}

TrainConfig train_config_from_json(const json& j) {
  reject_unknown_keys(j,
                      {"lambda_l1", "reconstruction_weight", "mask_weight", "batch_size", "epochs", "lr0", "lr_decay",
                       "lr_decay_every", "adam_beta1", "adam_beta2", "adam_eps", "non_saturating", "train_fraction",
                       "seed", "ablation_mode", "image_size", "channels", "disc_channels", "b_pairs",
                       "attention_reduction", "init_std", "bn_momentum", "bn_eps"},
                      "config");
  TrainConfig c;
  auto get = [&](const char* key, auto& field) {
    if (!j.contains(key)) return;
    try {
      field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
    } catch (const json::exception& e) {
      throw UsageError(std::string("config: bad value for '") + key + "': " + e.what());
    }
  };
  get("lambda_l1", c.lambda_l1);
  get("reconstruction_weight", c.reconstruction_weight);
  get("mask_weight", c.mask_weight);
  get("batch_size", c.batch_size);
  get("epochs", c.epochs);
  get("lr0", c.lr0);
  get("lr_decay", c.lr_decay);
  get("lr_decay_every", c.lr_decay_every);
  get("adam_beta1", c.adam_beta1);
  get("adam_beta2", c.adam_beta2);
  get("adam_eps", c.adam_eps);
  get("non_saturating", c.non_saturating);
  get("train_fraction", c.train_fraction);
  get("seed", c.model.seed);
  get("image_size", c.model.image_size);
  get("channels", c.model.channels);
  get("disc_channels", c.model.disc_channels);
  get("attention_reduction", c.model.attention_reduction);
  get("init_std", c.model.init.weight_std);
  get("bn_momentum", c.model.init.bn_momentum);
  get("bn_eps", c.model.init.bn_eps);
  if (j.contains("ablation_mode")) {
    std::string mode;
    get("ablation_mode", mode);
    c.model.mode = parse_ablation_mode(mode);
  }
  if (j.contains("b_pairs")) {
    std::vector<std::vector<double>> pairs;
    get("b_pairs", pairs);
    c.model.b_pairs.clear();
    for (const auto& p : pairs) {
      if (p.size() != 2) throw UsageError("config: each b_pairs entry must be [low, high]");
      c.model.b_pairs.push_back({p[0], p[1]});
    }
  }
  c.validate();
  return c;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("config file '" + path.string() + "' not found");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError("config file '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return train_config_from_json(j);
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string config_hash(const TrainConfig& config) { return fnv1a_hex(to_json(config).dump()); }

}  // namespace cesynth
