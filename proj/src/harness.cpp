#include "cesynth/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "cesynth/simd/kernels.hpp"
#include "cesynth/tensor_io.hpp"

namespace cesynth {
namespace fs = std::filesystem;
using nn::Phase;
using nn::Var;

Model::Model(const ModelConfig& config)
    : generator(config),
      discriminator(config),
      gen_params(generator.parameters()),
      disc_params(discriminator.parameters()) {}

std::unique_ptr<Model> load_model(const fs::path& checkpoint_dir, TrainConfig* config_out) {
  Checkpoint ck = load_checkpoint(checkpoint_dir);
  auto model = std::make_unique<Model>(ck.config.model);
  ck.load_into(model->gen_params);
  ck.load_into(model->disc_params);
  if (config_out) *config_out = ck.config;
  return model;
}

void save_model(const fs::path& dir, const Model& model, const TrainConfig& config, std::size_t epoch) {
  save_checkpoint(dir, config, epoch, {&model.gen_params, &model.disc_params});
}

Adam::Adam(const nn::ParameterRegistry<float>& reg, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : reg.params()) {
    params_.push_back(p.var);
    m_.emplace_back(p.var->value.shape());
    v_.emplace_back(p.var->value.shape());
  }
}

void Adam::step(double lr) {
  ++t_;
  simd::AdamArgs<float> args;
  args.lr = static_cast<float>(lr);
  args.beta1 = static_cast<float>(beta1_);
  args.beta2 = static_cast<float>(beta2_);
  args.eps = static_cast<float>(eps_);
  args.bias_correction1 = static_cast<float>(1.0 - std::pow(beta1_, static_cast<double>(t_)));
  args.bias_correction2 = static_cast<float>(1.0 - std::pow(beta2_, static_cast<double>(t_)));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& node = *params_[i];
    if (!node.has_grad()) continue;
    args.n = node.value.size();
    args.param = node.value.data();
    args.grad = node.grad.data();
    args.m = m_[i].data();
    args.v = v_[i].data();
    simd::adam_update(args);
  }
}

Batch make_batch(const std::vector<const CaseSample*>& cases) {
  if (cases.empty()) throw UsageError("make_batch: no cases");
  const Shape& s = cases.front()->shape();
  if (s.size() != 2) throw UsageError("make_batch: expected 2-D volumes, got " + shape_str(s));
  const std::size_t n = cases.size(), plane = s[0] * s[1];
  const Shape batch_shape{n, 1, s[0], s[1]};
  auto stack = [&](auto&& pick) {
    Tensor<float> out(batch_shape);
    for (std::size_t i = 0; i < n; ++i) {
      const Volume& v = pick(*cases[i]);
      require_same_shape(v.shape(), s, "make_batch");
      std::copy(v.data(), v.data() + plane, out.data() + i * plane);
    }
    return out;
  };
  Batch b;
  for (std::size_t k = 0; k < 4; ++k) b.inputs.dwi[k] = nn::constant(stack([k](const CaseSample& c) -> const Volume& { return c.dwi[k]; }));
  b.inputs.t1 = nn::constant(stack([](const CaseSample& c) -> const Volume& { return c.t1; }));
  b.ce = nn::constant(stack([](const CaseSample& c) -> const Volume& { return c.ce; }));
  b.mask = stack([](const CaseSample& c) -> const Volume& { return c.mask; });
  return b;
}

DataSplit split_cases(const std::vector<CaseSample>& cases, std::uint64_t seed, double train_fraction) {
  if (cases.empty()) throw UsageError("split_cases: dataset is empty");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw UsageError("split_cases: fraction must lie in (0, 1)");
  std::vector<std::pair<std::uint64_t, std::string>> keyed;
  for (const auto& c : cases) {
    const std::uint64_t id_hash = std::stoull(fnv1a_hex(c.case_id), nullptr, 16);
    keyed.emplace_back(mix_seed(seed, id_hash), c.case_id);
  }
  std::sort(keyed.begin(), keyed.end());
  for (std::size_t i = 1; i < keyed.size(); ++i) {
    if (keyed[i].second == keyed[i - 1].second) throw DataError("duplicate case id '" + keyed[i].second + "'");
  }
  const std::size_t n = keyed.size();
  std::size_t n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  n_train = std::clamp<std::size_t>(n_train, 1, n > 1 ? n - 1 : 1);
  DataSplit split;
  std::string joined;
  for (std::size_t i = 0; i < n; ++i) {
    (i < n_train ? split.train_ids : split.test_ids).push_back(keyed[i].second);
    joined += (i < n_train ? "train:" : "test:") + keyed[i].second + "\n";
  }
  split.hash = fnv1a_hex(joined);
  return split;
}

std::vector<const CaseSample*> select_cases(const std::vector<CaseSample>& cases, const std::vector<std::string>& ids) {
  std::vector<const CaseSample*> out;
  for (const auto& id : ids) {
    auto it = std::find_if(cases.begin(), cases.end(), [&](const CaseSample& c) { return c.case_id == id; });
    if (it == cases.end()) throw DataError("case '" + id + "' not in dataset");
    out.push_back(&*it);
  }
  return out;
}

std::vector<const CaseSample*> all_cases(const std::vector<CaseSample>& cases) {
  std::vector<const CaseSample*> out;
  for (const auto& c : cases) out.push_back(&c);
  return out;
}

fs::path checkpoint_path(const fs::path& out_dir, std::size_t epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "epoch_%03zu", epoch);
  return out_dir / "checkpoints" / buf;
}

TrainResult train(const std::vector<const CaseSample*>& cases, const TrainConfig& config, const TrainOptions& options) {
  config.validate();
  if (cases.empty()) throw UsageError("train: dataset is empty");
  for (const auto* c : cases) {
    if (c->shape() != Shape{config.model.image_size, config.model.image_size}) {
      throw UsageError("train: case '" + c->case_id + "' is " + shape_str(c->shape()) + " but config image_size is " +
                       std::to_string(config.model.image_size));
    }
  }
  std::error_code ec;
  fs::create_directories(options.out_dir / "checkpoints", ec);
  if (ec) throw DataError("cannot create '" + options.out_dir.string() + "': " + ec.message());

  TrainResult result;
  result.model = std::make_unique<Model>(config.model);
  Model& model = *result.model;
  Adam adam_g(model.gen_params, config.adam_beta1, config.adam_beta2, config.adam_eps);
  Adam adam_d(model.disc_params, config.adam_beta1, config.adam_beta2, config.adam_eps);
  TrainingLog log(options.out_dir / "train_log.csv");

  const float lambda = static_cast<float>(config.lambda_l1);
  const float mask_weight = static_cast<float>(config.mask_weight);
  const float recon_weight = static_cast<float>(config.reconstruction_weight);
  fs::path last_good;

  std::vector<std::size_t> order(cases.size());
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr = lr_at(epoch, config);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle(mix_seed(config.seed(), 0x5eed0000ULL + epoch));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle.uniform_int(0, static_cast<std::int64_t>(i - 1)))]);
    }

    EpochStats stats;
    stats.epoch = epoch + 1;
    stats.lr = lr;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      std::vector<const CaseSample*> members;
      for (std::size_t i = start; i < std::min(order.size(), start + config.batch_size); ++i) members.push_back(cases[order[i]]);
      try {
        Batch batch = make_batch(members);
        auto out = model.generator(batch.inputs, Phase::kTrain);
        const Var<float>& fake = out.synthesized;
        auto discriminate = [&](const GeneratorInputs<float>& cond, const Var<float>& candidate) {
          return model.discriminator(cond, candidate, Phase::kTrain);
        };
        auto losses = adversarial_losses(discriminate, batch.inputs, batch.ce, fake, batch.mask, lambda, mask_weight,
                                         config.non_saturating);
        const auto& loss_d = losses.loss_d;
        const auto& loss_g = losses.loss_g;
        Var<float> objective = loss_g.total;
        double recon_value = 0.0;
        if (!out.reconstructions.empty()) {
          std::vector<Var<float>> terms;
          for (std::size_t i = 0; i < out.reconstructions.size(); ++i) {
            terms.push_back(nn::mean_abs_error(out.reconstructions[i], batch.inputs.sequence(i)));
          }
          Var<float> recon = terms.front();
          for (std::size_t i = 1; i < terms.size(); ++i) recon = nn::add(recon, terms[i]);
          recon_value = recon->value[0];
          objective = nn::add(objective, nn::scale(recon, recon_weight));
        }
        if (!std::isfinite(objective->value[0])) throw NumericFault("generator objective is not finite");

        model.gen_params.zero_grad();
        model.disc_params.zero_grad();
        nn::backward(loss_d, {fake});
        std::vector<Tensor<float>> disc_grads;
        for (const auto& p : model.disc_params.params()) {
          disc_grads.push_back(std::move(p.var->grad));
          p.var->grad = Tensor<float>();
        }
        nn::backward(objective);
        for (std::size_t i = 0; i < disc_grads.size(); ++i) model.disc_params.params()[i].var->grad = std::move(disc_grads[i]);
        adam_d.step(lr);
        adam_g.step(lr);
        model.gen_params.zero_grad();
        model.disc_params.zero_grad();

        LossReport r = loss_g.report();
        r.loss_d = loss_d->value[0];
        r.epoch = epoch + 1;
        r.step = ++result.steps;
        log.append(r);
        stats.adversarial_g += r.adversarial_g;
        stats.l1_term += r.l1_term;
        stats.total_g += r.total_g;
        stats.loss_d += r.loss_d;
        stats.reconstruction += recon_value;
        ++batches;
      } catch (const NumericFault& e) {
        throw NumericFault(std::string(e.what()) + " (epoch " + std::to_string(epoch + 1) + ", step " +
                           std::to_string(result.steps + 1) + "); last good checkpoint: " +
                           (last_good.empty() ? std::string("none") : last_good.string()));
      }
    }
    const double nb = static_cast<double>(batches);
    stats.adversarial_g /= nb;
    stats.l1_term /= nb;
    stats.total_g /= nb;
    stats.loss_d /= nb;
    stats.reconstruction /= nb;

    fs::path ck = checkpoint_path(options.out_dir, epoch + 1);
    save_model(ck, model, config, epoch + 1);
    if (!options.keep_all_checkpoints && !last_good.empty()) fs::remove_all(last_good, ec);
    last_good = ck;
    stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.epochs.push_back(stats);
    if (options.on_epoch) options.on_epoch(stats);
  }
  result.final_checkpoint = last_good;
  return result;
}

Volume synthesize(Generator<float>& generator, const CaseSample& sample) {
  nn::NoGradGuard no_grad;
  Batch batch = make_batch({&sample});
  auto out = generator(batch.inputs, Phase::kEval);
  return out.synthesized->value.reshaped(sample.shape());
}

Volume hotspot_mask(const CaseSample& sample, const Volume& synthetic, double threshold) {
  Volume diff = difference_image(sample.t1, synthetic);
  Volume out(diff.shape());
  for (std::size_t i = 0; i < diff.size(); ++i) {
    out[i] = (sample.mask[i] > 0.5f && diff[i] > threshold) ? 1.0f : 0.0f;
  }
  return out;
}

EvalResult evaluate(Generator<float>& generator, const std::vector<const CaseSample*>& cases, bool masked,
                    double hotspot_threshold) {
  if (cases.empty()) throw UsageError("evaluate: no cases");
  const std::size_t size = generator.config().image_size;
  EvalResult result;
  std::size_t overlap = 0, predicted = 0, truth = 0;
  for (const auto* c : cases) {
    if (c->shape() != Shape{size, size}) {
      throw UsageError("evaluate: case '" + c->case_id + "' is " + shape_str(c->shape()) + " but the model expects " +
                       std::to_string(size) + "x" + std::to_string(size));
    }
    Volume synth = synthesize(generator, *c);
    result.reports.push_back(evaluate_images(c->case_id, c->ce, synth, masked ? &c->mask : nullptr));
    Volume hot = hotspot_mask(*c, synth, hotspot_threshold);
    for (std::size_t i = 0; i < hot.size(); ++i) {
      const bool a = hot[i] > 0.5f, b = c->lesion_mask[i] > 0.5f;
      overlap += a && b;
      predicted += a;
      truth += b;
    }
  }
  result.summary = summarize(result.reports);
  result.lesion_dice = predicted + truth == 0 ? 1.0 : 2.0 * static_cast<double>(overlap) / static_cast<double>(predicted + truth);
  return result;
}

std::vector<AblationRow> run_ablation(const std::vector<CaseSample>& cases, const TrainConfig& base,
                                      const AblationOptions& options) {
  base.validate();
  const DataSplit split = split_cases(cases, base.seed(), base.train_fraction);
  if (split.test_ids.empty()) throw UsageError("ablation: test split is empty");
  const auto train_set = select_cases(cases, split.train_ids);
  const auto test_set = select_cases(cases, split.test_ids);
  std::vector<AblationRow> rows;
  for (AblationMode mode : kAblationLadder) {
    TrainConfig config = base;
    config.model.mode = mode;
    TrainOptions topt;
    topt.out_dir = options.out_dir / std::string(to_string(mode));
    topt.keep_all_checkpoints = false;
    if (options.on_epoch) topt.on_epoch = [&, mode](const EpochStats& s) { options.on_epoch(mode, s); };
    TrainResult trained = train(train_set, config, topt);
    EvalResult eval = evaluate(trained.model->generator, test_set);
    write_metrics_csv(topt.out_dir / "test_metrics.csv", eval.reports);
    rows.push_back({mode, eval.summary, eval.lesion_dice, split.hash});
  }
  write_ablation_csv(options.out_dir / "ablation.csv", rows);
  return rows;
}

void write_ablation_csv(const fs::path& path, const std::vector<AblationRow>& rows) {
  std::string text = "mode,ssim,psnr,nmse\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%.4f±%.4f,%.3f±%.3f,%.5f±%.5f\n", std::string(to_string(r.mode)).c_str(),
                  r.summary.ssim.mean, r.summary.ssim.stddev, r.summary.psnr.mean, r.summary.psnr.stddev,
                  r.summary.nmse.mean, r.summary.nmse.stddev);
    text += buf;
  }
  write_file_atomic(path, text);
}

}  // namespace cesynth
