// cesynth: phantom generation, training, evaluation and visualisation.

#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "cesynth/dataset.hpp"
#include "cesynth/harness.hpp"
#include "cesynth/json_io.hpp"
#include "cesynth/png_writer.hpp"
#include "cesynth/tensor_io.hpp"

namespace fs = std::filesystem;
using namespace cesynth;

namespace {

constexpr std::size_t kSizeMultiple = 32;  // five stride-2 discriminator layers

fs::path default_out(const std::string& command) {
  const char* root = std::getenv("CESYNTH_OUT");
  return fs::path(root && *root ? root : "cesynth_out") / command;
}

fs::path resolve_out(const std::string& flag, const std::string& command) {
  return flag.empty() ? default_out(command) : fs::path(flag);
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create '" + dir.string() + "': " + ec.message());
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

// Flags that override fields of a TrainConfig.
struct TrainFlags {
  std::string config;
  std::optional<std::size_t> epochs, batch_size;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--config", config, "JSON training config");
    cmd->add_option("--epochs", epochs, "Override epochs");
    cmd->add_option("--batch-size", batch_size, "Override batch size");
    cmd->add_option("--seed", seed, "Override seed");
    cmd->add_option("--mode", mode, "Ablation mode: IF, HF, HFWD or FULL");
  }

  TrainConfig resolve(const Dataset& data) const {
    TrainConfig c = config.empty() ? TrainConfig{} : load_train_config(config);
    if (config.empty()) c.model.image_size = data.spec.image_size;
    if (epochs) c.epochs = *epochs;
    if (batch_size) c.batch_size = *batch_size;
    if (seed) c.model.seed = *seed;
    if (mode) c.model.mode = parse_ablation_mode(*mode);
    c.validate();
    return c;
  }
};

void print_epoch(const EpochStats& s) {
  std::fprintf(stderr, "epoch %3zu  lr %.2e  G %.4f (adv %.4f, l1 %.5f)  D %.4f  recon %.4f  %.1fs\n", s.epoch, s.lr,
               s.total_g, s.adversarial_g, s.l1_term, s.loss_d, s.reconstruction, s.seconds);
}

nlohmann::json split_json(const DataSplit& split) {
  return {{"train", split.train_ids}, {"test", split.test_ids}, {"hash", split.hash}};
}

std::vector<const CaseSample*> pick_split(const Dataset& data, std::uint64_t seed, double fraction,
                                          const std::string& which) {
  if (which == "all") return all_cases(data.cases);
  DataSplit split = split_cases(data.cases, seed, fraction);
  if (which == "train") return select_cases(data.cases, split.train_ids);
  if (which == "test") return select_cases(data.cases, split.test_ids);
  throw UsageError("--split must be train, test or all, got '" + which + "'");
}

int run(int argc, char** argv) {
  CLI::App app{"Contrast-enhanced breast MRI synthesis from T1 and multi-b-value DWI"};
  app.require_subcommand(1);

  // phantom-gen
  std::size_t count = 100, size = 64;
  std::uint64_t phantom_seed = 0;
  std::string phantom_out, phantom_spec_path;
  bool force = false;
  auto* gen = app.add_subcommand("phantom-gen", "Generate a synthetic phantom dataset");
  gen->add_option("--count", count, "Number of cases");
  gen->add_option("--size", size, "Image side in pixels (multiple of 32)");
  gen->add_option("--seed", phantom_seed, "Dataset seed");
  gen->add_option("--spec", phantom_spec_path, "JSON phantom spec; --size and --seed override it");
  gen->add_option("--out", phantom_out, "Output directory");
  gen->add_flag("--force", force, "Overwrite a non-empty output directory");

  // train
  std::string train_data, train_out;
  TrainFlags train_flags;
  auto* tr = app.add_subcommand("train", "Train on the 80% split of a dataset");
  tr->add_option("--data", train_data, "Dataset directory")->required();
  tr->add_option("--out", train_out, "Output directory");
  train_flags.add_to(tr);

  // eval
  std::string eval_ck, eval_data, eval_out, eval_split = "test";
  bool unmasked = false;
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  ev->add_option("--checkpoint", eval_ck, "Checkpoint directory")->required();
  ev->add_option("--data", eval_data, "Dataset directory")->required();
  ev->add_option("--out", eval_out, "Output directory");
  ev->add_option("--split", eval_split, "train, test or all");
  ev->add_flag("--unmasked", unmasked, "Score whole images instead of the breast mask");

  // ablate
  std::string ablate_data, ablate_out;
  TrainFlags ablate_flags;
  auto* ab = app.add_subcommand("ablate", "Train and evaluate IF, HF, HFWD and FULL on one split");
  ab->add_option("--data", ablate_data, "Dataset directory")->required();
  ab->add_option("--out", ablate_out, "Output directory");
  ablate_flags.add_to(ab);

  // synth
  std::string synth_ck, synth_data, synth_out;
  std::vector<std::string> synth_cases;
  auto* sy = app.add_subcommand("synth", "Write synthetic CE images (TNSR + PNG per case)");
  sy->add_option("--checkpoint", synth_ck, "Checkpoint directory")->required();
  sy->add_option("--data", synth_data, "Dataset directory")->required();
  sy->add_option("--case", synth_cases, "Case ids (default: every case)");
  sy->add_option("--out", synth_out, "Output directory");

  // visualize
  std::string vis_ck, vis_data, vis_case, vis_out;
  auto* vi = app.add_subcommand("visualize", "Write input, target, synthetic and difference panels for one case");
  vi->add_option("--checkpoint", vis_ck, "Checkpoint directory")->required();
  vi->add_option("--data", vis_data, "Dataset directory")->required();
  vi->add_option("--case", vis_case, "Case id")->required();
  vi->add_option("--out", vis_out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ExitCode::kUsage);
  }

  if (gen->parsed()) {
    if (count == 0) throw UsageError("--count must be positive");
    PhantomSpec spec;
    if (!phantom_spec_path.empty()) {
      std::ifstream in(phantom_spec_path);
      if (!in) throw UsageError("phantom spec '" + phantom_spec_path + "' not found");
      auto j = nlohmann::json::parse(in, nullptr, false);
      if (j.is_discarded()) throw UsageError("phantom spec '" + phantom_spec_path + "' is not valid JSON");
      spec = phantom_spec_from_json(j);
    }
    if (gen->count("--size") || phantom_spec_path.empty()) spec.image_size = size;
    if (gen->count("--seed") || phantom_spec_path.empty()) spec.seed = phantom_seed;
    if (spec.image_size == 0 || spec.image_size % kSizeMultiple != 0) {
      throw UsageError("--size " + std::to_string(spec.image_size) + " is not divisible by " +
                       std::to_string(kSizeMultiple) + " (discriminator downsampling)");
    }
    spec.validate();
    const fs::path out = resolve_out(phantom_out, "phantom");
    if (fs::exists(out) && !fs::is_empty(out)) {
      if (!force) throw UsageError("output directory '" + out.string() + "' exists and is not empty (use --force)");
      fs::remove_all(out);
    }
    Dataset data{spec, generate_cases(spec, count)};
    write_dataset(data, out);
    std::size_t lesions = 0, clean = 0, lesion_voxels = 0;
    for (const auto& c : data.cases) {
      lesions += c.n_lesions;
      clean += c.n_lesions == 0;
      for (float v : c.lesion_mask.values()) lesion_voxels += v > 0.5f;
    }
    std::printf("wrote %zu cases (%zux%zu) to %s\n", count, spec.image_size, spec.image_size, out.c_str());
    std::printf("lesions: %zu total, %.2f per case, %zu cases without lesions, %zu lesion voxels\n", lesions,
                static_cast<double>(lesions) / static_cast<double>(count), clean, lesion_voxels);
    return 0;
  }

  if (tr->parsed()) {
    Dataset data = read_dataset(train_data);
    TrainConfig config = train_flags.resolve(data);
    const fs::path out = resolve_out(train_out, "train");
    ensure_dir(out);
    DataSplit split = split_cases(data.cases, config.seed(), config.train_fraction);
    write_json(out / "split.json", split_json(split));
    write_json(out / "config.json", to_json(config));
    TrainOptions options{out, true, print_epoch};
    TrainResult result = train(select_cases(data.cases, split.train_ids), config, options);
    std::printf("trained %zu epochs (%zu steps); final checkpoint %s\n", result.epochs.size(), result.steps,
                result.final_checkpoint.c_str());
    return 0;
  }

  if (ev->parsed()) {
    TrainConfig config;
    auto model = load_model(eval_ck, &config);
    Dataset data = read_dataset(eval_data);
    auto cases = pick_split(data, config.seed(), config.train_fraction, eval_split);
    if (cases.empty()) throw DataError("split '" + eval_split + "' is empty");
    EvalResult result = evaluate(model->generator, cases, !unmasked);
    const fs::path out = resolve_out(eval_out, "eval");
    ensure_dir(out);
    write_metrics_csv(out / "metrics.csv", result.reports);
    nlohmann::json summary = to_json(result.summary);
    summary["lesion_dice"] = result.lesion_dice;
    summary["split"] = eval_split;
    summary["masked"] = !unmasked;
    write_json(out / "summary.json", summary);
    std::printf("%zu cases: SSIM %.4f ± %.4f  PSNR %.3f ± %.3f dB  NMSE %.5f ± %.5f  lesion Dice %.4f\n",
                result.summary.count, result.summary.ssim.mean, result.summary.ssim.stddev, result.summary.psnr.mean,
                result.summary.psnr.stddev, result.summary.nmse.mean, result.summary.nmse.stddev, result.lesion_dice);
    return 0;
  }

  if (ab->parsed()) {
    Dataset data = read_dataset(ablate_data);
    TrainConfig config = ablate_flags.resolve(data);
    const fs::path out = resolve_out(ablate_out, "ablate");
    ensure_dir(out);
    AblationOptions options{out, [](AblationMode mode, const EpochStats& s) {
                              std::fprintf(stderr, "[%s] ", std::string(to_string(mode)).c_str());
                              print_epoch(s);
                            }};
    auto rows = run_ablation(data.cases, config, options);
    std::printf("%-6s %-18s %-18s %s\n", "mode", "SSIM", "PSNR", "NMSE");
    for (const auto& r : rows) {
      std::printf("%-6s %.4f ± %.4f    %.3f ± %.3f    %.5f ± %.5f\n", std::string(to_string(r.mode)).c_str(),
                  r.summary.ssim.mean, r.summary.ssim.stddev, r.summary.psnr.mean, r.summary.psnr.stddev,
                  r.summary.nmse.mean, r.summary.nmse.stddev);
    }
    return 0;
  }

  if (sy->parsed()) {
    auto model = load_model(synth_ck);
    Dataset data = read_dataset(synth_data);
    std::vector<const CaseSample*> cases;
    if (synth_cases.empty()) {
      cases = all_cases(data.cases);
    } else {
      for (const auto& id : synth_cases) cases.push_back(&find_case(data, id));
    }
    const fs::path out = resolve_out(synth_out, "synth");
    ensure_dir(out);
    for (const auto* c : cases) {
      Volume synth = synthesize(model->generator, *c);
      write_tnsr(out / (c->case_id + ".tnsr"), synth);
      write_png(out / (c->case_id + ".png"), synth);
    }
    std::printf("synthesized %zu cases into %s\n", cases.size(), out.c_str());
    return 0;
  }

  if (vi->parsed()) {
    auto model = load_model(vis_ck);
    Dataset data = read_dataset(vis_data);
    const CaseSample& c = find_case(data, vis_case);
    Volume synth = synthesize(model->generator, c);
    const fs::path out = resolve_out(vis_out, "visualize");
    ensure_dir(out);
    write_png(out / "t1.png", c.t1);
    for (std::size_t k = 0; k < c.dwi.size(); ++k) {
      write_png(out / ("dwi_b" + std::to_string(static_cast<int>(kBValues[k])) + ".png"), c.dwi[k]);
    }
    write_png(out / "ce_real.png", c.ce);
    write_png(out / "ce_synth.png", synth);
    write_png(out / "diff_real.png", difference_image(c.t1, c.ce));
    write_png(out / "diff_synth.png", difference_image(c.t1, synth));
    std::printf("wrote 9 panels for %s into %s\n", c.case_id.c_str(), out.c_str());
    return 0;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return static_cast<int>(ExitCode::kData);
  }
}
