// End-to-end acceptance checks. One PASS/FAIL line per criterion; exit code 1
// when any criterion fails.

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cesynth/attention.hpp"
#include "cesynth/harness.hpp"
#include "cesynth/wdm.hpp"
#include "test_util.hpp"

using namespace cesynth;
using namespace cesynth::nn;
using cesynth::testing::grad_check;
using cesynth::testing::probe_weights;
using cesynth::testing::random_tensor;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

int failures = 0;

void report(int id, const char* name, const Outcome& o) {
  std::printf("%s  [%d] %s: %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
  std::fflush(stdout);
  failures += o.pass ? 0 : 1;
}

std::size_t b_index(double b) {
  for (std::size_t i = 0; i < kBValues.size(); ++i)
    if (kBValues[i] == b) return i;
  throw UsageError("b-value not acquired");
}

// 1. ADC recovery on noise-free phantoms.
Outcome adc_oracle() {
  PhantomSpec spec;
  spec.noise_sigma = 0.0;
  auto cases = generate_cases(spec, 20);
  double worst = 0.0, elapsed = 0.0;
  std::size_t voxels = 0;
  for (const auto& c : cases) {
    for (const auto& pair : kDefaultBPairs) {
      const auto t0 = Clock::now();
      auto adc = adc_map(c.dwi[b_index(pair.low)], c.dwi[b_index(pair.high)], pair);
      elapsed += seconds_since(t0);
      for (std::size_t i = 0; i < adc.values.size(); ++i) {
        if (c.mask[i] <= 0.5f) continue;
        worst = std::max(worst, std::abs(static_cast<double>(adc.values[i]) - c.adc_truth[i]));
        ++voxels;
      }
    }
  }
  return {worst < 1e-6 && elapsed < 1.0,
          fmt("max |adc - truth| %.3g mm^2/s over %zu in-mask voxels x 3 pairs, %.3f s", worst, voxels, elapsed)};
}

// 2. Metrics against long-double recomputation from the definitions.
long double ref_mean(const Volume& v) {
  long double s = 0;
  for (float x : v.values()) s += x;
  return s / v.size();
}

Outcome metric_oracles() {
  Rng rng(2024);
  double e_ssim = 0, e_psnr = 0, e_nmse = 0;
  for (int k = 0; k < 100; ++k) {
    auto y = random_tensor<float>({8, 8}, rng, 0, 1);
    auto g = random_tensor<float>({8, 8}, rng, 0, 1);
    const long double n = 64, my = ref_mean(y), mg = ref_mean(g);
    long double vy = 0, vg = 0, cov = 0, sse = 0, ref = 0, peak = 0;
    for (std::size_t i = 0; i < 64; ++i) {
      vy += (y[i] - my) * (y[i] - my);
      vg += (g[i] - mg) * (g[i] - mg);
      cov += (y[i] - my) * (g[i] - mg);
      sse += (static_cast<long double>(y[i]) - g[i]) * (static_cast<long double>(y[i]) - g[i]);
      ref += static_cast<long double>(y[i]) * y[i];
      peak = std::max({peak, static_cast<long double>(y[i]), static_cast<long double>(g[i])});
    }
    vy /= n;
    vg /= n;
    cov /= n;
    const long double c1 = 1e-4L, c2 = 9e-4L;
    const long double s = ((2 * my * mg + c1) * (2 * cov + c2)) / ((my * my + mg * mg + c1) * (vy + vg + c2));
    const long double p = 10 * std::log10(peak * peak / (sse / n));
    e_ssim = std::max(e_ssim, static_cast<double>(std::abs(ssim(y, g) - s)));
    e_psnr = std::max(e_psnr, static_cast<double>(std::abs(psnr(y, g) - p)));
    e_nmse = std::max(e_nmse, static_cast<double>(std::abs(nmse(y, g) - sse / ref)));
  }
  auto flat = [](float v) { return Volume({8, 8}, v); };
  const double s01 = ssim(flat(0), flat(1)), p = psnr(flat(1), flat(0.5f)), nm = nmse(flat(1), flat(0.5f));
  const double s01_expect = 1e-4 / (1 + 1e-4), p_expect = 10 * std::log10(4.0);
  const bool hand = std::abs(s01 - s01_expect) <= 1e-15 && std::abs(p - p_expect) <= 1e-12 && nm == 0.25;
  return {e_ssim <= 1e-9 && e_psnr <= 1e-9 && e_nmse <= 1e-9 && hand,
          fmt("100 pairs: max err ssim %.2g, psnr %.2g dB, nmse %.2g; ssim(0,1) %.6g, psnr %.6f dB, nmse %.4g", e_ssim,
              e_psnr, e_nmse, s01, p, nm)};
}

// 3. Central finite differences, step 1e-4, evaluation mode throughout.
std::vector<Var<double>> params_of(const ParameterRegistry<double>& reg) {
  std::vector<Var<double>> out;
  for (const auto& p : reg.params()) out.push_back(p.var);
  return out;
}

void randomize_buffers(const ParameterRegistry<double>& reg, Rng& rng) {
  for (const auto& b : reg.buffers())
    for (auto& v : b.tensor->values())
      v = b.name.find("var") != std::string::npos ? rng.uniform(0.5, 2.0) : rng.uniform(-0.2, 0.2);
}

Outcome gradient_checks() {
  const auto t0 = Clock::now();
  std::vector<std::pair<std::string, cesynth::testing::GradCheck>> results;
  const InitOptions init{0.3, 0.1, 1e-5};
  {
    Rng rng(31);
    WeightedDifferenceModule<double> wdm(4, {kDefaultBPairs.begin(), kDefaultBPairs.end()}, rng, init);
    ParameterRegistry<double> reg;
    wdm.register_into(reg, "wdm");
    randomize_buffers(reg, rng);
    std::vector<Var<double>> feats;
    for (int i = 0; i < 4; ++i) feats.push_back(parameter(random_tensor<double>({1, 4, 8, 8}, rng)));
    auto leaves = params_of(reg);
    leaves.insert(leaves.end(), feats.begin(), feats.end());
    const auto probe = probe_weights({1, 4, 8, 8}, 32);
    auto f = [&] {
      auto maps = wdm(feats, Phase::kEval);
      Var<double> loss = weighted_sum(maps[0], probe);
      for (std::size_t i = 1; i < maps.size(); ++i) loss = add(loss, weighted_sum(maps[i], probe));
      return loss;
    };
    results.emplace_back("wdm", grad_check(f, leaves, 40, 33));
  }
  {
    Rng rng(41);
    SharedMlp<double> mlp(8, 2, rng, InitOptions{0.5, 0.1, 1e-5});
    for (auto& v : mlp.fc1.bias->value.values()) v = 0.3;
    auto x = parameter(random_tensor<double>({2, 8, 4, 4}, rng));
    const auto probe = probe_weights({2, 8, 4, 4}, 42);
    std::vector<Var<double>> leaves{x, mlp.fc1.weight, mlp.fc1.bias, mlp.fc2.weight, mlp.fc2.bias};
    auto f = [&] { return weighted_sum(apply_attention(x, channel_attention(x, mlp)), probe); };
    results.emplace_back("attention", grad_check(f, leaves, 40, 43));
  }
  {
    Rng rng(51);
    ModelConfig c;
    FusionBlock<double> block(3, AblationMode::kFull, c.b_pairs, 2, rng, init);
    ParameterRegistry<double> reg;
    block.register_into(reg, "fuse");
    randomize_buffers(reg, rng);
    std::vector<Var<double>> feats;
    for (std::size_t i = 0; i < kSequenceCount; ++i) feats.push_back(parameter(random_tensor<double>({2, 3, 4, 4}, rng)));
    auto leaves = params_of(reg);
    leaves.insert(leaves.end(), feats.begin(), feats.end());
    const auto probe = probe_weights({2, 3, 4, 4}, 52);
    auto f = [&] { return weighted_sum(block(feats, Phase::kEval).fused, probe); };
    results.emplace_back("fuse_scale", grad_check(f, leaves, 40, 53));
  }
  {
    Rng rng(61);
    auto scores = parameter(random_tensor<double>({2, 1, 2, 2}, rng, 0.1, 0.9));
    auto g = parameter(random_tensor<double>({2, 1, 8, 8}, rng, 0, 1));
    auto y = constant(random_tensor<double>({2, 1, 8, 8}, rng, 0, 1));
    Tensor<double> mask({2, 1, 8, 8});
    for (std::size_t i = 0; i < mask.size(); i += 2) mask[i] = 1.0;
    auto f = [&] { return generator_loss(scores, y, g, mask, 100.0).total; };
    results.emplace_back("generator_loss", grad_check(f, {scores, g}, 40, 63));
  }
  const double elapsed = seconds_since(t0);
  bool pass = elapsed < 120.0;
  std::string detail;
  for (const auto& [name, r] : results) {
    pass = pass && r.checked >= 20 && r.worst_rel <= 1e-3 && r.largest_grad > 0.0;
    detail += fmt("%s %zu params rel %.2g; ", name.c_str(), r.checked, r.worst_rel);
  }
  return {pass, detail + fmt("%.1f s", elapsed)};
}

// 4. Exact traces of zeroed networks.
Outcome closed_form_traces() {
  Rng rng(71);
  SharedMlp<double> mlp(16, 8, rng, InitOptions{});
  mlp.zero();
  const auto weights = channel_attention(constant(random_tensor<double>({2, 16, 6, 6}, rng)), mlp);
  double worst_att = 0.0;
  for (double v : weights->value.values()) worst_att = std::max(worst_att, std::abs(v - 0.5));

  Discriminator<double> disc(ModelConfig{});
  disc.zero_final_layer();
  GeneratorInputs<double> in;
  for (auto& d : in.dwi) d = constant(random_tensor<double>({1, 1, 64, 64}, rng, 0, 1));
  in.t1 = constant(random_tensor<double>({1, 1, 64, 64}, rng, 0, 1));
  const auto scores = disc(in, constant(random_tensor<double>({1, 1, 64, 64}, rng, 0, 1)), Phase::kEval);
  double worst_disc = 0.0;
  for (double v : scores->value.values()) worst_disc = std::max(worst_disc, std::abs(v - 0.5));

  auto half = constant(Tensor<double>({1, 1, 2, 2}, 0.5));
  auto img = constant(random_tensor<double>({1, 1, 8, 8}, rng, 0, 1));
  auto other = constant(random_tensor<double>({1, 1, 8, 8}, rng, 0, 1));
  const double g0 = generator_loss(half, img, other, Tensor<double>({1, 1, 8, 8}, 1.0), 0.0).total->value[0];
  const double err = std::abs(g0 - std::log(0.5));
  return {worst_att == 0.0 && worst_disc == 0.0 && err <= 1e-9,
          fmt("attention |w-0.5| %.2g, discriminator |D-0.5| %.2g, generator_loss - log(0.5) %.2g", worst_att,
              worst_disc, err)};
}

// 5. Desk-scale FULL training and held-out evaluation.
Outcome end_to_end(const fs::path& out) {
  const auto t0 = Clock::now();
  PhantomSpec spec;  // 64 x 64, seed 0
  auto cases = generate_cases(spec, 100);
  TrainConfig config;  // FULL, 30 epochs, batch 4
  auto split = split_cases(cases, config.seed(), config.train_fraction);
  TrainOptions opts{out / "train", false, [](const EpochStats& s) {
                      std::fprintf(stderr, "  full epoch %2zu  G %.3f  D %.4f  %.1fs\n", s.epoch, s.total_g, s.loss_d,
                                   s.seconds);
                    }};
  auto result = train(select_cases(cases, split.train_ids), config, opts);
  auto eval = evaluate(result.model->generator, select_cases(cases, split.test_ids));
  const double ssim_mean = eval.summary.ssim.mean;
  const double elapsed = seconds_since(t0);
  return {ssim_mean >= 0.80 && eval.lesion_dice > 0.5,
          fmt("%zu test cases: masked SSIM %.4f +- %.4f (>= 0.80), lesion Dice %.4f (> 0.5); G %.2f -> %.2f; %.0f s",
              eval.summary.count, ssim_mean, eval.summary.ssim.stddev, eval.lesion_dice, result.epochs.front().total_g,
              result.epochs.back().total_g, elapsed)};
}

// 6. Ablation ladder over three seeds.
Outcome ablation_trend(const fs::path& out, std::size_t epochs) {
  const auto t0 = Clock::now();
  std::size_t ordered = 0;
  std::string detail;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    PhantomSpec spec;
    spec.seed = seed;
    auto cases = generate_cases(spec, 100);
    TrainConfig config;
    config.model.seed = seed;
    config.epochs = epochs;
    AblationOptions opts{out / ("seed_" + std::to_string(seed)), [seed](AblationMode m, const EpochStats& s) {
                           std::fprintf(stderr, "  seed %llu %-4s epoch %2zu  G %.3f  %.1fs\n",
                                        static_cast<unsigned long long>(seed), std::string(to_string(m)).c_str(),
                                        s.epoch, s.total_g, s.seconds);
                         }};
    auto rows = run_ablation(cases, config, opts);
    bool ok = true;
    for (std::size_t i = 1; i < rows.size(); ++i) ok = ok && rows[i].summary.ssim.mean >= rows[i - 1].summary.ssim.mean;
    ordered += ok;
    detail += fmt("seed %llu ", static_cast<unsigned long long>(seed));
    for (const auto& r : rows) detail += fmt("%s %.4f ", std::string(to_string(r.mode)).c_str(), r.summary.ssim.mean);
    detail += ok ? "(ordered); " : "(not ordered); ";
  }
  return {ordered >= 2, fmt("%zu/3 seeds ordered, %zu epochs per run: ", ordered, epochs) + detail +
                            fmt("%.0f s", seconds_since(t0))};
}

// 7. Determinism and persistence on a small model.
Outcome determinism(const fs::path& out) {
  PhantomSpec spec;
  spec.image_size = 32;
  spec.lesion_radius = {2.0, 4.0};
  auto cases = generate_cases(spec, 8);
  TrainConfig config;
  config.model.image_size = 32;
  config.model.channels = {8, 16};
  config.model.disc_channels = {8, 8, 8, 8, 8};
  config.model.attention_reduction = 4;
  config.epochs = 2;
  auto a = train(all_cases(cases), config, {out / "a", false, nullptr});
  auto b = train(all_cases(cases), config, {out / "b", false, nullptr});
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  std::size_t files = 0, differing = 0;
  for (const auto& e : fs::directory_iterator(a.final_checkpoint)) {
    ++files;
    differing += slurp(e.path()) != slurp(b.final_checkpoint / e.path().filename());
  }
  auto loaded = load_model(a.final_checkpoint);
  std::size_t mismatched = 0;
  for (const auto& c : cases) mismatched += synthesize(a.model->generator, c) != synthesize(loaded->generator, c);
  return {files > 0 && differing == 0 && mismatched == 0,
          fmt("%zu checkpoint files, %zu differ between runs; %zu of %zu cases differ after reload", files, differing,
              mismatched, cases.size())};
}

// 8. Learning-rate schedule.
Outcome schedule() {
  TrainConfig c;
  const double a = lr_at(0, c), b = lr_at(5, c), d = lr_at(12, c);
  return {a == 1e-3 && b == 8e-4 && d == 6.4e-4, fmt("lr(0) %.17g, lr(5) %.17g, lr(12) %.17g", a, b, d)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cesynth acceptance checks"};
  std::string out = "acceptance_out";
  std::size_t ablation_epochs = 10;
  std::vector<int> only;
  app.add_option("--out", out, "Scratch directory for training runs");
  app.add_option("--ablation-epochs", ablation_epochs, "Epochs per ablation run (30 for the desk protocol)");
  app.add_option("--only", only, "Run just these criteria");
  CLI11_PARSE(app, argc, argv);

  const fs::path root(out);
  fs::remove_all(root);
  auto wanted = [&](int id) { return only.empty() || std::find(only.begin(), only.end(), id) != only.end(); };
  auto run = [&](int id, const char* name, auto&& fn) {
    if (!wanted(id)) return;
    try {
      report(id, name, fn());
    } catch (const std::exception& e) {
      report(id, name, {false, std::string("threw: ") + e.what()});
    }
  };
  run(1, "adc oracle", adc_oracle);
  run(2, "metric oracles", metric_oracles);
  run(3, "gradient checks", gradient_checks);
  run(4, "closed-form traces", closed_form_traces);
  run(5, "end-to-end phantom training", [&] { return end_to_end(root / "full"); });
  run(6, "ablation trend", [&] { return ablation_trend(root / "ablation", ablation_epochs); });
  run(7, "determinism and persistence", [&] { return determinism(root / "determinism"); });
  run(8, "lr schedule", schedule);
  return failures == 0 ? 0 : 1;
}
