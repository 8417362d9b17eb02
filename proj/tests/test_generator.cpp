#include <gtest/gtest.h>

#include "cesynth/adversarial.hpp"
#include "cesynth/generator.hpp"
#include "cesynth/harness.hpp"
#include "test_util.hpp"

using namespace cesynth;
using namespace cesynth::nn;
using cesynth::testing::grad_check;
using cesynth::testing::probe_weights;
using cesynth::testing::random_tensor;

namespace {

ModelConfig tiny_config(AblationMode mode = AblationMode::kFull, std::uint64_t seed = 0) {
  ModelConfig c;
  c.image_size = 32;
  c.channels = {4, 8};
  c.disc_channels = {4, 4, 4, 4, 4};
  c.mode = mode;
  c.attention_reduction = 4;
  c.seed = seed;
  return c;
}

template <class T>
GeneratorInputs<T> random_inputs(std::size_t n, std::size_t size, Rng& rng, bool trainable = false) {
  GeneratorInputs<T> in;
  auto make = [&] {
    auto t = random_tensor<T>({n, 1, size, size}, rng, 0.0, 1.0);
    return trainable ? parameter(std::move(t)) : constant(std::move(t));
  };
  for (auto& d : in.dwi) d = make();
  in.t1 = make();
  return in;
}

// One training-mode pass with momentum 1 copies batch statistics into the
// running estimates, so evaluation mode sees realistically scaled activations.
template <class T>
void calibrate_batch_norm(Generator<T>& g, const GeneratorInputs<T>& in) {
  NoGradGuard guard;
  g(in, Phase::kTrain);
}

}  // namespace

TEST(Encoder, ShapeSchedule) {
  ModelConfig c;
  Rng rng(1);
  SequenceEncoder<float> enc(1, c.channels, rng, c.init);
  auto feats = enc(constant(random_tensor<float>({2, 1, 64, 64}, rng)), Phase::kTrain);
  ASSERT_EQ(feats.size(), 4u);
  EXPECT_EQ(feats[0]->shape(), (Shape{2, 32, 32, 32}));
  EXPECT_EQ(feats[1]->shape(), (Shape{2, 64, 16, 16}));
  EXPECT_EQ(feats[2]->shape(), (Shape{2, 128, 8, 8}));
  EXPECT_EQ(feats[3]->shape(), (Shape{2, 256, 4, 4}));
}

TEST(Encoder, ZeroInputStaysFinite) {
  ModelConfig c;
  Rng rng(2);
  SequenceEncoder<float> enc(1, c.channels, rng, c.init);
  for (auto phase : {Phase::kTrain, Phase::kEval}) {
    for (const auto& f : enc(constant(Tensor<float>({2, 1, 64, 64})), phase))
      for (float v : f->value.values()) ASSERT_TRUE(std::isfinite(v));
  }
}

TEST(Encoder, BitReproducible) {
  ModelConfig c = tiny_config();
  Generator<float> a(c), b(c);
  Rng rng(3);
  auto x = constant(random_tensor<float>({1, 1, 32, 32}, rng));
  auto fa = a.encoder(0)(x, Phase::kEval), fb = b.encoder(0)(x, Phase::kEval);
  for (std::size_t s = 0; s < fa.size(); ++s) EXPECT_EQ(fa[s]->value, fb[s]->value);
}

TEST(ModelConfig, RejectsIndivisibleSizes) {
  ModelConfig c;
  c.image_size = 48;
  EXPECT_THROW(c.validate(), UsageError);
  c.image_size = 80;  // divisible by 16 but not by 32
  EXPECT_THROW(c.validate(), UsageError);
  c.image_size = 96;
  EXPECT_NO_THROW(c.validate());
}

TEST(Generator, RejectsWrongInputSize) {
  Generator<float> g(tiny_config());
  Rng rng(4);
  EXPECT_THROW(g(random_inputs<float>(1, 64, rng), Phase::kEval), UsageError);
}

TEST(Reconstruction, LossIsMeanAbsoluteError) {
  Rng rng(5);
  auto x = random_tensor<double>({2, 1, 8, 8}, rng);
  auto r = random_tensor<double>({2, 1, 8, 8}, rng);
  double ref = 0;
  for (std::size_t i = 0; i < x.size(); ++i) ref += std::abs(x[i] - r[i]);
  EXPECT_NEAR(mean_abs_error(constant(r), constant(x))->value[0], ref / x.size(), 1e-7);
  EXPECT_EQ(mean_abs_error(constant(x), constant(x))->value[0], 0.0);
  EXPECT_GE(mean_abs_error(constant(r), constant(x))->value[0], 0.0);
}

TEST(Reconstruction, OutputMatchesInputShape) {
  Generator<float> g(tiny_config(AblationMode::kHF));
  Rng rng(6);
  auto in = random_inputs<float>(2, 32, rng);
  auto out = g(in, Phase::kTrain);
  ASSERT_EQ(out.reconstructions.size(), kSequenceCount);
  for (std::size_t i = 0; i < kSequenceCount; ++i) EXPECT_EQ(out.reconstructions[i]->shape(), in.sequence(i)->shape());
}

TEST(FuseScale, ZeroInputsGiveHalfAttentionAndBiasMap) {
  ModelConfig c = tiny_config();
  Rng rng(7);
  FusionBlock<double> block(4, AblationMode::kFull, c.b_pairs, 4, rng, c.init);
  ParameterRegistry<double> reg;
  block.wdm()->register_into(reg, "wdm");
  for (const auto& p : reg.params()) p.var->value.fill(0.0);
  block.mix().bias->value = random_tensor<double>({4}, rng);
  std::vector<Var<double>> zeros(kSequenceCount, constant(Tensor<double>({1, 4, 4, 4})));
  auto out = block(zeros, Phase::kEval);
  for (double a : out.attention->value.values()) EXPECT_EQ(a, 0.5);
  EXPECT_EQ(out.fused->shape(), (Shape{1, 4, 4, 4}));
  for (std::size_t ch = 0; ch < 4; ++ch)
    for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(out.fused->value.at(0, ch, i / 4, i % 4), block.mix().bias->value[ch]);
}

TEST(FuseScale, ConcatWidthPerMode) {
  ModelConfig c = tiny_config();
  Rng rng(8);
  EXPECT_EQ(FusionBlock<float>(4, AblationMode::kHF, c.b_pairs, 4, rng, c.init).concat_channels(), 20u);
  EXPECT_EQ(FusionBlock<float>(4, AblationMode::kHFWD, c.b_pairs, 4, rng, c.init).concat_channels(), 32u);
  EXPECT_EQ(FusionBlock<float>(4, AblationMode::kFull, c.b_pairs, 4, rng, c.init).concat_channels(), 32u);
}

TEST(FuseScale, ShapeMismatchRejected) {
  ModelConfig c = tiny_config();
  Rng rng(9);
  FusionBlock<float> block(4, AblationMode::kFull, c.b_pairs, 4, rng, c.init);
  std::vector<Var<float>> feats(kSequenceCount, constant(Tensor<float>({1, 4, 4, 4})));
  feats[2] = constant(Tensor<float>({1, 4, 2, 2}));
  EXPECT_THROW(block(feats, Phase::kEval), UsageError);
}

TEST(FuseScale, GradientsReachAllFiveBranches) {
  ModelConfig c = tiny_config();
  c.init.weight_std = 0.3;
  Rng rng(10);
  FusionBlock<double> block(3, AblationMode::kFull, c.b_pairs, 4, rng, c.init);
  std::vector<Var<double>> feats;
  for (std::size_t i = 0; i < kSequenceCount; ++i) feats.push_back(parameter(random_tensor<double>({2, 3, 4, 4}, rng)));
  ParameterRegistry<double> reg;
  block.register_into(reg, "fuse");
  const auto probe = probe_weights({2, 3, 4, 4}, 11);
  auto f = [&] { return weighted_sum(block(feats, Phase::kEval).fused, probe); };
  for (std::size_t i = 0; i < kSequenceCount; ++i) {
    auto r = grad_check(f, {feats[i]}, 12, 100 + i);
    EXPECT_LE(r.worst_rel, 1e-3) << "branch " << sequence_name(i);
    EXPECT_GT(r.largest_grad, 0.0) << "branch " << sequence_name(i);
  }
  std::vector<Var<double>> params;
  for (const auto& p : reg.params()) params.push_back(p.var);
  auto r = grad_check(f, params, 30, 12);
  EXPECT_LE(r.worst_rel, 1e-3);
}

TEST(Synthesize, ShapeRangeAndDeterminism) {
  Generator<float> g(tiny_config());
  Rng rng(13);
  auto in = random_inputs<float>(2, 32, rng);
  auto a = g(in, Phase::kEval).synthesized, b = g(in, Phase::kEval).synthesized;
  EXPECT_EQ(a->shape(), in.t1->shape());
  EXPECT_EQ(a->value, b->value);
  for (float v : a->value.values()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
}

TEST(Synthesize, SameSeedSameWeights) {
  Generator<float> a(tiny_config(AblationMode::kFull, 5)), b(tiny_config(AblationMode::kFull, 5)),
      c(tiny_config(AblationMode::kFull, 6));
  Rng rng(14);
  auto in = random_inputs<float>(1, 32, rng);
  EXPECT_EQ(a(in, Phase::kEval).synthesized->value, b(in, Phase::kEval).synthesized->value);
  EXPECT_NE(a(in, Phase::kEval).synthesized->value, c(in, Phase::kEval).synthesized->value);
}

TEST(Synthesize, EveryModeProducesAnImage) {
  Rng rng(15);
  auto in = random_inputs<float>(1, 32, rng);
  for (auto mode : kAblationLadder) {
    Generator<float> g(tiny_config(mode));
    auto out = g(in, Phase::kTrain);
    EXPECT_EQ(out.synthesized->shape(), in.t1->shape()) << to_string(mode);
    EXPECT_EQ(out.reconstructions.size(), mode == AblationMode::kIF ? 0u : kSequenceCount);
    EXPECT_EQ(out.attention.size(), mode == AblationMode::kFull ? 2u : 0u);
  }
}

TEST(Synthesize, RemovingAnySkipChangesTheOutput) {
  ModelConfig c = tiny_config();
  c.channels = {4, 8, 8};
  Generator<float> g(c);
  Rng rng(16);
  auto in = random_inputs<float>(1, 32, rng);
  calibrate_batch_norm(g, in);
  const auto base = g(in, Phase::kEval).synthesized->value;
  for (std::size_t s = 0; s + 1 < c.channels.size(); ++s) {
    g.skip_enabled().assign(c.channels.size(), true);
    g.skip_enabled()[s] = false;
    EXPECT_NE(g(in, Phase::kEval).synthesized->value, base) << "skip at scale " << s + 1;
  }
}

TEST(Synthesize, NonFiniteInputReportsScale) {
  Generator<float> g(tiny_config());
  Rng rng(17);
  auto in = random_inputs<float>(1, 32, rng);
  in.dwi[1]->value[5] = std::numeric_limits<float>::quiet_NaN();
  try {
    g(in, Phase::kEval);
    FAIL() << "NaN input accepted";
  } catch (const NumericFault& e) {
    EXPECT_NE(std::string(e.what()).find("scale 1"), std::string::npos) << e.what();
  }
}

TEST(Generator, ParameterNamesAreUniqueAndCountFinite) {
  Generator<float> g(ModelConfig{});
  auto reg = g.parameters();
  std::set<std::string> names;
  for (const auto& p : reg.params()) EXPECT_TRUE(names.insert(p.name).second) << p.name;
  for (const auto& b : reg.buffers()) EXPECT_TRUE(names.insert(b.name).second) << b.name;
  EXPECT_GT(reg.parameter_count(), 100000u);
  EXPECT_LT(reg.parameter_count(), 50000000u);
}

TEST(GeneratorGradient, MatchesFiniteDifferences) {
  ModelConfig c = tiny_config();
  c.init.bn_momentum = 1.0;
  c.init.weight_std = 0.2;
  Generator<double> g(c);
  Rng rng(18);
  auto in = random_inputs<double>(2, 32, rng);
  calibrate_batch_norm(g, in);
  auto reg = g.parameters();
  std::vector<Var<double>> params;
  for (const auto& p : reg.params()) params.push_back(p.var);
  const auto probe = probe_weights({2, 1, 32, 32}, 19);
  auto f = [&] {
    auto out = g(in, Phase::kEval);
    Var<double> loss = weighted_sum(out.synthesized, probe);
    for (std::size_t i = 0; i < kSequenceCount; ++i) loss = add(loss, mean_abs_error(out.reconstructions[i], in.sequence(i)));
    return loss;
  };
  auto r = grad_check(f, params, 30, 20, 1e-6);
  EXPECT_GE(r.checked, 20u);
  EXPECT_LE(r.worst_rel, 1e-3);
}

// Autoencoder property: Adam on the reconstruction loss alone strictly lowers
// the loss at every one of the first 50 steps, for at least 9 of 10 seeds.
TEST(Reconstruction, LossDescendsOverFiftySteps) {
  std::size_t monotone = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    ModelConfig c = tiny_config(AblationMode::kHF, seed);
    c.channels = {8, 16};
    Generator<float> g(c);
    auto reg = g.parameters();
    Adam adam(reg, 0.5, 0.999, 1e-8);
    Rng rng(mix_seed(seed, 77));
    auto in = random_inputs<float>(4, 32, rng);
    std::vector<double> losses;
    for (int step = 0; step <= 50; ++step) {
      auto out = g(in, Phase::kTrain);
      Var<float> loss = mean_abs_error(out.reconstructions[0], in.sequence(0));
      for (std::size_t i = 1; i < kSequenceCount; ++i) loss = add(loss, mean_abs_error(out.reconstructions[i], in.sequence(i)));
      losses.push_back(loss->value[0]);
      if (step == 50) break;
      reg.zero_grad();
      backward(loss);
      adam.step(5e-4);
    }
    bool ok = true;
    for (std::size_t t = 1; t < losses.size(); ++t) ok = ok && losses[t] < losses[t - 1];
    monotone += ok;
  }
  EXPECT_GE(monotone, 9u);
}
