#include <gtest/gtest.h>

#include <fstream>

#include "cesynth/adversarial.hpp"
#include "test_util.hpp"

using namespace cesynth;
using namespace cesynth::nn;
using cesynth::testing::grad_check;
using cesynth::testing::random_tensor;

namespace {

Var<double> filled(const Shape& s, double v) { return constant(Tensor<double>(s, v)); }

Tensor<double> half_mask(const Shape& s) {
  Tensor<double> m(s);
  for (std::size_t i = 0; i < m.size(); i += 2) m[i] = 1.0;
  return m;
}

GeneratorInputs<double> random_condition(std::size_t size, Rng& rng) {
  GeneratorInputs<double> in;
  for (auto& d : in.dwi) d = constant(random_tensor<double>({1, 1, size, size}, rng, 0, 1));
  in.t1 = constant(random_tensor<double>({1, 1, size, size}, rng, 0, 1));
  return in;
}

}  // namespace

TEST(Discriminator, ScoreMapShapeAndRange) {
  Discriminator<float> d(ModelConfig{});
  Rng rng(1);
  GeneratorInputs<float> in;
  for (auto& x : in.dwi) x = constant(random_tensor<float>({2, 1, 64, 64}, rng, 0, 1));
  in.t1 = constant(random_tensor<float>({2, 1, 64, 64}, rng, 0, 1));
  auto s = d(in, constant(random_tensor<float>({2, 1, 64, 64}, rng, 0, 1)), Phase::kTrain);
  EXPECT_EQ(s->shape(), (Shape{2, 1, 2, 2}));
  for (float v : s->value.values()) {
    EXPECT_GT(v, 0.0f);
    EXPECT_LT(v, 1.0f);
  }
}

TEST(Discriminator, ZeroFinalLayerScoresHalf) {
  Discriminator<double> d(ModelConfig{});
  d.zero_final_layer();
  Rng rng(2);
  auto s = d(random_condition(64, rng), constant(random_tensor<double>({1, 1, 64, 64}, rng)), Phase::kEval);
  for (double v : s->value.values()) EXPECT_EQ(v, 0.5);
}

TEST(Discriminator, DeterministicAndRejectsIndivisibleInput) {
  ModelConfig c;
  Discriminator<double> a(c), b(c);
  Rng rng(3);
  auto cond = random_condition(64, rng);
  auto y = constant(random_tensor<double>({1, 1, 64, 64}, rng));
  EXPECT_EQ(a(cond, y, Phase::kEval)->value, b(cond, y, Phase::kEval)->value);
  auto bad = random_condition(48, rng);
  EXPECT_THROW(a(bad, constant(Tensor<double>({1, 1, 48, 48})), Phase::kEval), UsageError);
}

TEST(MaskedL1, Examples) {
  const Shape s{1, 1, 4, 4};
  Rng rng(4);
  auto y = constant(random_tensor<double>(s, rng));
  EXPECT_EQ(masked_l1(y, y, half_mask(s))->value[0], 0.0);

  auto g = constant(random_tensor<double>(s, rng));
  double mae = 0;
  for (std::size_t i = 0; i < 16; ++i) mae += std::abs(y->value[i] - g->value[i]);
  EXPECT_NEAR(masked_l1(y, g, Tensor<double>(s))->value[0], mae / 16, 1e-15);

  EXPECT_NEAR(masked_l1(filled(s, 0.6), filled(s, 0.5), half_mask(s), 100.0)->value[0], 5.05, 1e-12);
}

TEST(GeneratorLoss, HalfScoresWithoutL1IsLogHalf) {
  const Shape s{1, 1, 4, 4};
  auto loss = generator_loss(filled({1, 1, 2, 2}, 0.5), filled(s, 0.3), filled(s, 0.7), half_mask(s), 0.0);
  EXPECT_NEAR(loss.total->value[0], std::log(0.5), 1e-9);
  EXPECT_NEAR(loss.total->value[0], -0.693147, 1e-6);
}

TEST(GeneratorLoss, PerfectImageLeavesAdversarialTerm) {
  const Shape s{1, 1, 4, 4};
  Rng rng(5);
  auto y = constant(random_tensor<double>(s, rng));
  auto loss = generator_loss(filled({1, 1, 2, 2}, 0.3), y, y, half_mask(s));
  EXPECT_EQ(loss.l1->value[0], 0.0);
  EXPECT_EQ(loss.total->value[0], loss.adversarial->value[0]);
  EXPECT_NEAR(loss.adversarial->value[0], std::log(0.7), 1e-12);
}

TEST(GeneratorLoss, ScoreOfOneClamps) {
  const Shape s{1, 1, 4, 4};
  auto loss = generator_loss(filled({1, 1, 2, 2}, 1.0), filled(s, 0.5), filled(s, 0.5), half_mask(s));
  EXPECT_NEAR(loss.adversarial->value[0], std::log(1e-7), 1e-6);
  EXPECT_NEAR(loss.adversarial->value[0], -16.118, 1e-3);
}

TEST(GeneratorLoss, AffineInLambda) {
  const Shape s{1, 1, 4, 4};
  Rng rng(6);
  auto y = constant(random_tensor<double>(s, rng)), g = constant(random_tensor<double>(s, rng));
  auto scores = constant(random_tensor<double>({1, 1, 2, 2}, rng, 0.1, 0.9));
  const auto mask = half_mask(s);
  for (double lambda : {0.0, 1.0, 10.0, 100.0, 1234.5}) {
    auto loss = generator_loss(scores, y, g, mask, lambda);
    EXPECT_EQ(loss.total->value[0], loss.adversarial->value[0] + lambda * loss.l1->value[0]);
  }
  EXPECT_THROW(generator_loss(scores, y, g, mask, -1.0), UsageError);
}

TEST(GeneratorLoss, NonSaturatingVariant) {
  const Shape s{1, 1, 4, 4};
  auto loss = generator_loss(filled({1, 1, 2, 2}, 0.25), filled(s, 0.5), filled(s, 0.5), half_mask(s), 100.0, 100.0, true);
  EXPECT_NEAR(loss.adversarial->value[0], -std::log(0.25), 1e-12);
}

TEST(DiscriminatorLoss, Examples) {
  EXPECT_NEAR(discriminator_loss(filled({1, 1, 2, 2}, 0.5), filled({1, 1, 2, 2}, 0.5))->value[0], 1.386294, 1e-6);
  const double near_zero = discriminator_loss(filled({1, 1, 2, 2}, 1.0), filled({1, 1, 2, 2}, 0.0))->value[0];
  EXPECT_NEAR(near_zero, -2.0 * std::log1p(-1e-7), 1e-12);
  EXPECT_NEAR(near_zero, 2e-7, 1e-9);
}

TEST(AdversarialLosses, BothObjectivesReadTheSameFakeScores) {
  const Shape s{1, 1, 4, 4};
  Rng rng(7);
  auto cond = random_condition(4, rng);
  auto real = constant(random_tensor<double>(s, rng)), fake = constant(random_tensor<double>(s, rng));
  std::vector<const Node<double>*> seen;
  std::vector<Var<double>> returned;
  auto recording = [&](const GeneratorInputs<double>&, const Var<double>& candidate) {
    seen.push_back(candidate.get());
    returned.push_back(filled({1, 1, 1, 1}, seen.size() == 1 ? 0.8 : 0.3));
    return returned.back();
  };
  auto out = adversarial_losses(recording, cond, real, fake, half_mask(s), 0.0, 100.0, false);
  ASSERT_EQ(seen.size(), 2u);
  EXPECT_EQ(seen[0], real.get());
  EXPECT_EQ(seen[1], fake.get());
  EXPECT_EQ(out.scores_fake, returned[1]);
  EXPECT_NEAR(out.loss_d->value[0], -(std::log(0.8) + std::log(0.7)), 1e-12);
  EXPECT_NEAR(out.loss_g.adversarial->value[0], std::log(0.7), 1e-12);
}

TEST(GeneratorLossGradient, ThroughDiscriminatorMatchesFiniteDifferences) {
  ModelConfig c;
  c.image_size = 32;
  c.channels = {4, 8};
  c.disc_channels = {4, 4, 4, 4, 4};
  c.attention_reduction = 4;
  c.init.weight_std = 0.2;
  c.init.bn_momentum = 1.0;
  Generator<double> gen(c);
  Discriminator<double> disc(c);
  Rng rng(8);
  GeneratorInputs<double> in;
  for (auto& d : in.dwi) d = constant(random_tensor<double>({2, 1, 32, 32}, rng, 0, 1));
  in.t1 = constant(random_tensor<double>({2, 1, 32, 32}, rng, 0, 1));
  auto y = constant(random_tensor<double>({2, 1, 32, 32}, rng, 0, 1));
  const auto mask = half_mask({2, 1, 32, 32});
  {
    NoGradGuard guard;
    disc(in, gen(in, Phase::kTrain).synthesized, Phase::kTrain);
  }
  auto reg = gen.parameters();
  std::vector<Var<double>> params;
  for (const auto& p : reg.params()) params.push_back(p.var);
  auto f = [&] {
    auto g = gen(in, Phase::kEval).synthesized;
    return generator_loss(disc(in, g, Phase::kEval), y, g, mask, 100.0).total;
  };
  auto r = grad_check(f, params, 30, 9);
  EXPECT_GE(r.checked, 20u);
  EXPECT_LE(r.worst_rel, 1e-3);
}

TEST(TrainingLog, WritesHeaderAndRows) {
  auto path = std::filesystem::temp_directory_path() / "cesynth_log_test.csv";
  {
    TrainingLog log(path);
    log.append({-0.5, 0.01, 0.5, 1.2, 1, 1});
  }
  std::ifstream in(path);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(header, "step,epoch,adversarial_g,l1_term,total_g,loss_d");
  EXPECT_EQ(row, "1,1,-0.5,0.01,0.5,1.2");
  std::filesystem::remove(path);
}
