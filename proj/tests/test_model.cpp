#include <gtest/gtest.h>

#include "tgen/decoding.hpp"
#include "tgen/model.hpp"
#include "tgen/world.hpp"

using namespace tgen;

namespace {

ModelConfig tinyConfig(CondMode mode = CondMode::decoderContext) {
  ModelConfig c;
  c.conditioningMode = mode;
  c.encoderLayers = 1;
  c.decoderLayers = 2;
  c.contextEncoderLayers = 1;
  c.hiddenDim = 16;
  c.ffnDim = 32;
  c.heads = 2;
  c.vocabText = 8;
  c.V = 12;
  c.N = 2;
  c.maxFrames = 16;
  c.contextFrames = 3;
  c.svDim = 24;
  return c;
}

TokenGrid randomGrid(int frames, int codebooks, int vocab, uint64_t seed) {
  TokenGrid g(frames, codebooks);
  Rng rng(seed);
  for (int t = 0; t < frames; ++t)
    for (int n = 0; n < codebooks; ++n) g.at(t, n) = static_cast<int>(rng.uniformInt(vocab));
  return g;
}

CondInput condFor(const ModelConfig& c, uint64_t seed) {
  CondInput in;
  in.textTokens = {1, 2, 3, 4};
  if (c.conditioningMode == CondMode::svConditioned) {
    std::vector<double> sv(c.svDim);
    Rng rng(seed);
    for (double& v : sv) v = rng.normal();
    in.speakerVector = sv;
  } else {
    in.contextGrid = randomGrid(c.contextFrames + 2, c.N, c.V, seed);
  }
  return in;
}

}  // namespace

TEST(Model, LogitShapeIsVocabPlusEos) {
  for (CondMode mode : {CondMode::svConditioned, CondMode::decoderContext, CondMode::multiEncoder}) {
    ModelConfig c = tinyConfig(mode);
    ModelParams p = initModelParams<float>(c, 1);
    TokenGrid target = randomGrid(5, c.N, c.V, 2);
    auto [logits, attn] = forward(p, condFor(c, 3), target);
    EXPECT_EQ(logits.frames, 5);
    EXPECT_EQ(logits.codebooks, c.N);
    EXPECT_EQ(logits.vocab, c.V + 1);
    EXPECT_EQ(logits.v.size(), static_cast<size_t>(5) * c.N * (c.V + 1));
  }
}

TEST(Model, ForwardIsDeterministic) {
  ModelConfig c = tinyConfig();
  ModelParams p = initModelParams<float>(c, 1);
  TokenGrid target = randomGrid(4, c.N, c.V, 2);
  auto [l1, a1] = forward(p, condFor(c, 3), target);
  auto [l2, a2] = forward(p, condFor(c, 3), target);
  EXPECT_EQ(l1.v, l2.v);
}

TEST(Model, InitIsSeedDependent) {
  ModelConfig c = tinyConfig();
  ModelParams a = initModelParams<float>(c, 1);
  ModelParams b = initModelParams<float>(c, 2);
  ASSERT_EQ(a.entries.size(), b.entries.size());
  bool anyDiff = false;
  for (size_t i = 0; i < a.entries.size(); ++i)
    if (a.entries[i].w != b.entries[i].w) anyDiff = true;
  EXPECT_TRUE(anyDiff);
}

TEST(Model, DecoderIsCausal) {
  ModelConfig c = tinyConfig();
  ModelParams p = initModelParams<float>(c, 1);
  CondInput cond = condFor(c, 3);
  TokenGrid target = randomGrid(6, c.N, c.V, 2);
  auto [base, _] = forward(p, cond, target);

  // Perturbing frame t must leave logit rows 0..t unchanged (row t is
  // predicted from strictly earlier frames).
  const int t = 3;
  TokenGrid mod = target;
  mod.at(t, 0) = (mod.at(t, 0) + 1) % c.V;
  auto [pert, __] = forward(p, cond, mod);
  const int rowLen = c.N * (c.V + 1);
  for (int r = 0; r <= t; ++r)
    for (int i = 0; i < rowLen; ++i)
      EXPECT_EQ(base.v[static_cast<size_t>(r) * rowLen + i], pert.v[static_cast<size_t>(r) * rowLen + i])
          << "row " << r;
  bool laterChanged = false;
  for (size_t i = static_cast<size_t>(t + 1) * rowLen; i < base.v.size(); ++i)
    if (base.v[i] != pert.v[i]) laterChanged = true;
  EXPECT_TRUE(laterChanged);
}

TEST(Model, TextConditioningMatters) {
  for (CondMode mode : {CondMode::svConditioned, CondMode::decoderContext, CondMode::multiEncoder}) {
    ModelConfig c = tinyConfig(mode);
    ModelParams p = initModelParams<float>(c, 1);
    TokenGrid target = randomGrid(4, c.N, c.V, 2);
    CondInput cond = condFor(c, 3);
    auto [base, _] = forward(p, cond, target);
    CondInput other = cond;
    other.textTokens = {5, 6, 7};
    auto [alt, __] = forward(p, other, target);
    EXPECT_NE(base.v, alt.v) << condModeName(mode);
  }
}

TEST(Model, ContextConditioningMatters) {
  for (CondMode mode : {CondMode::svConditioned, CondMode::decoderContext, CondMode::multiEncoder}) {
    ModelConfig c = tinyConfig(mode);
    ModelParams p = initModelParams<float>(c, 1);
    TokenGrid target = randomGrid(4, c.N, c.V, 2);
    CondInput cond = condFor(c, 3);
    CondInput other = condFor(c, 4);
    other.textTokens = cond.textTokens;
    auto [base, _] = forward(p, cond, target);
    auto [alt, __] = forward(p, other, target);
    EXPECT_NE(base.v, alt.v) << condModeName(mode);
  }
}

TEST(Model, DropFlagsSwitchToNullConditioning) {
  ModelConfig c = tinyConfig();
  ModelParams p = initModelParams<float>(c, 1);
  TokenGrid target = randomGrid(4, c.N, c.V, 2);
  CondInput a = condFor(c, 3), b = condFor(c, 4);
  b.textTokens = {7, 7};
  a.dropText = a.dropContext = true;
  b.dropText = b.dropContext = true;
  // With both drops active, the actual text/context must not matter.
  auto [la, _] = forward(p, a, target);
  auto [lb, __] = forward(p, b, target);
  EXPECT_EQ(la.v, lb.v);
  // And the unconditional branch differs from the conditional one.
  CondInput condFull = condFor(c, 3);
  auto [lc, ___] = forward(p, condFull, target);
  EXPECT_NE(la.v, lc.v);
}

TEST(Model, ConditioningDropoutIsJointAndCalibrated) {
  CondInput cond;
  cond.textTokens = {1, 2};
  cond.contextGrid = TokenGrid(2, 2);
  const int trials = 20000;
  int dropped = 0;
  for (int i = 0; i < trials; ++i) {
    CondInput out = applyConditioningDropout(cond, 0.10, mixSeed(42, i));
    EXPECT_EQ(out.dropText, out.dropContext);  // joint drop only
    if (out.dropText) ++dropped;
  }
  // Hoeffding bound: deviation > 0.01 at n = 20000 has probability < 2e-9.
  EXPECT_NEAR(static_cast<double>(dropped) / trials, 0.10, 0.01);
  // Degenerate probabilities behave.
  EXPECT_TRUE(applyConditioningDropout(cond, 1.0, 1).dropText);
  EXPECT_FALSE(applyConditioningDropout(cond, 0.0, 1).dropText);
  EXPECT_THROW(applyConditioningDropout(cond, 1.5, 1), DomainError);
}

TEST(Model, MultiEncoderLayerPartitionDefaults) {
  ModelConfig c = tinyConfig(CondMode::multiEncoder);
  c.decoderLayers = 4;
  EXPECT_EQ(c.textLayers(), (std::vector<int>{0, 2}));
  EXPECT_EQ(c.contextLayers(), (std::vector<int>{1, 3}));
  c.textCrossAttnLayers = {0, 1, 2};
  c.contextCrossAttnLayers = {3};
  EXPECT_EQ(c.textLayers(), (std::vector<int>{0, 1, 2}));
  c.validate();
  c.contextCrossAttnLayers = {2};  // overlap
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Model, ValidationCatchesBadShapes) {
  ModelConfig c = tinyConfig();
  c.hiddenDim = 15;  // not divisible by heads
  EXPECT_THROW(c.validate(), ConfigError);
  c = tinyConfig();
  c.condDropoutProb = -0.1;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Model, CondInputValidation) {
  ModelConfig c = tinyConfig(CondMode::svConditioned);
  CondInput in;
  in.textTokens = {1, 99};  // out of range
  in.speakerVector = std::vector<double>(c.svDim, 0.0);
  EXPECT_THROW(in.validateFor(c), DomainError);
  in.textTokens = {1, 2};
  in.speakerVector = std::vector<double>(c.svDim + 1, 0.0);
  EXPECT_THROW(in.validateFor(c), ConfigError);
}

TEST(Model, AttentionStateCoversTextLayers) {
  ModelConfig c = tinyConfig();
  ModelParams p = initModelParams<float>(c, 1);
  TokenGrid target = randomGrid(5, c.N, c.V, 2);
  CondInput cond = condFor(c, 3);
  auto [logits, attn] = forward(p, cond, target);
  ASSERT_EQ(attn.crossAttnScores.size(), c.textLayers().size() * c.heads);
  for (const auto& s : attn.crossAttnScores) {
    EXPECT_EQ(s.rows(), 5);
    EXPECT_EQ(s.cols(), static_cast<Eigen::Index>(cond.textTokens.size()));
  }
}
