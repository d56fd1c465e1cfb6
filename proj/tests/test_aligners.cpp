#include <gtest/gtest.h>

#include "tgen/aligners.hpp"

using namespace tgen;

namespace {

ModelConfig tinyConfig() {
  ModelConfig c;
  c.conditioningMode = CondMode::decoderContext;
  c.encoderLayers = 1;
  c.decoderLayers = 1;
  c.contextEncoderLayers = 1;
  c.hiddenDim = 8;
  c.ffnDim = 16;
  c.heads = 2;
  c.vocabText = 6;
  c.V = 8;
  c.N = 2;
  c.maxFrames = 12;
  c.contextFrames = 2;
  c.svDim = 16;
  return c;
}

TokenGrid randomGrid(int frames, int codebooks, int vocab, uint64_t seed) {
  TokenGrid g(frames, codebooks);
  Rng rng(seed);
  for (int t = 0; t < frames; ++t)
    for (int n = 0; n < codebooks; ++n) g.at(t, n) = static_cast<int>(rng.uniformInt(vocab));
  return g;
}

PreferencePair makePair(const ModelConfig& c, uint64_t seed, bool identical = false) {
  PreferencePair p;
  p.input.textTokens = {1, 2, 3};
  p.input.contextGrid = randomGrid(c.contextFrames, c.N, c.V, seed);
  p.chosen = randomGrid(4, c.N, c.V, seed + 1);
  p.rejected = identical ? p.chosen : randomGrid(4, c.N, c.V, seed + 2);
  return p;
}

double maxAbsGrad(const ModelParams& p) {
  double m = 0;
  for (const auto& e : p.entries)
    for (float g : e.g) m = std::max(m, std::abs(static_cast<double>(g)));
  return m;
}

}  // namespace

TEST(SeqLogProb, TotalIsFramesPlusEos) {
  ModelConfig c = tinyConfig();
  ModelParams params = initModelParams<float>(c, 1);
  PreferencePair p = makePair(c, 10);
  auto lp = sequenceLogProb(params, p.input, p.chosen);
  EXPECT_NEAR(lp.total, lp.frames + lp.eos, 1e-6);
  EXPECT_LT(lp.frames, 0.0);
  EXPECT_LT(lp.eos, 0.0);
}

TEST(SeqLogProb, MatchesManualSoftmaxSum) {
  ModelConfig c = tinyConfig();
  ModelParams params = initModelParams<float>(c, 1);
  PreferencePair p = makePair(c, 20);
  ad::Graph<float> g;
  ForwardOptions opts;
  opts.wantNextRow = true;
  opts.trainable = false;
  auto fw = buildForward(g, params, p.input, p.chosen, opts);
  const auto& L = g.val(fw.logits);
  double manual = 0;
  auto addTerm = [&](int row, int n, int code) {
    Eigen::Array<float, 1, Eigen::Dynamic> chunk = L.row(row).segment(n * c.vout(), c.vout()).array();
    float mx = chunk.maxCoeff();
    manual += chunk(code) - (std::log((chunk - mx).exp().sum()) + mx);
  };
  for (int t = 0; t < p.chosen.frames; ++t)
    for (int n = 0; n < c.N; ++n) addTerm(t, n, p.chosen.at(t, n));
  addTerm(p.chosen.frames, 0, c.eosCode());
  auto lp = sequenceLogProb(params, p.input, p.chosen);
  EXPECT_NEAR(lp.total, manual, 1e-4);
}

TEST(Dpo, AtReferenceLossIsLogTwo) {
  ModelConfig c = tinyConfig();
  PolicyPair pp;
  pp.reference = initModelParams<float>(c, 1);
  pp.policy = pp.reference;
  PreferencePair pair = makePair(c, 30);
  auto r = dpoLoss(pp, pair, 0.01, false);
  EXPECT_NEAR(r.loss, std::log(2.0), 1e-6);
  EXPECT_NEAR(r.delta, 0.0, 1e-6);
}

TEST(Dpo, IdenticalPairHasExactlyZeroGradient) {
  ModelConfig c = tinyConfig();
  PolicyPair pp;
  pp.reference = initModelParams<float>(c, 1);
  pp.policy = initModelParams<float>(c, 2);  // policy != reference
  PreferencePair pair = makePair(c, 40, /*identical=*/true);
  pp.policy.zeroGrad();
  auto r = dpoLoss(pp, pair, 0.01, true);
  EXPECT_DOUBLE_EQ(r.delta, 0.0);
  EXPECT_NEAR(r.loss, std::log(2.0), 1e-9);
  EXPECT_EQ(maxAbsGrad(pp.policy), 0.0);
}

TEST(Dpo, HandValueAtUnitDelta) {
  // -log sigmoid(1) = softplus(-1).
  EXPECT_NEAR(-logSigmoid(1.0), 0.3132616875182228, 1e-12);
  EXPECT_NEAR(-logSigmoid(0.0), std::log(2.0), 1e-15);
}

TEST(Dpo, GradientPushesDeltaUp) {
  ModelConfig c = tinyConfig();
  PolicyPair pp;
  pp.reference = initModelParams<float>(c, 1);
  pp.policy = pp.reference;
  PreferencePair pair = makePair(c, 50);
  double before = dpoLoss(pp, pair, 1.0, false).loss;
  Adam<float> opt(1e-3);
  for (int i = 0; i < 20; ++i) {
    pp.policy.zeroGrad();
    dpoLoss(pp, pair, 1.0, true);
    opt.step(pp.policy);
  }
  auto after = dpoLoss(pp, pair, 1.0, false);
  EXPECT_LT(after.loss, before);
  EXPECT_GT(after.delta, 0.0);
}

TEST(Rpo, BernoulliKlValues) {
  EXPECT_NEAR(bernoulliKl(0.0, 0.0), 0.0, 1e-15);
  EXPECT_NEAR(bernoulliKl(5.0, 5.0), 0.0, 1e-12);
  // D[a=1 || b=0] = 0.5 ln(0.5/sigma(1)) + 0.5 ln(0.5/sigma(-1)).
  double expect = 0.5 * std::log(0.5 / sigmoid(1.0)) + 0.5 * std::log(0.5 / sigmoid(-1.0));
  EXPECT_NEAR(bernoulliKl(1.0, 0.0), expect, 1e-12);
  EXPECT_NEAR(expect, 0.12011, 1e-5);
  EXPECT_GT(bernoulliKl(-2.0, 1.0), 0.0);
}

TEST(Rpo, ZeroGapAtReferenceIsZeroLoss) {
  ModelConfig c = tinyConfig();
  PolicyPair pp;
  pp.reference = initModelParams<float>(c, 1);
  pp.policy = pp.reference;
  PreferencePair pair = makePair(c, 60, /*identical=*/true);
  pair.rewardGap = 0.0;
  pp.policy.zeroGrad();
  auto r = rpoLoss(pp, pair, 0.01, 1.0, true);
  EXPECT_NEAR(r.loss, 0.0, 1e-9);
  EXPECT_EQ(maxAbsGrad(pp.policy), 0.0);
}

TEST(Rpo, RequiresGap) {
  ModelConfig c = tinyConfig();
  PolicyPair pp;
  pp.reference = initModelParams<float>(c, 1);
  pp.policy = pp.reference;
  PreferencePair pair = makePair(c, 70);
  EXPECT_THROW(rpoLoss(pp, pair, 0.01, 1.0, false), DomainError);
}

TEST(Rpo, GradientTracksGapDirection) {
  ModelConfig c = tinyConfig();
  PolicyPair pp;
  pp.reference = initModelParams<float>(c, 1);
  pp.policy = pp.reference;
  PreferencePair pair = makePair(c, 80);
  pair.rewardGap = 1.5;
  double before = rpoLoss(pp, pair, 1.0, 1.0, false).loss;
  Adam<float> opt(1e-3);
  for (int i = 0; i < 30; ++i) {
    pp.policy.zeroGrad();
    rpoLoss(pp, pair, 1.0, 1.0, true);
    opt.step(pp.policy);
  }
  auto after = rpoLoss(pp, pair, 1.0, 1.0, false);
  EXPECT_LT(after.loss, before);
  EXPECT_GT(after.delta, 0.0);  // moves toward the positive gap target
}

TEST(Align, FinetuneRunsAndKeepsBestValidation) {
  ModelConfig c = tinyConfig();
  PolicyPair pp;
  pp.reference = initModelParams<float>(c, 1);
  pp.policy = pp.reference;
  std::vector<PreferencePair> data;
  for (int i = 0; i < 8; ++i) data.push_back(makePair(c, 100 + 3 * i));
  AlignConfig ac;
  ac.method = PrefMode::dpo;
  ac.beta = 0.5;
  ac.learningRate = 1e-3;
  ac.maxIters = 10;
  ac.batchPairs = 4;
  ac.evalEvery = 5;
  ac.rngSeed = 2;
  auto res = alignFinetune(pp, data, ac);
  EXPECT_EQ(res.log.size(), 10u);
  EXPECT_TRUE(std::isfinite(res.bestValLoss));
  // The kept checkpoint cannot be worse than the untouched policy.
  PolicyPair check;
  check.reference = initModelParams<float>(c, 1);
  check.policy = check.reference;
  EXPECT_LE(res.bestValLoss, std::log(2.0) + 1e-6);
}

TEST(Align, DivergenceGuardFires) {
  ModelConfig c = tinyConfig();
  PolicyPair pp;
  pp.reference = initModelParams<float>(c, 1);
  pp.policy = pp.reference;
  std::vector<PreferencePair> data{makePair(c, 200), makePair(c, 210)};
  AlignConfig ac;
  ac.method = PrefMode::dpo;
  ac.beta = 1.0;
  ac.learningRate = 5.0;  // absurd step size forces blow-up
  ac.maxIters = 200;
  ac.batchPairs = 2;
  ac.evalEvery = 50;
  ac.divergenceBound = 10.0;
  ac.rngSeed = 3;
  EXPECT_THROW(alignFinetune(pp, data, ac), DivergenceError);
}
