#pragma once

#include "tgen/objectives.hpp"
#include "tgen/optim.hpp"
#include "tgen/prefs.hpp"

namespace tgen {

struct AlignConfig {
  PrefMode method = PrefMode::dpo;
  double beta = 0.01;
  double eta = 1.0;
  double learningRate = 1e-4;
  int64_t maxIters = 500;
  int batchPairs = 16;
  double valFraction = 0.1;
  int64_t evalEvery = 25;
  double divergenceBound = 50.0;  // abort when mean |delta| exceeds this
  uint64_t rngSeed = 0;

  void validate() const {
    if (beta <= 0) throw ConfigError("beta must be > 0");
    if (eta <= 0) throw ConfigError("eta must be > 0");
    if (learningRate <= 0) throw ConfigError("learningRate must be > 0");
    if (batchPairs < 1) throw ConfigError("batchPairs must be >= 1");
    if (maxIters < 0) throw ConfigError("maxIters must be >= 0");
  }
};

template <typename T>
struct PolicyPairT {
  ModelParamsT<T> policy;     // pi, trainable
  ModelParamsT<T> reference;  // pi_ref, frozen
};

using PolicyPair = PolicyPairT<float>;

struct SeqLogProb {
  double total = 0.0;
  double frames = 0.0;  // sum over target frames and codebooks
  double eos = 0.0;     // trailing EOS term, codebook 0
};

namespace detail {

// Tape node for the teacher-forced sequence log-probability (frame terms
// plus the EOS term), prior disabled.
template <typename T>
int seqLogProbOp(ad::Graph<T>& g, ModelParamsT<T>& params, const CondInput& cond, const TokenGrid& grid,
                 bool trainable) {
  ForwardOptions opts;
  opts.wantNextRow = true;
  opts.trainable = trainable;
  auto fw = buildForward(g, params, cond, grid, opts);
  auto entries = gridEntries(grid);
  entries.push_back({grid.frames, 0, params.config.eosCode()});
  return logProbSumOp(g, fw.logits, entries, params.config.vout());
}

}  // namespace detail

// log pi(y|x): sum over frames and codebooks of the teacher-forced token
// log-likelihood, plus the EOS term.
template <typename T>
SeqLogProb sequenceLogProb(const ModelParamsT<T>& params, const CondInput& input, const TokenGrid& grid) {
  if (grid.frames < 1) throw DomainError("sequenceLogProb: empty grid");
  ad::Graph<T> g;
  ModelParamsT<T>& p = const_cast<ModelParamsT<T>&>(params);
  ForwardOptions opts;
  opts.wantNextRow = true;
  opts.trainable = false;
  auto fw = buildForward(g, p, input, grid, opts);
  int framesNode = logProbSumOp(g, fw.logits, gridEntries(grid), params.config.vout());
  int eosNode = logProbSumOp(g, fw.logits, {{grid.frames, 0, params.config.eosCode()}}, params.config.vout());
  SeqLogProb r;
  r.frames = static_cast<double>(g.val(framesNode)(0, 0));
  r.eos = static_cast<double>(g.val(eosNode)(0, 0));
  r.total = r.frames + r.eos;
  return r;
}

struct PrefLossResult {
  double loss = 0.0;
  double delta = 0.0;  // beta-scaled policy-vs-reference log-ratio difference
};

namespace detail {

// Builds the policy-side graph for a preference pair and returns the node
// holding a = beta * [(logpi(yc) - logpi_ref(yc)) - (logpi(yl) - logpi_ref(yl))].
// Reference log-probs are constants. When chosen and rejected grids are
// identical, the forward subgraph is shared so the policy gradient of a is
// exactly zero.
template <typename T>
int buildDeltaNode(ad::Graph<T>& g, PolicyPairT<T>& pp, const PreferencePair& pair, double beta, bool backprop) {
  SeqLogProb refC = sequenceLogProb(pp.reference, pair.input, pair.chosen);
  SeqLogProb refL = sequenceLogProb(pp.reference, pair.input, pair.rejected);
  int lpC = seqLogProbOp(g, pp.policy, pair.input, pair.chosen, backprop);
  int lpL = (pair.chosen == pair.rejected) ? lpC
                                           : seqLogProbOp(g, pp.policy, pair.input, pair.rejected, backprop);
  int diff = g.add(lpC, g.scale(lpL, T(-1)));
  ad::Mat<T> shift(1, 1);
  shift(0, 0) = static_cast<T>(-(refC.total - refL.total));
  return g.scale(g.addConst(diff, shift), static_cast<T>(beta));
}

}  // namespace detail

// Canonical DPO loss -log sigmoid(delta); gradients flow into the policy only.
template <typename T>
PrefLossResult dpoLoss(PolicyPairT<T>& pp, const PreferencePair& pair, double beta, bool backprop = true,
                       double gradScale = 1.0) {
  if (beta <= 0) throw DomainError("dpoLoss: beta must be > 0");
  ad::Graph<T> g;
  int a = detail::buildDeltaNode(g, pp, pair, beta, backprop);
  double av = static_cast<double>(g.val(a)(0, 0));
  ad::Mat<T> v(1, 1);
  v(0, 0) = static_cast<T>(-logSigmoid(av));
  int loss = g.addNode(std::move(v), [a, av](ad::Graph<T>& g, int self) {
    g.grad(a)(0, 0) += g.nodes[self].grad(0, 0) * static_cast<T>(sigmoid(av) - 1.0);
  });
  if (backprop) {
    if (gradScale != 1.0) loss = g.scale(loss, static_cast<T>(gradScale));
    g.backward(loss);
  }
  return {static_cast<double>(-logSigmoid(av)), av};
}

// Bernoulli-KL distance between the policy ratio difference a and the
// scaled reward gap b = eta * gap: D[a||b] = sigma(b) log(sigma(b)/sigma(a))
// + (1-sigma(b)) log((1-sigma(b))/(1-sigma(a))).
inline double bernoulliKl(double a, double b) {
  // log sigma and log(1-sigma) in stable form.
  double lsA = logSigmoid(a), lsB = logSigmoid(b);
  double l1A = logSigmoid(-a), l1B = logSigmoid(-b);
  return sigmoid(b) * (lsB - lsA) + (1.0 - sigmoid(b)) * (l1B - l1A);
}

template <typename T>
PrefLossResult rpoLoss(PolicyPairT<T>& pp, const PreferencePair& pair, double beta, double eta,
                       bool backprop = true, double gradScale = 1.0) {
  if (beta <= 0 || eta <= 0) throw DomainError("rpoLoss: beta and eta must be > 0");
  if (!pair.rewardGap) throw DomainError("rpoLoss: pair has no rewardGap");
  const double b = eta * *pair.rewardGap;
  ad::Graph<T> g;
  int a = detail::buildDeltaNode(g, pp, pair, beta, backprop);
  double av = static_cast<double>(g.val(a)(0, 0));
  double lossVal = bernoulliKl(av, b);
  ad::Mat<T> v(1, 1);
  v(0, 0) = static_cast<T>(lossVal);
  int loss = g.addNode(std::move(v), [a, av, b](ad::Graph<T>& g, int self) {
    // dD/da = sigma(a) - sigma(b)
    g.grad(a)(0, 0) += g.nodes[self].grad(0, 0) * static_cast<T>(sigmoid(av) - sigmoid(b));
  });
  if (backprop) {
    if (gradScale != 1.0) loss = g.scale(loss, static_cast<T>(gradScale));
    g.backward(loss);
  }
  return {lossVal, av};
}

struct AlignLogRow {
  int64_t iter = 0;
  double trainLoss = 0.0;
  double valLoss = 0.0;
  double meanDelta = 0.0;
};

struct AlignResult {
  ModelParams params;  // checkpoint with the lowest validation loss
  std::vector<AlignLogRow> log;
  double bestValLoss = 0.0;
};

// Adam fine-tuning of the policy against the frozen reference; returns the
// snapshot with the lowest held-out preference loss.
inline AlignResult alignFinetune(PolicyPair& pp, const std::vector<PreferencePair>& dataset,
                                 const AlignConfig& cfg) {
  cfg.validate();
  if (dataset.empty()) throw DomainError("alignFinetune: empty dataset");
  if (cfg.method == PrefMode::rpo)
    for (const auto& p : dataset)
      if (!p.rewardGap) throw DomainError("alignFinetune: rpo requires reward gaps on every pair");

  // Deterministic train/validation split.
  std::vector<int> order(dataset.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  Rng splitRng(mixSeed(cfg.rngSeed, 0x5b117ULL));
  splitRng.shuffle(order.begin(), order.end());
  size_t valCount = std::min(dataset.size() - 1, std::max<size_t>(1, static_cast<size_t>(dataset.size() * cfg.valFraction)));
  if (dataset.size() == 1) valCount = 1;  // degenerate: validate on the single pair
  std::vector<int> valIdx(order.begin(), order.begin() + valCount);
  std::vector<int> trainIdx(order.begin() + (dataset.size() == 1 ? 0 : valCount), order.end());

  auto pairLoss = [&](const PreferencePair& p, bool backprop, double gradScale) {
    return cfg.method == PrefMode::dpo ? dpoLoss(pp, p, cfg.beta, backprop, gradScale)
                                       : rpoLoss(pp, p, cfg.beta, cfg.eta, backprop, gradScale);
  };
  auto valLoss = [&]() {
    double s = 0;
    for (int i : valIdx) s += pairLoss(dataset[i], false, 1.0).loss;
    return s / valIdx.size();
  };

  AlignResult res;
  res.params = pp.policy;
  res.bestValLoss = valLoss();
  Adam<float> opt(cfg.learningRate);
  Rng batchRng(mixSeed(cfg.rngSeed, 0xba7cULL));
  for (int64_t iter = 0; iter < cfg.maxIters; ++iter) {
    pp.policy.zeroGrad();
    double trainLoss = 0, meanDelta = 0;
    for (int b = 0; b < cfg.batchPairs; ++b) {
      const auto& pair = dataset[trainIdx[batchRng.uniformInt(trainIdx.size())]];
      auto r = pairLoss(pair, true, 1.0 / cfg.batchPairs);
      trainLoss += r.loss / cfg.batchPairs;
      meanDelta += std::abs(r.delta) / cfg.batchPairs;
    }
    if (meanDelta > cfg.divergenceBound)
      throw DivergenceError("alignFinetune diverged: mean |delta| = " + std::to_string(meanDelta) + " at iter " +
                            std::to_string(iter));
    opt.step(pp.policy);
    bool evalNow = (iter + 1) % cfg.evalEvery == 0 || iter + 1 == cfg.maxIters;
    double vl = evalNow ? valLoss() : std::numeric_limits<double>::quiet_NaN();
    if (evalNow && vl < res.bestValLoss) {
      res.bestValLoss = vl;
      res.params = pp.policy;
    }
    res.log.push_back({iter, trainLoss, vl, meanDelta});
  }
  return res;
}

}  // namespace tgen
