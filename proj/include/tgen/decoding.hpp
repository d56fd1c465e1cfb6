#pragma once

#include <algorithm>

#include "tgen/model.hpp"

namespace tgen {

struct SamplerConfig {
  int topK = 80;
  double temperature = 0.6;  // preference-data generation uses 0.7
  int maxFrames = 64;
  int eosCode = -1;  // -1: use the model's reserved code (V)
  uint64_t rngSeed = 0;

  void validate() const {
    if (topK < 1) throw ConfigError("topK must be >= 1");
    if (temperature <= 0) throw ConfigError("temperature must be > 0");
    if (maxFrames < 1) throw ConfigError("maxFrames must be >= 1");
  }
};

struct CfgConfig {
  double gamma = 2.5;
  bool enabled = false;

  void validate() const {
    if (enabled && gamma < 1.0) throw ConfigError("CFG gamma must be >= 1");
  }
};

// gamma * cond + (1 - gamma) * uncond, element-wise. gamma = 1 returns the
// conditional logits bit-exactly.
inline std::vector<float> cfgCombine(const std::vector<float>& condLogits, const std::vector<float>& uncondLogits,
                                     double gamma) {
  if (condLogits.size() != uncondLogits.size()) throw DomainError("cfgCombine: shape mismatch");
  if (gamma == 1.0) return condLogits;
  std::vector<float> out(condLogits.size());
  const float gc = static_cast<float>(gamma), gu = static_cast<float>(1.0 - gamma);
  for (size_t i = 0; i < out.size(); ++i) out[i] = gc * condLogits[i] + gu * uncondLogits[i];
  return out;
}

// One code per codebook: divide by temperature, keep the top-k logits
// (ties at the boundary go to the lower index), softmax over the kept set,
// draw. Codes at or above `allowedVocab[n]` are excluded before top-k.
inline std::vector<int> sampleStep(const std::vector<float>& logits, int codebooks, int vocab,
                                   const SamplerConfig& cfg, Rng& rng, const std::vector<int>* allowedVocab = nullptr) {
  cfg.validate();
  if (logits.size() != static_cast<size_t>(codebooks) * vocab) throw DomainError("sampleStep: shape mismatch");
  std::vector<int> out(codebooks);
  std::vector<std::pair<float, int>> scored;
  for (int n = 0; n < codebooks; ++n) {
    int allow = allowedVocab ? (*allowedVocab)[n] : vocab;
    scored.clear();
    for (int c = 0; c < allow; ++c) {
      float v = logits[static_cast<size_t>(n) * vocab + c];
      if (!std::isfinite(v)) throw DomainError("sampleStep: non-finite logit");
      scored.emplace_back(static_cast<float>(v / cfg.temperature), c);
    }
    int k = std::min<int>(cfg.topK, static_cast<int>(scored.size()));
    std::partial_sort(scored.begin(), scored.begin() + k, scored.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    double mx = scored[0].first;
    double z = 0;
    for (int i = 0; i < k; ++i) z += std::exp(scored[i].first - mx);
    double u = rng.uniform() * z;
    double acc = 0;
    int pick = scored[k - 1].second;
    for (int i = 0; i < k; ++i) {
      acc += std::exp(scored[i].first - mx);
      if (u < acc) {
        pick = scored[i].second;
        break;
      }
    }
    out[n] = pick;
  }
  return out;
}

struct GenerateResult {
  TokenGrid grid;
  bool truncated = false;
  int forwardCalls = 0;
};

namespace detail {

// Next-frame logits (N x vout row) for the generated prefix.
inline std::vector<float> nextLogits(const ModelParams& params, const CondInput& cond, const TokenGrid& prefix) {
  ad::Graph<float> g;
  ForwardOptions opts;
  opts.wantNextRow = true;
  opts.trainable = false;
  ModelParams& p = const_cast<ModelParams&>(params);
  auto fw = buildForward(g, p, cond, prefix, opts);
  const auto& L = g.val(fw.logits);
  Eigen::Index last = L.rows() - 1;
  return std::vector<float>(L.row(last).data(), L.row(last).data() + L.cols());
}

}  // namespace detail

// Autoregressive sampling with optional classifier-free guidance. With CFG
// enabled, each frame runs two forward passes: the conditional input and the
// unconditional branch with both drop flags set. Stops at the reserved EOS
// code in codebook 0 (EOS frame excluded) or at maxFrames (truncation flag).
inline GenerateResult generate(const ModelParams& params, const CondInput& cond, const SamplerConfig& sampler,
                               const CfgConfig& cfgCfg) {
  sampler.validate();
  cfgCfg.validate();
  cond.validateFor(params.config);
  const ModelConfig& mc = params.config;
  const int eos = sampler.eosCode >= 0 ? sampler.eosCode : mc.eosCode();
  CondInput uncond = cond;
  uncond.dropText = true;
  uncond.dropContext = true;

  // EOS is reserved to codebook 0; other codebooks sample from [0, V).
  std::vector<int> allowed(mc.N, mc.V);
  allowed[0] = mc.vout();

  GenerateResult res;
  res.grid = TokenGrid(0, mc.N);
  Rng rng(sampler.rngSeed);
  for (int t = 0; t < sampler.maxFrames; ++t) {
    std::vector<float> logits = detail::nextLogits(params, cond, res.grid);
    ++res.forwardCalls;
    if (cfgCfg.enabled) {
      std::vector<float> uncondLogits = detail::nextLogits(params, uncond, res.grid);
      ++res.forwardCalls;
      logits = cfgCombine(logits, uncondLogits, cfgCfg.gamma);
    }
    std::vector<int> frame = sampleStep(logits, mc.N, mc.vout(), sampler, rng, &allowed);
    if (frame[0] == eos) return res;
    res.grid.appendFrame(frame);
  }
  res.truncated = true;
  return res;
}

}  // namespace tgen
