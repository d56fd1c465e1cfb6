#pragma once

#include <string>

#include "tgen/decoding.hpp"
#include "tgen/metrics.hpp"
#include "tgen/world.hpp"

namespace tgen {

struct ScoredSample {
  TokenGrid grid;
  double cer = 0.0;
  double ssim = 0.0;
  int sampleIdx = 0;
};

enum class PairSource { generated, gtAsChosen };
enum class PrefMode { dpo, rpo };

inline std::string prefModeName(PrefMode m) { return m == PrefMode::dpo ? "dpo" : "rpo"; }

inline PrefMode prefModeFromName(const std::string& s) {
  if (s == "dpo") return PrefMode::dpo;
  if (s == "rpo") return PrefMode::rpo;
  throw ConfigError("unknown preference mode: " + s);
}

struct PreferencePair {
  CondInput input;
  TokenGrid chosen;
  TokenGrid rejected;
  std::optional<double> rewardGap;  // RPO only
  PairSource source = PairSource::generated;
  double cerChosen = 0, cerRejected = 0, ssimChosen = 0, ssimRejected = 0;
};

// A prompt carries everything the reward oracles need: the conditioning
// input, the raw context grid (SSIM reference), and the speaker id.
struct Prompt {
  CondInput input;
  TokenGrid contextGrid;
  int speakerId = 0;
};

// cer = editDistance(asr(grid), text) / len(text); ssim = cosine of the
// mock SV embeddings of context and generation.
inline std::vector<ScoredSample> scoreSamples(const World& world, const Prompt& prompt,
                                              const std::vector<TokenGrid>& grids) {
  if (prompt.input.textTokens.empty()) throw DomainError("scoreSamples: empty prompt text");
  auto ctxEmb = world.mockSvEmbed(prompt.contextGrid);
  std::vector<ScoredSample> out;
  out.reserve(grids.size());
  for (size_t i = 0; i < grids.size(); ++i) {
    ScoredSample s;
    s.grid = grids[i];
    s.sampleIdx = static_cast<int>(i);
    auto decoded = world.mockAsrDecode(grids[i]);
    s.cer = static_cast<double>(editDistance(decoded, prompt.input.textTokens)) /
            static_cast<double>(prompt.input.textTokens.size());
    s.ssim = grids[i].empty() ? -1.0 : cosineSimilarity(ctxEmb, world.mockSvEmbed(grids[i]));
    out.push_back(std::move(s));
  }
  return out;
}

struct RankedSample {
  int rank = 0;
  double cer = 0.0;
  double ssim = 0.0;
  int sampleIdx = 0;
};

// b dominates a when b is no worse on both metrics and strictly better on
// at least one. Strict domination keeps extraction terminating on
// duplicated metric tuples.
inline bool dominates(double cerB, double ssimB, double cerA, double ssimA) {
  return cerB <= cerA && ssimB >= ssimA && (cerB < cerA || ssimB > ssimA);
}

// Recursive non-dominated-front extraction; within a front, ascending CER
// then descending SSIM. Rank 1 is best.
inline std::vector<RankedSample> paretoRank(const std::vector<ScoredSample>& samples) {
  if (samples.empty()) throw DomainError("paretoRank: empty sample list");
  std::vector<int> remaining(samples.size());
  for (size_t i = 0; i < samples.size(); ++i) remaining[i] = static_cast<int>(i);
  std::vector<RankedSample> ranked;
  int rank = 1;
  while (!remaining.empty()) {
    std::vector<int> front, rest;
    for (int i : remaining) {
      bool dominated = false;
      for (int j : remaining)
        if (j != i && dominates(samples[j].cer, samples[j].ssim, samples[i].cer, samples[i].ssim)) {
          dominated = true;
          break;
        }
      (dominated ? rest : front).push_back(i);
    }
    std::sort(front.begin(), front.end(), [&](int a, int b) {
      if (samples[a].cer != samples[b].cer) return samples[a].cer < samples[b].cer;
      if (samples[a].ssim != samples[b].ssim) return samples[a].ssim > samples[b].ssim;
      return samples[a].sampleIdx < samples[b].sampleIdx;
    });
    for (int i : front) ranked.push_back({rank, samples[i].cer, samples[i].ssim, samples[i].sampleIdx});
    remaining = std::move(rest);
    ++rank;
  }
  return ranked;
}

// DPO: best vs worst (at most one pair). RPO: top two crossed with bottom
// two (up to four pairs). Pairs where the chosen scores worse on either
// metric, or identical on both, are discarded.
inline std::vector<std::pair<int, int>> selectPairs(const std::vector<RankedSample>& ranked, PrefMode mode) {
  if (ranked.size() < 2) return {};
  auto keep = [&](const RankedSample& c, const RankedSample& r) {
    if (c.cer > r.cer || c.ssim < r.ssim) return false;
    if (c.cer == r.cer && c.ssim == r.ssim) return false;
    return true;
  };
  std::vector<std::pair<int, int>> out;
  if (mode == PrefMode::dpo) {
    const auto& best = ranked.front();
    const auto& worst = ranked.back();
    if (keep(best, worst)) out.emplace_back(best.sampleIdx, worst.sampleIdx);
    return out;
  }
  size_t n = ranked.size();
  for (size_t ci = 0; ci < 2; ++ci)
    for (size_t ri = n - 2; ri < n; ++ri) {
      if (ri <= ci) continue;
      const auto& c = ranked[ci];
      const auto& r = ranked[ri];
      if (keep(c, r)) out.emplace_back(c.sampleIdx, r.sampleIdx);
    }
  return out;
}

// Scalar reward gaps: z-score each oriented delta column across the batch
// (zero std maps to all-zero z-scores), apply the standard normal CDF,
// sum. Deltas are oriented so larger means the chosen sample is better.
inline std::vector<double> rewardGap(const std::vector<std::pair<double, double>>& deltas) {
  if (deltas.empty()) throw DomainError("rewardGap: empty batch");
  const size_t n = deltas.size();
  double meanC = 0, meanS = 0;
  for (auto& [dc, ds] : deltas) {
    meanC += dc;
    meanS += ds;
  }
  meanC /= n;
  meanS /= n;
  double varC = 0, varS = 0;
  for (auto& [dc, ds] : deltas) {
    varC += (dc - meanC) * (dc - meanC);
    varS += (ds - meanS) * (ds - meanS);
  }
  double stdC = std::sqrt(varC / n), stdS = std::sqrt(varS / n);
  // Treat numerically-zero spread as zero, or rounding error in the mean
  // turns identical deltas into huge z-scores.
  double epsC = 1e-12 * std::max(1.0, std::abs(meanC)), epsS = 1e-12 * std::max(1.0, std::abs(meanS));
  std::vector<double> gaps;
  gaps.reserve(n);
  for (auto& [dc, ds] : deltas) {
    double zc = stdC > epsC ? (dc - meanC) / stdC : 0.0;
    double zs = stdS > epsS ? (ds - meanS) / stdS : 0.0;
    gaps.push_back(stdNormalCdf(zc) + stdNormalCdf(zs));
  }
  return gaps;
}

struct PrefBuildConfig {
  PrefMode mode = PrefMode::dpo;
  int samplesPerPrompt = 6;  // P
  bool gtAsChosen = false;
  SamplerConfig sampler{80, 0.7, 64, -1, 0};  // preference-data temperature
  uint64_t rootSeed = 0;

  void validate() const {
    if (samplesPerPrompt < (gtAsChosen ? 1 : 2)) throw DomainError("samplesPerPrompt too small");
  }
};

// Per prompt: sample P generations, score, Pareto-rank, select pairs; with
// gtAsChosen the world's ground-truth grid replaces the chosen side and the
// worst-ranked generation is rejected. RPO reward gaps are normalized over
// the whole dataset batch in a final pass.
inline std::vector<PreferencePair> buildPreferenceDataset(const ModelParams& params, const World& world,
                                                          const std::vector<Prompt>& prompts,
                                                          const PrefBuildConfig& cfg) {
  cfg.validate();
  std::vector<PreferencePair> pairs;
  CfgConfig noCfg;
  for (size_t pi = 0; pi < prompts.size(); ++pi) {
    const Prompt& prompt = prompts[pi];
    prompt.input.validateFor(params.config);
    std::vector<TokenGrid> grids;
    for (int s = 0; s < cfg.samplesPerPrompt; ++s) {
      SamplerConfig sc = cfg.sampler;
      sc.rngSeed = mixSeed(cfg.rootSeed, pi, static_cast<uint64_t>(s));
      grids.push_back(generate(params, prompt.input, sc, noCfg).grid);
    }
    // Empty generations cannot be scored by the SV oracle; give them the
    // worst possible metrics instead of dropping them.
    std::vector<ScoredSample> scored = scoreSamples(world, prompt, grids);
    for (auto& s : scored)
      if (s.grid.empty()) {
        s.cer = 1.0;
        s.ssim = -1.0;
      }
    auto ranked = paretoRank(scored);
    auto makePair = [&](const ScoredSample& c, const ScoredSample& r, PairSource src) {
      PreferencePair p;
      p.input = prompt.input;
      p.chosen = c.grid;
      p.rejected = r.grid;
      p.source = src;
      p.cerChosen = c.cer;
      p.cerRejected = r.cer;
      p.ssimChosen = c.ssim;
      p.ssimRejected = r.ssim;
      pairs.push_back(std::move(p));
    };
    if (cfg.gtAsChosen) {
      TokenGrid gt = world.synthesize(prompt.input.textTokens, prompt.speakerId, mixSeed(cfg.rootSeed, pi, 0x67ULL));
      auto gtScored = scoreSamples(world, prompt, {gt});
      const auto& worst = scored[ranked.back().sampleIdx];
      if (!worst.grid.empty() || !gt.empty()) makePair(gtScored[0], worst, PairSource::gtAsChosen);
    } else {
      for (auto [ci, ri] : selectPairs(ranked, cfg.mode)) makePair(scored[ci], scored[ri], PairSource::generated);
    }
  }
  if (cfg.mode == PrefMode::rpo && !pairs.empty()) {
    std::vector<std::pair<double, double>> deltas;
    deltas.reserve(pairs.size());
    for (auto& p : pairs) deltas.emplace_back(p.cerRejected - p.cerChosen, p.ssimChosen - p.ssimRejected);
    auto gaps = rewardGap(deltas);
    for (size_t i = 0; i < pairs.size(); ++i) pairs[i].rewardGap = gaps[i];
  }
  return pairs;
}

}  // namespace tgen
