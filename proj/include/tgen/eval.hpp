#pragma once

#include "tgen/decoding.hpp"
#include "tgen/metrics.hpp"
#include "tgen/prefs.hpp"

namespace tgen {

namespace detail {

// Two-sided 95% critical values of the t distribution, df 1..30; 1.96 above.
inline double tCritical95(int df) {
  static constexpr double kTable[30] = {
      12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228,
      2.201,  2.179, 2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086,
      2.080,  2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042};
  if (df < 1) throw DomainError("tCritical95: df must be >= 1");
  return df <= 30 ? kTable[df - 1] : 1.96;
}

}  // namespace detail

struct MetricStat {
  double mean = 0.0;
  std::optional<double> ci95;  // half-width; absent when runCount == 1
  std::vector<double> perRun;
};

inline MetricStat summarizeRuns(const std::vector<double>& perRun) {
  if (perRun.empty()) throw DomainError("summarizeRuns: no runs");
  MetricStat s;
  s.perRun = perRun;
  for (double v : perRun) s.mean += v;
  s.mean /= perRun.size();
  if (perRun.size() > 1) {
    double ss = 0;
    for (double v : perRun) ss += (v - s.mean) * (v - s.mean);
    double sd = std::sqrt(ss / (perRun.size() - 1));
    s.ci95 = detail::tCritical95(static_cast<int>(perRun.size()) - 1) * sd / std::sqrt(double(perRun.size()));
  }
  return s;
}

struct EvalReport {
  MetricStat cer, wer, ssim;
  double truncatedRate = 0.0;  // fraction of generations hitting maxFrames
  int runCount = 0;
  double gamma = 1.0;  // 1.0 when CFG is disabled
};

// Repeated-sampling evaluation: `runCount` independent decoding passes over
// the same prompts, each run seeded separately, then per-run means are
// summarized with a t-interval. Empty generations score cer=wer=1, ssim=-1.
inline EvalReport evaluateModel(const ModelParams& params, const World& world, const std::vector<Prompt>& prompts,
                                const SamplerConfig& sampler, const CfgConfig& cfg, int runCount,
                                uint64_t rootSeed) {
  if (prompts.empty()) throw DomainError("evaluateModel: no prompts");
  if (runCount < 1) throw DomainError("evaluateModel: runCount must be >= 1");
  std::vector<double> cerRuns, werRuns, ssimRuns;
  int64_t truncated = 0, generations = 0;
  for (int r = 0; r < runCount; ++r) {
    uint64_t runSeed = mixSeed(rootSeed, static_cast<uint64_t>(r));
    double cer = 0, wer = 0, ssim = 0;
    for (size_t i = 0; i < prompts.size(); ++i) {
      const Prompt& p = prompts[i];
      SamplerConfig sc = sampler;
      sc.rngSeed = mixSeed(runSeed, i);
      GenerateResult g = generate(params, p.input, sc, cfg);
      ++generations;
      if (g.truncated) ++truncated;
      if (g.grid.empty()) {
        cer += 1.0;
        wer += 1.0;
        ssim += -1.0;
        continue;
      }
      auto [c, w] = cerWer(world.mockAsrDecode(g.grid), p.input.textTokens);
      cer += c;
      wer += w;
      ssim += cosineSimilarity(world.mockSvEmbed(p.contextGrid), world.mockSvEmbed(g.grid));
    }
    cerRuns.push_back(cer / prompts.size());
    werRuns.push_back(wer / prompts.size());
    ssimRuns.push_back(ssim / prompts.size());
  }
  EvalReport rep;
  rep.cer = summarizeRuns(cerRuns);
  rep.wer = summarizeRuns(werRuns);
  rep.ssim = summarizeRuns(ssimRuns);
  rep.truncatedRate = static_cast<double>(truncated) / generations;
  rep.runCount = runCount;
  rep.gamma = cfg.enabled ? cfg.gamma : 1.0;
  return rep;
}

// Guidance-strength sweep; gammas typically 1.0..3.0 in 0.2 steps.
inline std::vector<EvalReport> cfgSweep(const ModelParams& params, const World& world,
                                        const std::vector<Prompt>& prompts, const SamplerConfig& sampler,
                                        const std::vector<double>& gammas, int runCount, uint64_t rootSeed) {
  std::vector<EvalReport> out;
  for (double g : gammas) {
    CfgConfig c{g, g != 1.0};
    out.push_back(evaluateModel(params, world, prompts, sampler, c, runCount, rootSeed));
  }
  return out;
}

inline std::string evalReportsCsv(const std::vector<EvalReport>& reports) {
  std::string out = "gamma,cer_mean,cer_ci,wer_mean,wer_ci,ssim_mean,ssim_ci,truncated_rate\n";
  char buf[256];
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", r.gamma, r.cer.mean,
                  r.cer.ci95.value_or(0.0), r.wer.mean, r.wer.ci95.value_or(0.0), r.ssim.mean,
                  r.ssim.ci95.value_or(0.0), r.truncatedRate);
    out += buf;
  }
  return out;
}

}  // namespace tgen
