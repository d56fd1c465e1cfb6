#pragma once

#include "tgen/checkpoint.hpp"
#include "tgen/corpus.hpp"
#include "tgen/eval.hpp"
#include "tgen/io.hpp"
#include "tgen/train.hpp"

namespace tgen {

// File layout under RunConfig::outDir. Every command reads and writes only
// these paths, so a pipeline is reproducible from the config alone.
struct RunPaths {
  std::string dir;
  explicit RunPaths(const std::string& outDir) : dir(outDir) {}
  std::string config() const { return dir + "/config.txt"; }
  std::string world() const { return dir + "/world.jsonl"; }
  std::string baseCkpt() const { return dir + "/base.ckpt"; }
  std::string trainLog() const { return dir + "/train_log.csv"; }
  std::string prefs() const { return dir + "/prefs.jsonl"; }
  std::string alignedCkpt() const { return dir + "/aligned.ckpt"; }
  std::string alignLog() const { return dir + "/align_log.csv"; }
  std::string generations() const { return dir + "/gen.jsonl"; }
  std::string evalCsv() const { return dir + "/eval.csv"; }
  std::string sweepCsv() const { return dir + "/cfg_sweep.csv"; }
};

namespace detail {

inline void writeText(const std::string& path, const std::string& text) {
  auto f = openOut(path);
  f << text;
}

}  // namespace detail

// Synthesizes the training corpus and writes it with the config snapshot.
inline void cmdMakeWorld(const RunConfig& rc, std::ostream* log = nullptr) {
  rc.validate();
  RunPaths paths(rc.outDir);
  World world(rc.world);
  auto data = buildTrainingUtterances(world, rc);
  writeUtteranceDataset(rc.world, data, paths.world());
  saveRunConfig(rc, paths.config());
  if (log) *log << "wrote " << data.size() << " utterances to " << paths.world() << "\n";
}

// Trains the base model on the synthesized corpus and checkpoints it.
inline void cmdTrain(const RunConfig& rc, std::ostream* log = nullptr) {
  rc.validate();
  RunPaths paths(rc.outDir);
  World world(rc.world);
  auto ds = readUtteranceDataset(paths.world());
  auto res = trainBaseModel(world, ds.utterances, rc, [&](const TrainLogRow& r) {
    if (log) *log << "iter " << r.iter << " token " << r.tokenLoss << " align " << r.alignLoss << " total "
                  << r.total << "\n";
  });
  saveCheckpoint(res.params, paths.baseCkpt());
  detail::writeText(paths.trainLog(), trainLogCsv(res.log));
}

// Samples candidate generations per prompt, scores them against the toy
// oracles, and writes the selected preference pairs.
inline void cmdGenPrefs(const RunConfig& rc, std::ostream* log = nullptr) {
  rc.validate();
  RunPaths paths(rc.outDir);
  World world(rc.world);
  ModelParams params = loadCheckpoint(paths.baseCkpt());
  auto prompts = buildPreferencePrompts(world, rc);
  PrefBuildConfig pc;
  pc.mode = rc.prefs.mode;
  pc.samplesPerPrompt = rc.prefs.samplesPerPrompt;
  pc.gtAsChosen = rc.prefs.gtAsChosen;
  pc.sampler = rc.sampler;
  pc.sampler.temperature = rc.prefs.temperature;
  pc.rootSeed = mixSeed(rc.rootSeed, 0x42e5ULL);
  auto pairs = buildPreferenceDataset(params, world, prompts, pc);
  writePreferenceDataset(pairs, pc.mode, rc.world.numCodebooks, paths.prefs());
  if (log) *log << "wrote " << pairs.size() << " pairs from " << prompts.size() << " prompts\n";
}

// Preference fine-tuning against the frozen base model.
inline void cmdAlign(const RunConfig& rc, std::ostream* log = nullptr) {
  rc.validate();
  RunPaths paths(rc.outDir);
  auto prefData = readPreferenceDataset(paths.prefs());
  if (rc.align.method == PrefMode::rpo && prefData.mode != PrefMode::rpo)
    throw ConfigError("align.method=rpo needs a preference dataset built with prefs.mode=rpo");
  PolicyPair pp;
  pp.reference = loadCheckpoint(paths.baseCkpt());
  pp.policy = pp.reference;
  AlignConfig ac = rc.align;
  ac.rngSeed = mixSeed(rc.rootSeed, 0xa114ULL);
  AlignResult res = alignFinetune(pp, prefData.pairs, ac);
  res.params.version = pp.reference.version + 1;
  saveCheckpoint(res.params, paths.alignedCkpt());
  std::string csv = "iter,train_loss,val_loss,mean_delta\n";
  char buf[160];
  for (const auto& r : res.log) {
    std::snprintf(buf, sizeof(buf), "%lld,%.9g,%.9g,%.9g\n", static_cast<long long>(r.iter), r.trainLoss,
                  r.valLoss, r.meanDelta);
    csv += buf;
  }
  detail::writeText(paths.alignLog(), csv);
  if (log) *log << "best validation loss " << res.bestValLoss << "\n";
}

// Decodes one generation per evaluation prompt and writes the token grids.
inline void cmdInfer(const RunConfig& rc, const std::string& ckptPath, std::ostream* log = nullptr) {
  rc.validate();
  RunPaths paths(rc.outDir);
  World world(rc.world);
  ModelParams params = loadCheckpoint(ckptPath);
  auto prompts = buildEvalPrompts(world, rc, rc.eval.split);
  std::vector<InferRecord> recs;
  for (size_t i = 0; i < prompts.size(); ++i) {
    SamplerConfig sc = rc.sampler;
    sc.rngSeed = mixSeed(rc.rootSeed, 0x19fe2ULL, i);
    GenerateResult g = generate(params, prompts[i].input, sc, rc.cfg);
    recs.push_back({prompts[i].input.textTokens, prompts[i].speakerId, std::move(g.grid), g.truncated});
  }
  writeInferRecords(recs, rc.world.numCodebooks, paths.generations());
  if (log) *log << "wrote " << recs.size() << " generations\n";
}

// Repeated-run evaluation of a checkpoint on the configured speaker split.
inline EvalReport cmdEval(const RunConfig& rc, const std::string& ckptPath, std::ostream* log = nullptr) {
  rc.validate();
  RunPaths paths(rc.outDir);
  World world(rc.world);
  ModelParams params = loadCheckpoint(ckptPath);
  auto prompts = buildEvalPrompts(world, rc, rc.eval.split);
  EvalReport rep = evaluateModel(params, world, prompts, rc.sampler, rc.cfg, rc.eval.runCount,
                                 mixSeed(rc.rootSeed, 0xe0a1ULL));
  detail::writeText(paths.evalCsv(), evalReportsCsv({rep}));
  if (log)
    *log << "cer " << rep.cer.mean << " wer " << rep.wer.mean << " ssim " << rep.ssim.mean << "\n";
  return rep;
}

// Guidance-strength sweep on the configured split.
inline std::vector<EvalReport> cmdCfgSweep(const RunConfig& rc, const std::string& ckptPath,
                                           std::vector<double> gammas = {}, std::ostream* log = nullptr) {
  rc.validate();
  if (gammas.empty())
    for (int i = 0; i <= 10; ++i) gammas.push_back(1.0 + 0.2 * i);
  RunPaths paths(rc.outDir);
  World world(rc.world);
  ModelParams params = loadCheckpoint(ckptPath);
  auto prompts = buildEvalPrompts(world, rc, rc.eval.split);
  auto reports = cfgSweep(params, world, prompts, rc.sampler, gammas, rc.eval.runCount,
                          mixSeed(rc.rootSeed, 0xe0a1ULL));
  detail::writeText(paths.sweepCsv(), evalReportsCsv(reports));
  if (log)
    for (const auto& r : reports) *log << "gamma " << r.gamma << " cer " << r.cer.mean << " ssim " << r.ssim.mean << "\n";
  return reports;
}

}  // namespace tgen
