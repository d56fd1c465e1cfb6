// Command-line front end for the toy token-generation pipeline. Every
// subcommand takes a config file plus targeted overrides, so a full run is
// reproducible from the config alone.

#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "tgen/commands.hpp"

namespace {

struct CommonArgs {
  std::string configPath;
  std::string outDir;
  std::vector<std::string> overrides;
  uint64_t seed = 0;
  bool seedSet = false;
  std::string logLevel = "info";
};

void addCommon(CLI::App* sub, CommonArgs& a) {
  const char* envConfig = std::getenv("TGEN_CONFIG");
  if (envConfig) a.configPath = envConfig;
  sub->add_option("-c,--config", a.configPath, "run config file (key=value lines)")
      ->envname("TGEN_CONFIG");
  sub->add_option("--out-dir", a.outDir, "output directory (overrides config)");
  sub->add_option("--set", a.overrides, "extra key=value config overrides")->take_all();
  sub->add_option("--seed", a.seed, "root seed (overrides config)")->trigger_on_parse();
  sub->add_option("--log-level", a.logLevel, "quiet|info")->check(CLI::IsMember({"quiet", "info"}));
}

tgen::RunConfig loadConfig(const CommonArgs& a, CLI::App* sub) {
  tgen::RunConfig rc;
  if (!a.configPath.empty()) rc = tgen::loadRunConfig(a.configPath);
  for (const auto& kv : a.overrides) tgen::applyConfigLine(rc, kv);
  if (!a.outDir.empty()) rc.outDir = a.outDir;
  if (sub->count("--seed")) rc.rootSeed = a.seed;
  return rc;
}

std::ostream* logStream(const CommonArgs& a) { return a.logLevel == "quiet" ? nullptr : &std::cerr; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"toy multi-codebook token generation pipeline"};
  app.require_subcommand(1);

  CommonArgs mkA, trA, gpA, alA, inA, evA, swA;

  auto* mk = app.add_subcommand("make-world", "synthesize the training corpus");
  addCommon(mk, mkA);

  auto* tr = app.add_subcommand("train", "train the base model");
  addCommon(tr, trA);
  int64_t trainIters = -1;
  tr->add_option("--iters", trainIters, "training iterations (overrides config)");

  auto* gp = app.add_subcommand("gen-prefs", "generate and score preference pairs");
  addCommon(gp, gpA);
  std::string prefMode;
  int samplesPerPrompt = -1;
  bool gtAsChosen = false;
  gp->add_option("--mode", prefMode, "dpo|rpo")->check(CLI::IsMember({"dpo", "rpo"}));
  gp->add_option("--samples-per-prompt", samplesPerPrompt, "candidates per prompt");
  gp->add_flag("--gt-as-chosen", gtAsChosen, "pair ground truth against the worst sample");

  auto* al = app.add_subcommand("align", "preference fine-tuning from the base checkpoint");
  addCommon(al, alA);
  std::string alignMethod, basePath, alignOut;
  double alignBeta = -1, alignEta = -1, alignLr = -1;
  int64_t alignIters = -1;
  int alignPairs = -1;
  al->add_option("--method", alignMethod, "dpo|rpo")->check(CLI::IsMember({"dpo", "rpo"}));
  al->add_option("--beta", alignBeta, "preference loss beta");
  al->add_option("--eta", alignEta, "reward-gap scale (rpo)");
  al->add_option("--lr", alignLr, "learning rate");
  al->add_option("--iters", alignIters, "fine-tuning iterations");
  al->add_option("--pairs", alignPairs, "pairs per batch");

  auto* in = app.add_subcommand("infer", "decode generations for the eval prompts");
  addCommon(in, inA);
  std::string inferCkpt;
  double gamma = -1, temperature = -1;
  int topK = -1, maxFrames = -1;
  in->add_option("--ckpt", inferCkpt, "checkpoint path (default: <out-dir>/base.ckpt)");
  in->add_option("--gamma", gamma, "guidance strength (enables CFG when != 1)");
  in->add_option("--top-k", topK, "top-k cutoff");
  in->add_option("--temperature", temperature, "sampling temperature");
  in->add_option("--max-frames", maxFrames, "generation cap");

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a speaker split");
  addCommon(ev, evA);
  std::string evalCkpt, evalSplit;
  double evalGamma = -1;
  ev->add_option("--ckpt", evalCkpt, "checkpoint path (default: <out-dir>/base.ckpt)");
  ev->add_option("--split", evalSplit, "seen|unseen")->check(CLI::IsMember({"seen", "unseen"}));
  ev->add_option("--gamma", evalGamma, "guidance strength (enables CFG when != 1)");

  auto* sw = app.add_subcommand("cfg-sweep", "evaluate across guidance strengths");
  addCommon(sw, swA);
  std::string sweepCkpt;
  sw->add_option("--ckpt", sweepCkpt, "checkpoint path (default: <out-dir>/base.ckpt)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (mk->parsed()) {
      tgen::cmdMakeWorld(loadConfig(mkA, mk), logStream(mkA));
    } else if (tr->parsed()) {
      auto rc = loadConfig(trA, tr);
      if (trainIters >= 0) rc.train.iters = trainIters;
      tgen::cmdTrain(rc, logStream(trA));
    } else if (gp->parsed()) {
      auto rc = loadConfig(gpA, gp);
      if (!prefMode.empty()) rc.prefs.mode = tgen::prefModeFromName(prefMode);
      if (samplesPerPrompt > 0) rc.prefs.samplesPerPrompt = samplesPerPrompt;
      if (gtAsChosen) rc.prefs.gtAsChosen = true;
      tgen::cmdGenPrefs(rc, logStream(gpA));
    } else if (al->parsed()) {
      auto rc = loadConfig(alA, al);
      if (!alignMethod.empty()) rc.align.method = tgen::prefModeFromName(alignMethod);
      if (alignBeta > 0) rc.align.beta = alignBeta;
      if (alignEta > 0) rc.align.eta = alignEta;
      if (alignLr > 0) rc.align.learningRate = alignLr;
      if (alignIters >= 0) rc.align.maxIters = alignIters;
      if (alignPairs > 0) rc.align.batchPairs = alignPairs;
      tgen::cmdAlign(rc, logStream(alA));
    } else if (in->parsed()) {
      auto rc = loadConfig(inA, in);
      if (gamma > 0) {
        rc.cfg.gamma = gamma;
        rc.cfg.enabled = gamma != 1.0;
      }
      if (topK > 0) rc.sampler.topK = topK;
      if (temperature > 0) rc.sampler.temperature = temperature;
      if (maxFrames > 0) rc.sampler.maxFrames = maxFrames;
      std::string ckpt = inferCkpt.empty() ? tgen::RunPaths(rc.outDir).baseCkpt() : inferCkpt;
      tgen::cmdInfer(rc, ckpt, logStream(inA));
    } else if (ev->parsed()) {
      auto rc = loadConfig(evA, ev);
      if (!evalSplit.empty()) rc.eval.split = evalSplit;
      if (evalGamma > 0) {
        rc.cfg.gamma = evalGamma;
        rc.cfg.enabled = evalGamma != 1.0;
      }
      std::string ckpt = evalCkpt.empty() ? tgen::RunPaths(rc.outDir).baseCkpt() : evalCkpt;
      tgen::cmdEval(rc, ckpt, logStream(evA));
    } else if (sw->parsed()) {
      auto rc = loadConfig(swA, sw);
      std::string ckpt = sweepCkpt.empty() ? tgen::RunPaths(rc.outDir).baseCkpt() : sweepCkpt;
      tgen::cmdCfgSweep(rc, ckpt, {}, logStream(swA));
    }
  } catch (const tgen::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
