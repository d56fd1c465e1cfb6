#pragma once

#include "tgen/corpus.hpp"
#include "tgen/objectives.hpp"
#include "tgen/optim.hpp"

namespace tgen {

struct TrainLogRow {
  int64_t iter = 0;
  double tokenLoss = 0.0;
  double alignLoss = 0.0;
  double total = 0.0;
};

struct TrainResult {
  ModelParams params;
  std::vector<TrainLogRow> log;  // one row per logEvery iterations (averaged)
};

// Base-model training: each batch item pairs a corpus utterance with a fresh
// context utterance from the same speaker, applies joint conditioning
// dropout, and accumulates the token + alignment loss.
inline TrainResult trainBaseModel(const World& world, const std::vector<Utterance>& data, const RunConfig& rc,
                                  std::function<void(const TrainLogRow&)> onLog = nullptr) {
  rc.model.validate();
  rc.loss.validate();
  if (data.empty()) throw DomainError("trainBaseModel: empty dataset");

  TrainResult res;
  res.params = initModelParams<float>(rc.model, mixSeed(rc.rootSeed, 0x1417ULL));
  Adam<float> opt(rc.train.learningRate);
  Rng rng(mixSeed(rc.rootSeed, 0x7124ULL));

  double accTok = 0, accAlign = 0, accTotal = 0;
  int64_t accCount = 0;
  for (int64_t iter = 0; iter < rc.train.iters; ++iter) {
    res.params.zeroGrad();
    double tok = 0, align = 0, total = 0;
    for (int b = 0; b < rc.train.batchSize; ++b) {
      const Utterance& u = data[rng.uniformInt(data.size())];
      std::vector<int> ctxText = detail::randomContextText(world.spec(), rc.data.contextTextLen, rng);
      TokenGrid ctx = world.synthesize(ctxText, u.speakerId, mixSeed(rc.rootSeed, 0x17c7ULL, rng.uniformInt(1ULL << 62)));
      CondInput cond = makeCondInput(rc.model, world, u.text, ctx);
      cond = applyConditioningDropout(cond, rc.model.condDropoutProb,
                                      mixSeed(rc.rootSeed, 0xd209ULL, static_cast<uint64_t>(iter) * rc.train.batchSize + b));
      auto r = totalLoss(res.params, cond, u.tokens, iter, rc.loss, true, 1.0 / rc.train.batchSize);
      tok += r.token / rc.train.batchSize;
      align += r.align / rc.train.batchSize;
      total += r.total / rc.train.batchSize;
    }
    opt.step(res.params);
    accTok += tok;
    accAlign += align;
    accTotal += total;
    ++accCount;
    if ((iter + 1) % rc.train.logEvery == 0 || iter + 1 == rc.train.iters) {
      TrainLogRow row{iter + 1, accTok / accCount, accAlign / accCount, accTotal / accCount};
      res.log.push_back(row);
      if (onLog) onLog(row);
      accTok = accAlign = accTotal = 0;
      accCount = 0;
    }
  }
  return res;
}

inline std::string trainLogCsv(const std::vector<TrainLogRow>& rows) {
  std::string out = "iter,token_loss,align_loss,total\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%lld,%.9g,%.9g,%.9g\n", static_cast<long long>(r.iter), r.tokenLoss,
                  r.alignLoss, r.total);
    out += buf;
  }
  return out;
}

}  // namespace tgen
