#pragma once

#include "tgen/config.hpp"
#include "tgen/prefs.hpp"
#include "tgen/world.hpp"

namespace tgen {

// Wraps a context utterance into the conditioning shape the model expects:
// a speaker vector for svConditioned, the raw grid otherwise.
inline CondInput makeCondInput(const ModelConfig& cfg, const World& world, const std::vector<int>& text,
                               const TokenGrid& contextGrid) {
  CondInput c;
  c.textTokens = text;
  if (cfg.conditioningMode == CondMode::svConditioned)
    c.speakerVector = world.mockSvEmbed(contextGrid);
  else
    c.contextGrid = contextGrid;
  return c;
}

// Base-training corpus: regular texts cycled over the seen-speaker split.
inline std::vector<Utterance> buildTrainingUtterances(const World& world, const RunConfig& rc) {
  auto texts = generateRegularTexts(world.spec(), rc.data.trainTexts, mixSeed(rc.rootSeed, 0x7e27ULL));
  std::vector<Utterance> out;
  out.reserve(texts.size());
  for (size_t i = 0; i < texts.size(); ++i) {
    Utterance u;
    u.text = std::move(texts[i]);
    u.speakerId = static_cast<int>(i % rc.data.seenSpeakers);
    u.tokens = world.synthesize(u.text, u.speakerId, mixSeed(rc.rootSeed, 0xda7aULL, i));
    out.push_back(std::move(u));
  }
  return out;
}

namespace detail {

inline std::vector<int> randomContextText(const WorldSpec& spec, int len, Rng& rng) {
  std::vector<int> text(len);
  for (int& s : text) s = 1 + static_cast<int>(rng.uniformInt(spec.alphabetSize - 1));
  return text;
}

inline Prompt makePromptFor(const World& world, const ModelConfig& mc, const RunConfig& rc,
                            const std::vector<int>& text, int speaker, Rng& rng, uint64_t ctxSeed) {
  std::vector<int> ctxText = randomContextText(world.spec(), rc.data.contextTextLen, rng);
  Prompt p;
  p.speakerId = speaker;
  p.contextGrid = world.synthesize(ctxText, speaker, ctxSeed);
  p.input = makeCondInput(mc, world, text, p.contextGrid);
  return p;
}

}  // namespace detail

// Preference prompts: each challenging text repeated with several contexts,
// plus each regular text once. Speakers come from the seen split.
inline std::vector<Prompt> buildPreferencePrompts(const World& world, const RunConfig& rc) {
  auto challenging = generateChallengingTexts(world.spec(), rc.data.challengingPromptTexts,
                                              mixSeed(rc.rootSeed, 0xc5a1ULL));
  auto regular = generateRegularTexts(world.spec(), rc.data.regularPromptTexts, mixSeed(rc.rootSeed, 0x4e6aULL));
  Rng rng(mixSeed(rc.rootSeed, 0x9a0b7ULL));
  std::vector<Prompt> prompts;
  uint64_t ctxTag = 0;
  for (const auto& text : challenging)
    for (int k = 0; k < rc.data.contextsPerChallenging; ++k) {
      int spk = static_cast<int>(rng.uniformInt(rc.data.seenSpeakers));
      prompts.push_back(detail::makePromptFor(world, rc.model, rc, text, spk, rng,
                                              mixSeed(rc.rootSeed, 0xc73bULL, ctxTag++)));
    }
  for (const auto& text : regular) {
    int spk = static_cast<int>(rng.uniformInt(rc.data.seenSpeakers));
    prompts.push_back(detail::makePromptFor(world, rc.model, rc, text, spk, rng,
                                            mixSeed(rc.rootSeed, 0xc73bULL, ctxTag++)));
  }
  return prompts;
}

// Evaluation prompts over either speaker split; the prompt text doubles as
// the transcription reference.
inline std::vector<Prompt> buildEvalPrompts(const World& world, const RunConfig& rc, const std::string& split) {
  int lo = 0, hi = rc.data.seenSpeakers;
  if (split == "unseen") {
    lo = rc.data.seenSpeakers;
    hi = world.spec().numSpeakers;
  } else if (split != "seen") {
    throw ConfigError("split must be 'seen' or 'unseen'");
  }
  if (lo >= hi) throw ConfigError("speaker split is empty");
  auto texts = generateRegularTexts(world.spec(), rc.data.evalItems, mixSeed(rc.rootSeed, 0xe7a1ULL));
  Rng rng(mixSeed(rc.rootSeed, 0xe7a2ULL));
  std::vector<Prompt> prompts;
  for (size_t i = 0; i < texts.size(); ++i) {
    int spk = lo + static_cast<int>(rng.uniformInt(hi - lo));
    prompts.push_back(detail::makePromptFor(world, rc.model, rc, texts[i], spk, rng,
                                            mixSeed(rc.rootSeed, 0xe7a3ULL, i)));
  }
  return prompts;
}

}  // namespace tgen
