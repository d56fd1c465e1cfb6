#pragma once

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "tgen/aligners.hpp"
#include "tgen/decoding.hpp"
#include "tgen/objectives.hpp"
#include "tgen/prefs.hpp"
#include "tgen/world.hpp"

namespace tgen {

// Everything a run needs, loadable from a flat key=value file. Keys use
// dotted prefixes (model.hiddenDim=64); unknown keys are rejected so typos
// fail loudly instead of silently using a default.
struct RunConfig {
  int configVersion = 1;
  uint64_t rootSeed = 1;
  std::string outDir = "out";

  WorldSpec world;
  ModelConfig model;
  LossConfig loss;

  struct Data {
    int seenSpeakers = 8;       // speakers [0, seen) train; [seen, total) held out
    int trainTexts = 200;       // regular texts in the base-training corpus
    int regularPromptTexts = 500;
    int challengingPromptTexts = 80;
    int contextsPerChallenging = 10;
    int evalItems = 40;
    int contextTextLen = 8;     // symbols per context utterance
  } data;

  struct Train {
    int64_t iters = 2000;
    int batchSize = 8;
    double learningRate = 1e-3;
    int64_t logEvery = 50;
  } train;

  SamplerConfig sampler;        // inference / eval sampling
  CfgConfig cfg;

  struct Prefs {
    PrefMode mode = PrefMode::dpo;
    int samplesPerPrompt = 6;
    double temperature = 0.7;   // sampling temperature for candidate generation
    bool gtAsChosen = false;
  } prefs;

  AlignConfig align;

  struct Eval {
    int runCount = 5;
    std::string split = "unseen";  // "seen" or "unseen" speakers
  } eval;

  void validate() const {
    world.validate();
    model.validate();
    loss.validate();
    sampler.validate();
    cfg.validate();
    align.validate();
    if (data.seenSpeakers < 1 || data.seenSpeakers > world.numSpeakers)
      throw ConfigError("data.seenSpeakers must be in [1, world.numSpeakers]");
    if (eval.split == "unseen" && data.seenSpeakers == world.numSpeakers)
      throw ConfigError("eval.split=unseen requires data.seenSpeakers < world.numSpeakers");
    if (data.trainTexts < 2 || data.evalItems < 1) throw ConfigError("data sizes must be positive");
    if (data.contextTextLen < 1) throw ConfigError("data.contextTextLen must be positive");
    if (train.iters < 0 || train.batchSize < 1 || train.learningRate <= 0)
      throw ConfigError("train settings out of range");
    if (prefs.samplesPerPrompt < 2) throw ConfigError("prefs.samplesPerPrompt must be >= 2");
    if (prefs.temperature <= 0) throw ConfigError("prefs.temperature must be positive");
    if (eval.runCount < 1) throw ConfigError("eval.runCount must be >= 1");
    if (eval.split != "seen" && eval.split != "unseen")
      throw ConfigError("eval.split must be 'seen' or 'unseen'");
    if (model.vocabText != world.alphabetSize)
      throw ConfigError("model.vocabText must equal world.alphabetSize");
    if (model.V != world.codebookSize || model.N != world.numCodebooks)
      throw ConfigError("model codebook shape must match world codec");
  }
};

namespace detail {

struct ConfigSchema {
  struct Field {
    std::string key;
    std::function<std::string()> get;
    std::function<void(const std::string&)> set;
  };
  std::vector<Field> fields;
  std::map<std::string, int> byKey;

  static std::string fmtDouble(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
  }

  void addField(const std::string& key, std::function<std::string()> get,
                std::function<void(const std::string&)> set) {
    byKey[key] = static_cast<int>(fields.size());
    fields.push_back({key, std::move(get), std::move(set)});
  }

  void bind(const std::string& key, int* p) {
    addField(
        key, [p] { return std::to_string(*p); },
        [p, key](const std::string& s) {
          auto r = std::from_chars(s.data(), s.data() + s.size(), *p);
          if (r.ec != std::errc{} || r.ptr != s.data() + s.size())
            throw ConfigError("bad integer for " + key + ": " + s);
        });
  }
  void bind(const std::string& key, int64_t* p) {
    addField(
        key, [p] { return std::to_string(*p); },
        [p, key](const std::string& s) {
          auto r = std::from_chars(s.data(), s.data() + s.size(), *p);
          if (r.ec != std::errc{} || r.ptr != s.data() + s.size())
            throw ConfigError("bad integer for " + key + ": " + s);
        });
  }
  void bind(const std::string& key, uint64_t* p) {
    addField(
        key, [p] { return std::to_string(*p); },
        [p, key](const std::string& s) {
          auto r = std::from_chars(s.data(), s.data() + s.size(), *p);
          if (r.ec != std::errc{} || r.ptr != s.data() + s.size())
            throw ConfigError("bad integer for " + key + ": " + s);
        });
  }
  void bind(const std::string& key, double* p) {
    addField(
        key, [p] { return fmtDouble(*p); },
        [p, key](const std::string& s) {
          try {
            size_t pos = 0;
            *p = std::stod(s, &pos);
            if (pos != s.size()) throw std::invalid_argument(s);
          } catch (const std::exception&) {
            throw ConfigError("bad number for " + key + ": " + s);
          }
        });
  }
  void bind(const std::string& key, bool* p) {
    addField(
        key, [p] { return *p ? std::string("true") : std::string("false"); },
        [p, key](const std::string& s) {
          if (s == "true" || s == "1") *p = true;
          else if (s == "false" || s == "0") *p = false;
          else throw ConfigError("bad bool for " + key + ": " + s);
        });
  }
  void bind(const std::string& key, std::string* p) {
    addField(key, [p] { return *p; }, [p](const std::string& s) { *p = s; });
  }
  // Comma-separated integer list; empty value means empty list.
  void bind(const std::string& key, std::vector<int>* p) {
    addField(
        key,
        [p] {
          std::string out;
          for (size_t i = 0; i < p->size(); ++i) {
            if (i) out += ',';
            out += std::to_string((*p)[i]);
          }
          return out;
        },
        [p, key](const std::string& s) {
          p->clear();
          if (s.empty()) return;
          std::stringstream ss(s);
          std::string tok;
          while (std::getline(ss, tok, ',')) {
            int v = 0;
            auto r = std::from_chars(tok.data(), tok.data() + tok.size(), v);
            if (r.ec != std::errc{} || r.ptr != tok.data() + tok.size())
              throw ConfigError("bad integer list for " + key + ": " + s);
            p->push_back(v);
          }
        });
  }
};

inline ConfigSchema makeSchema(RunConfig& c) {
  ConfigSchema s;
  s.bind("config.version", &c.configVersion);
  s.bind("rootSeed", &c.rootSeed);
  s.bind("outDir", &c.outDir);

  s.bind("world.alphabetSize", &c.world.alphabetSize);
  s.bind("world.numSpeakers", &c.world.numSpeakers);
  s.bind("world.framesPerSymbol", &c.world.framesPerSymbol);
  s.bind("world.numCodebooks", &c.world.numCodebooks);
  s.bind("world.codebookSize", &c.world.codebookSize);
  s.bind("world.noiseRate", &c.world.noiseRate);
  s.bind("world.seed", &c.world.seed);

  s.addField(
      "model.conditioningMode", [&c] { return condModeName(c.model.conditioningMode); },
      [&c](const std::string& v) { c.model.conditioningMode = condModeFromName(v); });
  s.bind("model.encoderLayers", &c.model.encoderLayers);
  s.bind("model.decoderLayers", &c.model.decoderLayers);
  s.bind("model.contextEncoderLayers", &c.model.contextEncoderLayers);
  s.bind("model.hiddenDim", &c.model.hiddenDim);
  s.bind("model.ffnDim", &c.model.ffnDim);
  s.bind("model.heads", &c.model.heads);
  s.bind("model.vocabText", &c.model.vocabText);
  s.bind("model.V", &c.model.V);
  s.bind("model.N", &c.model.N);
  s.bind("model.maxFrames", &c.model.maxFrames);
  s.bind("model.condDropoutProb", &c.model.condDropoutProb);
  s.bind("model.contextFrames", &c.model.contextFrames);
  s.bind("model.svDim", &c.model.svDim);
  s.bind("model.textCrossAttnLayers", &c.model.textCrossAttnLayers);
  s.bind("model.contextCrossAttnLayers", &c.model.contextCrossAttnLayers);

  s.bind("loss.alignCoeff", &c.loss.alignCoeff);
  s.bind("loss.priorOnUntil", &c.loss.priorOnUntil);
  s.bind("loss.priorAnnealUntil", &c.loss.priorAnnealUntil);
  s.bind("loss.priorScale", &c.loss.priorScale);

  s.bind("data.seenSpeakers", &c.data.seenSpeakers);
  s.bind("data.trainTexts", &c.data.trainTexts);
  s.bind("data.regularPromptTexts", &c.data.regularPromptTexts);
  s.bind("data.challengingPromptTexts", &c.data.challengingPromptTexts);
  s.bind("data.contextsPerChallenging", &c.data.contextsPerChallenging);
  s.bind("data.evalItems", &c.data.evalItems);
  s.bind("data.contextTextLen", &c.data.contextTextLen);

  s.bind("train.iters", &c.train.iters);
  s.bind("train.batchSize", &c.train.batchSize);
  s.bind("train.learningRate", &c.train.learningRate);
  s.bind("train.logEvery", &c.train.logEvery);

  s.bind("sampler.topK", &c.sampler.topK);
  s.bind("sampler.temperature", &c.sampler.temperature);
  s.bind("sampler.maxFrames", &c.sampler.maxFrames);

  s.bind("cfg.enabled", &c.cfg.enabled);
  s.bind("cfg.gamma", &c.cfg.gamma);

  s.addField(
      "prefs.mode", [&c] { return prefModeName(c.prefs.mode); },
      [&c](const std::string& v) { c.prefs.mode = prefModeFromName(v); });
  s.bind("prefs.samplesPerPrompt", &c.prefs.samplesPerPrompt);
  s.bind("prefs.temperature", &c.prefs.temperature);
  s.bind("prefs.gtAsChosen", &c.prefs.gtAsChosen);

  s.addField(
      "align.method", [&c] { return prefModeName(c.align.method); },
      [&c](const std::string& v) { c.align.method = prefModeFromName(v); });
  s.bind("align.beta", &c.align.beta);
  s.bind("align.eta", &c.align.eta);
  s.bind("align.learningRate", &c.align.learningRate);
  s.bind("align.maxIters", &c.align.maxIters);
  s.bind("align.batchPairs", &c.align.batchPairs);
  s.bind("align.valFraction", &c.align.valFraction);
  s.bind("align.evalEvery", &c.align.evalEvery);
  s.bind("align.divergenceBound", &c.align.divergenceBound);

  s.bind("eval.runCount", &c.eval.runCount);
  s.bind("eval.split", &c.eval.split);
  return s;
}

inline std::string trimWs(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

inline void applyConfigLine(RunConfig& c, const std::string& rawLine) {
  std::string line = detail::trimWs(rawLine);
  if (line.empty() || line[0] == '#') return;
  size_t eq = line.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got: " + line);
  std::string key = detail::trimWs(line.substr(0, eq));
  std::string val = detail::trimWs(line.substr(eq + 1));
  auto schema = detail::makeSchema(c);
  auto it = schema.byKey.find(key);
  if (it == schema.byKey.end()) throw ConfigError("unknown config key: " + key);
  schema.fields[it->second].set(val);
}

inline RunConfig parseRunConfig(std::istream& in) {
  RunConfig c;
  std::string line;
  while (std::getline(in, line)) applyConfigLine(c, line);
  return c;
}

inline RunConfig loadRunConfig(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file: " + path);
  return parseRunConfig(f);
}

inline std::string serializeRunConfig(const RunConfig& cIn) {
  RunConfig c = cIn;  // schema binds non-const pointers
  auto schema = detail::makeSchema(c);
  std::string out;
  for (const auto& f : schema.fields) {
    out += f.key;
    out += " = ";
    out += f.get();
    out += '\n';
  }
  return out;
}

inline void saveRunConfig(const RunConfig& c, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write config file: " + path);
  f << serializeRunConfig(c);
}

}  // namespace tgen
