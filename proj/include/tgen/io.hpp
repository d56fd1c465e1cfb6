#pragma once

#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "tgen/prefs.hpp"
#include "tgen/world.hpp"

namespace tgen {

namespace detail {

inline std::ifstream openIn(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open file: " + path);
  return f;
}

inline std::ofstream openOut(const std::string& path) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write file: " + path);
  return f;
}

inline nlohmann::json parseLine(const std::string& line, const std::string& path) {
  try {
    return nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad JSONL record in " + path + ": " + e.what());
  }
}

inline nlohmann::json readHeader(std::istream& in, const std::string& path, const std::string& format) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty dataset file: " + path);
  nlohmann::json h = parseLine(line, path);
  if (h.value("format", "") != format)
    throw ConfigError("unexpected dataset format in " + path + " (want " + format + ")");
  return h;
}

}  // namespace detail

inline nlohmann::json gridToJson(const TokenGrid& g) {
  nlohmann::json rows = nlohmann::json::array();
  for (int t = 0; t < g.frames; ++t) {
    nlohmann::json row = nlohmann::json::array();
    for (int n = 0; n < g.codebooks; ++n) row.push_back(g.at(t, n));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline TokenGrid gridFromJson(const nlohmann::json& rows, int codebooks) {
  TokenGrid g(0, codebooks);
  for (const auto& row : rows) {
    if (static_cast<int>(row.size()) != codebooks) throw ConfigError("token row width mismatch");
    g.appendFrame(row.get<std::vector<int>>());
  }
  return g;
}

inline nlohmann::json worldSpecToJson(const WorldSpec& s) {
  return {{"alphabetSize", s.alphabetSize}, {"numSpeakers", s.numSpeakers},
          {"framesPerSymbol", s.framesPerSymbol}, {"numCodebooks", s.numCodebooks},
          {"codebookSize", s.codebookSize}, {"noiseRate", s.noiseRate}, {"seed", s.seed}};
}

inline WorldSpec worldSpecFromJson(const nlohmann::json& j) {
  WorldSpec s;
  s.alphabetSize = j.at("alphabetSize");
  s.numSpeakers = j.at("numSpeakers");
  s.framesPerSymbol = j.at("framesPerSymbol");
  s.numCodebooks = j.at("numCodebooks");
  s.codebookSize = j.at("codebookSize");
  s.noiseRate = j.at("noiseRate");
  s.seed = j.at("seed");
  return s;
}

// Utterance dataset: header record, then one {text, speaker, tokens} per line.
inline void writeUtteranceDataset(const WorldSpec& spec, const std::vector<Utterance>& data,
                                  const std::string& path) {
  auto f = detail::openOut(path);
  f << nlohmann::json{{"format", "tgen.world"}, {"version", 1}, {"world", worldSpecToJson(spec)}}.dump() << '\n';
  for (const auto& u : data)
    f << nlohmann::json{{"text", u.text}, {"speaker", u.speakerId}, {"tokens", gridToJson(u.tokens)}}.dump() << '\n';
}

struct UtteranceDataset {
  WorldSpec spec;
  std::vector<Utterance> utterances;
};

inline UtteranceDataset readUtteranceDataset(const std::string& path) {
  auto f = detail::openIn(path);
  UtteranceDataset out;
  out.spec = worldSpecFromJson(detail::readHeader(f, path, "tgen.world").at("world"));
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    nlohmann::json j = detail::parseLine(line, path);
    Utterance u;
    u.text = j.at("text").get<std::vector<int>>();
    u.speakerId = j.at("speaker");
    u.tokens = gridFromJson(j.at("tokens"), out.spec.numCodebooks);
    out.utterances.push_back(std::move(u));
  }
  return out;
}

inline nlohmann::json condInputToJson(const CondInput& c) {
  nlohmann::json j;
  j["text"] = c.textTokens;
  j["context"] = c.contextGrid ? gridToJson(*c.contextGrid) : nlohmann::json();
  j["speaker_vector"] = c.speakerVector ? nlohmann::json(*c.speakerVector) : nlohmann::json();
  return j;
}

inline CondInput condInputFromJson(const nlohmann::json& j, int codebooks) {
  CondInput c;
  c.textTokens = j.at("text").get<std::vector<int>>();
  if (!j.at("context").is_null()) c.contextGrid = gridFromJson(j.at("context"), codebooks);
  if (!j.at("speaker_vector").is_null()) c.speakerVector = j.at("speaker_vector").get<std::vector<double>>();
  return c;
}

// Preference dataset: header record, then one pair per line with the metrics
// used during selection kept for inspection.
inline void writePreferenceDataset(const std::vector<PreferencePair>& pairs, PrefMode mode, int codebooks,
                                   const std::string& path) {
  auto f = detail::openOut(path);
  f << nlohmann::json{{"format", "tgen.prefs"}, {"version", 1}, {"mode", prefModeName(mode)},
                      {"codebooks", codebooks}}.dump() << '\n';
  for (const auto& p : pairs) {
    nlohmann::json j;
    j["prompt"] = condInputToJson(p.input);
    j["chosen"] = gridToJson(p.chosen);
    j["rejected"] = gridToJson(p.rejected);
    j["gap"] = p.rewardGap ? nlohmann::json(*p.rewardGap) : nlohmann::json();
    j["cer_c"] = p.cerChosen;
    j["cer_r"] = p.cerRejected;
    j["ssim_c"] = p.ssimChosen;
    j["ssim_r"] = p.ssimRejected;
    j["source"] = p.source == PairSource::gtAsChosen ? "gt_as_chosen" : "generated";
    f << j.dump() << '\n';
  }
}

struct PreferenceDataset {
  PrefMode mode = PrefMode::dpo;
  std::vector<PreferencePair> pairs;
};

inline PreferenceDataset readPreferenceDataset(const std::string& path) {
  auto f = detail::openIn(path);
  nlohmann::json h = detail::readHeader(f, path, "tgen.prefs");
  PreferenceDataset out;
  out.mode = prefModeFromName(h.at("mode"));
  int codebooks = h.at("codebooks");
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    nlohmann::json j = detail::parseLine(line, path);
    PreferencePair p;
    p.input = condInputFromJson(j.at("prompt"), codebooks);
    p.chosen = gridFromJson(j.at("chosen"), codebooks);
    p.rejected = gridFromJson(j.at("rejected"), codebooks);
    if (!j.at("gap").is_null()) p.rewardGap = j.at("gap").get<double>();
    p.cerChosen = j.at("cer_c");
    p.cerRejected = j.at("cer_r");
    p.ssimChosen = j.at("ssim_c");
    p.ssimRejected = j.at("ssim_r");
    p.source = j.at("source") == "gt_as_chosen" ? PairSource::gtAsChosen : PairSource::generated;
    out.pairs.push_back(std::move(p));
  }
  return out;
}

// Generation output: header record, then one {text, speaker, tokens, truncated} per line.
struct InferRecord {
  std::vector<int> text;
  int speakerId = 0;
  TokenGrid tokens;
  bool truncated = false;
};

inline void writeInferRecords(const std::vector<InferRecord>& recs, int codebooks, const std::string& path) {
  auto f = detail::openOut(path);
  f << nlohmann::json{{"format", "tgen.gen"}, {"version", 1}, {"codebooks", codebooks}}.dump() << '\n';
  for (const auto& r : recs)
    f << nlohmann::json{{"text", r.text}, {"speaker", r.speakerId}, {"tokens", gridToJson(r.tokens)},
                        {"truncated", r.truncated}}.dump() << '\n';
}

}  // namespace tgen
