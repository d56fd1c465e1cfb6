#pragma once

#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "tgen/model.hpp"

namespace tgen {

constexpr int kCheckpointFormatVersion = 1;
constexpr char kCheckpointMagic[4] = {'T', 'G', 'C', 'K'};

inline nlohmann::json modelConfigToJson(const ModelConfig& c) {
  return nlohmann::json{{"conditioningMode", condModeName(c.conditioningMode)},
                        {"encoderLayers", c.encoderLayers},
                        {"decoderLayers", c.decoderLayers},
                        {"contextEncoderLayers", c.contextEncoderLayers},
                        {"hiddenDim", c.hiddenDim},
                        {"ffnDim", c.ffnDim},
                        {"heads", c.heads},
                        {"vocabText", c.vocabText},
                        {"V", c.V},
                        {"N", c.N},
                        {"maxFrames", c.maxFrames},
                        {"condDropoutProb", c.condDropoutProb},
                        {"contextFrames", c.contextFrames},
                        {"svDim", c.svDim},
                        {"textCrossAttnLayers", c.textCrossAttnLayers},
                        {"contextCrossAttnLayers", c.contextCrossAttnLayers}};
}

inline ModelConfig modelConfigFromJson(const nlohmann::json& j) {
  ModelConfig c;
  c.conditioningMode = condModeFromName(j.at("conditioningMode").get<std::string>());
  c.encoderLayers = j.at("encoderLayers");
  c.decoderLayers = j.at("decoderLayers");
  c.contextEncoderLayers = j.at("contextEncoderLayers");
  c.hiddenDim = j.at("hiddenDim");
  c.ffnDim = j.at("ffnDim");
  c.heads = j.at("heads");
  c.vocabText = j.at("vocabText");
  c.V = j.at("V");
  c.N = j.at("N");
  c.maxFrames = j.at("maxFrames");
  c.condDropoutProb = j.at("condDropoutProb");
  c.contextFrames = j.at("contextFrames");
  c.svDim = j.at("svDim");
  c.textCrossAttnLayers = j.at("textCrossAttnLayers").get<std::vector<int>>();
  c.contextCrossAttnLayers = j.at("contextCrossAttnLayers").get<std::vector<int>>();
  return c;
}

// Single file: magic, JSON manifest (config, version, array names/shapes/
// offsets, endianness tag), then a little-endian float32 blob.
inline void saveCheckpoint(const ModelParams& params, const std::string& path) {
  nlohmann::json manifest;
  manifest["format_version"] = kCheckpointFormatVersion;
  manifest["model_version"] = params.version;
  manifest["endianness"] = "little";
  manifest["config"] = modelConfigToJson(params.config);
  nlohmann::json arrays = nlohmann::json::array();
  uint64_t offset = 0;
  for (const auto& e : params.entries) {
    arrays.push_back({{"name", e.name}, {"rows", e.rows}, {"cols", e.cols}, {"offset", offset}});
    offset += static_cast<uint64_t>(e.rows) * e.cols;
  }
  manifest["arrays"] = std::move(arrays);
  std::string m = manifest.dump();

  std::ofstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("saveCheckpoint: cannot open " + path);
  f.write(kCheckpointMagic, 4);
  uint64_t mlen = m.size();
  f.write(reinterpret_cast<const char*>(&mlen), sizeof(mlen));
  f.write(m.data(), static_cast<std::streamsize>(m.size()));
  for (const auto& e : params.entries)
    f.write(reinterpret_cast<const char*>(e.w.data()), static_cast<std::streamsize>(e.w.size() * sizeof(float)));
  if (!f) throw CheckpointError("saveCheckpoint: write failed for " + path);
}

inline ModelParams loadCheckpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("loadCheckpoint: cannot open " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw CheckpointError("loadCheckpoint: bad magic in " + path);
  uint64_t mlen = 0;
  f.read(reinterpret_cast<char*>(&mlen), sizeof(mlen));
  if (!f || mlen > (1ULL << 30)) throw CheckpointError("loadCheckpoint: corrupt manifest length");
  std::string m(mlen, '\0');
  f.read(m.data(), static_cast<std::streamsize>(mlen));
  if (!f) throw CheckpointError("loadCheckpoint: truncated manifest");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(m);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("loadCheckpoint: manifest parse error: ") + e.what());
  }
  if (manifest.at("format_version").get<int>() > kCheckpointFormatVersion)
    throw CheckpointError("loadCheckpoint: unsupported format version");
  if (manifest.at("endianness").get<std::string>() != "little")
    throw CheckpointError("loadCheckpoint: unsupported endianness");

  ModelConfig cfg = modelConfigFromJson(manifest.at("config"));
  ModelParams expected = initModelParams<float>(cfg, 0);
  ModelParams params;
  params.config = cfg;
  params.version = manifest.at("model_version");
  const auto& arrays = manifest.at("arrays");
  if (arrays.size() != expected.entries.size())
    throw CheckpointError("loadCheckpoint: array count mismatch against config");
  for (size_t i = 0; i < arrays.size(); ++i) {
    const auto& a = arrays[i];
    std::string name = a.at("name");
    const auto& exp = expected.entries[i];
    if (name != exp.name || a.at("rows").get<int>() != exp.rows || a.at("cols").get<int>() != exp.cols)
      throw CheckpointError("loadCheckpoint: shape/name mismatch for array " + name);
    auto& e = params.add(name, exp.rows, exp.cols);
    f.read(reinterpret_cast<char*>(e.w.data()), static_cast<std::streamsize>(e.w.size() * sizeof(float)));
    if (!f) throw CheckpointError("loadCheckpoint: truncated blob at array " + name);
  }
  return params;
}

}  // namespace tgen
