#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "tgen/common.hpp"
#include "tgen/grid.hpp"

namespace tgen {

// Symbol 0 is reserved as the word separator for WER computation; text
// generators insert it between "words".
constexpr int kSeparatorSymbol = 0;

struct WorldSpec {
  int alphabetSize = 16;
  int numSpeakers = 12;  // total; the first `seen` speakers form the training split
  int framesPerSymbol = 4;
  int numCodebooks = 4;
  int codebookSize = 64;
  double noiseRate = 0.05;
  uint64_t seed = 0;

  void validate() const {
    if (alphabetSize < 2) throw DomainError("WorldSpec: alphabetSize must be >= 2");
    if (numSpeakers < 2) throw DomainError("WorldSpec: numSpeakers must be >= 2");
    if (framesPerSymbol < 1) throw DomainError("WorldSpec: framesPerSymbol must be >= 1");
    if (numCodebooks < 1) throw DomainError("WorldSpec: numCodebooks must be >= 1");
    if (codebookSize < 4) throw DomainError("WorldSpec: codebookSize must be >= 4");
    if (noiseRate < 0.0 || noiseRate > 1.0) throw DomainError("WorldSpec: noiseRate must be in [0,1]");
  }
};

struct Utterance {
  std::vector<int> text;
  int speakerId = 0;
  TokenGrid tokens;
  enum class Role { context, target } role = Role::target;
};

// Deterministic synthetic universe standing in for audio. Each speaker is a
// family of per-codebook bijections on code values; a text symbol maps to a
// per-codebook base code which the speaker bijection transforms, repeated
// framesPerSymbol times, with optional uniform corruption noise.
class World {
 public:
  explicit World(const WorldSpec& spec) : spec_(spec) {
    spec.validate();
    const int A = spec.alphabetSize, N = spec.numCodebooks, V = spec.codebookSize;
    baseCodes.assign(static_cast<size_t>(A) * N, 0);
    Rng rng(mixSeed(spec.seed, 0xba5ec0deULL));
    for (int a = 0; a < A; ++a)
      for (int n = 0; n < N; ++n) baseCodes[static_cast<size_t>(a) * N + n] = static_cast<int>(rng.uniformInt(V));
    perms.resize(spec.numSpeakers);
    for (int s = 0; s < spec.numSpeakers; ++s) {
      perms[s].resize(N);
      for (int n = 0; n < N; ++n) {
        perms[s][n].resize(V);
        std::iota(perms[s][n].begin(), perms[s][n].end(), 0);
        Rng prng(mixSeed(spec.seed, static_cast<uint64_t>(s) + 1, static_cast<uint64_t>(n)));
        prng.shuffle(perms[s][n].begin(), perms[s][n].end());
      }
    }
    rebuildMeanHistogram();
  }

  const WorldSpec& spec() const { return spec_; }

  int baseCode(int symbol, int codebook) const {
    return baseCodes[static_cast<size_t>(symbol) * spec_.numCodebooks + codebook];
  }

  // Code a (speaker, symbol, codebook) triple emits at zero noise.
  int emittedCode(int speaker, int symbol, int codebook) const {
    return perms[speaker][codebook][baseCode(symbol, codebook)];
  }

  TokenGrid synthesize(const std::vector<int>& text, int speakerId, uint64_t rngSeed) const {
    checkSpeaker(speakerId);
    for (int sym : text)
      if (sym < 0 || sym >= spec_.alphabetSize) throw DomainError("synthesize: symbol out of range");
    const int D = spec_.framesPerSymbol, N = spec_.numCodebooks, V = spec_.codebookSize;
    TokenGrid grid(static_cast<int>(text.size()) * D, N);
    for (size_t i = 0; i < text.size(); ++i)
      for (int d = 0; d < D; ++d)
        for (int n = 0; n < N; ++n) grid.at(static_cast<int>(i) * D + d, n) = emittedCode(speakerId, text[i], n);
    if (spec_.noiseRate > 0.0) {
      Rng rng(mixSeed(spec_.seed, rngSeed, 0x701feULL));
      for (int t = 0; t < grid.frames; ++t)
        for (int n = 0; n < N; ++n)
          if (rng.uniform() < spec_.noiseRate) grid.at(t, n) = static_cast<int>(rng.uniformInt(V));
    }
    return grid;
  }

  // Windowed majority-vote inversion: for each window of framesPerSymbol
  // frames, pick the (symbol, speaker) hypothesis agreeing with the most
  // cells. Ties break to the lowest symbol, then the lowest speaker.
  // A trailing partial window is dropped.
  std::vector<int> mockAsrDecode(const TokenGrid& grid) const {
    const int D = spec_.framesPerSymbol, N = spec_.numCodebooks;
    std::vector<int> out;
    if (grid.codebooks != N) throw DomainError("mockAsrDecode: codebook count mismatch");
    const int windows = grid.frames / D;
    for (int w = 0; w < windows; ++w) {
      int bestSym = 0, bestAgree = -1;
      for (int a = 0; a < spec_.alphabetSize; ++a) {
        for (int s = 0; s < spec_.numSpeakers; ++s) {
          int agree = 0;
          for (int n = 0; n < N; ++n) {
            const int expect = emittedCode(s, a, n);
            for (int d = 0; d < D; ++d)
              if (grid.at(w * D + d, n) == expect) ++agree;
          }
          if (agree > bestAgree) {
            bestAgree = agree;
            bestSym = a;
          }
        }
      }
      out.push_back(bestSym);
    }
    return out;
  }

  // Concatenated per-codebook code histograms, centered by the world-level
  // mean histogram and L2-normalized. Dimension numCodebooks * codebookSize.
  std::vector<double> mockSvEmbed(const TokenGrid& grid) const {
    if (grid.empty()) throw DomainError("mockSvEmbed: empty grid");
    if (grid.codebooks != spec_.numCodebooks) throw DomainError("mockSvEmbed: codebook count mismatch");
    const int N = spec_.numCodebooks, V = spec_.codebookSize;
    std::vector<double> h(static_cast<size_t>(N) * V, 0.0);
    for (int t = 0; t < grid.frames; ++t)
      for (int n = 0; n < N; ++n) {
        int c = grid.at(t, n);
        if (c < 0 || c >= V) throw DomainError("mockSvEmbed: code out of range");
        h[static_cast<size_t>(n) * V + c] += 1.0 / grid.frames;
      }
    for (size_t i = 0; i < h.size(); ++i) h[i] -= meanHist[i];
    double norm = std::sqrt(std::inner_product(h.begin(), h.end(), h.begin(), 0.0));
    if (norm < 1e-12) {
      std::fill(h.begin(), h.end(), 0.0);
      h[0] = 1.0;
    } else {
      for (double& x : h) x /= norm;
    }
    return h;
  }

  int svDim() const { return spec_.numCodebooks * spec_.codebookSize; }

  // Mean over (symbol, speaker) of the zero-noise one-symbol histogram.
  void rebuildMeanHistogram() {
    const int N = spec_.numCodebooks, V = spec_.codebookSize;
    meanHist.assign(static_cast<size_t>(N) * V, 0.0);
    const double w = 1.0 / (static_cast<double>(spec_.alphabetSize) * spec_.numSpeakers);
    for (int a = 0; a < spec_.alphabetSize; ++a)
      for (int s = 0; s < spec_.numSpeakers; ++s)
        for (int n = 0; n < N; ++n) meanHist[static_cast<size_t>(n) * V + emittedCode(s, a, n)] += w;
  }

  // Exposed for tests that configure bijections by hand.
  std::vector<int> baseCodes;                       // alphabetSize x numCodebooks
  std::vector<std::vector<std::vector<int>>> perms; // speaker x codebook x code
  std::vector<double> meanHist;                     // numCodebooks * codebookSize

 private:
  void checkSpeaker(int s) const {
    if (s < 0 || s >= spec_.numSpeakers) throw DomainError("speaker id out of range");
  }
  WorldSpec spec_;
};

inline double cosineSimilarity(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw DomainError("cosineSimilarity: dimension mismatch");
  double dot = 0, na = 0, nb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na < 1e-24 || nb < 1e-24) return 0.0;
  return dot / std::sqrt(na * nb);
}

struct TextGenConfig {
  int minLen = 8;
  int maxLen = 16;
  int wordLenMin = 2;  // separators (symbol 0) every wordLenMin..wordLenMax symbols
  int wordLenMax = 5;
};

// Regular texts: random non-separator symbols with separator-delimited words.
inline std::vector<std::vector<int>> generateRegularTexts(const WorldSpec& spec, int count, uint64_t rngSeed,
                                                          const TextGenConfig& cfg = {}) {
  if (count < 1) throw DomainError("generateRegularTexts: count must be >= 1");
  Rng rng(mixSeed(spec.seed, rngSeed, 0x2e91ULL));
  std::vector<std::vector<int>> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    int len = cfg.minLen + static_cast<int>(rng.uniformInt(cfg.maxLen - cfg.minLen + 1));
    std::vector<int> text;
    int untilSep = cfg.wordLenMin + static_cast<int>(rng.uniformInt(cfg.wordLenMax - cfg.wordLenMin + 1));
    while (static_cast<int>(text.size()) < len) {
      if (untilSep == 0 && static_cast<int>(text.size()) + 1 < len) {
        text.push_back(kSeparatorSymbol);
        untilSep = cfg.wordLenMin + static_cast<int>(rng.uniformInt(cfg.wordLenMax - cfg.wordLenMin + 1));
      } else {
        text.push_back(1 + static_cast<int>(rng.uniformInt(spec.alphabetSize - 1)));
        if (untilSep > 0) --untilSep;
      }
    }
    out.push_back(std::move(text));
  }
  return out;
}

// Challenging texts: every sequence contains a symbol repeated >= 3 times
// consecutively and one alternating bigram block.
inline std::vector<std::vector<int>> generateChallengingTexts(const WorldSpec& spec, int count, uint64_t rngSeed,
                                                              const TextGenConfig& cfg = {}) {
  if (count < 1) throw DomainError("generateChallengingTexts: count must be >= 1");
  Rng rng(mixSeed(spec.seed, rngSeed, 0xc4a11ULL));
  std::vector<std::vector<int>> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    int len = cfg.minLen + static_cast<int>(rng.uniformInt(cfg.maxLen - cfg.minLen + 1));
    std::vector<int> text;
    auto sym = [&] { return 1 + static_cast<int>(rng.uniformInt(spec.alphabetSize - 1)); };
    // Repeated run of length 3..4.
    int a = sym();
    int runLen = 3 + static_cast<int>(rng.uniformInt(2));
    for (int r = 0; r < runLen; ++r) text.push_back(a);
    text.push_back(kSeparatorSymbol);
    // Alternating bigram block [b,c,b,c,...].
    int b = sym(), c = sym();
    while (c == b) c = sym();
    int blockPairs = 2 + static_cast<int>(rng.uniformInt(2));
    for (int p = 0; p < blockPairs; ++p) {
      text.push_back(b);
      text.push_back(c);
    }
    while (static_cast<int>(text.size()) < len) text.push_back(sym());
    out.push_back(std::move(text));
  }
  return out;
}

}  // namespace tgen
