#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tgen/common.hpp"
#include "tgen/grid.hpp"
#include "tgen/tape.hpp"

namespace tgen {

enum class CondMode { svConditioned, decoderContext, multiEncoder };

inline std::string condModeName(CondMode m) {
  switch (m) {
    case CondMode::svConditioned: return "svConditioned";
    case CondMode::decoderContext: return "decoderContext";
    case CondMode::multiEncoder: return "multiEncoder";
  }
  throw ConfigError("unknown conditioning mode");
}

inline CondMode condModeFromName(const std::string& s) {
  if (s == "svConditioned") return CondMode::svConditioned;
  if (s == "decoderContext") return CondMode::decoderContext;
  if (s == "multiEncoder") return CondMode::multiEncoder;
  throw ConfigError("unknown conditioning mode: " + s);
}

struct ModelConfig {
  CondMode conditioningMode = CondMode::decoderContext;
  int encoderLayers = 2;
  int decoderLayers = 4;
  int contextEncoderLayers = 2;
  int hiddenDim = 64;
  int ffnDim = 256;
  int heads = 4;
  int vocabText = 16;
  int V = 64;  // code vocabulary; logits carry one extra EOS slot
  int N = 4;   // parallel codebooks
  int maxFrames = 64;
  double condDropoutProb = 0.10;
  int contextFrames = 8;  // decoder-context / encoder context slice length
  int svDim = 256;        // speaker-vector dimension (world: N*V)
  std::vector<int> textCrossAttnLayers;     // multiEncoder; default: even layers
  std::vector<int> contextCrossAttnLayers;  // multiEncoder; default: odd layers

  int vout() const { return V + 1; }
  int eosCode() const { return V; }

  void validate() const {
    if (hiddenDim % heads != 0) throw ConfigError("hiddenDim must be divisible by heads");
    if (condDropoutProb < 0.0 || condDropoutProb > 1.0) throw ConfigError("condDropoutProb must be in [0,1]");
    if (encoderLayers < 1 || decoderLayers < 1) throw ConfigError("layer counts must be >= 1");
    if (V < 2 || N < 1 || vocabText < 2) throw ConfigError("invalid vocab sizes");
    if (conditioningMode == CondMode::multiEncoder) {
      std::vector<bool> hit(decoderLayers, false);
      auto mark = [&](const std::vector<int>& ls) {
        for (int l : ls) {
          if (l < 0 || l >= decoderLayers || hit[l])
            throw ConfigError("multiEncoder cross-attn layer lists must partition the decoder layers");
          hit[l] = true;
        }
      };
      mark(textLayers());
      mark(contextLayers());
      for (bool h : hit)
        if (!h) throw ConfigError("multiEncoder cross-attn layer lists must partition the decoder layers");
    }
  }

  std::vector<int> textLayers() const {
    if (conditioningMode != CondMode::multiEncoder) {
      std::vector<int> all(decoderLayers);
      for (int i = 0; i < decoderLayers; ++i) all[i] = i;
      return all;
    }
    if (!textCrossAttnLayers.empty()) return textCrossAttnLayers;
    std::vector<int> evens;
    for (int i = 0; i < decoderLayers; i += 2) evens.push_back(i);
    return evens;
  }

  std::vector<int> contextLayers() const {
    if (conditioningMode != CondMode::multiEncoder) return {};
    if (!contextCrossAttnLayers.empty()) return contextCrossAttnLayers;
    std::vector<int> odds;
    for (int i = 1; i < decoderLayers; i += 2) odds.push_back(i);
    return odds;
  }
};

struct CondInput {
  std::vector<int> textTokens;
  std::optional<TokenGrid> contextGrid;
  std::optional<std::vector<double>> speakerVector;
  bool dropText = false;
  bool dropContext = false;

  void validateFor(const ModelConfig& cfg) const {
    if (!dropText) {
      if (textTokens.empty()) throw ConfigError("CondInput: text required unless dropped");
      for (int t : textTokens)
        if (t < 0 || t >= cfg.vocabText) throw DomainError("CondInput: text token out of range");
    }
    if (!dropContext) {
      if (cfg.conditioningMode == CondMode::svConditioned) {
        if (!speakerVector) throw ConfigError("CondInput: svConditioned mode requires speakerVector");
        if (static_cast<int>(speakerVector->size()) != cfg.svDim)
          throw ConfigError("CondInput: speakerVector dimension mismatch");
      } else {
        if (!contextGrid) throw ConfigError("CondInput: contextGrid required for this mode");
        contextGrid->validateRange(cfg.V);
      }
    }
  }
};

// With probability prob, drops BOTH conditioning streams (the single
// unconditional branch used by CFG); otherwise returns the input unchanged.
inline CondInput applyConditioningDropout(const CondInput& cond, double prob, uint64_t rngSeed) {
  if (prob < 0.0 || prob > 1.0) throw DomainError("conditioning dropout prob must be in [0,1]");
  CondInput out = cond;
  Rng rng(rngSeed);
  if (rng.uniform() < prob) {
    out.dropText = true;
    out.dropContext = true;
  }
  return out;
}

struct LogitTensor {
  int frames = 0;
  int codebooks = 0;
  int vocab = 0;  // V+1: code vocabulary plus the reserved EOS slot
  std::vector<float> v;

  float at(int t, int n, int k) const {
    return v[(static_cast<size_t>(t) * codebooks + n) * vocab + k];
  }
};

struct AttentionState {
  // Raw text cross-attention scores (post prior rescale, pre softmax),
  // target rows only: one T x M matrix per (layer, head).
  std::vector<ad::Mat<float>> crossAttnScores;
};

// Flat named parameter store. Entry order is fixed at construction and is
// the canonical order for optimizer state and serialization.
template <typename T>
struct ModelParamsT {
  struct Entry {
    std::string name;
    int rows = 0, cols = 0;
    ad::Mat<T> w;
    std::vector<T> g;  // gradient accumulator, same row-major layout
  };

  ModelConfig config;
  int version = 1;
  std::vector<Entry> entries;
  std::map<std::string, int> index;

  Entry& add(const std::string& name, int rows, int cols) {
    index[name] = static_cast<int>(entries.size());
    entries.push_back(Entry{name, rows, cols, ad::Mat<T>::Zero(rows, cols), std::vector<T>(static_cast<size_t>(rows) * cols, T(0))});
    return entries.back();
  }

  Entry& at(const std::string& name) {
    auto it = index.find(name);
    if (it == index.end()) throw CheckpointError("unknown parameter: " + name);
    return entries[it->second];
  }
  const Entry& at(const std::string& name) const {
    auto it = index.find(name);
    if (it == index.end()) throw CheckpointError("unknown parameter: " + name);
    return entries[it->second];
  }
  bool has(const std::string& name) const { return index.count(name) != 0; }

  void zeroGrad() {
    for (auto& e : entries) std::fill(e.g.begin(), e.g.end(), T(0));
  }

  size_t coordCount() const {
    size_t n = 0;
    for (auto& e : entries) n += e.g.size();
    return n;
  }

  template <typename U>
  ModelParamsT<U> cast() const {
    ModelParamsT<U> out;
    out.config = config;
    out.version = version;
    for (auto& e : entries) {
      auto& ne = out.add(e.name, e.rows, e.cols);
      ne.w = e.w.template cast<U>();
    }
    return out;
  }
};

using ModelParams = ModelParamsT<float>;

namespace detail {

template <typename T>
void addAttnParams(ModelParamsT<T>& p, const std::string& prefix, int hidden, int heads) {
  int dh = hidden / heads;
  for (int h = 0; h < heads; ++h) {
    p.add(prefix + ".q" + std::to_string(h), hidden, dh);
    p.add(prefix + ".k" + std::to_string(h), hidden, dh);
    p.add(prefix + ".v" + std::to_string(h), hidden, dh);
    p.add(prefix + ".o" + std::to_string(h), dh, hidden);
  }
}

template <typename T>
void addLn(ModelParamsT<T>& p, const std::string& prefix, int hidden) {
  p.add(prefix + ".g", 1, hidden);
  p.add(prefix + ".b", 1, hidden);
}

template <typename T>
void addFfn(ModelParamsT<T>& p, const std::string& prefix, int hidden, int ffn) {
  p.add(prefix + ".w1", hidden, ffn);
  p.add(prefix + ".b1", 1, ffn);
  p.add(prefix + ".w2", ffn, hidden);
  p.add(prefix + ".b2", 1, hidden);
}

template <typename T>
void addEncoderStack(ModelParamsT<T>& p, const std::string& prefix, int layers, const ModelConfig& c) {
  for (int i = 0; i < layers; ++i) {
    std::string lp = prefix + std::to_string(i);
    addLn(p, lp + ".ln1", c.hiddenDim);
    addAttnParams(p, lp + ".attn", c.hiddenDim, c.heads);
    addLn(p, lp + ".ln2", c.hiddenDim);
    addFfn(p, lp + ".ffn", c.hiddenDim, c.ffnDim);
  }
  addLn(p, prefix + "lnf", c.hiddenDim);
}

}  // namespace detail

template <typename T>
ModelParamsT<T> initModelParams(const ModelConfig& cfg, uint64_t seed) {
  cfg.validate();
  ModelParamsT<T> p;
  p.config = cfg;
  p.add("text.embed", cfg.vocabText, cfg.hiddenDim);
  for (int n = 0; n < cfg.N; ++n) p.add("audio.embed." + std::to_string(n), cfg.V, cfg.hiddenDim);
  p.add("bos", 1, cfg.hiddenDim);
  p.add("null.text", 1, cfg.hiddenDim);
  p.add("null.ctx", 1, cfg.hiddenDim);
  if (cfg.conditioningMode == CondMode::svConditioned) {
    p.add("sv.proj.w", cfg.svDim, cfg.hiddenDim);
    p.add("sv.proj.b", 1, cfg.hiddenDim);
  }
  detail::addEncoderStack(p, "enc", cfg.encoderLayers, cfg);
  if (cfg.conditioningMode == CondMode::multiEncoder)
    detail::addEncoderStack(p, "ctxenc", cfg.contextEncoderLayers, cfg);
  for (int i = 0; i < cfg.decoderLayers; ++i) {
    std::string lp = "dec" + std::to_string(i);
    detail::addLn(p, lp + ".ln1", cfg.hiddenDim);
    detail::addAttnParams(p, lp + ".self", cfg.hiddenDim, cfg.heads);
    detail::addLn(p, lp + ".ln2", cfg.hiddenDim);
    detail::addAttnParams(p, lp + ".cross", cfg.hiddenDim, cfg.heads);
    detail::addLn(p, lp + ".ln3", cfg.hiddenDim);
    detail::addFfn(p, lp + ".ffn", cfg.hiddenDim, cfg.ffnDim);
  }
  detail::addLn(p, "dec.lnf", cfg.hiddenDim);
  p.add("head.w", cfg.hiddenDim, cfg.N * cfg.vout());
  p.add("head.b", 1, cfg.N * cfg.vout());

  Rng rng(mixSeed(seed, 0x1217a6ULL));
  for (auto& e : p.entries) {
    bool lnGain = e.name.size() > 2 && e.name.compare(e.name.size() - 2, 2, ".g") == 0 && e.rows == 1;
    bool lnBias = e.name.size() > 2 && e.name.compare(e.name.size() - 2, 2, ".b") == 0 && e.rows == 1;
    if (lnGain && e.name.find(".ln") != std::string::npos) {
      e.w.setOnes();
    } else if (lnGain && e.name == "dec.lnf.g") {
      e.w.setOnes();
    } else if (lnBias) {
      e.w.setZero();
    } else {
      for (Eigen::Index i = 0; i < e.w.size(); ++i) e.w.data()[i] = static_cast<T>(rng.normal() * 0.02);
    }
  }
  // lnf gains outside the per-layer naming scheme
  for (auto& e : p.entries)
    if (e.name == "enc.lnf.g" || e.name == "ctxenc.lnf.g" || e.name == "dec.lnf.g") e.w.setOnes();
  return p;
}

// Pure-matrix form of the speaker-vector conditioning op: every row of the
// text encodings receives the same projected speaker vector.
template <typename T>
ad::Mat<T> svCondition(const ad::Mat<T>& textEncodings, const std::vector<double>& speakerVector,
                       const ad::Mat<T>& projW, const ad::Mat<T>& projB) {
  if (static_cast<Eigen::Index>(speakerVector.size()) != projW.rows())
    throw ConfigError("svCondition: speaker vector dimension mismatch");
  if (projW.cols() != textEncodings.cols()) throw ConfigError("svCondition: projection shape mismatch");
  ad::Mat<T> sv(1, projW.rows());
  for (size_t i = 0; i < speakerVector.size(); ++i) sv(0, static_cast<Eigen::Index>(i)) = static_cast<T>(speakerVector[i]);
  ad::Mat<T> shift = sv * projW + projB;
  ad::Mat<T> out = textEncodings;
  out.rowwise() += shift.row(0);
  return out;
}

template <typename T>
struct GraphForward {
  int logits = -1;                  // (frames [+1]) x (N*vout); last row is the next-frame/EOS row when requested
  std::vector<int> textAttnScores;  // sliced target-row score nodes, one per (text layer, head)
  int textLen = 0;                  // M: width of the text cross-attention source
  int targetFrames = 0;
};

struct ForwardOptions {
  const ad::Mat<double>* prior = nullptr;  // targetFrames x M, text cross-attention rescale
  bool wantNextRow = false;
  bool wantAlign = false;  // record text cross-attention scores
  bool trainable = true;   // bind parameter gradients
};

namespace detail {

template <typename T>
struct Binder {
  ad::Graph<T>& g;
  ModelParamsT<T>& p;
  bool trainable;
  std::map<std::string, int> cache;

  int operator()(const std::string& name) {
    auto it = cache.find(name);
    if (it != cache.end()) return it->second;
    auto& e = p.at(name);
    int id = g.param(e.w, trainable ? &e.g : nullptr);
    cache[name] = id;
    return id;
  }
};

// Multi-head attention block. Returns the residual-added output; when
// `scoresOut` is non-null, appends the (post-prior, pre-softmax) score node
// of every head, sliced to rows [sliceR0, sliceR0+sliceCount).
template <typename T>
int attention(ad::Graph<T>& g, Binder<T>& P, const std::string& prefix, int x, int kv, int heads, int dh,
              const std::type_identity_t<ad::Mat<T>>* mask, const std::type_identity_t<ad::Mat<T>>* priorFull,
              std::vector<int>* scoresOut, int sliceR0 = 0, int sliceCount = 0) {
  const T invSqrt = T(1) / std::sqrt(static_cast<T>(dh));
  int out = -1;
  for (int h = 0; h < heads; ++h) {
    std::string hs = std::to_string(h);
    int q = g.matmul(x, P(prefix + ".q" + hs));
    int k = g.matmul(kv, P(prefix + ".k" + hs));
    int v = g.matmul(kv, P(prefix + ".v" + hs));
    int s = g.scale(g.matmulNT(q, k), invSqrt);
    if (priorFull) s = g.mulConst(s, *priorFull);
    if (scoresOut) scoresOut->push_back(g.rowSlice(s, sliceR0, sliceCount));
    if (mask) s = g.addConst(s, *mask);
    int probs = g.softmaxRows(s);
    int headOut = g.matmul(g.matmul(probs, v), P(prefix + ".o" + hs));
    out = (out < 0) ? headOut : g.add(out, headOut);
  }
  return out;
}

template <typename T>
int ffn(ad::Graph<T>& g, Binder<T>& P, const std::string& prefix, int x) {
  int h = g.addRowBroadcast(g.matmul(x, P(prefix + ".w1")), P(prefix + ".b1"));
  h = g.relu(h);
  return g.addRowBroadcast(g.matmul(h, P(prefix + ".w2")), P(prefix + ".b2"));
}

template <typename T>
int ln(ad::Graph<T>& g, Binder<T>& P, const std::string& prefix, int x) {
  return g.layerNorm(x, P(prefix + ".g"), P(prefix + ".b"));
}

// Non-causal encoder stack over an embedded sequence.
template <typename T>
int encoderStack(ad::Graph<T>& g, Binder<T>& P, const std::string& prefix, int x, int layers, int heads, int dh) {
  for (int i = 0; i < layers; ++i) {
    std::string lp = prefix + std::to_string(i);
    int normed = ln(g, P, lp + ".ln1", x);
    int a = attention(g, P, lp + ".attn", normed, normed, heads, dh, nullptr, nullptr, nullptr);
    x = g.add(x, a);
    x = g.add(x, ffn(g, P, lp + ".ffn", ln(g, P, lp + ".ln2", x)));
  }
  return ln(g, P, prefix + "lnf", x);
}

// Sum of per-codebook embeddings for a grid, plus positions starting at posOffset.
template <typename T>
int embedGrid(ad::Graph<T>& g, Binder<T>& P, const ModelConfig& cfg, const TokenGrid& grid, int posOffset) {
  int x = -1;
  for (int n = 0; n < cfg.N; ++n) {
    std::vector<int> col(grid.frames);
    for (int t = 0; t < grid.frames; ++t) col[t] = grid.at(t, n);
    int e = g.embedRows(P("audio.embed." + std::to_string(n)), std::move(col));
    x = (x < 0) ? e : g.add(x, e);
  }
  ad::Mat<T> pos = ad::sinusoidalPositions<T>(posOffset + grid.frames, cfg.hiddenDim).bottomRows(grid.frames);
  return g.addConst(x, pos);
}

}  // namespace detail

// Teacher-forced forward pass on the tape. Emits logits for every target
// frame (plus the trailing next-frame row when requested). In decoderContext
// mode the context grid is prepended to the decoder stream and logits are
// reported for target positions only.
template <typename T>
GraphForward<T> buildForward(ad::Graph<T>& g, ModelParamsT<T>& params, const CondInput& cond,
                             const TokenGrid& target, const ForwardOptions& opts = {}) {
  const ModelConfig& cfg = params.config;
  cond.validateFor(cfg);
  target.validateRange(cfg.V);
  if (target.frames > 0 && target.codebooks != cfg.N) throw DomainError("forward: target codebook count mismatch");

  detail::Binder<T> P{g, params, opts.trainable, {}};
  const int H = cfg.hiddenDim, dh = H / cfg.heads;

  // Text cross-attention source.
  int textSrc;
  int M;
  if (cond.dropText) {
    textSrc = P("null.text");
    M = 1;
  } else {
    std::vector<int> toks = cond.textTokens;
    M = static_cast<int>(toks.size());
    int e = g.embedRows(P("text.embed"), std::move(toks));
    e = g.addConst(e, ad::sinusoidalPositions<T>(M, H));
    textSrc = detail::encoderStack(g, P, "enc", e, cfg.encoderLayers, cfg.heads, dh);
  }
  if (cfg.conditioningMode == CondMode::svConditioned) {
    int shift;
    if (cond.dropContext) {
      shift = P("null.ctx");
    } else {
      ad::Mat<T> sv(1, cfg.svDim);
      for (int i = 0; i < cfg.svDim; ++i) sv(0, i) = static_cast<T>((*cond.speakerVector)[i]);
      shift = g.addRowBroadcast(g.matmul(g.leaf(sv), P("sv.proj.w")), P("sv.proj.b"));
    }
    textSrc = g.addRowBroadcast(textSrc, shift);
  }

  // Context cross-attention source (multiEncoder only).
  int ctxSrc = -1;
  if (cfg.conditioningMode == CondMode::multiEncoder) {
    if (cond.dropContext) {
      ctxSrc = P("null.ctx");
    } else {
      TokenGrid slice = cond.contextGrid->head(cfg.contextFrames);
      int e = detail::embedGrid<T>(g, P, cfg, slice, 0);
      ctxSrc = detail::encoderStack(g, P, "ctxenc", e, cfg.contextEncoderLayers, cfg.heads, dh);
    }
  }

  // Decoder stream: [BOS, (context frames), target frames].
  int x = P("bos");
  x = g.addConst(x, ad::sinusoidalPositions<T>(1, H));
  int ctxCount = 0;
  if (cfg.conditioningMode == CondMode::decoderContext) {
    if (cond.dropContext) {
      int nc = g.addConst(P("null.ctx"), ad::sinusoidalPositions<T>(2, H).bottomRows(1));
      x = g.concatRows(x, nc);
      ctxCount = 1;
    } else {
      TokenGrid slice = cond.contextGrid->head(cfg.contextFrames);
      if (!slice.empty()) {
        x = g.concatRows(x, detail::embedGrid<T>(g, P, cfg, slice, 1));
        ctxCount = slice.frames;
      }
    }
  }
  const int Tt = target.frames;
  if (Tt > 0) x = g.concatRows(x, detail::embedGrid<T>(g, P, cfg, target, 1 + ctxCount));
  const int L = 1 + ctxCount + Tt;

  // Prior rescale matrix over full decoder rows (ones outside target rows).
  ad::Mat<T> priorFull;
  if (opts.prior) {
    if (opts.prior->rows() != Tt || opts.prior->cols() != M)
      throw DomainError("forward: prior shape must be targetFrames x textLen");
    priorFull = ad::Mat<T>::Ones(L, M);
    priorFull.middleRows(ctxCount, Tt) = opts.prior->template cast<T>();
  }

  ad::Mat<T> mask = ad::causalMask<T>(L);
  const auto textLayers = cfg.textLayers();
  const auto ctxLayers = cfg.contextLayers();
  auto isIn = [](const std::vector<int>& v, int x) { return std::find(v.begin(), v.end(), x) != v.end(); };

  GraphForward<T> out;
  out.textLen = M;
  out.targetFrames = Tt;

  for (int i = 0; i < cfg.decoderLayers; ++i) {
    std::string lp = "dec" + std::to_string(i);
    int normed = detail::ln(g, P, lp + ".ln1", x);
    int a = detail::attention(g, P, lp + ".self", normed, normed, cfg.heads, dh, &mask, nullptr, nullptr);
    x = g.add(x, a);
    bool textLayer = isIn(textLayers, i);
    int kv = textLayer ? textSrc : ctxSrc;
    int c = detail::attention(g, P, lp + ".cross", detail::ln(g, P, lp + ".ln2", x), kv, cfg.heads, dh, nullptr,
                              (textLayer && opts.prior) ? &priorFull : nullptr,
                              (textLayer && opts.wantAlign && Tt > 0) ? &out.textAttnScores : nullptr, ctxCount, Tt);
    x = g.add(x, c);
    x = g.add(x, detail::ffn(g, P, lp + ".ffn", detail::ln(g, P, lp + ".ln3", x)));
  }
  x = detail::ln(g, P, "dec.lnf", x);
  int logits = g.addRowBroadcast(g.matmul(x, P("head.w")), P("head.b"));
  // Target logits live at rows ctxCount..ctxCount+Tt-1; row ctxCount+Tt is the next/EOS row.
  int rows = Tt + (opts.wantNextRow ? 1 : 0);
  out.logits = (rows == L) ? logits : g.rowSlice(logits, ctxCount, rows);
  return out;
}

// Evaluation-only forward per the public contract: teacher-forced logits
// for every target frame plus the text cross-attention state.
inline std::pair<LogitTensor, AttentionState> forward(const ModelParams& params, const CondInput& cond,
                                                      const TokenGrid& target,
                                                      const ad::Mat<double>* prior = nullptr) {
  ad::Graph<float> g;
  ForwardOptions opts;
  opts.prior = prior;
  opts.wantAlign = true;
  opts.trainable = false;
  ModelParams& p = const_cast<ModelParams&>(params);  // grads not bound
  auto fw = buildForward(g, p, cond, target, opts);
  const auto& lv = g.val(fw.logits);
  LogitTensor lt;
  lt.frames = target.frames;
  lt.codebooks = params.config.N;
  lt.vocab = params.config.vout();
  lt.v.assign(lv.data(), lv.data() + lv.size());
  AttentionState st;
  for (int id : fw.textAttnScores) st.crossAttnScores.push_back(g.val(id));
  return {lt, st};
}

}  // namespace tgen
