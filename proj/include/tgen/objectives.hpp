#pragma once

#include <array>
#include <optional>

#include "tgen/model.hpp"

namespace tgen {

struct LossConfig {
  double alignCoeff = 0.01;       // alpha
  int64_t priorOnUntil = 1000;    // full prior before this iteration
  int64_t priorAnnealUntil = 1500;  // blended toward all-ones, then off
  double priorScale = 1.0;        // omega, beta-binomial concentration

  void validate() const {
    if (alignCoeff < 0) throw ConfigError("alignCoeff must be >= 0");
    if (priorScale <= 0) throw ConfigError("priorScale must be > 0");
    if (priorOnUntil > priorAnnealUntil) throw ConfigError("priorOnUntil must be <= priorAnnealUntil");
  }
};

// Row t is BetaBinomial(k; M-1, omega*(t+1), omega*(T-t)) over k = 0..M-1.
inline ad::Mat<double> betaBinomialPrior(int T, int M, double omega) {
  if (T < 1 || M < 1) throw DomainError("betaBinomialPrior: T, M must be >= 1");
  if (omega <= 0) throw DomainError("betaBinomialPrior: omega must be > 0");
  ad::Mat<double> P(T, M);
  const int n = M - 1;
  auto logBeta = [](double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); };
  for (int t = 0; t < T; ++t) {
    double a = omega * (t + 1), b = omega * (T - t);
    double lb = logBeta(a, b);
    for (int k = 0; k <= n; ++k) {
      double logC = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
      P(t, k) = std::exp(logC + logBeta(k + a, n - k + b) - lb);
    }
  }
  return P;
}

// Three regimes: full prior, linear blend with all-ones, off.
inline std::optional<ad::Mat<double>> priorSchedule(int64_t iter, const LossConfig& cfg, int T, int M) {
  if (iter < 0) throw DomainError("priorSchedule: iter must be >= 0");
  cfg.validate();
  if (iter >= cfg.priorAnnealUntil) return std::nullopt;
  ad::Mat<double> prior = betaBinomialPrior(T, M, cfg.priorScale);
  if (iter < cfg.priorOnUntil) return prior;
  double lambda = static_cast<double>(iter - cfg.priorOnUntil) /
                  static_cast<double>(cfg.priorAnnealUntil - cfg.priorOnUntil);
  return ((1.0 - lambda) * prior.array() + lambda).matrix();
}

// ---- fused loss ops on the tape ----

// One scored logit chunk: row, codebook, target code.
using LogitEntry = std::array<int, 3>;

// Sum over entries of log softmax(logits[row, n*vout .. n*vout+vout))[code].
template <typename T>
int logProbSumOp(ad::Graph<T>& g, int logits, std::vector<LogitEntry> entries, int vout) {
  const ad::Mat<T>& L = g.val(logits);
  double total = 0.0;
  for (const auto& [t, n, c] : entries) {
    auto chunk = L.row(t).segment(n * vout, vout);
    T mx = chunk.maxCoeff();
    double lse = std::log(static_cast<double>((chunk.array() - mx).exp().sum())) + static_cast<double>(mx);
    total += static_cast<double>(chunk(c)) - lse;
  }
  ad::Mat<T> v(1, 1);
  v(0, 0) = static_cast<T>(total);
  return g.addNode(std::move(v), [logits, entries = std::move(entries), vout](ad::Graph<T>& g, int self) {
    T gs = g.nodes[self].grad(0, 0);
    const ad::Mat<T>& L = g.val(logits);
    ad::Mat<T>& GL = g.grad(logits);
    for (const auto& [t, n, c] : entries) {
      auto chunk = L.row(t).segment(n * vout, vout);
      T mx = chunk.maxCoeff();
      Eigen::Array<T, 1, Eigen::Dynamic> p = (chunk.array() - mx).exp();
      p /= p.sum();
      GL.row(t).segment(n * vout, vout) -= gs * p.matrix();
      GL(t, n * vout + c) += gs;
    }
  });
}

// Mean per-codebook cross-entropy on the tape: -logProbSum / |entries|.
template <typename T>
int tokenLossOp(ad::Graph<T>& g, int logits, const std::vector<LogitEntry>& entries, int vout) {
  if (entries.empty()) throw DomainError("tokenLossOp: no entries");
  int lp = logProbSumOp(g, logits, entries, vout);
  return g.scale(lp, T(-1) / static_cast<T>(entries.size()));
}

inline std::vector<LogitEntry> gridEntries(const TokenGrid& target) {
  std::vector<LogitEntry> entries;
  entries.reserve(static_cast<size_t>(target.frames) * target.codebooks);
  for (int t = 0; t < target.frames; ++t)
    for (int n = 0; n < target.codebooks; ++n) entries.push_back({t, n, target.at(t, n)});
  return entries;
}

// Mean over (T x N) of per-codebook cross-entropy; gradient w.r.t. logits.
struct TokenLossResult {
  double loss = 0.0;
  std::vector<float> gradLogits;  // same layout as LogitTensor::v
};

inline TokenLossResult tokenLoss(const LogitTensor& logits, const TokenGrid& target) {
  if (logits.frames != target.frames || logits.codebooks != target.codebooks)
    throw DomainError("tokenLoss: shape mismatch");
  target.validateRange(logits.vocab);
  ad::Graph<float> g;
  ad::Mat<float> L(logits.frames, logits.codebooks * logits.vocab);
  std::copy(logits.v.begin(), logits.v.end(), L.data());
  int lid = g.leaf(std::move(L));
  int loss = tokenLossOp(g, lid, gridEntries(target), logits.vocab);
  TokenLossResult r;
  r.loss = g.val(loss)(0, 0);
  g.backward(loss);
  const auto& G = g.grad(lid);
  r.gradLogits.assign(G.data(), G.data() + G.size());
  return r;
}

// ---- CTC monotonic alignment loss ----

// Negative log of the summed probability over all monotonic blank-free paths
// through a T x M row-stochastic matrix: each frame emits one text index,
// non-decreasing, starting at 1 and ending at M. Returns loss and the
// gradient w.r.t. the matrix entries (posterior occupancy form).
struct CtcResult {
  double loss = 0.0;
  ad::Mat<double> grad;
};

template <typename T>
CtcResult ctcPathSum(const ad::Mat<T>& probs) {
  const int Tn = static_cast<int>(probs.rows());
  const int M = static_cast<int>(probs.cols());
  if (M < 1) throw DomainError("ctcAlignLoss: M must be >= 1");
  if (Tn < M) throw DomainError("ctcAlignLoss: infeasible alignment, T < M");
  constexpr double kTiny = 1e-30;
  constexpr double kNegInf = -1e300;
  ad::Mat<double> lp(Tn, M);
  for (int t = 0; t < Tn; ++t)
    for (int m = 0; m < M; ++m) lp(t, m) = std::log(std::max(static_cast<double>(probs(t, m)), kTiny));
  auto lse2 = [](double a, double b) {
    if (a < b) std::swap(a, b);
    if (b <= kNegInf) return a;
    return a + std::log1p(std::exp(b - a));
  };
  ad::Mat<double> alpha = ad::Mat<double>::Constant(Tn, M, kNegInf);
  alpha(0, 0) = lp(0, 0);
  for (int t = 1; t < Tn; ++t)
    for (int m = std::max(0, M - (Tn - t)); m <= std::min(t, M - 1); ++m) {
      double stay = alpha(t - 1, m);
      double step = (m > 0) ? alpha(t - 1, m - 1) : kNegInf;
      alpha(t, m) = lp(t, m) + lse2(stay, step);
    }
  const double logZ = alpha(Tn - 1, M - 1);
  ad::Mat<double> beta = ad::Mat<double>::Constant(Tn, M, kNegInf);
  beta(Tn - 1, M - 1) = lp(Tn - 1, M - 1);
  for (int t = Tn - 2; t >= 0; --t)
    for (int m = std::max(0, M - (Tn - t)); m <= std::min(t, M - 1); ++m) {
      double stay = beta(t + 1, m);
      double step = (m + 1 < M) ? beta(t + 1, m + 1) : kNegInf;
      beta(t, m) = lp(t, m) + lse2(stay, step);
    }
  CtcResult r;
  r.loss = -logZ;
  r.grad = ad::Mat<double>::Zero(Tn, M);
  for (int t = 0; t < Tn; ++t)
    for (int m = 0; m < M; ++m) {
      double logGamma = alpha(t, m) + beta(t, m) - lp(t, m) - logZ;
      if (logGamma > -700.0)
        r.grad(t, m) = -std::exp(logGamma) / std::max(static_cast<double>(probs(t, m)), kTiny);
    }
  return r;
}

struct AlignmentBatch {
  std::vector<ad::Mat<double>> softAttn;  // per (layer, head), rows normalized
};

struct CtcBatchResult {
  double loss = 0.0;
  std::vector<ad::Mat<double>> grads;
};

// Summed over all heads/layers.
inline CtcBatchResult ctcAlignLoss(const AlignmentBatch& batch) {
  CtcBatchResult r;
  for (const auto& m : batch.softAttn) {
    auto one = ctcPathSum(m);
    r.loss += one.loss;
    r.grads.push_back(std::move(one.grad));
  }
  return r;
}

template <typename T>
int ctcLossOp(ad::Graph<T>& g, int probs) {
  auto res = ctcPathSum(g.val(probs));
  ad::Mat<T> v(1, 1);
  v(0, 0) = static_cast<T>(res.loss);
  return g.addNode(std::move(v), [probs, grad = std::move(res.grad)](ad::Graph<T>& g, int self) {
    g.grad(probs) += g.nodes[self].grad(0, 0) * grad.template cast<T>();
  });
}

// ---- total training loss ----

struct TotalLossResult {
  double total = 0.0;
  double token = 0.0;
  double align = 0.0;
};

// Teacher-forced total loss with prior schedule and EOS supervision
// (codebook 0 of the trailing next-frame row predicts the reserved EOS
// code). Accumulates parameter gradients into params when backprop is set.
template <typename T>
TotalLossResult totalLoss(ModelParamsT<T>& params, const CondInput& cond, const TokenGrid& target, int64_t iter,
                          const LossConfig& cfg, bool backprop = true, double gradScale = 1.0) {
  cfg.validate();
  const ModelConfig& mc = params.config;
  if (target.frames < 1) throw DomainError("totalLoss: empty target");
  const int M = cond.dropText ? 1 : static_cast<int>(cond.textTokens.size());
  const bool useAlign = cfg.alignCoeff > 0.0 && !cond.dropText && target.frames >= M;

  std::optional<ad::Mat<double>> prior;
  if (!cond.dropText) prior = priorSchedule(iter, cfg, target.frames, M);

  ad::Graph<T> g;
  ForwardOptions opts;
  opts.prior = prior ? &*prior : nullptr;
  opts.wantNextRow = true;
  opts.wantAlign = useAlign;
  opts.trainable = backprop;
  auto fw = buildForward(g, params, cond, target, opts);

  auto entries = gridEntries(target);
  entries.push_back({target.frames, 0, mc.eosCode()});
  int token = tokenLossOp(g, fw.logits, entries, mc.vout());

  TotalLossResult r;
  r.token = g.val(token)(0, 0);
  int total = token;
  if (useAlign) {
    int align = -1;
    for (int sid : fw.textAttnScores) {
      int one = ctcLossOp(g, g.softmaxRows(sid));
      align = (align < 0) ? one : g.add(align, one);
    }
    if (align >= 0) {
      r.align = g.val(align)(0, 0);
      total = g.add(token, g.scale(align, static_cast<T>(cfg.alignCoeff)));
    }
  }
  r.total = g.val(total)(0, 0);
  if (backprop) {
    if (gradScale != 1.0) total = g.scale(total, static_cast<T>(gradScale));
    g.backward(total);
  }
  return r;
}

}  // namespace tgen
