#pragma once

#include "tgen/model.hpp"

namespace tgen {

template <typename T>
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}

  void step(ModelParamsT<T>& params) {
    if (m_.empty()) {
      for (auto& e : params.entries) {
        m_.emplace_back(e.g.size(), 0.0);
        v_.emplace_back(e.g.size(), 0.0);
      }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, t_), c2 = 1.0 - std::pow(b2_, t_);
    for (size_t ei = 0; ei < params.entries.size(); ++ei) {
      auto& e = params.entries[ei];
      T* w = e.w.data();
      for (size_t i = 0; i < e.g.size(); ++i) {
        double gr = static_cast<double>(e.g[i]);
        m_[ei][i] = b1_ * m_[ei][i] + (1.0 - b1_) * gr;
        v_[ei][i] = b2_ * v_[ei][i] + (1.0 - b2_) * gr * gr;
        double update = lr_ * (m_[ei][i] / c1) / (std::sqrt(v_[ei][i] / c2) + eps_);
        w[i] -= static_cast<T>(update);
      }
    }
  }

  void setLearningRate(double lr) { lr_ = lr; }

 private:
  double lr_, b1_, b2_, eps_;
  int64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

}  // namespace tgen
