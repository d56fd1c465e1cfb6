#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "tgen/common.hpp"

namespace tgen::ad {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Reverse-mode tape over dense matrices. Nodes are created in topological
// order; backward() walks the tape in reverse. Leaves created via param()
// flush their accumulated gradient into an external buffer at the end of
// the sweep, so one graph can bind many parameter tensors.
template <typename T>
class Graph {
 public:
  struct Node {
    Mat<T> val;
    Mat<T> grad;  // allocated on first touch
    std::function<void(Graph&, int)> back;
  };

  std::vector<Node> nodes;

  int addNode(Mat<T> val, std::function<void(Graph&, int)> back = {}) {
    nodes.push_back(Node{std::move(val), Mat<T>(), std::move(back)});
    return static_cast<int>(nodes.size()) - 1;
  }

  const Mat<T>& val(int id) const { return nodes[id].val; }

  Mat<T>& grad(int id) {
    Node& n = nodes[id];
    if (n.grad.size() == 0) n.grad = Mat<T>::Zero(n.val.rows(), n.val.cols());
    return n.grad;
  }

  bool hasGrad(int id) const { return nodes[id].grad.size() != 0; }

  int leaf(Mat<T> v) { return addNode(std::move(v)); }

  // Parameter leaf: gradient lands in *gradOut (row-major, same layout).
  int param(const Mat<T>& w, std::vector<T>* gradOut) {
    int id = addNode(w);
    if (gradOut) bindings_.push_back({id, gradOut});
    return id;
  }

  void backward(int root) {
    if (nodes[root].val.size() != 1) throw DomainError("backward: root must be scalar");
    grad(root)(0, 0) = T(1);
    for (int i = root; i >= 0; --i) {
      Node& n = nodes[i];
      if (n.grad.size() != 0 && n.back) n.back(*this, i);
    }
    for (auto& [id, out] : bindings_) {
      Node& n = nodes[id];
      if (n.grad.size() == 0) continue;
      const T* src = n.grad.data();
      for (size_t k = 0; k < out->size(); ++k) (*out)[k] += src[k];
    }
  }

  // ---- ops ----

  int matmul(int a, int b) {
    Mat<T> v = val(a) * val(b);
    return addNode(std::move(v), [a, b](Graph& g, int self) {
      const Mat<T>& G = g.nodes[self].grad;
      g.grad(a).noalias() += G * g.val(b).transpose();
      g.grad(b).noalias() += g.val(a).transpose() * G;
    });
  }

  // a * b^T
  int matmulNT(int a, int b) {
    Mat<T> v = val(a) * val(b).transpose();
    return addNode(std::move(v), [a, b](Graph& g, int self) {
      const Mat<T>& G = g.nodes[self].grad;
      g.grad(a).noalias() += G * g.val(b);
      g.grad(b).noalias() += G.transpose() * g.val(a);
    });
  }

  int add(int a, int b) {
    Mat<T> v = val(a) + val(b);
    return addNode(std::move(v), [a, b](Graph& g, int self) {
      const Mat<T>& G = g.nodes[self].grad;
      g.grad(a) += G;
      g.grad(b) += G;
    });
  }

  int scale(int a, T s) {
    Mat<T> v = val(a) * s;
    return addNode(std::move(v), [a, s](Graph& g, int self) { g.grad(a) += g.nodes[self].grad * s; });
  }

  int addConst(int a, const Mat<T>& c) {
    Mat<T> v = val(a) + c;
    return addNode(std::move(v), [a](Graph& g, int self) { g.grad(a) += g.nodes[self].grad; });
  }

  int mulConst(int a, Mat<T> c) {
    Mat<T> v = val(a).cwiseProduct(c);
    return addNode(std::move(v), [a, c = std::move(c)](Graph& g, int self) {
      g.grad(a) += g.nodes[self].grad.cwiseProduct(c);
    });
  }

  // b is 1 x C, broadcast over rows of a.
  int addRowBroadcast(int a, int b) {
    Mat<T> v = val(a);
    v.rowwise() += val(b).row(0);
    return addNode(std::move(v), [a, b](Graph& g, int self) {
      const Mat<T>& G = g.nodes[self].grad;
      g.grad(a) += G;
      g.grad(b).row(0) += G.colwise().sum();
    });
  }

  int relu(int a) {
    Mat<T> v = val(a).cwiseMax(T(0));
    return addNode(std::move(v), [a](Graph& g, int self) {
      g.grad(a) += g.nodes[self].grad.cwiseProduct(
          (g.val(a).array() > T(0)).template cast<T>().matrix());
    });
  }

  int softmaxRows(int a) {
    Mat<T> v = val(a);
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
      T mx = v.row(i).maxCoeff();
      v.row(i) = (v.row(i).array() - mx).exp();
      v.row(i) /= v.row(i).sum();
    }
    return addNode(std::move(v), [a](Graph& g, int self) {
      const Mat<T>& P = g.val(self);
      const Mat<T>& G = g.nodes[self].grad;
      Mat<T>& GA = g.grad(a);
      for (Eigen::Index i = 0; i < P.rows(); ++i) {
        T dot = G.row(i).dot(P.row(i));
        GA.row(i) += (G.row(i).array() - dot).matrix().cwiseProduct(P.row(i));
      }
    });
  }

  int layerNorm(int a, int gain, int bias, T eps = T(1e-5)) {
    const Mat<T>& X = val(a);
    Mat<T> Y(X.rows(), X.cols());
    Mat<T> normed(X.rows(), X.cols());
    std::vector<T> invStd(X.rows());
    const T C = static_cast<T>(X.cols());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      T mu = X.row(i).mean();
      T var = (X.row(i).array() - mu).square().sum() / C;
      T is = T(1) / std::sqrt(var + eps);
      invStd[i] = is;
      normed.row(i) = (X.row(i).array() - mu).matrix() * is;
      Y.row(i) = normed.row(i).cwiseProduct(val(gain).row(0)) + val(bias).row(0);
    }
    return addNode(std::move(Y), [a, gain, bias, normed = std::move(normed), invStd = std::move(invStd)](
                                     Graph& g, int self) {
      const Mat<T>& G = g.nodes[self].grad;
      const T C = static_cast<T>(G.cols());
      Mat<T>& GA = g.grad(a);
      Mat<T>& GG = g.grad(gain);
      Mat<T>& GB = g.grad(bias);
      for (Eigen::Index i = 0; i < G.rows(); ++i) {
        auto gy = G.row(i).cwiseProduct(g.val(gain).row(0));  // dL/d normed
        T m1 = gy.sum() / C;
        T m2 = gy.dot(normed.row(i)) / C;
        GA.row(i) += ((gy.array() - m1) - normed.row(i).array() * m2).matrix() * invStd[i];
        GG.row(0) += G.row(i).cwiseProduct(normed.row(i));
        GB.row(0) += G.row(i);
      }
    });
  }

  int rowSlice(int a, int r0, int count) {
    Mat<T> v = val(a).middleRows(r0, count);
    return addNode(std::move(v), [a, r0, count](Graph& g, int self) {
      g.grad(a).middleRows(r0, count) += g.nodes[self].grad;
    });
  }

  int concatRows(int a, int b) {
    Mat<T> v(val(a).rows() + val(b).rows(), val(a).cols());
    v << val(a), val(b);
    return addNode(std::move(v), [a, b](Graph& g, int self) {
      const Mat<T>& G = g.nodes[self].grad;
      g.grad(a) += G.topRows(g.val(a).rows());
      g.grad(b) += G.bottomRows(g.val(b).rows());
    });
  }

  int embedRows(int table, std::vector<int> idx) {
    const Mat<T>& tab = val(table);
    Mat<T> v(static_cast<Eigen::Index>(idx.size()), tab.cols());
    for (size_t i = 0; i < idx.size(); ++i) v.row(static_cast<Eigen::Index>(i)) = tab.row(idx[i]);
    return addNode(std::move(v), [table, idx = std::move(idx)](Graph& g, int self) {
      const Mat<T>& G = g.nodes[self].grad;
      Mat<T>& GT = g.grad(table);
      for (size_t i = 0; i < idx.size(); ++i) GT.row(idx[i]) += G.row(static_cast<Eigen::Index>(i));
    });
  }

 private:
  std::vector<std::pair<int, std::vector<T>*>> bindings_;
};

template <typename T>
Mat<T> sinusoidalPositions(int length, int dim) {
  Mat<T> pe = Mat<T>::Zero(length, dim);
  for (int p = 0; p < length; ++p)
    for (int i = 0; i < dim; i += 2) {
      double angle = p / std::pow(10000.0, static_cast<double>(i) / dim);
      pe(p, i) = static_cast<T>(std::sin(angle));
      if (i + 1 < dim) pe(p, i + 1) = static_cast<T>(std::cos(angle));
    }
  return pe;
}

template <typename T>
Mat<T> causalMask(int n) {
  Mat<T> m = Mat<T>::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) m(i, j) = T(-1e9);
  return m;
}

}  // namespace tgen::ad
