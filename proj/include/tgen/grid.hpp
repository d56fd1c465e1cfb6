#pragma once

#include <vector>

#include "tgen/common.hpp"

namespace tgen {

// T x N grid of discrete codes: one N-vector of codebook entries per frame.
struct TokenGrid {
  int frames = 0;
  int codebooks = 0;
  std::vector<int> codes;  // row-major, frames x codebooks

  TokenGrid() = default;
  TokenGrid(int t, int n, int fill = 0) : frames(t), codebooks(n), codes(static_cast<size_t>(t) * n, fill) {}

  int& at(int t, int n) { return codes[static_cast<size_t>(t) * codebooks + n]; }
  int at(int t, int n) const { return codes[static_cast<size_t>(t) * codebooks + n]; }
  bool empty() const { return frames == 0; }

  bool operator==(const TokenGrid& o) const {
    return frames == o.frames && codebooks == o.codebooks && codes == o.codes;
  }

  // Leading slice of at most `n` frames.
  TokenGrid head(int n) const {
    int t = std::min(n, frames);
    TokenGrid out(t, codebooks);
    std::copy(codes.begin(), codes.begin() + static_cast<size_t>(t) * codebooks, out.codes.begin());
    return out;
  }

  void appendFrame(const std::vector<int>& frame) {
    if (static_cast<int>(frame.size()) != codebooks) throw DomainError("appendFrame: codebook count mismatch");
    codes.insert(codes.end(), frame.begin(), frame.end());
    ++frames;
  }

  void validateRange(int vocab) const {
    for (int c : codes)
      if (c < 0 || c >= vocab) throw DomainError("TokenGrid code out of range");
  }
};

}  // namespace tgen
