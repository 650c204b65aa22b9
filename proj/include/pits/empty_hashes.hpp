#pragma once

#include <vector>

#include "pits/digest.hpp"
#include "pits/errors.hpp"

namespace pits {

/// Digests of all-empty subtrees, one per tree depth. E[size_ts] is the hash
/// of the zero-length byte string; E[y] = H(E[y+1] || E[y+1]).
class EmptyHashes {
 public:
  static EmptyHashes for_height(unsigned size_ts) {
    EmptyHashes t;
    t.by_depth_.resize(size_ts + 1);
    t.by_depth_[size_ts] = sha256(std::span<const uint8_t>{});
    for (unsigned y = size_ts; y > 0; --y)
      t.by_depth_[y - 1] = sha256_pair(t.by_depth_[y], t.by_depth_[y]);
    return t;
  }

  const Digest& at(unsigned depth) const {
    if (depth >= by_depth_.size()) fail(Err::depth_out_of_range);
    return by_depth_[depth];
  }

  unsigned height() const { return unsigned(by_depth_.size()) - 1; }

 private:
  std::vector<Digest> by_depth_;
};

}  // namespace pits
