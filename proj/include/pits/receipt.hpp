#pragma once

#include <bit>
#include <cstdint>
#include <optional>
#include <vector>

#include "pits/tree.hpp"

namespace pits {

/// Other log digests sharing the leaf, plus where this log sits among the
/// full ascending list.
struct CoLeaf {
  std::vector<Digest> digests;
  uint32_t position = 0;

  bool operator==(const CoLeaf&) const = default;
};

/// Proof of inclusion for one log. `poi` holds the non-empty sibling hashes
/// leaf-adjacent first; bit k of `bitmap` marks whether the sibling of the
/// k-th fold step (depth size_ts - k) was included or is all-empty.
/// partial_depth is 0 for a full receipt, depth_u when the proof stops at the
/// update depth.
struct Receipt {
  EpochId epoch = 0;
  TimestampOffset ts = 0;
  Digest log_digest;
  CoLeaf co_leaf;
  std::vector<Digest> poi;
  uint64_t bitmap = 0;
  uint32_t partial_depth = 0;

  bool operator==(const Receipt&) const = default;
};

/// All 2^depth_u node values at the update depth, published after the epoch
/// closes so partial receipts can be completed offline.
struct ReceiptUpdate {
  EpochId epoch = 0;
  std::vector<Digest> level;

  bool operator==(const ReceiptUpdate&) const = default;

  std::size_t hash_bytes() const { return level.size() * kDigestSize; }
};

namespace detail {

inline std::pair<const std::vector<Digest>*, uint32_t> locate_log(
    const PitsTree& tree, const Digest& log, TimestampOffset ts) {
  auto it = tree.leaves().find(ts);
  if (it == tree.leaves().end()) fail(Err::unknown_log, "no leaf at timestamp");
  const auto& co = it->second;
  auto pos = std::lower_bound(co.begin(), co.end(), log);
  if (pos == co.end() || !(*pos == log)) fail(Err::unknown_log, "digest not at leaf");
  return {&co, uint32_t(pos - co.begin())};
}

inline Receipt receipt_to_depth(const PitsTree& tree, const Digest& log,
                                TimestampOffset ts, unsigned stop_depth) {
  auto [co, position] = locate_log(tree, log, ts);
  Receipt r;
  r.epoch = tree.epoch();
  r.ts = ts;
  r.log_digest = log;
  r.co_leaf.position = position;
  r.co_leaf.digests.reserve(co->size() - 1);
  for (uint32_t i = 0; i < co->size(); ++i)
    if (i != position) r.co_leaf.digests.push_back((*co)[i]);

  const unsigned size_ts = tree.params().size_ts;
  for (unsigned k = 0; k < size_ts - stop_depth; ++k) {
    if (const Digest* sibling = tree.node(size_ts - k, (ts >> k) ^ 1)) {
      r.poi.push_back(*sibling);
      r.bitmap |= uint64_t(1) << k;
    }
  }
  r.partial_depth = stop_depth;
  return r;
}

}  // namespace detail

/// Full proof of inclusion; requires the log to be present in the tree.
inline Receipt calc_receipt(const PitsTree& tree, const Digest& log,
                            TimestampOffset ts) {
  return detail::receipt_to_depth(tree, log, ts, 0);
}

/// Proof up to depth_u, available as soon as the covering branch's time
/// window has passed. `now_offset` is the current time expressed on the
/// leaf-address scale of this tree's epoch (it may exceed the epoch span).
inline Receipt partial_receipt(const PitsTree& tree, const Digest& log,
                               TimestampOffset ts, uint64_t now_offset) {
  const auto& p = tree.params();
  const unsigned span_bits = p.size_ts - p.depth_u;
  const uint64_t window_end = ((ts >> span_bits) + 1) << span_bits;
  if (now_offset < window_end) fail(Err::branch_not_final);
  return detail::receipt_to_depth(tree, log, ts, p.depth_u);
}

/// Recomputes the leaf from the co-leaf rule.
inline Digest receipt_leaf_value(const Receipt& r) {
  if (r.co_leaf.digests.empty()) return r.log_digest;
  std::vector<Digest> all = r.co_leaf.digests;
  all.insert(all.begin() + r.co_leaf.position, r.log_digest);
  return leaf_digest(all);
}

/// Accepts iff folding the receipt bottom-up, substituting the all-empty
/// digest wherever the bitmap bit is clear, reproduces `root`.
inline bool verify_receipt(const Receipt& r, const Digest& root,
                           const TreeParams& params) {
  const unsigned size_ts = params.size_ts;
  if (r.partial_depth != 0) fail(Err::malformed_receipt, "receipt is partial");
  if (std::size_t(std::popcount(r.bitmap)) != r.poi.size())
    fail(Err::malformed_receipt, "bitmap population disagrees with poi length");
  if (size_ts < 64 && (r.bitmap >> size_ts))
    fail(Err::malformed_receipt, "bitmap bits beyond tree height");
  if (r.co_leaf.position > r.co_leaf.digests.size())
    fail(Err::malformed_receipt, "co-leaf position out of range");
  if (r.ts >> size_ts) return false;

  const EmptyHashes empty = EmptyHashes::for_height(size_ts);
  Digest cur = receipt_leaf_value(r);
  std::size_t next = 0;
  for (unsigned k = 0; k < size_ts; ++k) {
    const Digest sibling =
        (r.bitmap >> k) & 1 ? r.poi[next++] : empty.at(size_ts - k);
    cur = ((r.ts >> k) & 1) ? sha256_pair(sibling, cur)
                            : sha256_pair(cur, sibling);
  }
  return cur == root;
}

/// Root implied by an update: pairwise fold of the published level.
inline Digest fold_update(const ReceiptUpdate& u, const TreeParams& params) {
  if (u.level.size() != params.update_width()) fail(Err::wrong_length);
  std::vector<Digest> lvl = u.level;
  while (lvl.size() > 1) {
    std::vector<Digest> next(lvl.size() / 2);
    for (std::size_t i = 0; i < next.size(); ++i)
      next[i] = sha256_pair(lvl[2 * i], lvl[2 * i + 1]);
    lvl = std::move(next);
  }
  return lvl[0];
}

inline bool verify_update(const ReceiptUpdate& u, const Digest& root,
                          const TreeParams& params) {
  return fold_update(u, params) == root;
}

/// Completes a partial receipt with the siblings derivable from the published
/// update. When `trusted_root` is given, the update must fold to it.
inline Receipt finalize_receipt(const Receipt& partial, const ReceiptUpdate& update,
                                const TreeParams& params,
                                const Digest* trusted_root = nullptr) {
  if (partial.partial_depth != params.depth_u)
    fail(Err::malformed_receipt, "not a partial receipt at depth_u");
  if (update.epoch != partial.epoch) fail(Err::epoch_mismatch);
  if (update.level.size() != params.update_width()) fail(Err::wrong_length);

  const EmptyHashes empty = EmptyHashes::for_height(params.size_ts);
  Receipt full = partial;
  full.partial_depth = 0;

  std::vector<Digest> lvl = update.level;
  uint64_t pos = partial.ts >> (params.size_ts - params.depth_u);
  for (unsigned depth = params.depth_u; depth > 0; --depth) {
    const Digest& sibling = lvl[pos ^ 1];
    if (!(sibling == empty.at(depth))) {
      full.poi.push_back(sibling);
      full.bitmap |= uint64_t(1) << (params.size_ts - depth);
    }
    std::vector<Digest> next(lvl.size() / 2);
    for (std::size_t i = 0; i < next.size(); ++i)
      next[i] = sha256_pair(lvl[2 * i], lvl[2 * i + 1]);
    lvl = std::move(next);
    pos >>= 1;
  }
  if (trusted_root && !(lvl[0] == *trusted_root)) fail(Err::update_inconsistent);
  return full;
}

}  // namespace pits
