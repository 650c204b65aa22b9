#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "pits/digest.hpp"
#include "pits/empty_hashes.hpp"
#include "pits/errors.hpp"
#include "pits/node_table.hpp"
#include "pits/params.hpp"

namespace pits {

/// Leaf value for one or more logs sharing a timestamp: the lone digest
/// itself, or H over the ascending concatenation when the leaf is shared.
inline Digest leaf_digest(std::span<const Digest> sorted_co_leaf) {
  if (sorted_co_leaf.size() == 1) return sorted_co_leaf.front();
  std::vector<uint8_t> buf;
  buf.reserve(sorted_co_leaf.size() * kDigestSize);
  for (const auto& d : sorted_co_leaf)
    buf.insert(buf.end(), d.bytes.begin(), d.bytes.end());
  return sha256(std::span<const uint8_t>(buf));
}

/// Sparse binary hash tree over one epoch, leaves addressed by timestamp
/// offsets. Inner nodes exist only where the subtree holds at least one log;
/// absent branches resolve to the all-empty digest for their depth.
class PitsTree {
 public:
  /// Every populated leaf keeps its constituent log digests sorted ascending.
  using LeafMap = std::map<TimestampOffset, std::vector<Digest>>;

  PitsTree(TreeParams params, EpochId epoch)
      : params_(params),
        epoch_(epoch),
        empty_(EmptyHashes::for_height(params.size_ts)) {
    params_.validate();
  }

  static PitsTree from_leaves(const TreeParams& params, EpochId epoch,
                              const LeafMap& leaves) {
    PitsTree t(params, epoch);
    for (const auto& [ts, co] : leaves)
      for (const auto& d : co) t.add_log(ts, d);
    return t;
  }

  /// Inserts a log digest at its timestamp and refreshes the path to the
  /// root. Returns the new root.
  Digest add_log(TimestampOffset ts, const Digest& log) {
    if (finalized_) fail(Err::tree_finalized);
    if (!branches_) fail(Err::tree_pruned, "branch nodes dropped");
    if (ts >> params_.size_ts) fail(Err::offset_out_of_range);

    auto& co = leaves_[ts];
    auto pos = std::lower_bound(co.begin(), co.end(), log);
    if (pos != co.end() && *pos == log) fail(Err::duplicate_digest);
    co.insert(pos, log);

    Digest cur = leaf_digest(co);
    uint64_t idx = ts;
    nodes_.insert_or_assign(key(params_.size_ts, idx), cur);
    for (unsigned depth = params_.size_ts; depth > 0; --depth) {
      const Digest sibling = node_or_empty(depth, idx ^ 1);
      cur = (idx & 1) ? sha256_pair(sibling, cur) : sha256_pair(cur, sibling);
      idx >>= 1;
      nodes_.insert_or_assign(key(depth - 1, idx), cur);
    }
    return cur;
  }

  Digest root() const {
    require_branches();
    const Digest* r = nodes_.find(key(0, 0));
    return r ? *r : empty_.at(0);
  }

  /// All 2^depth node values at a depth, empty branches included.
  std::vector<Digest> level_hashes(unsigned depth) const {
    if (depth > params_.size_ts) fail(Err::depth_out_of_range);
    require_branches();
    std::vector<Digest> out(size_t(1) << depth, empty_.at(depth));
    const unsigned shift = params_.size_ts - depth;
    for (const auto& [ts, co] : leaves_) {
      uint64_t idx = ts >> shift;
      out[idx] = *nodes_.find(key(depth, idx));
    }
    return out;
  }

  const Digest* node(unsigned depth, uint64_t index) const {
    return nodes_.find(key(depth, index));
  }

  Digest node_or_empty(unsigned depth, uint64_t index) const {
    const Digest* n = node(depth, index);
    return n ? *n : empty_.at(depth);
  }

  const TreeParams& params() const { return params_; }
  EpochId epoch() const { return epoch_; }
  const LeafMap& leaves() const { return leaves_; }
  const Digest& empty_at(unsigned depth) const { return empty_.at(depth); }

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t leaf_count() const { return leaves_.size(); }

  std::size_t log_count() const {
    std::size_t n = 0;
    for (const auto& [ts, co] : leaves_) n += co.size();
    return n;
  }

  bool finalized() const { return finalized_; }
  void mark_finalized() { finalized_ = true; }

  bool branches_present() const { return branches_; }

  /// Drops all inner nodes, keeping the leaves; a tree in this state serves
  /// no queries itself but can be rebuilt via from_leaves.
  void drop_branches() {
    nodes_ = NodeTable();
    branches_ = false;
  }

  void clear_leaves() { leaves_.clear(); }

  /// Rebuilds a queryable copy from retained leaves.
  PitsTree rebuilt() const {
    PitsTree t = from_leaves(params_, epoch_, leaves_);
    if (finalized_) t.mark_finalized();
    return t;
  }

  bool same_nodes(const PitsTree& other) const { return nodes_ == other.nodes_; }

  /// Rough live-memory footprint, split by what each retention stage keeps.
  std::size_t branch_bytes() const { return nodes_.memory_bytes(); }
  std::size_t leaf_bytes() const {
    std::size_t n = 0;
    for (const auto& [ts, co] : leaves_)
      n += sizeof(TimestampOffset) + co.size() * kDigestSize;
    return n;
  }

 private:
  static uint64_t key(unsigned depth, uint64_t index) {
    return (uint64_t(depth) << 56) | index;  // size_ts <= 56 per validation
  }

  void require_branches() const {
    if (!branches_) fail(Err::tree_pruned, "branch nodes dropped");
  }

  TreeParams params_;
  EpochId epoch_;
  EmptyHashes empty_;
  NodeTable nodes_;
  LeafMap leaves_;
  bool finalized_ = false;
  bool branches_ = true;
};

}  // namespace pits
