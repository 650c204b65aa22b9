#pragma once

#include <bit>
#include <cstdint>
#include <vector>

#include "pits/digest.hpp"

namespace pits {

/// Open-addressing map from packed node addresses to digests. The tree's
/// insert path does two lookups per level, which makes a flat table with
/// linear probing worth having over a node-based map. Keys never use depth
/// 0xff, so the all-ones key can serve as the empty slot marker. No erase;
/// the tree only ever clears the whole table.
class NodeTable {
  static constexpr uint64_t kEmpty = ~uint64_t(0);

 public:
  NodeTable() { rehash(1024); }

  const Digest* find(uint64_t key) const {
    for (std::size_t i = probe(key);; i = (i + 1) & mask_) {
      if (keys_[i] == key) return &values_[i];
      if (keys_[i] == kEmpty) return nullptr;
    }
  }

  void insert_or_assign(uint64_t key, const Digest& value) {
    if ((size_ + 1) * 10 >= keys_.size() * 7) rehash(keys_.size() * 2);
    for (std::size_t i = probe(key);; i = (i + 1) & mask_) {
      if (keys_[i] == key) {
        values_[i] = value;
        return;
      }
      if (keys_[i] == kEmpty) {
        keys_[i] = key;
        values_[i] = value;
        ++size_;
        return;
      }
    }
  }

  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }

  void clear() {
    keys_.assign(keys_.size(), kEmpty);
    size_ = 0;
  }

  template <typename Fn>
  void for_each(Fn&& fn) const {
    for (std::size_t i = 0; i < keys_.size(); ++i)
      if (keys_[i] != kEmpty) fn(keys_[i], values_[i]);
  }

  bool operator==(const NodeTable& other) const {
    if (size_ != other.size_) return false;
    bool equal = true;
    for_each([&](uint64_t key, const Digest& value) {
      if (equal) {
        const Digest* theirs = other.find(key);
        equal = theirs && *theirs == value;
      }
    });
    return equal;
  }

  std::size_t memory_bytes() const {
    return keys_.size() * (sizeof(uint64_t) + kDigestSize);
  }

 private:
  std::size_t probe(uint64_t key) const {
    return std::size_t((key * 0x9e3779b97f4a7c15ull) >> shift_) & mask_;
  }

  void rehash(std::size_t capacity) {
    std::vector<uint64_t> old_keys = std::move(keys_);
    std::vector<Digest> old_values = std::move(values_);
    keys_.assign(capacity, kEmpty);
    values_.assign(capacity, Digest{});
    mask_ = capacity - 1;
    shift_ = 64 - unsigned(std::countr_zero(capacity));
    size_ = 0;
    for (std::size_t i = 0; i < old_keys.size(); ++i)
      if (old_keys[i] != kEmpty) insert_or_assign(old_keys[i], old_values[i]);
  }

  std::vector<uint64_t> keys_;
  std::vector<Digest> values_;
  std::size_t mask_ = 0;
  unsigned shift_ = 64;
  std::size_t size_ = 0;
};

}  // namespace pits
