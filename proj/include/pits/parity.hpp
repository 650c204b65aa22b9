#pragma once

#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "pits/rng.hpp"
#include "pits/tree.hpp"

namespace pits {

/// Secret list of digest bit positions; extracting those bits from each
/// sub-epoch node yields the stored parity.
struct ParitySecret {
  std::vector<uint16_t> positions;

  bool operator==(const ParitySecret&) const = default;
};

/// size_p distinct positions sampled without replacement, uniformly.
inline ParitySecret gen_secret(unsigned size_p, unsigned digest_bits,
                               RandomSource& rng) {
  if (size_p == 0 || size_p > digest_bits || digest_bits > kDigestBits ||
      size_p > 64)
    fail(Err::invalid_params, "bad secret shape");
  std::vector<uint16_t> pool(digest_bits);
  std::iota(pool.begin(), pool.end(), uint16_t(0));
  ParitySecret s;
  s.positions.reserve(size_p);
  for (unsigned i = 0; i < size_p; ++i) {
    uint64_t j = i + uniform_below(rng, digest_bits - i);
    std::swap(pool[i], pool[j]);
    s.positions.push_back(pool[i]);
  }
  return s;
}

/// Bit j of the word is the digest bit addressed by positions[j].
inline uint64_t parity_word(const Digest& d, const ParitySecret& secret) {
  uint64_t w = 0;
  for (std::size_t j = 0; j < secret.positions.size(); ++j)
    w |= uint64_t(d.bit(secret.positions[j])) << j;
  return w;
}

inline std::vector<uint64_t> extract_parity(std::span<const Digest> level,
                                            const ParitySecret& secret,
                                            unsigned depth_p) {
  if (level.size() != (std::size_t(1) << depth_p))
    fail(Err::wrong_length, "level width is not 2^depth_p");
  std::vector<uint64_t> out;
  out.reserve(level.size());
  for (const auto& d : level) out.push_back(parity_word(d, secret));
  return out;
}

/// Per-epoch retained state: the published root plus the private secret and
/// parity. With the omit-empty extension, `occupancy` marks populated
/// sub-epochs and `parity` holds words for those only, in index order.
struct ParityRecord {
  EpochId epoch = 0;
  Digest root;
  ParitySecret secret;
  std::vector<uint64_t> parity;
  std::optional<std::vector<uint8_t>> occupancy;  // 2^depth_p bits, MSB-first
  uint8_t depth_p = 0;
  uint16_t size_p = 0;

  bool operator==(const ParityRecord&) const = default;
};

inline bool occupancy_bit(const std::vector<uint8_t>& bits, std::size_t i) {
  return (bits[i >> 3] >> (7 - (i & 7))) & 1u;
}

inline void set_occupancy_bit(std::vector<uint8_t>& bits, std::size_t i) {
  bits[i >> 3] |= uint8_t(1) << (7 - (i & 7));
}

/// Closes the tree: draws a fresh secret, extracts the parity at depth_p and
/// marks the tree finalized. With `omit_empty`, sub-epochs whose node equals
/// the all-empty digest carry no parity word.
inline ParityRecord finalize_tree(PitsTree& tree, RandomSource& rng,
                                  bool omit_empty = false) {
  if (tree.finalized()) fail(Err::already_finalized);
  const TreeParams& p = tree.params();

  ParityRecord rec;
  rec.epoch = tree.epoch();
  rec.depth_p = p.depth_p;
  rec.size_p = p.size_p;
  rec.root = tree.root();
  rec.secret = gen_secret(p.size_p, kDigestBits, rng);

  const std::vector<Digest> level = tree.level_hashes(p.depth_p);
  if (omit_empty) {
    const Digest& empty = tree.empty_at(p.depth_p);
    rec.occupancy.emplace((level.size() + 7) / 8, uint8_t(0));
    for (std::size_t i = 0; i < level.size(); ++i) {
      if (level[i] == empty) continue;
      set_occupancy_bit(*rec.occupancy, i);
      rec.parity.push_back(parity_word(level[i], rec.secret));
    }
  } else {
    rec.parity = extract_parity(level, rec.secret, p.depth_p);
  }
  tree.mark_finalized();
  return rec;
}

/// Sub-epoch indices whose recomputed parity disagrees with the stored one,
/// ascending. `empty_at_depth_p` is only consulted in omit-empty mode.
inline std::vector<uint32_t> compare_parity(const ParityRecord& stored,
                                            std::span<const Digest> candidate,
                                            const Digest& empty_at_depth_p) {
  if (candidate.size() != (std::size_t(1) << stored.depth_p))
    fail(Err::wrong_length, "candidate level width");
  std::vector<uint32_t> out;
  if (!stored.occupancy) {
    if (stored.parity.size() != candidate.size())
      fail(Err::wrong_length, "stored parity width");
    for (std::size_t i = 0; i < candidate.size(); ++i)
      if (parity_word(candidate[i], stored.secret) != stored.parity[i])
        out.push_back(uint32_t(i));
    return out;
  }
  std::size_t rank = 0;
  for (std::size_t i = 0; i < candidate.size(); ++i) {
    const bool was_occupied = occupancy_bit(*stored.occupancy, i);
    const bool is_occupied = !(candidate[i] == empty_at_depth_p);
    if (was_occupied) {
      const uint64_t w = stored.parity[rank++];
      if (!is_occupied || parity_word(candidate[i], stored.secret) != w)
        out.push_back(uint32_t(i));
    } else if (is_occupied) {
      out.push_back(uint32_t(i));
    }
  }
  return out;
}

}  // namespace pits
