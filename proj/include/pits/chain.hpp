#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pits/digest.hpp"
#include "pits/params.hpp"

namespace pits {

/// Forward-integrity chain register on the monitored node. `current` is
/// overwritten on every link; prior values are never retained.
struct ChainState {
  EpochId epoch = 0;
  Digest current;
  uint64_t counter = 0;
};

/// h_i = H(h_{i-1} || h(l_i)). The caller overwrites its stored value.
inline Digest chain_extend(const Digest& prev, const Digest& log_digest) {
  return sha256_pair(prev, log_digest);
}

inline Digest fold_chain(Digest value, std::span<const Digest> log_digests) {
  for (const auto& d : log_digests) value = chain_extend(value, d);
  return value;
}

struct BatchEntry {
  TimestampOffset ts = 0;
  Digest digest;

  bool operator==(const BatchEntry&) const = default;
};

/// Epoch boundary announcement carried by the first batch of an epoch:
/// the previous epoch's final chain value and the fresh chain seed.
struct Boundary {
  Digest h0;
  std::optional<Digest> h_ep;  // absent only for a device's very first epoch

  bool operator==(const Boundary&) const = default;
};

/// One submission from a monitored node. Entries are in chain order (the
/// order the logs were created), not necessarily by timestamp.
struct LogBatch {
  std::string device;
  EpochId epoch = 0;
  uint64_t seq = 0;
  std::vector<BatchEntry> entries;
  Digest chain_value;
  std::optional<Boundary> boundary;

  bool operator==(const LogBatch&) const = default;
};

inline bool verify_batch_chain(const Digest& known,
                               std::span<const Digest> entries,
                               const Digest& claimed) {
  return fold_chain(known, entries) == claimed;
}

inline bool verify_batch_chain(const Digest& known,
                               std::span<const BatchEntry> entries,
                               const Digest& claimed) {
  Digest v = known;
  for (const auto& e : entries) v = chain_extend(v, e.digest);
  return v == claimed;
}

/// Epoch-close check: the claimed h_ep must equal the fold over everything
/// the notary received for the closing epoch. Rejection signals truncation.
inline bool close_epoch_check(const Digest& expected_final,
                              const Digest& claimed_h_ep) {
  return expected_final == claimed_h_ep;
}

}  // namespace pits
