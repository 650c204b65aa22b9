#pragma once

#include <cstdint>

#include "pits/digest.hpp"
#include "pits/errors.hpp"

namespace pits {

/// Count of epoch_seconds intervals since the Unix epoch.
using EpochId = uint64_t;

/// Leaf address within an epoch's tree: tick since epoch start, shifted left
/// by counter_bits, plus a per-tick counter. Fits in size_ts bits.
using TimestampOffset = uint64_t;

struct TreeParams {
  uint8_t size_ts = 22;        // bit width of leaf addresses = tree height
  uint8_t depth_p = 12;        // tree depth of the parity information
  uint16_t size_p = 16;        // parity bits per sub-epoch
  uint8_t depth_u = 10;        // tree depth of the receipt update
  uint32_t epoch_seconds = 3600;
  uint32_t tick_hz = 1000;     // native log resolution (ticks per second)
  uint8_t counter_bits = 0;    // low-order bits reserved for same-tick logs
  HashId hash_id = HashId::sha256;

  bool operator==(const TreeParams&) const = default;

  uint64_t leaf_count() const { return uint64_t(1) << size_ts; }
  uint64_t epoch_ticks() const { return uint64_t(epoch_seconds) * tick_hz; }
  int64_t epoch_ms() const { return int64_t(epoch_seconds) * 1000; }
  uint64_t subepoch_count() const { return uint64_t(1) << depth_p; }
  uint64_t update_width() const { return uint64_t(1) << depth_u; }

  void validate() const {
    if (hash_id != HashId::sha256) fail(Err::invalid_params, "unsupported hash_id");
    if (size_ts < 1 || size_ts > 56) fail(Err::invalid_params, "size_ts out of range");
    if (depth_p < 1 || depth_p > size_ts) fail(Err::invalid_params, "depth_p out of range");
    if (depth_u < 1 || depth_u > size_ts) fail(Err::invalid_params, "depth_u out of range");
    if (size_p < 1 || size_p > 64 || size_p > kDigestBits)
      fail(Err::invalid_params, "size_p out of range");
    if (epoch_seconds == 0 || tick_hz == 0) fail(Err::invalid_params, "zero duration");
    if (counter_bits >= size_ts) fail(Err::invalid_params, "counter_bits out of range");
    // counter bits sit below both the parity and the update depth so that
    // sub-epoch and branch windows stay pure time intervals
    if (counter_bits > size_ts - depth_p || counter_bits > size_ts - depth_u)
      fail(Err::invalid_params, "counter_bits overlap depth_p/depth_u");
    // the address space must cover a whole epoch at native resolution
    if (epoch_ticks() > (uint64_t(1) << (size_ts - counter_bits)))
      fail(Err::invalid_params, "epoch does not fit in size_ts bits");
  }

  EpochId epoch_of_ms(int64_t unix_ms) const {
    return EpochId(unix_ms / epoch_ms());
  }

  int64_t epoch_start_ms(EpochId epoch) const {
    return int64_t(epoch) * epoch_ms();
  }

  /// Tick index within the epoch for an absolute time. Caller guarantees the
  /// time falls inside the epoch.
  uint64_t tick_of_ms(int64_t unix_ms, EpochId epoch) const {
    int64_t rel = unix_ms - epoch_start_ms(epoch);
    return uint64_t(rel) * tick_hz / 1000;
  }

  /// Ticks stretched over the full address space, so that the top depth_p
  /// bits of an address split the epoch into equal time slices. Injective
  /// because 2^(size_ts - counter_bits) >= epoch_ticks; the identity when
  /// the epoch exactly fills the address space.
  uint64_t scaled_tick(uint64_t tick) const {
    const uint64_t space = uint64_t(1) << (size_ts - counter_bits);
    return uint64_t((unsigned __int128)(tick)*space / epoch_ticks());
  }

  uint64_t tick_of_scaled(uint64_t scaled) const {
    const uint64_t space = uint64_t(1) << (size_ts - counter_bits);
    return uint64_t(((unsigned __int128)(scaled)*epoch_ticks() + space - 1) /
                    space);
  }

  TimestampOffset offset_of(uint64_t tick, uint64_t counter = 0) const {
    return (scaled_tick(tick) << counter_bits) | counter;
  }

  /// Absolute time (ms, start of tick) for a leaf address. Exact: scaling
  /// never merges two ticks into one address.
  int64_t ms_of_offset(EpochId epoch, TimestampOffset offset) const {
    uint64_t tick = tick_of_scaled(offset >> counter_bits);
    return epoch_start_ms(epoch) + int64_t(tick * 1000 / tick_hz);
  }

  /// Sub-epoch index covering a leaf address.
  uint32_t subepoch_of(TimestampOffset offset) const {
    return uint32_t(offset >> (size_ts - depth_p));
  }

  /// Milliseconds per sub-epoch (may be fractional).
  double subepoch_ms() const {
    return double(epoch_ms()) / double(subepoch_count());
  }
};

}  // namespace pits
