#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "pits/bitio.hpp"
#include "pits/parity.hpp"
#include "pits/params.hpp"

namespace pits {

/// Persisted record file, one per (device, epoch).
///
/// Header (all integers little-endian):
///   magic "PITS" | version u8 | hash_id u8 | size_ts u8 | depth_p u8 |
///   depth_u u8 | size_p u16 | flags u8 | epoch u64 | device-id (u16 len + bytes)
/// Body:
///   roots-only:  root
///   otherwise:   root || secret (one byte per position) ||
///                parity (size_p bits per word, packed) || [occupancy bits]
///
/// flags: bit 0: occupancy present; bit 1: body reduced to the root.
struct RecordFile {
  static constexpr uint8_t kVersion = 1;
  static constexpr uint8_t kFlagOccupancy = 0x01;
  static constexpr uint8_t kFlagRootsOnly = 0x02;

  std::string device;
  TreeParams params;  // epoch_seconds/tick_hz are not part of the file
  ParityRecord record;
  bool roots_only = false;
};

namespace detail {

inline void put_u16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(uint8_t(v));
  out.push_back(uint8_t(v >> 8));
}

inline void put_u64(std::vector<uint8_t>& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(uint8_t(v >> (8 * i)));
}

struct ByteReader {
  std::span<const uint8_t> data;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > data.size()) fail(Err::io_error, "record truncated");
  }
  uint8_t u8() { need(1); return data[pos++]; }
  uint16_t u16() { need(2); uint16_t v = uint16_t(data[pos]) | uint16_t(data[pos + 1]) << 8; pos += 2; return v; }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(data[pos + i]) << (8 * i);
    pos += 8;
    return v;
  }
  std::span<const uint8_t> raw(std::size_t n) {
    need(n);
    auto s = data.subspan(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace detail

/// Private body: root || secret || parity [|| occupancy]. Its size is what
/// the per-epoch storage bound talks about.
inline std::vector<uint8_t> serialize_record_body(const ParityRecord& rec,
                                                  bool roots_only) {
  std::vector<uint8_t> out(rec.root.bytes.begin(), rec.root.bytes.end());
  if (roots_only) return out;
  for (uint16_t p : rec.secret.positions) {
    if (p > 0xff) fail(Err::invalid_params, "secret position exceeds one byte");
    out.push_back(uint8_t(p));
  }
  BitWriter bw;
  for (uint64_t w : rec.parity) bw.put(w, rec.size_p);
  auto parity_bytes = bw.take();
  out.insert(out.end(), parity_bytes.begin(), parity_bytes.end());
  if (rec.occupancy)
    out.insert(out.end(), rec.occupancy->begin(), rec.occupancy->end());
  return out;
}

inline std::vector<uint8_t> serialize_record(const RecordFile& rf) {
  std::vector<uint8_t> out = {'P', 'I', 'T', 'S'};
  out.push_back(RecordFile::kVersion);
  out.push_back(uint8_t(rf.params.hash_id));
  out.push_back(rf.params.size_ts);
  out.push_back(rf.record.depth_p);
  out.push_back(rf.params.depth_u);
  detail::put_u16(out, rf.record.size_p);
  uint8_t flags = 0;
  if (rf.record.occupancy) flags |= RecordFile::kFlagOccupancy;
  if (rf.roots_only) flags |= RecordFile::kFlagRootsOnly;
  out.push_back(flags);
  detail::put_u64(out, rf.record.epoch);
  if (rf.device.size() > 0xffff) fail(Err::invalid_params, "device id too long");
  detail::put_u16(out, uint16_t(rf.device.size()));
  out.insert(out.end(), rf.device.begin(), rf.device.end());

  auto body = serialize_record_body(rf.record, rf.roots_only);
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

inline RecordFile parse_record(std::span<const uint8_t> data) {
  detail::ByteReader r{data};
  auto magic = r.raw(4);
  if (!(magic[0] == 'P' && magic[1] == 'I' && magic[2] == 'T' && magic[3] == 'S'))
    fail(Err::io_error, "bad magic");
  if (r.u8() != RecordFile::kVersion) fail(Err::io_error, "unsupported version");

  RecordFile rf;
  rf.params.hash_id = HashId(r.u8());
  rf.params.size_ts = r.u8();
  rf.params.depth_p = r.u8();
  rf.params.depth_u = r.u8();
  rf.params.size_p = r.u16();
  uint8_t flags = r.u8();
  rf.roots_only = flags & RecordFile::kFlagRootsOnly;
  rf.record.epoch = r.u64();
  uint16_t dev_len = r.u16();
  auto dev = r.raw(dev_len);
  rf.device.assign(dev.begin(), dev.end());

  rf.record.depth_p = rf.params.depth_p;
  rf.record.size_p = rf.params.size_p;
  auto root = r.raw(kDigestSize);
  std::copy(root.begin(), root.end(), rf.record.root.bytes.begin());
  if (rf.roots_only) return rf;

  auto secret = r.raw(rf.params.size_p);
  rf.record.secret.positions.assign(secret.begin(), secret.end());

  const std::size_t subepochs = std::size_t(1) << rf.params.depth_p;
  const bool has_occupancy = flags & RecordFile::kFlagOccupancy;
  const std::size_t occ_bytes = has_occupancy ? (subepochs + 7) / 8 : 0;
  if (data.size() < r.pos + occ_bytes) fail(Err::io_error, "record truncated");
  const std::size_t parity_bytes = data.size() - r.pos - occ_bytes;

  std::size_t words = subepochs;
  std::vector<uint8_t> occupancy;
  if (has_occupancy) {
    occupancy.assign(data.end() - occ_bytes, data.end());
    words = 0;
    for (std::size_t i = 0; i < subepochs; ++i)
      if (occupancy_bit(occupancy, i)) ++words;
  }
  if (parity_bytes != (words * rf.params.size_p + 7) / 8)
    fail(Err::io_error, "parity length mismatch");

  BitReader br(r.raw(parity_bytes));
  rf.record.parity.reserve(words);
  for (std::size_t i = 0; i < words; ++i)
    rf.record.parity.push_back(br.get(rf.params.size_p));
  if (has_occupancy) rf.record.occupancy = std::move(occupancy);
  return rf;
}

inline void write_record_file(const std::filesystem::path& path,
                              const RecordFile& rf) {
  auto bytes = serialize_record(rf);
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Err::io_error, "cannot open " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            std::streamsize(bytes.size()));
  if (!out) fail(Err::io_error, "short write to " + path.string());
}

inline RecordFile read_record_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Err::io_error, "cannot open " + path.string());
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  return parse_record(bytes);
}

}  // namespace pits
