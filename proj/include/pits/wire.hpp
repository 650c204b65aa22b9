#pragma once

// JSON encodings of everything that crosses the wire API. Digests are
// lowercase hex, timestamps and epochs decimal integers, parity never
// appears (records stay private to the notary).

#include <json.hpp>

#include "pits/chain.hpp"
#include "pits/params.hpp"
#include "pits/receipt.hpp"

namespace pits::wire {

using nlohmann::json;

inline json to_json(const TreeParams& p) {
  return json{{"size_ts", p.size_ts},
              {"depth_p", p.depth_p},
              {"size_p", p.size_p},
              {"depth_u", p.depth_u},
              {"epoch_seconds", p.epoch_seconds},
              {"tick_hz", p.tick_hz},
              {"counter_bits", p.counter_bits},
              {"hash_id", "sha256"}};
}

inline TreeParams params_from_json(const json& j) {
  TreeParams p;
  p.size_ts = j.at("size_ts").get<uint8_t>();
  p.depth_p = j.at("depth_p").get<uint8_t>();
  p.size_p = j.at("size_p").get<uint16_t>();
  p.depth_u = j.at("depth_u").get<uint8_t>();
  p.epoch_seconds = j.at("epoch_seconds").get<uint32_t>();
  if (j.contains("tick_hz")) p.tick_hz = j.at("tick_hz").get<uint32_t>();
  if (j.contains("counter_bits")) p.counter_bits = j.at("counter_bits").get<uint8_t>();
  if (j.value("hash_id", "sha256") != std::string("sha256"))
    fail(Err::invalid_params, "unsupported hash_id");
  p.validate();
  return p;
}

inline json to_json(const LogBatch& b) {
  json entries = json::array();
  for (const auto& e : b.entries)
    entries.push_back(json{{"ts", e.ts}, {"digest", e.digest.hex()}});
  json j{{"device", b.device},
         {"epoch", b.epoch},
         {"seq", b.seq},
         {"entries", std::move(entries)},
         {"chain_value", b.chain_value.hex()}};
  if (b.boundary) {
    json bd{{"h0", b.boundary->h0.hex()}};
    bd["h_ep"] = b.boundary->h_ep ? json(b.boundary->h_ep->hex()) : json(nullptr);
    j["boundary"] = std::move(bd);
  }
  return j;
}

inline LogBatch batch_from_json(const json& j) {
  LogBatch b;
  try {
    b.device = j.at("device").get<std::string>();
    b.epoch = j.at("epoch").get<uint64_t>();
    b.seq = j.at("seq").get<uint64_t>();
    for (const auto& e : j.at("entries")) {
      BatchEntry be;
      be.ts = e.at("ts").get<uint64_t>();
      be.digest = parse_digest(e.at("digest").get<std::string>());
      b.entries.push_back(be);
    }
    b.chain_value = parse_digest(j.at("chain_value").get<std::string>());
    if (j.contains("boundary") && !j.at("boundary").is_null()) {
      Boundary bd;
      bd.h0 = parse_digest(j.at("boundary").at("h0").get<std::string>());
      const auto& hep = j.at("boundary").at("h_ep");
      if (!hep.is_null()) bd.h_ep = parse_digest(hep.get<std::string>());
      b.boundary = std::move(bd);
    }
  } catch (const json::exception& e) {
    fail(Err::malformed_batch, e.what());
  }
  return b;
}

inline json to_json(const Receipt& r) {
  json poi = json::array();
  for (const auto& d : r.poi) poi.push_back(d.hex());
  json co = json::array();
  for (const auto& d : r.co_leaf.digests) co.push_back(d.hex());
  return json{{"epoch", r.epoch},
              {"ts", r.ts},
              {"digest", r.log_digest.hex()},
              {"co_leaf", {{"digests", std::move(co)}, {"position", r.co_leaf.position}}},
              {"poi", std::move(poi)},
              {"bitmap", r.bitmap},
              {"partial_depth", r.partial_depth}};
}

inline Receipt receipt_from_json(const json& j) {
  Receipt r;
  try {
    r.epoch = j.at("epoch").get<uint64_t>();
    r.ts = j.at("ts").get<uint64_t>();
    r.log_digest = parse_digest(j.at("digest").get<std::string>());
    for (const auto& d : j.at("co_leaf").at("digests"))
      r.co_leaf.digests.push_back(parse_digest(d.get<std::string>()));
    r.co_leaf.position = j.at("co_leaf").at("position").get<uint32_t>();
    for (const auto& d : j.at("poi"))
      r.poi.push_back(parse_digest(d.get<std::string>()));
    r.bitmap = j.at("bitmap").get<uint64_t>();
    r.partial_depth = j.at("partial_depth").get<uint32_t>();
  } catch (const json::exception& e) {
    fail(Err::malformed_receipt, e.what());
  }
  return r;
}

inline json to_json(const ReceiptUpdate& u) {
  json level = json::array();
  for (const auto& d : u.level) level.push_back(d.hex());
  return json{{"epoch", u.epoch}, {"level", std::move(level)}};
}

inline ReceiptUpdate update_from_json(const json& j) {
  ReceiptUpdate u;
  try {
    u.epoch = j.at("epoch").get<uint64_t>();
    for (const auto& d : j.at("level"))
      u.level.push_back(parse_digest(d.get<std::string>()));
  } catch (const json::exception& e) {
    fail(Err::wrong_length, e.what());
  }
  return u;
}

inline std::vector<Digest> level_from_json(const json& j) {
  std::vector<Digest> level;
  for (const auto& d : j)
    level.push_back(parse_digest(d.get<std::string>()));
  return level;
}

inline json level_to_json(std::span<const Digest> level) {
  json out = json::array();
  for (const auto& d : level) out.push_back(d.hex());
  return out;
}

}  // namespace pits::wire
