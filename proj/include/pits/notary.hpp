#pragma once

#include <cctype>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pits/chain.hpp"
#include "pits/parity.hpp"
#include "pits/receipt.hpp"
#include "pits/record_io.hpp"
#include "pits/rng.hpp"
#include "pits/tree.hpp"
#include "pits/wire.hpp"

namespace pits {

/// Wall clock in Unix milliseconds; injectable for simulated runs.
using Clock = std::function<int64_t()>;

inline int64_t system_now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

inline Clock system_clock() { return &system_now_ms; }

/// Storage lifecycle of a finalized (device, epoch). Stages only advance.
enum class RetentionStage : uint8_t {
  full_tree = 0,
  leaves_only = 1,
  parity_only = 2,
  roots_only = 3,
};

constexpr const char* to_string(RetentionStage s) {
  switch (s) {
    case RetentionStage::full_tree: return "full-tree";
    case RetentionStage::leaves_only: return "leaves-only";
    case RetentionStage::parity_only: return "parity-only";
    case RetentionStage::roots_only: return "roots-only";
  }
  return "?";
}

/// "leaves:1,parity:24,roots:8760" advances a finalized epoch to each stage
/// once it is that many epochs old. Unlisted stages never trigger.
struct RetentionSchedule {
  std::optional<uint64_t> leaves_after;
  std::optional<uint64_t> parity_after;
  std::optional<uint64_t> roots_after;

  static RetentionSchedule parse(const std::string& spec) {
    RetentionSchedule s;
    std::size_t pos = 0;
    while (pos < spec.size()) {
      auto comma = spec.find(',', pos);
      auto item = spec.substr(pos, comma == std::string::npos ? comma : comma - pos);
      auto colon = item.find(':');
      if (colon == std::string::npos) fail(Err::invalid_params, "retention item: " + item);
      auto stage = item.substr(0, colon);
      uint64_t after = std::stoull(item.substr(colon + 1));
      if (stage == "leaves") s.leaves_after = after;
      else if (stage == "parity") s.parity_after = after;
      else if (stage == "roots") s.roots_after = after;
      else fail(Err::invalid_params, "unknown retention stage: " + stage);
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    return s;
  }

  std::optional<RetentionStage> target_for_age(uint64_t epochs_old) const {
    std::optional<RetentionStage> t;
    if (leaves_after && epochs_old >= *leaves_after) t = RetentionStage::leaves_only;
    if (parity_after && epochs_old >= *parity_after) t = RetentionStage::parity_only;
    if (roots_after && epochs_old >= *roots_after) t = RetentionStage::roots_only;
    return t;
  }
};

enum class InconsistencyKind : uint8_t { chain_mismatch, truncation, late_submission };

constexpr const char* to_string(InconsistencyKind k) {
  switch (k) {
    case InconsistencyKind::chain_mismatch: return "chain-mismatch";
    case InconsistencyKind::truncation: return "truncation";
    case InconsistencyKind::late_submission: return "late-submission";
  }
  return "?";
}

/// Forensic record of a batch that failed a check. Immutable once written.
struct InconsistencyRecord {
  std::string device;
  EpochId epoch = 0;
  uint64_t seq = 0;
  InconsistencyKind kind = InconsistencyKind::chain_mismatch;
  std::vector<BatchEntry> entries;
  std::optional<Digest> received_chain;
  int64_t detected_at_ms = 0;

  bool operator==(const InconsistencyRecord&) const = default;
};

namespace wire {

inline json to_json(const InconsistencyRecord& r) {
  json entries = json::array();
  for (const auto& e : r.entries)
    entries.push_back(json{{"ts", e.ts}, {"digest", e.digest.hex()}});
  return json{{"device", r.device},
              {"epoch", r.epoch},
              {"seq", r.seq},
              {"kind", pits::to_string(r.kind)},
              {"entries", std::move(entries)},
              {"received_chain",
               r.received_chain ? json(r.received_chain->hex()) : json(nullptr)},
              {"detected_at_ms", r.detected_at_ms}};
}

inline InconsistencyRecord inconsistency_from_json(const json& j) {
  InconsistencyRecord r;
  r.device = j.at("device").get<std::string>();
  r.epoch = j.at("epoch").get<uint64_t>();
  r.seq = j.at("seq").get<uint64_t>();
  auto kind = j.at("kind").get<std::string>();
  if (kind == "chain-mismatch") r.kind = InconsistencyKind::chain_mismatch;
  else if (kind == "truncation") r.kind = InconsistencyKind::truncation;
  else if (kind == "late-submission") r.kind = InconsistencyKind::late_submission;
  else fail(Err::io_error, "unknown inconsistency kind: " + kind);
  for (const auto& e : j.at("entries")) {
    BatchEntry be;
    be.ts = e.at("ts").get<uint64_t>();
    be.digest = parse_digest(e.at("digest").get<std::string>());
    r.entries.push_back(be);
  }
  if (!j.at("received_chain").is_null())
    r.received_chain = parse_digest(j.at("received_chain").get<std::string>());
  r.detected_at_ms = j.at("detected_at_ms").get<int64_t>();
  return r;
}

}  // namespace wire

struct SubmitAck {
  enum class Status { ok, flagged, replay };
  Status status = Status::ok;
  Digest chain_value;  // echo of the accepted value
  std::optional<InconsistencyRecord> inconsistency;
};

struct FinalizeSummary {
  EpochId epoch = 0;
  Digest root;
  std::size_t private_body_bytes = 0;
};

struct ReceiptResult {
  Receipt receipt;
  bool partial = false;
};

struct AuditResult {
  std::vector<uint32_t> mismatched_subepochs;
  std::vector<InconsistencyRecord> inconsistencies;
  TreeParams params;
};

struct NotaryConfig {
  TreeParams params;
  std::filesystem::path data_dir;  // empty: in-memory only
  uint32_t grace_seconds = 60;
  bool omit_empty_parity = false;
  RetentionSchedule retention;
};

/// The trusted log notary: ingests batches, verifies forward integrity,
/// finalizes per-epoch trees, persists parity records and serves receipts,
/// updates, roots and audits.
class Notary {
 public:
  explicit Notary(NotaryConfig cfg, Clock clock = system_clock(),
                  RandomSource rng = os_random())
      : cfg_(std::move(cfg)), clock_(std::move(clock)), rng_(std::move(rng)) {
    cfg_.params.validate();
    if (!cfg_.data_dir.empty()) load_persisted();
  }

  const NotaryConfig& config() const { return cfg_; }

  bool device_known(const std::string& device) const {
    return devices_.count(device) != 0;
  }

  SubmitAck submit_batch(const LogBatch& batch) {
    validate_batch(batch);
    auto dev_it = devices_.find(batch.device);
    if (dev_it == devices_.end()) {
      if (!batch.boundary)
        fail(Err::unknown_device, "first contact must carry a boundary");
      dev_it = register_device(batch.device, batch.epoch, *batch.boundary);
    }
    Device& dev = dev_it->second;

    if (batch.epoch > dev.current_epoch) {
      if (!batch.boundary)
        fail(Err::malformed_batch, "future-epoch batch without boundary");
      roll_epoch(batch.device, dev, batch.epoch, *batch.boundary);
    }

    auto es_it = dev.epochs.find(batch.epoch);
    if (es_it == dev.epochs.end()) {
      // stale epoch the notary never saw while it was open
      record_inconsistency(make_record(batch, InconsistencyKind::late_submission));
      fail(Err::epoch_finalized, "epoch closed before this batch arrived");
    }
    EpochState& es = es_it->second;

    // at-least-once delivery: an identical batch is acknowledged, not
    // re-applied, even after the epoch has since been finalized
    const Digest batch_id = batch_digest(batch);
    if (auto seen = es.seen_batches.find(batch.seq); seen != es.seen_batches.end()) {
      if (!(seen->second == batch_id))
        fail(Err::malformed_batch, "sequence number reused with different content");
      return SubmitAck{SubmitAck::Status::replay, es.chain_baseline, std::nullopt};
    }

    if (es.finalized) {
      record_inconsistency(make_record(batch, InconsistencyKind::late_submission));
      fail(Err::epoch_finalized);
    }

    SubmitAck ack;
    ack.chain_value = batch.chain_value;
    if (!verify_batch_chain(es.chain_baseline,
                            std::span<const BatchEntry>(batch.entries),
                            batch.chain_value)) {
      ack.status = SubmitAck::Status::flagged;
      ack.inconsistency = make_record(batch, InconsistencyKind::chain_mismatch);
      record_inconsistency(*ack.inconsistency);
    }

    // entries are preserved in the tree either way; a flagged batch is
    // forensic input, not garbage
    for (const auto& e : batch.entries) {
      try {
        es.tree.add_log(e.ts, e.digest);
      } catch (const Error& err) {
        if (err.code() != Err::duplicate_digest) throw;
      }
    }
    es.chain_baseline = batch.chain_value;
    es.seen_batches.emplace(batch.seq, batch_id);
    return ack;
  }

  FinalizeSummary finalize_epoch(const std::string& device, EpochId epoch) {
    Device& dev = device_ref(device);
    EpochState& es = epoch_ref(dev, epoch);
    return finalize_locked(device, dev, epoch, es, /*enforce_time=*/true);
  }

  ReceiptResult get_receipt(const std::string& device, EpochId epoch,
                            const Digest& log_digest, TimestampOffset ts) {
    Device& dev = device_ref(device);
    EpochState& es = epoch_ref(dev, epoch);
    if (es.stage > RetentionStage::leaves_only)
      fail(Err::tree_pruned, "retention advanced past leaves-only");

    if (!es.finalized) {
      const int64_t now = clock_();
      const EpochId now_epoch = cfg_.params.epoch_of_ms(now);
      uint64_t now_offset = 0;
      if (now_epoch > epoch)
        now_offset = uint64_t(1) << cfg_.params.size_ts;
      else if (now_epoch == epoch)
        now_offset = cfg_.params.offset_of(cfg_.params.tick_of_ms(now, epoch));
      return {partial_receipt(es.tree, log_digest, ts, now_offset), true};
    }
    if (!es.tree.branches_present()) {
      // leaves-only: branches are rebuilt on demand
      PitsTree rebuilt = es.tree.rebuilt();
      return {calc_receipt(rebuilt, log_digest, ts), false};
    }
    return {calc_receipt(es.tree, log_digest, ts), false};
  }

  ReceiptUpdate get_update(const std::string& device, EpochId epoch) {
    Device& dev = device_ref(device);
    EpochState& es = epoch_ref(dev, epoch);
    if (!es.update) fail(Err::no_published_root, "epoch not finalized yet");
    return *es.update;
  }

  Digest get_root(const std::string& device, EpochId epoch) {
    Device& dev = device_ref(device);
    EpochState& es = epoch_ref(dev, epoch);
    if (!es.published_root) fail(Err::no_published_root);
    return *es.published_root;
  }

  AuditResult audit(const std::string& device, EpochId epoch,
                    std::span<const Digest> candidate_level) {
    Device& dev = device_ref(device);
    EpochState& es = epoch_ref(dev, epoch);
    if (!es.record) fail(Err::unknown_epoch, "no parity record for epoch");
    if (es.stage >= RetentionStage::roots_only)
      fail(Err::tree_pruned, "parity pruned; only the root remains");
    AuditResult out;
    out.mismatched_subepochs = compare_parity(
        *es.record, candidate_level, empty_for_params().at(cfg_.params.depth_p));
    out.inconsistencies = inconsistencies_for(device, epoch);
    out.params = cfg_.params;
    return out;
  }

  std::vector<InconsistencyRecord> inconsistencies_for(const std::string& device,
                                                       EpochId epoch) const {
    std::vector<InconsistencyRecord> out;
    for (const auto& r : inconsistencies_)
      if (r.device == device && r.epoch == epoch) out.push_back(r);
    return out;
  }

  void advance_retention(const std::string& device, EpochId epoch,
                         RetentionStage target) {
    Device& dev = device_ref(device);
    EpochState& es = epoch_ref(dev, epoch);
    if (!es.finalized) fail(Err::invalid_transition, "epoch not finalized");
    if (target <= es.stage) fail(Err::invalid_transition, "stage only advances");
    if (target >= RetentionStage::leaves_only && es.tree.branches_present())
      es.tree.drop_branches();
    if (target >= RetentionStage::parity_only) es.tree.clear_leaves();
    if (target >= RetentionStage::roots_only && es.record) {
      es.record->secret.positions.clear();
      es.record->parity.clear();
      es.record->occupancy.reset();
    }
    es.stage = target;
    persist_record(device, es, epoch);
  }

  RetentionStage retention_stage(const std::string& device, EpochId epoch) {
    return epoch_ref(device_ref(device), epoch).stage;
  }

  /// Grace-timeout finalization and scheduled retention advancement.
  void maintenance() {
    const int64_t now = clock_();
    const EpochId now_epoch = cfg_.params.epoch_of_ms(now);
    for (auto& [device, dev] : devices_) {
      for (auto& [epoch, es] : dev.epochs) {
        if (!es.finalized) {
          const int64_t deadline = cfg_.params.epoch_start_ms(epoch + 1) +
                                   int64_t(cfg_.grace_seconds) * 1000;
          if ((es.closed && now_epoch > epoch) || now >= deadline)
            finalize_locked(device, dev, epoch, es, false);
        }
        if (es.finalized && now_epoch > epoch) {
          const uint64_t age = now_epoch - epoch;
          if (auto target = cfg_.retention.target_for_age(age);
              target && *target > es.stage) {
            advance_retention(device, epoch, *target);
          }
        }
      }
    }
  }

  /// Private per-epoch record (notary-side use only; never serialized onto
  /// the wire API).
  const ParityRecord& stored_record(const std::string& device, EpochId epoch) {
    EpochState& es = epoch_ref(device_ref(device), epoch);
    if (!es.record) fail(Err::unknown_epoch, "no record");
    return *es.record;
  }

  EpochId current_epoch(const std::string& device) {
    return device_ref(device).current_epoch;
  }

  std::vector<EpochId> known_epochs(const std::string& device) {
    std::vector<EpochId> out;
    for (const auto& [e, es] : device_ref(device).epochs) out.push_back(e);
    return out;
  }

 private:
  struct EpochState {
    PitsTree tree;
    Digest chain_baseline;
    bool closed = false;     // boundary for the next epoch was processed
    bool close_ok = false;   // that boundary's h_ep matched
    bool finalized = false;
    RetentionStage stage = RetentionStage::full_tree;
    std::optional<Digest> published_root;
    std::optional<ReceiptUpdate> update;
    std::optional<ParityRecord> record;
    std::map<uint64_t, Digest> seen_batches;  // seq -> batch digest

    explicit EpochState(PitsTree t) : tree(std::move(t)) {}
  };

  struct Device {
    EpochId current_epoch = 0;
    std::map<EpochId, EpochState> epochs;
  };

  void validate_batch(const LogBatch& batch) const {
    if (batch.device.empty() || batch.device.size() > 128)
      fail(Err::malformed_batch, "bad device id");
    for (char c : batch.device)
      if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_'))
        fail(Err::malformed_batch, "device id contains path characters");
    for (const auto& e : batch.entries)
      if (e.ts >> cfg_.params.size_ts)
        fail(Err::malformed_batch, "entry offset beyond 2^size_ts");
  }

  std::map<std::string, Device>::iterator register_device(
      const std::string& device, EpochId epoch, const Boundary& boundary) {
    Device dev;
    dev.current_epoch = epoch;
    dev.epochs.emplace(epoch, EpochState(PitsTree(cfg_.params, epoch)));
    dev.epochs.at(epoch).chain_baseline = boundary.h0;
    auto [it, inserted] = devices_.emplace(device, std::move(dev));
    return it;
  }

  void roll_epoch(const std::string& device, Device& dev, EpochId new_epoch,
                  const Boundary& boundary) {
    auto prev_it = dev.epochs.find(dev.current_epoch);
    if (prev_it != dev.epochs.end() && !prev_it->second.closed) {
      EpochState& prev = prev_it->second;
      prev.closed = true;
      prev.close_ok =
          boundary.h_ep && close_epoch_check(prev.chain_baseline, *boundary.h_ep);
      if (!prev.close_ok) {
        InconsistencyRecord rec;
        rec.device = device;
        rec.epoch = dev.current_epoch;
        rec.kind = InconsistencyKind::truncation;
        rec.received_chain = boundary.h_ep;
        rec.detected_at_ms = clock_();
        record_inconsistency(rec);
      }
    }
    dev.current_epoch = new_epoch;
    auto [it, inserted] =
        dev.epochs.emplace(new_epoch, EpochState(PitsTree(cfg_.params, new_epoch)));
    if (inserted) it->second.chain_baseline = boundary.h0;
  }

  FinalizeSummary finalize_locked(const std::string& device, Device& dev,
                                  EpochId epoch, EpochState& es,
                                  bool enforce_time) {
    if (es.finalized) fail(Err::already_finalized);
    if (enforce_time) {
      const int64_t now = clock_();
      const int64_t epoch_end = cfg_.params.epoch_start_ms(epoch + 1);
      const int64_t deadline = epoch_end + int64_t(cfg_.grace_seconds) * 1000;
      if (now < epoch_end) fail(Err::epoch_not_ended);
      if (!es.closed && now < deadline)
        fail(Err::epoch_not_ended, "boundary pending and grace not expired");
    }
    if (!es.closed) {
      // grace expired without the closing h_ep: treat as truncation
      InconsistencyRecord rec;
      rec.device = device;
      rec.epoch = epoch;
      rec.kind = InconsistencyKind::truncation;
      rec.detected_at_ms = clock_();
      record_inconsistency(rec);
    }

    es.record = finalize_tree(es.tree, rng_, cfg_.omit_empty_parity);
    es.published_root = es.record->root;
    es.update = ReceiptUpdate{epoch, es.tree.level_hashes(cfg_.params.depth_u)};
    es.stage = RetentionStage::full_tree;
    es.finalized = true;
    persist_record(device, es, epoch);

    FinalizeSummary s;
    s.epoch = epoch;
    s.root = *es.published_root;
    s.private_body_bytes = serialize_record_body(*es.record, false).size();
    return s;
  }

  Device& device_ref(const std::string& device) {
    auto it = devices_.find(device);
    if (it == devices_.end()) fail(Err::unknown_device, device);
    return it->second;
  }

  EpochState& epoch_ref(Device& dev, EpochId epoch) {
    auto it = dev.epochs.find(epoch);
    if (it == dev.epochs.end()) fail(Err::unknown_epoch);
    return it->second;
  }

  InconsistencyRecord make_record(const LogBatch& b, InconsistencyKind kind) const {
    InconsistencyRecord rec;
    rec.device = b.device;
    rec.epoch = b.epoch;
    rec.seq = b.seq;
    rec.kind = kind;
    rec.entries = b.entries;
    rec.received_chain = b.chain_value;
    rec.detected_at_ms = clock_();
    return rec;
  }

  void record_inconsistency(const InconsistencyRecord& rec) {
    inconsistencies_.push_back(rec);
    if (cfg_.data_dir.empty()) return;
    auto path = cfg_.data_dir / rec.device / "inconsistencies.jsonl";
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::app);
    out << wire::to_json(rec).dump() << '\n';
  }

  static Digest batch_digest(const LogBatch& b) {
    std::vector<uint8_t> buf;
    auto put_u64 = [&](uint64_t v) {
      for (int i = 0; i < 8; ++i) buf.push_back(uint8_t(v >> (8 * i)));
    };
    put_u64(b.epoch);
    put_u64(b.seq);
    for (const auto& e : b.entries) {
      put_u64(e.ts);
      buf.insert(buf.end(), e.digest.bytes.begin(), e.digest.bytes.end());
    }
    buf.insert(buf.end(), b.chain_value.bytes.begin(), b.chain_value.bytes.end());
    return sha256(std::span<const uint8_t>(buf));
  }

  const EmptyHashes& empty_for_params() {
    if (!empty_) empty_ = EmptyHashes::for_height(cfg_.params.size_ts);
    return *empty_;
  }

  void persist_record(const std::string& device, const EpochState& es,
                      EpochId epoch) {
    if (cfg_.data_dir.empty() || !es.record) return;
    RecordFile rf;
    rf.device = device;
    rf.params = cfg_.params;
    rf.record = *es.record;
    rf.roots_only = es.stage >= RetentionStage::roots_only;
    write_record_file(record_path(device, epoch), rf);
  }

  std::filesystem::path record_path(const std::string& device, EpochId epoch) const {
    return cfg_.data_dir / device / (std::to_string(epoch) + ".rec");
  }

  void load_persisted() {
    namespace fs = std::filesystem;
    if (!fs::exists(cfg_.data_dir)) return;
    for (const auto& dev_dir : fs::directory_iterator(cfg_.data_dir)) {
      if (!dev_dir.is_directory()) continue;
      const std::string device = dev_dir.path().filename().string();
      for (const auto& f : fs::directory_iterator(dev_dir.path())) {
        if (f.path().extension() != ".rec") continue;
        RecordFile rf = read_record_file(f.path());
        Device& dev = devices_[device];
        EpochId epoch = rf.record.epoch;
        auto [it, ok] =
            dev.epochs.emplace(epoch, EpochState(PitsTree(cfg_.params, epoch)));
        EpochState& es = it->second;
        es.finalized = true;
        es.closed = true;
        es.record = rf.record;
        es.published_root = rf.record.root;
        // the live tree did not survive; receipts for this epoch are gone
        es.tree.mark_finalized();
        es.tree.drop_branches();
        es.tree.clear_leaves();
        es.stage = rf.roots_only ? RetentionStage::roots_only
                                 : RetentionStage::parity_only;
        dev.current_epoch = std::max(dev.current_epoch, epoch);
      }
      auto jl = dev_dir.path() / "inconsistencies.jsonl";
      if (fs::exists(jl)) {
        std::ifstream in(jl);
        std::string line;
        while (std::getline(in, line)) {
          if (line.empty()) continue;
          inconsistencies_.push_back(
              wire::inconsistency_from_json(nlohmann::json::parse(line)));
        }
      }
    }
  }

  NotaryConfig cfg_;
  Clock clock_;
  RandomSource rng_;
  std::map<std::string, Device> devices_;
  std::vector<InconsistencyRecord> inconsistencies_;
  std::optional<EmptyHashes> empty_;
};

}  // namespace pits
