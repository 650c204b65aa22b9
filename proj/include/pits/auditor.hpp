#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "pits/agent.hpp"
#include "pits/client.hpp"

namespace pits {

/// One flagged sub-epoch as an absolute time interval [start_ms, end_ms).
/// exact_ts_ms collects the timestamps of contradicting receipts whose path
/// falls inside the window.
struct TamperWindow {
  uint32_t subepoch = 0;
  double start_ms = 0;
  double end_ms = 0;
  std::vector<int64_t> exact_ts_ms;

  bool operator==(const TamperWindow&) const = default;
};

struct ReceiptEvidence {
  Digest digest;
  TimestampOffset ts_offset = 0;
  bool corroborates = false;  // false: contradicts (evidence of deletion)
};

struct LocalizationResult {
  std::string device;
  EpochId epoch = 0;
  bool root_match = false;
  Digest published_root;
  Digest recomputed_root;
  std::vector<TamperWindow> tampered_windows;
  std::vector<InconsistencyRecord> chain_inconsistencies;
  std::vector<ReceiptEvidence> receipt_evidence;
  std::vector<std::string> warnings;
};

/// The validator: rebuilds a device's tree from its (possibly tampered) log
/// store, checks the published root, and localizes deviations through the
/// notary's parity audit.
class Auditor {
 public:
  explicit Auditor(TreeParams params) : params_(std::move(params)) {
    params_.validate();
  }

  static std::vector<LogEntry> read_snapshot(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(Err::snapshot_unreadable, "cannot open " + path.string());
    std::vector<LogEntry> out;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      out.push_back(detail::parse_store_line(line));
    }
    return out;
  }

  /// Rebuilds the epoch's tree exactly the way the monitored node addressed
  /// it: entries in store order, same per-tick counter assignment. Duplicate
  /// (ts, digest) pairs collapse, matching the notary's idempotent insert.
  PitsTree rebuild_tree(EpochId epoch, std::span<const LogEntry> snapshot) const {
    PitsTree tree(params_, epoch);
    OffsetAssigner assigner;
    for (const auto& e : snapshot) {
      if (params_.epoch_of_ms(e.ts_ms) != epoch) continue;
      const TimestampOffset off = assigner.assign(params_, epoch, e.ts_ms);
      try {
        tree.add_log(off, e.digest);
      } catch (const Error& err) {
        if (err.code() != Err::duplicate_digest) throw;
      }
    }
    return tree;
  }

  LocalizationResult audit_device(std::span<const LogEntry> snapshot,
                                  const std::string& device, EpochId epoch,
                                  NotaryClient& client) const {
    LocalizationResult res;
    res.device = device;
    res.epoch = epoch;
    // the published root is the trust anchor, not the audit response
    res.published_root = client.get_root(device, epoch);

    PitsTree tree = rebuild_tree(epoch, snapshot);
    res.recomputed_root = tree.root();
    res.root_match = res.recomputed_root == res.published_root;
    res.chain_inconsistencies = client.get_inconsistencies(device, epoch);
    if (res.root_match) return res;

    auto level = tree.level_hashes(params_.depth_p);
    AuditResult audit = client.audit(device, epoch, level);
    for (uint32_t idx : audit.mismatched_subepochs)
      res.tampered_windows.push_back(window_for(epoch, idx));
    res.chain_inconsistencies = audit.inconsistencies;
    return res;
  }

  /// Marks each receipt as corroborating (its log is present in the snapshot)
  /// or contradicting (deleted), annotating overlapped windows with the exact
  /// timestamp. Receipts that fail verification are excluded with a warning.
  void cross_check_receipts(LocalizationResult& res,
                            std::span<const Receipt> receipts,
                            std::span<const LogEntry> snapshot) const {
    std::set<Digest> present;
    for (const auto& e : snapshot)
      if (params_.epoch_of_ms(e.ts_ms) == res.epoch) present.insert(e.digest);

    for (const auto& r : receipts) {
      bool ok = false;
      try {
        ok = r.epoch == res.epoch && verify_receipt(r, res.published_root, params_);
      } catch (const Error&) {
        ok = false;
      }
      if (!ok) {
        res.warnings.push_back("invalid receipt for digest " + r.log_digest.hex() +
                               " excluded");
        continue;
      }
      ReceiptEvidence ev;
      ev.digest = r.log_digest;
      ev.ts_offset = r.ts;
      ev.corroborates = present.count(r.log_digest) != 0;
      if (!ev.corroborates) {
        const uint32_t se = params_.subepoch_of(r.ts);
        const int64_t exact = params_.ms_of_offset(res.epoch, r.ts);
        for (auto& w : res.tampered_windows)
          if (w.subepoch == se) w.exact_ts_ms.push_back(exact);
      }
      res.receipt_evidence.push_back(std::move(ev));
    }
  }

  TamperWindow window_for(EpochId epoch, uint32_t subepoch) const {
    TamperWindow w;
    w.subepoch = subepoch;
    const double width = params_.subepoch_ms();
    const double start = double(params_.epoch_start_ms(epoch));
    w.start_ms = start + subepoch * width;
    w.end_ms = start + (subepoch + 1) * width;
    return w;
  }

  const TreeParams& params() const { return params_; }

 private:
  TreeParams params_;
};

namespace wire {

inline json to_json(const TamperWindow& w) {
  return json{{"subepoch", w.subepoch},
              {"start_ms", w.start_ms},
              {"end_ms", w.end_ms},
              {"exact_ts_ms", w.exact_ts_ms}};
}

inline json to_json(const LocalizationResult& r) {
  json windows = json::array();
  for (const auto& w : r.tampered_windows) windows.push_back(to_json(w));
  json inconsistencies = json::array();
  for (const auto& rec : r.chain_inconsistencies)
    inconsistencies.push_back(to_json(rec));
  json evidence = json::array();
  for (const auto& e : r.receipt_evidence)
    evidence.push_back(json{{"digest", e.digest.hex()},
                            {"ts", e.ts_offset},
                            {"verdict", e.corroborates ? "corroborates" : "contradicts"}});
  return json{{"device", r.device},
              {"epoch", r.epoch},
              {"root_match", r.root_match},
              {"published_root", r.published_root.hex()},
              {"recomputed_root", r.recomputed_root.hex()},
              {"tampered_windows", std::move(windows)},
              {"chain_inconsistencies", std::move(inconsistencies)},
              {"receipt_evidence", std::move(evidence)},
              {"warnings", r.warnings}};
}

}  // namespace wire

}  // namespace pits
