#pragma once

#include <atomic>
#include <chrono>
#include <memory>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "pits/agent.hpp"
#include "pits/auditor.hpp"
#include "pits/client.hpp"
#include "pits/notary.hpp"

namespace pits::sim {

/// Manually advanced clock shared by every component of a scenario.
class SimClock {
 public:
  explicit SimClock(int64_t start_ms) : now_(std::make_shared<int64_t>(start_ms)) {}

  Clock fn() const {
    auto p = now_;
    return [p] { return *p; };
  }
  void set(int64_t t) { *now_ = t; }
  void advance(int64_t d) { *now_ += d; }
  int64_t now() const { return *now_; }

 private:
  std::shared_ptr<int64_t> now_;
};

/// Fault model at batch granularity for a synchronous at-least-once sender:
/// `drop` fails the call (half the time after the batch already landed, i.e.
/// a lost ack), `duplicate` re-delivers a batch, sometimes held back until
/// the next call so duplicates arrive out of order.
struct FaultSpec {
  double drop = 0.0;
  double duplicate = 0.0;
};

class FaultyClient final : public NotaryClient {
 public:
  FaultyClient(NotaryClient& inner, FaultSpec spec, RandomSource rng)
      : inner_(inner), spec_(spec), rng_(std::move(rng)) {}

  SubmitAck submit_batch(const LogBatch& batch) override {
    flush_held();
    if (chance(spec_.drop)) {
      if (chance(0.5)) quiet_deliver(batch);  // delivered, ack lost
      fail(Err::transport_error, "injected drop");
    }
    SubmitAck ack = inner_.submit_batch(batch);
    if (chance(spec_.duplicate)) {
      if (chance(0.5))
        quiet_deliver(batch);
      else
        held_ = batch;  // late duplicate, delivered before the next batch
    }
    return ack;
  }

  ReceiptResult get_receipt(const std::string& device, EpochId epoch,
                            const Digest& log_digest, TimestampOffset ts) override {
    return inner_.get_receipt(device, epoch, log_digest, ts);
  }
  ReceiptUpdate get_update(const std::string& device, EpochId epoch) override {
    return inner_.get_update(device, epoch);
  }
  Digest get_root(const std::string& device, EpochId epoch) override {
    return inner_.get_root(device, epoch);
  }
  AuditResult audit(const std::string& device, EpochId epoch,
                    std::span<const Digest> level) override {
    return inner_.audit(device, epoch, level);
  }
  std::vector<InconsistencyRecord> get_inconsistencies(const std::string& device,
                                                       EpochId epoch) override {
    return inner_.get_inconsistencies(device, epoch);
  }

 private:
  bool chance(double p) {
    if (p <= 0) return false;
    return double(rng_() >> 11) / double(uint64_t(1) << 53) < p;
  }

  void quiet_deliver(const LogBatch& b) {
    try {
      inner_.submit_batch(b);
    } catch (const Error&) {
      // a duplicate racing a finalized epoch is the notary's problem to log
    }
  }

  void flush_held() {
    if (!held_) return;
    auto b = std::move(*held_);
    held_.reset();
    quiet_deliver(b);
  }

  NotaryClient& inner_;
  FaultSpec spec_;
  RandomSource rng_;
  std::optional<LogBatch> held_;
};

enum class Action {
  none,                      // honest run
  modify,                    // post-hoc: change a stored log's content
  remove,                    // post-hoc: delete a log from the store
  insert,                    // post-hoc: add a fabricated log to the store
  pre_submission_tamper,     // alter a queued entry before it is sent
  truncate,                  // suppress the whole unsent tail and its trail
  multi_subepoch_obfuscate,  // post-hoc modifications across many sub-epochs
  wipe,                      // post-hoc: delete every log of the epoch
};

inline const char* to_string(Action a) {
  switch (a) {
    case Action::none: return "none";
    case Action::modify: return "modify";
    case Action::remove: return "delete";
    case Action::insert: return "insert";
    case Action::pre_submission_tamper: return "pre-submission-tamper";
    case Action::truncate: return "truncate";
    case Action::multi_subepoch_obfuscate: return "multi-subepoch-obfuscate";
    case Action::wipe: return "wipe";
  }
  return "?";
}

inline Action action_from_string(const std::string& s) {
  if (s == "none") return Action::none;
  if (s == "modify") return Action::modify;
  if (s == "delete" || s == "remove") return Action::remove;
  if (s == "insert") return Action::insert;
  if (s == "pre-submission-tamper") return Action::pre_submission_tamper;
  if (s == "truncate") return Action::truncate;
  if (s == "multi-subepoch-obfuscate") return Action::multi_subepoch_obfuscate;
  if (s == "wipe") return Action::wipe;
  fail(Err::invalid_params, "unknown scenario action: " + s);
}

/// Small-parameter defaults, fast enough for large seed sweeps.
inline TreeParams ci_params() {
  return TreeParams{.size_ts = 10,
                    .depth_p = 5,
                    .size_p = 4,
                    .depth_u = 3,
                    .epoch_seconds = 1,
                    .tick_hz = 1000};
}

struct Scenario {
  std::string name = "modify";
  Action action = Action::modify;
  unsigned background_devices = 0;
  unsigned logs = 60;
  unsigned alter_count = 1;  // victims for multi-subepoch-obfuscate
  unsigned shares = 4;       // logs shared with the interacting node
  TreeParams params = ci_params();
  FaultSpec faults;
  uint64_t seed = 1;
};

struct ScenarioOutcome {
  std::string name;
  uint64_t seed = 0;
  bool detected = false;
  bool root_match = true;
  std::vector<TamperWindow> localized_windows;
  std::vector<uint32_t> expected_subepochs;
  std::vector<std::string> inconsistency_kinds;
  unsigned receipts_contradicting = 0;
  unsigned receipts_corroborating = 0;

  bool operator==(const ScenarioOutcome&) const = default;
};

namespace wire {
using nlohmann::json;

inline json to_json(const ScenarioOutcome& o) {
  json windows = json::array();
  for (const auto& w : o.localized_windows)
    windows.push_back(pits::wire::to_json(w));
  return json{{"name", o.name},
              {"seed", o.seed},
              {"detected", o.detected},
              {"root_match", o.root_match},
              {"localized_windows", std::move(windows)},
              {"expected_subepochs", o.expected_subepochs},
              {"inconsistency_kinds", o.inconsistency_kinds},
              {"receipts_contradicting", o.receipts_contradicting},
              {"receipts_corroborating", o.receipts_corroborating}};
}
}  // namespace wire

inline ScenarioOutcome run_scenario(const Scenario& s) {
  const TreeParams& p = s.params;
  p.validate();
  if (s.logs < 8) fail(Err::invalid_params, "scenario needs at least 8 logs");
  SplitMix64 master(s.seed);
  auto sub_rng = [&](uint64_t salt) { return seeded_random(master() ^ salt); };

  const EpochId epoch0 = 1000000;
  const int64_t t0 = p.epoch_start_ms(epoch0);
  SimClock clock(t0);

  Notary notary(NotaryConfig{.params = p, .grace_seconds = 0}, clock.fn(),
                sub_rng(0xA));
  LocalClient local(notary);
  FaultyClient client(local, s.faults, sub_rng(0xB));

  Agent target(AgentConfig{.device = "dev0", .params = p}, clock.fn(), sub_rng(0xC));
  Agent peer(AgentConfig{.device = "peer0", .params = p}, clock.fn(), sub_rng(0xD));
  std::vector<std::unique_ptr<Agent>> background;
  for (unsigned i = 0; i < s.background_devices; ++i)
    background.push_back(std::make_unique<Agent>(
        AgentConfig{.device = "bg" + std::to_string(i), .params = p}, clock.fn(),
        sub_rng(0x100 + i)));

  RandomSource rng = sub_rng(0xE);
  std::vector<uint64_t> ticks;
  for (unsigned i = 0; i < s.logs; ++i)
    ticks.push_back(uniform_below(rng, p.epoch_ticks()));
  std::sort(ticks.begin(), ticks.end());

  // a handful of flush points; the last few logs always stay queued so the
  // pre-submission and truncation adversaries have something to reach
  const unsigned flush_cap = s.logs - 4;
  std::set<unsigned> flush_points;
  const unsigned batches = 2 + unsigned(uniform_below(rng, 3));
  while (flush_points.size() < batches)
    flush_points.insert(1 + unsigned(uniform_below(rng, flush_cap)));

  std::set<unsigned> share_points;
  while (share_points.size() < std::min<unsigned>(s.shares, s.logs))
    share_points.insert(unsigned(uniform_below(rng, s.logs)));

  auto flush_retrying = [&](Agent& a) {
    for (int attempt = 0; attempt < 256; ++attempt) {
      try {
        a.flush(client);
        return;
      } catch (const Error& e) {
        if (e.code() != Err::transport_error) throw;
      }
    }
    fail(Err::transport_error, "fault injection never let a batch through");
  };

  for (unsigned i = 0; i < s.logs; ++i) {
    clock.set(t0 + int64_t(ticks[i] * 1000 / p.tick_hz));
    auto entry = target.log_event("evt-" + std::to_string(i));
    if (share_points.count(i)) peer.ingest_shared(target.share(entry));
    for (auto& bg : background)
      if (i % 7 == 0) bg->log_event("bg-" + std::to_string(i));
    if (flush_points.count(i)) {
      flush_retrying(target);
      for (auto& bg : background) flush_retrying(*bg);
    }
  }

  // device-access adversaries act on the unsent tail before it goes out
  std::vector<uint32_t> expected;
  if (s.action == Action::pre_submission_tamper) {
    auto mark = target.compromise();
    const std::size_t victim = mark.queued() / 2;
    expected.push_back(p.subepoch_of(target.queue()[victim].ts));
    mark.replace_queued_digest(victim, random_digest(rng));
  } else if (s.action == Action::truncate) {
    auto mark = target.compromise();
    mark.truncate_queue(mark.queued());  // suppress the whole unsent batch
  }

  // cross into the next epoch; its boundary closes epoch0
  clock.set(p.epoch_start_ms(epoch0 + 1) + 5);
  target.log_event("next-epoch");
  flush_retrying(target);
  for (auto& bg : background) {
    bg->log_event("next-epoch");
    flush_retrying(*bg);
  }
  notary.maintenance();

  // the interacting node completes its receipts, now that the epoch closed
  std::vector<Receipt> receipts;
  if (const auto* inbox = peer.shared_from("dev0")) {
    for (const auto& [digest, ev] : *inbox) {
      try {
        receipts.push_back(peer.obtain_receipt(client, "dev0", digest).receipt);
      } catch (const Error&) {
        // UnknownLog here is itself forensic signal; the receipt is simply absent
      }
    }
  }

  // the validator's snapshot of the device's store, then post-hoc tampering
  std::vector<LogEntry> snapshot = target.local_store();
  std::vector<std::size_t> epoch0_at;
  for (std::size_t i = 0; i < snapshot.size(); ++i)
    if (p.epoch_of_ms(snapshot[i].ts_ms) == epoch0) epoch0_at.push_back(i);

  auto subepoch_of_entry = [&](const LogEntry& e) {
    return p.subepoch_of(p.offset_of(p.tick_of_ms(e.ts_ms, epoch0)));
  };
  auto pick_victim = [&] {
    return epoch0_at[uniform_below(rng, epoch0_at.size())];
  };

  switch (s.action) {
    case Action::modify: {
      auto& e = snapshot[pick_victim()];
      expected.push_back(subepoch_of_entry(e));
      e.content.push_back('!');
      e.digest = log_entry_digest(e.content, e.ts_ms);
      break;
    }
    case Action::remove: {
      std::size_t idx = pick_victim();
      expected.push_back(subepoch_of_entry(snapshot[idx]));
      snapshot.erase(snapshot.begin() + idx);
      break;
    }
    case Action::insert: {
      LogEntry e;
      e.ts_ms = t0 + int64_t(uniform_below(rng, uint64_t(p.epoch_ms())));
      e.content = {'f', 'a', 'k', 'e'};
      e.digest = log_entry_digest(e.content, e.ts_ms);
      expected.push_back(subepoch_of_entry(e));
      snapshot.push_back(e);
      break;
    }
    case Action::multi_subepoch_obfuscate: {
      std::set<uint32_t> hit;
      for (std::size_t idx : epoch0_at) {
        if (hit.size() >= s.alter_count) break;
        auto& e = snapshot[idx];
        uint32_t se = subepoch_of_entry(e);
        if (hit.count(se)) continue;
        hit.insert(se);
        e.content.push_back('?');
        e.digest = log_entry_digest(e.content, e.ts_ms);
      }
      expected.assign(hit.begin(), hit.end());
      break;
    }
    case Action::wipe: {
      std::set<uint32_t> populated;
      for (std::size_t idx : epoch0_at)
        populated.insert(subepoch_of_entry(snapshot[idx]));
      expected.assign(populated.begin(), populated.end());
      for (auto it = epoch0_at.rbegin(); it != epoch0_at.rend(); ++it)
        snapshot.erase(snapshot.begin() + *it);
      break;
    }
    default:
      break;
  }
  std::sort(expected.begin(), expected.end());
  expected.erase(std::unique(expected.begin(), expected.end()), expected.end());

  Auditor auditor(p);
  LocalizationResult res = auditor.audit_device(snapshot, "dev0", epoch0, local);
  auditor.cross_check_receipts(res, receipts, snapshot);

  ScenarioOutcome out;
  out.name = s.name;
  out.seed = s.seed;
  out.root_match = res.root_match;
  out.localized_windows = res.tampered_windows;
  out.expected_subepochs = expected;
  {
    std::set<std::string> kinds;
    for (const auto& r : res.chain_inconsistencies)
      kinds.insert(pits::to_string(r.kind));
    out.inconsistency_kinds.assign(kinds.begin(), kinds.end());
  }
  for (const auto& e : res.receipt_evidence)
    (e.corroborates ? out.receipts_corroborating : out.receipts_contradicting)++;

  const bool forward_flag =
      std::count(out.inconsistency_kinds.begin(), out.inconsistency_kinds.end(),
                 std::string("chain-mismatch")) ||
      std::count(out.inconsistency_kinds.begin(), out.inconsistency_kinds.end(),
                 std::string("truncation"));
  out.detected = !res.root_match || forward_flag;
  return out;
}

/// Monte-Carlo estimate of the one-in-2^size_p chance that a single-log
/// alteration slips past the parity of its sub-epoch.
struct MissTrialStats {
  unsigned trials = 0;
  unsigned missed = 0;
};

inline MissTrialStats parity_miss_trials(const TreeParams& params, unsigned trials,
                                         uint64_t seed,
                                         std::size_t logs_per_tree = 30) {
  RandomSource rng = seeded_random(seed);
  MissTrialStats stats;
  stats.trials = trials;
  for (unsigned t = 0; t < trials; ++t) {
    PitsTree tree(params, 0);
    std::vector<std::pair<TimestampOffset, Digest>> logs;
    for (std::size_t i = 0; i < logs_per_tree; ++i) {
      auto ts = uniform_below(rng, params.leaf_count());
      auto d = random_digest(rng);
      try {
        tree.add_log(ts, d);
        logs.emplace_back(ts, d);
      } catch (const Error&) {
      }
    }
    auto rec = finalize_tree(tree, rng);

    const auto& [victim_ts, victim_digest] = logs[uniform_below(rng, logs.size())];
    PitsTree tampered(params, 0);
    for (const auto& [ts, d] : logs)
      tampered.add_log(ts, ts == victim_ts && d == victim_digest
                               ? random_digest(rng)
                               : d);
    auto mism = compare_parity(rec, tampered.level_hashes(params.depth_p),
                               tampered.empty_at(params.depth_p));
    const uint32_t se = params.subepoch_of(victim_ts);
    if (std::find(mism.begin(), mism.end(), se) == mism.end()) ++stats.missed;
  }
  return stats;
}

struct BenchReport {
  std::size_t logs = 0;
  unsigned threads = 1;
  double insert_logs_per_sec = 0;
  double single_thread_logs_per_sec = 0;
  double receipts_per_sec = 0;
  double finalize_ms = 0;
  std::size_t node_count = 0;
  std::size_t leaf_count = 0;
  std::size_t full_tree_bytes = 0;
  std::size_t leaves_only_bytes = 0;
};

namespace wire {
inline json to_json(const BenchReport& b) {
  return json{{"logs", b.logs},
              {"threads", b.threads},
              {"insert_logs_per_sec", b.insert_logs_per_sec},
              {"single_thread_logs_per_sec", b.single_thread_logs_per_sec},
              {"receipts_per_sec", b.receipts_per_sec},
              {"finalize_ms", b.finalize_ms},
              {"node_count", b.node_count},
              {"leaf_count", b.leaf_count},
              {"full_tree_bytes", b.full_tree_bytes},
              {"leaves_only_bytes", b.leaves_only_bytes}};
}
}  // namespace wire

inline BenchReport bench(const TreeParams& params, std::size_t n, unsigned threads,
                         uint64_t seed = 42) {
  using clock = std::chrono::steady_clock;
  BenchReport report;
  report.logs = n;
  report.threads = threads;

  auto make_workload = [&](uint64_t salt, std::size_t count) {
    RandomSource rng = seeded_random(seed ^ salt);
    std::vector<std::pair<TimestampOffset, Digest>> w;
    w.reserve(count);
    for (std::size_t i = 0; i < count; ++i)
      w.emplace_back(uniform_below(rng, params.leaf_count()), random_digest(rng));
    return w;
  };

  // single-thread insert rate (the sanity-floor number)
  auto w0 = make_workload(0, n);
  PitsTree tree(params, 0);
  auto t_begin = clock::now();
  for (const auto& [ts, d] : w0) {
    try {
      tree.add_log(ts, d);
    } catch (const Error&) {
    }
  }
  auto t_end = clock::now();
  double secs = std::chrono::duration<double>(t_end - t_begin).count();
  report.single_thread_logs_per_sec = double(n) / secs;

  if (threads > 1) {
    std::vector<std::vector<std::pair<TimestampOffset, Digest>>> work;
    for (unsigned t = 0; t < threads; ++t)
      work.push_back(make_workload(t + 1, n / threads));
    std::vector<std::thread> pool;
    t_begin = clock::now();
    for (unsigned t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        PitsTree local(params, t);
        for (const auto& [ts, d] : work[t]) {
          try {
            local.add_log(ts, d);
          } catch (const Error&) {
          }
        }
      });
    for (auto& th : pool) th.join();
    t_end = clock::now();
    secs = std::chrono::duration<double>(t_end - t_begin).count();
    report.insert_logs_per_sec = double(n / threads * threads) / secs;
  } else {
    report.insert_logs_per_sec = report.single_thread_logs_per_sec;
  }

  report.node_count = tree.node_count();
  report.leaf_count = tree.leaf_count();
  report.full_tree_bytes = tree.branch_bytes() + tree.leaf_bytes();
  report.leaves_only_bytes = tree.leaf_bytes();

  t_begin = clock::now();
  RandomSource frng = seeded_random(seed ^ 0xF17);
  auto rec = finalize_tree(tree, frng);
  t_end = clock::now();
  report.finalize_ms =
      std::chrono::duration<double, std::milli>(t_end - t_begin).count();
  (void)rec;

  // receipt generation over the finalized tree; reads are concurrent
  const std::size_t per_thread = std::max<std::size_t>(1000, 50000 / threads);
  std::atomic<std::size_t> produced{0};
  std::vector<std::thread> pool;
  t_begin = clock::now();
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      RandomSource rng = seeded_random(seed ^ (0xAB + t));
      std::size_t done = 0;
      for (std::size_t i = 0; i < per_thread; ++i) {
        const auto& [ts, d] = w0[uniform_below(rng, w0.size())];
        try {
          calc_receipt(tree, d, ts);
          ++done;
        } catch (const Error&) {
        }
      }
      produced += done;
    });
  for (auto& th : pool) th.join();
  t_end = clock::now();
  secs = std::chrono::duration<double>(t_end - t_begin).count();
  report.receipts_per_sec = double(produced.load()) / secs;
  return report;
}

}  // namespace pits::sim
