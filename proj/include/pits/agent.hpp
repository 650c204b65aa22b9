#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pits/chain.hpp"
#include "pits/client.hpp"
#include "pits/rng.hpp"

namespace pits {

/// One locally created log: absolute wall-clock time plus opaque content.
/// The digest binds the content to its timestamp.
struct LogEntry {
  int64_t ts_ms = 0;
  std::vector<uint8_t> content;
  Digest digest;

  bool operator==(const LogEntry&) const = default;
};

/// H(content || ts), ts as 8-byte big-endian milliseconds.
inline Digest log_entry_digest(std::span<const uint8_t> content, int64_t ts_ms) {
  std::vector<uint8_t> buf(content.begin(), content.end());
  for (int i = 7; i >= 0; --i) buf.push_back(uint8_t(uint64_t(ts_ms) >> (8 * i)));
  return sha256(std::span<const uint8_t>(buf));
}

/// Full log handed to an interacting node; carries the leaf address the
/// monitored node assigned so the receiver can request the receipt.
struct SharedEvent {
  std::string device;
  EpochId epoch = 0;
  TimestampOffset ts_offset = 0;
  int64_t ts_ms = 0;
  std::vector<uint8_t> content;

  bool operator==(const SharedEvent&) const = default;
};

/// Assigns leaf addresses: the tick, plus a per-tick counter when the
/// configuration reserves counter bits. Feeding it events in creation order
/// reproduces the monitored node's assignment exactly.
class OffsetAssigner {
 public:
  TimestampOffset assign(const TreeParams& p, EpochId epoch, int64_t ts_ms) {
    const uint64_t tick = p.tick_of_ms(ts_ms, epoch);
    if (p.counter_bits == 0) return p.offset_of(tick);
    const uint64_t key = (uint64_t(epoch) << p.size_ts) ^ tick;
    if (key != last_key_) {
      last_key_ = key;
      counter_ = 0;
    } else if (counter_ + 1 < (uint64_t(1) << p.counter_bits)) {
      ++counter_;  // saturates; extra same-tick logs share the last leaf
    }
    return p.offset_of(tick, counter_);
  }

 private:
  uint64_t last_key_ = ~uint64_t(0);
  uint64_t counter_ = 0;
};

namespace detail {

inline std::string b64_encode(std::span<const uint8_t> in) {
  static constexpr char tab[] =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((in.size() + 2) / 3 * 4);
  for (std::size_t i = 0; i < in.size(); i += 3) {
    uint32_t v = uint32_t(in[i]) << 16;
    if (i + 1 < in.size()) v |= uint32_t(in[i + 1]) << 8;
    if (i + 2 < in.size()) v |= uint32_t(in[i + 2]);
    out.push_back(tab[(v >> 18) & 63]);
    out.push_back(tab[(v >> 12) & 63]);
    out.push_back(i + 1 < in.size() ? tab[(v >> 6) & 63] : '=');
    out.push_back(i + 2 < in.size() ? tab[v & 63] : '=');
  }
  return out;
}

inline std::vector<uint8_t> b64_decode(std::string_view in) {
  auto val = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  std::vector<uint8_t> out;
  uint32_t acc = 0;
  int bits = 0;
  for (char c : in) {
    if (c == '=') break;
    int v = val(c);
    if (v < 0) fail(Err::snapshot_unreadable, "bad base64");
    acc = (acc << 6) | uint32_t(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(uint8_t(acc >> bits));
    }
  }
  return out;
}

inline bool printable_utf8(std::span<const uint8_t> s) {
  for (uint8_t c : s)
    if (!((c >= 0x20 && c < 0x7f) || c == '\t')) return false;
  return true;
}

/// Line format of the local log store: {"ts":..,"enc":..,"content":..}
inline std::string store_line(const LogEntry& e) {
  nlohmann::json j;
  j["ts"] = e.ts_ms;
  if (printable_utf8(e.content)) {
    j["enc"] = "utf8";
    j["content"] = std::string(e.content.begin(), e.content.end());
  } else {
    j["enc"] = "b64";
    j["content"] = b64_encode(e.content);
  }
  return j.dump();
}

inline LogEntry parse_store_line(const std::string& line) {
  LogEntry e;
  try {
    auto j = nlohmann::json::parse(line);
    e.ts_ms = j.at("ts").get<int64_t>();
    auto enc = j.at("enc").get<std::string>();
    auto content = j.at("content").get<std::string>();
    if (enc == "utf8")
      e.content.assign(content.begin(), content.end());
    else if (enc == "b64")
      e.content = b64_decode(content);
    else
      fail(Err::snapshot_unreadable, "unknown encoding " + enc);
  } catch (const nlohmann::json::exception& ex) {
    fail(Err::snapshot_unreadable, ex.what());
  }
  e.digest = log_entry_digest(e.content, e.ts_ms);
  return e;
}

}  // namespace detail

struct AgentConfig {
  std::string device;
  TreeParams params;
  std::filesystem::path state_dir;  // empty: purely in-memory
  int64_t skew_budget_ms = 2000;
};

/// Client-side agent covering both roles: the monitored node (logging,
/// hashing, chain upkeep, batching) and the interacting node (receiving
/// shared logs and collecting verified receipts).
class Agent {
 public:
  struct QueuedEntry {
    EpochId epoch = 0;
    TimestampOffset ts = 0;
    Digest digest;
  };

  Agent(AgentConfig cfg, Clock clock = system_clock(),
        RandomSource rng = os_random())
      : cfg_(std::move(cfg)), clock_(std::move(clock)), rng_(std::move(rng)) {
    cfg_.params.validate();
    if (!cfg_.state_dir.empty()) load_state();
  }

  const AgentConfig& config() const { return cfg_; }

  /// Creates a log: appends to the local store, extends the chain
  /// (overwriting the old value) and queues the entry for the next batch.
  LogEntry log_event(std::span<const uint8_t> content) {
    const int64_t now = clock_();
    if (started_ && now < last_ts_ms_ - cfg_.skew_budget_ms)
      fail(Err::clock_regression);
    const EpochId epoch = cfg_.params.epoch_of_ms(now);
    if (started_ && epoch < chain_.epoch)
      fail(Err::clock_regression, "clock moved behind the current epoch");
    if (!started_ || epoch != chain_.epoch) begin_epoch(epoch, now);
    return append(now, content);
  }

  LogEntry log_event(std::string_view content) {
    return log_event(std::span<const uint8_t>(
        reinterpret_cast<const uint8_t*>(content.data()), content.size()));
  }

  /// Sends everything queued, one batch per epoch, oldest first. Empty result
  /// means there was nothing to send. On transport failure the queue is kept
  /// and the same batches go out on the next call.
  std::vector<SubmitAck> flush(NotaryClient& client) {
    std::vector<SubmitAck> acks;
    while (auto batch = next_batch()) {
      SubmitAck ack;
      try {
        ack = client.submit_batch(*batch);
      } catch (const Error& e) {
        if (e.code() == Err::transport_error) throw;
        // the notary refused the epoch outright (e.g. finalized under us);
        // its forensic record is written, drop our copy and move on
        discard_epoch(batch->epoch);
        ++next_seq_;
        persist_chain();
        persist_queue();
        continue;
      }
      discard_epoch(batch->epoch);
      ++next_seq_;
      persist_chain();
      persist_queue();
      acks.push_back(ack);
    }
    return acks;
  }

  /// Full-log handoff to an interacting node.
  SharedEvent share(const LogEntry& entry) const {
    auto it = offsets_.find(entry.digest);
    if (it == offsets_.end()) fail(Err::unknown_log, "entry was never logged here");
    return SharedEvent{cfg_.device, it->second.first, it->second.second,
                       entry.ts_ms, entry.content};
  }

  /// Interactor side: verify a peer's shared log and keep it. The digest is
  /// recomputed from content and timestamp, never taken on trust.
  void ingest_shared(const SharedEvent& ev) {
    if (cfg_.params.epoch_of_ms(ev.ts_ms) != ev.epoch)
      fail(Err::verification_failed, "epoch does not match timestamp");
    const uint64_t tick = cfg_.params.tick_of_ms(ev.ts_ms, ev.epoch);
    if ((ev.ts_offset >> cfg_.params.counter_bits) != cfg_.params.scaled_tick(tick))
      fail(Err::verification_failed, "leaf address does not match timestamp");
    shared_[ev.device][log_entry_digest(ev.content, ev.ts_ms)] = ev;
    persist_shared(ev);
  }

  enum class ReceiptStatus { stored, pending_partial };

  struct ObtainResult {
    ReceiptStatus status = ReceiptStatus::stored;
    Receipt receipt;
  };

  /// Fetches and verifies the receipt for a previously shared event. A
  /// partial receipt is completed via the published update once the epoch is
  /// over; before that the partial is held and the call reports pending.
  ObtainResult obtain_receipt(NotaryClient& client, const std::string& peer_device,
                              const Digest& digest) {
    const SharedEvent& ev = shared_lookup(peer_device, digest);
    ReceiptResult rr = client.get_receipt(peer_device, ev.epoch, digest, ev.ts_offset);
    if (!(rr.receipt.log_digest == digest) || rr.receipt.ts != ev.ts_offset ||
        rr.receipt.epoch != ev.epoch)
      fail(Err::verification_failed, "receipt is for something else");

    if (rr.partial) {
      Digest root;
      try {
        root = client.get_root(peer_device, ev.epoch);
      } catch (const Error& e) {
        if (e.code() != Err::no_published_root) throw;
        pending_[peer_device][digest] = rr.receipt;
        return {ReceiptStatus::pending_partial, rr.receipt};
      }
      ReceiptUpdate update = client.get_update(peer_device, ev.epoch);
      if (!verify_update(update, root, cfg_.params))
        fail(Err::verification_failed, "update does not fold to published root");
      Receipt full = finalize_receipt(rr.receipt, update, cfg_.params, &root);
      return store_verified(peer_device, full, root);
    }
    Digest root = client.get_root(peer_device, ev.epoch);
    return store_verified(peer_device, rr.receipt, root);
  }

  /// Verified receipts held for a peer device.
  const std::map<Digest, Receipt>* receipts_for(const std::string& device) const {
    auto it = receipts_.find(device);
    return it == receipts_.end() ? nullptr : &it->second;
  }

  /// Shared-event inbox for a peer device.
  const std::map<Digest, SharedEvent>* shared_from(const std::string& device) const {
    auto it = shared_.find(device);
    return it == shared_.end() ? nullptr : &it->second;
  }

  const std::vector<LogEntry>& local_store() const { return store_; }
  const std::vector<QueuedEntry>& queue() const { return queue_; }
  const ChainState& chain() const { return chain_; }
  EpochId current_epoch() const { return chain_.epoch; }

  /// Writes the local store as an auditor-readable snapshot.
  void write_snapshot(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) fail(Err::io_error, "cannot write " + path.string());
    for (const auto& e : store_) out << detail::store_line(e) << '\n';
  }

  /// Agent-side overhead beyond the logs themselves: the single current
  /// chain value plus whatever sits in the unsent queue.
  std::size_t overhead_bytes() const {
    std::size_t n = kDigestSize;  // the chain register
    n += queue_.size() * (sizeof(TimestampOffset) + kDigestSize);
    for (const auto& [epoch, b] : boundaries_)
      n += kDigestSize + (b.h_ep ? kDigestSize : 0);
    return n;
  }

  /// Device-access adversary: exactly what a compromise can reach. Past chain
  /// values are unreachable because the register is overwritten on each log.
  class Compromise {
   public:
    explicit Compromise(Agent& a) : a_(a) {}

    std::size_t queued() const { return a_.queue_.size(); }

    void replace_queued_digest(std::size_t i, const Digest& d) {
      a_.queue_.at(i).digest = d;
      a_.persist_queue();
    }

    /// Suppresses the last k unsent logs, wiping the store trail too.
    void truncate_queue(std::size_t k) {
      for (std::size_t i = 0; i < k && !a_.queue_.empty(); ++i) {
        const Digest victim = a_.queue_.back().digest;
        a_.queue_.pop_back();
        for (auto it = a_.store_.rbegin(); it != a_.store_.rend(); ++it) {
          if (it->digest == victim) {
            a_.store_.erase(std::next(it).base());
            break;
          }
        }
      }
      a_.persist_queue();
      a_.rewrite_store();
    }

    Digest visible_chain_value() const { return a_.chain_.current; }

   private:
    Agent& a_;
  };

  Compromise compromise() { return Compromise(*this); }

 private:
  std::optional<LogBatch> next_batch() {
    if (queue_.empty() && boundaries_.empty()) return std::nullopt;
    EpochId epoch;
    if (!queue_.empty()) {
      epoch = queue_.front().epoch;
      if (!boundaries_.empty())
        epoch = std::min(epoch, boundaries_.begin()->first);
    } else {
      epoch = boundaries_.begin()->first;
    }

    LogBatch b;
    b.device = cfg_.device;
    b.epoch = epoch;
    b.seq = next_seq_;
    for (const auto& q : queue_)
      if (q.epoch == epoch) b.entries.push_back({q.ts, q.digest});
    if (auto it = boundaries_.find(epoch); it != boundaries_.end())
      b.boundary = it->second;
    // the chain value after this epoch's last entry: the h_ep of the next
    // boundary if the chain has already moved on, else the live register
    auto next_boundary = boundaries_.upper_bound(epoch);
    if (next_boundary != boundaries_.end() && next_boundary->second.h_ep)
      b.chain_value = *next_boundary->second.h_ep;
    else
      b.chain_value = chain_.current;
    return b;
  }

  void discard_epoch(EpochId epoch) {
    std::erase_if(queue_, [&](const QueuedEntry& q) { return q.epoch == epoch; });
    boundaries_.erase(epoch);
  }

  void begin_epoch(EpochId epoch, int64_t now) {
    Boundary b;
    b.h0 = random_digest(rng_);
    if (started_) b.h_ep = chain_.current;
    boundaries_[epoch] = b;
    chain_.epoch = epoch;
    chain_.current = b.h0;
    chain_.counter = 0;
    started_ = true;
    // the chain-start log is a real log and goes into the tree like any other
    static constexpr std::string_view kTag = "chain-start";
    append(now, std::span<const uint8_t>(
                    reinterpret_cast<const uint8_t*>(kTag.data()), kTag.size()));
  }

  LogEntry append(int64_t now, std::span<const uint8_t> content) {
    LogEntry e;
    e.ts_ms = now;
    e.content.assign(content.begin(), content.end());
    e.digest = log_entry_digest(content, now);

    const TimestampOffset offset = assigner_.assign(cfg_.params, chain_.epoch, now);
    store_.push_back(e);
    offsets_[e.digest] = {chain_.epoch, offset};
    queue_.push_back({chain_.epoch, offset, e.digest});
    chain_.current = chain_extend(chain_.current, e.digest);
    ++chain_.counter;
    last_ts_ms_ = std::max(last_ts_ms_, now);

    append_store_line(e);
    persist_chain();
    append_queue_line(queue_.back());
    return e;
  }

  ObtainResult store_verified(const std::string& peer, const Receipt& r,
                              const Digest& root) {
    if (!verify_receipt(r, root, cfg_.params))
      fail(Err::verification_failed, "receipt does not verify against root");
    receipts_[peer][r.log_digest] = r;
    pending_[peer].erase(r.log_digest);
    persist_receipt(peer, r);
    return {ReceiptStatus::stored, r};
  }

  const SharedEvent& shared_lookup(const std::string& device, const Digest& d) const {
    auto dev = shared_.find(device);
    if (dev == shared_.end()) fail(Err::unknown_log, "nothing shared by " + device);
    auto ev = dev->second.find(d);
    if (ev == dev->second.end()) fail(Err::unknown_log, "event not in shared inbox");
    return ev->second;
  }

  // --- persistence (no-ops in in-memory mode) ---

  std::filesystem::path state_path(const char* name) const {
    return cfg_.state_dir / name;
  }

  void persist_chain() {
    if (cfg_.state_dir.empty()) return;
    nlohmann::json j{{"epoch", chain_.epoch},
                     {"current", chain_.current.hex()},
                     {"counter", chain_.counter},
                     {"started", started_},
                     {"last_ts_ms", last_ts_ms_},
                     {"next_seq", next_seq_}};
    nlohmann::json bs = nlohmann::json::object();
    for (const auto& [epoch, b] : boundaries_) {
      nlohmann::json bj{{"h0", b.h0.hex()}};
      bj["h_ep"] = b.h_ep ? nlohmann::json(b.h_ep->hex()) : nlohmann::json(nullptr);
      bs[std::to_string(epoch)] = std::move(bj);
    }
    j["boundaries"] = std::move(bs);
    std::ofstream out(state_path("chain.json"), std::ios::trunc);
    out << j.dump(2);
  }

  void append_store_line(const LogEntry& e) {
    if (cfg_.state_dir.empty()) return;
    std::ofstream out(state_path("store.log"), std::ios::app);
    out << detail::store_line(e) << '\n';
  }

  void rewrite_store() {
    if (cfg_.state_dir.empty()) return;
    std::ofstream out(state_path("store.log"), std::ios::trunc);
    for (const auto& e : store_) out << detail::store_line(e) << '\n';
  }

  void append_queue_line(const QueuedEntry& q) {
    if (cfg_.state_dir.empty()) return;
    std::ofstream out(state_path("queue.jsonl"), std::ios::app);
    out << nlohmann::json{{"epoch", q.epoch},
                          {"ts", q.ts},
                          {"digest", q.digest.hex()}}
               .dump()
        << '\n';
  }

  void persist_queue() {
    if (cfg_.state_dir.empty()) return;
    std::ofstream out(state_path("queue.jsonl"), std::ios::trunc);
    for (const auto& q : queue_)
      out << nlohmann::json{{"epoch", q.epoch},
                            {"ts", q.ts},
                            {"digest", q.digest.hex()}}
                 .dump()
          << '\n';
  }

  void persist_shared(const SharedEvent& ev) {
    if (cfg_.state_dir.empty()) return;
    auto dir = cfg_.state_dir / "shared" / ev.device;
    std::filesystem::create_directories(dir);
    nlohmann::json j{{"device", ev.device},
                     {"epoch", ev.epoch},
                     {"ts_offset", ev.ts_offset},
                     {"ts_ms", ev.ts_ms},
                     {"enc", "b64"},
                     {"content", detail::b64_encode(ev.content)}};
    std::ofstream out(dir / (log_entry_digest(ev.content, ev.ts_ms).hex() + ".json"),
                      std::ios::trunc);
    out << j.dump(2);
  }

  void persist_receipt(const std::string& peer, const Receipt& r) {
    if (cfg_.state_dir.empty()) return;
    auto dir = cfg_.state_dir / "receipts" / peer;
    std::filesystem::create_directories(dir);
    std::ofstream out(
        dir / (std::to_string(r.epoch) + "-" + r.log_digest.hex() + ".json"),
        std::ios::trunc);
    out << wire::to_json(r).dump(2);
  }

  void load_state() {
    namespace fs = std::filesystem;
    fs::create_directories(cfg_.state_dir);
    if (fs::exists(state_path("chain.json"))) {
      std::ifstream in(state_path("chain.json"));
      auto j = nlohmann::json::parse(in);
      chain_.epoch = j.at("epoch").get<uint64_t>();
      chain_.current = parse_digest(j.at("current").get<std::string>());
      chain_.counter = j.at("counter").get<uint64_t>();
      started_ = j.at("started").get<bool>();
      last_ts_ms_ = j.at("last_ts_ms").get<int64_t>();
      next_seq_ = j.at("next_seq").get<uint64_t>();
      for (const auto& [k, v] : j.at("boundaries").items()) {
        Boundary b;
        b.h0 = parse_digest(v.at("h0").get<std::string>());
        if (!v.at("h_ep").is_null())
          b.h_ep = parse_digest(v.at("h_ep").get<std::string>());
        boundaries_[std::stoull(k)] = b;
      }
    }
    if (fs::exists(state_path("store.log"))) {
      std::ifstream in(state_path("store.log"));
      std::string line;
      OffsetAssigner replay;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        LogEntry e = detail::parse_store_line(line);
        store_.push_back(e);
        EpochId ep = cfg_.params.epoch_of_ms(e.ts_ms);
        offsets_[e.digest] = {ep, replay.assign(cfg_.params, ep, e.ts_ms)};
      }
      assigner_ = replay;
    }
    if (fs::exists(state_path("queue.jsonl"))) {
      std::ifstream in(state_path("queue.jsonl"));
      std::string line;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        queue_.push_back({j.at("epoch").get<uint64_t>(),
                          j.at("ts").get<uint64_t>(),
                          parse_digest(j.at("digest").get<std::string>())});
      }
    }
    load_shared_and_receipts();
  }

  void load_shared_and_receipts() {
    namespace fs = std::filesystem;
    auto shared_dir = cfg_.state_dir / "shared";
    if (fs::exists(shared_dir)) {
      for (const auto& dev : fs::directory_iterator(shared_dir)) {
        for (const auto& f : fs::directory_iterator(dev.path())) {
          std::ifstream in(f.path());
          auto j = nlohmann::json::parse(in);
          SharedEvent ev;
          ev.device = j.at("device").get<std::string>();
          ev.epoch = j.at("epoch").get<uint64_t>();
          ev.ts_offset = j.at("ts_offset").get<uint64_t>();
          ev.ts_ms = j.at("ts_ms").get<int64_t>();
          ev.content = detail::b64_decode(j.at("content").get<std::string>());
          shared_[ev.device][log_entry_digest(ev.content, ev.ts_ms)] = ev;
        }
      }
    }
    auto receipts_dir = cfg_.state_dir / "receipts";
    if (fs::exists(receipts_dir)) {
      for (const auto& dev : fs::directory_iterator(receipts_dir)) {
        for (const auto& f : fs::directory_iterator(dev.path())) {
          std::ifstream in(f.path());
          Receipt r = wire::receipt_from_json(nlohmann::json::parse(in));
          receipts_[dev.path().filename().string()][r.log_digest] = r;
        }
      }
    }
  }

  AgentConfig cfg_;
  Clock clock_;
  RandomSource rng_;

  ChainState chain_;
  bool started_ = false;
  int64_t last_ts_ms_ = 0;
  uint64_t next_seq_ = 1;
  OffsetAssigner assigner_;

  std::vector<LogEntry> store_;
  std::map<Digest, std::pair<EpochId, TimestampOffset>> offsets_;
  std::vector<QueuedEntry> queue_;
  std::map<EpochId, Boundary> boundaries_;

  std::map<std::string, std::map<Digest, SharedEvent>> shared_;
  std::map<std::string, std::map<Digest, Receipt>> receipts_;
  std::map<std::string, std::map<Digest, Receipt>> pending_;
};

}  // namespace pits
