// Acceptance suite: end-to-end checks of the guarantees this system is built
// around, each printed as one pass/fail line. Exit code is the failure count.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracle.hpp"
#include "pits/harness.hpp"
#include "pits/record_io.hpp"

using namespace pits;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

Outcome oracle_equivalence() {
  auto rng = seeded_random(0xACC0);
  const auto begin = std::chrono::steady_clock::now();
  for (int trial = 0; trial < 1000; ++trial) {
    uint8_t size_ts = uint8_t(2 + uniform_below(rng, 11));  // 2..12
    TreeParams params{.size_ts = size_ts,
                      .depth_p = uint8_t(std::min<int>(size_ts, 4)),
                      .size_p = 8,
                      .depth_u = uint8_t(std::min<int>(size_ts, 3)),
                      .epoch_seconds = 1,
                      .tick_hz = 1};
    auto n = 1 + uniform_below(rng, (uint64_t(1) << size_ts));
    auto leaves = oracle::random_logs(rng, size_ts, n);
    auto tree = oracle::build_tree(params, trial, leaves);
    if (!(tree.root() == oracle::dense_root(size_ts, leaves)))
      return {false, "mismatch at trial " + std::to_string(trial)};
  }
  const double secs = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - begin)
                          .count();
  std::ostringstream os;
  os << "1000 randomized trees (size_ts 2..12) equal the dense oracle root, "
     << std::fixed << std::setprecision(1) << secs << "s";
  return {secs < 60.0, os.str()};
}

std::size_t record_body_bytes(uint8_t depth_p, uint16_t size_p) {
  TreeParams p{.size_ts = 22, .depth_p = depth_p, .size_p = size_p,
               .depth_u = 10, .epoch_seconds = 3600, .tick_hz = 1000};
  PitsTree tree(p, 1);
  auto rng = seeded_random(0xACC1);
  for (int i = 0; i < 20; ++i)
    tree.add_log(uniform_below(rng, p.leaf_count()), random_digest(rng));
  auto rec = finalize_tree(tree, rng);
  return serialize_record_body(rec, false).size();
}

Outcome storage_formula() {
  const std::size_t a = record_body_bytes(12, 16);
  const std::size_t b = record_body_bytes(12, 10);
  const std::size_t c = record_body_bytes(11, 16);
  std::ostringstream os;
  os << "private record bodies: " << a << " / " << b << " / " << c
     << " B (expected 8240 / 5162 / 4144)";
  return {a == 8240 && b == 5162 && c == 4144, os.str()};
}

Outcome receipt_size() {
  TreeParams params;  // running example: size_ts=22, depth_u=10
  auto rng = seeded_random(0xACC2);
  auto leaves = oracle::random_logs(rng, params.size_ts, 1024);
  auto tree = oracle::build_tree(params, 0, leaves);
  std::size_t total = 0, count = 0;
  for (const auto& [ts, co] : leaves)
    for (const auto& d : co) {
      total += calc_receipt(tree, d, ts).poi.size();
      ++count;
    }
  const double mean = double(total) / double(count);

  ReceiptUpdate update{0, tree.level_hashes(params.depth_u)};
  const std::size_t update_bytes = update.hash_bytes();

  std::ostringstream os;
  os << "mean poi length " << std::fixed << std::setprecision(2) << mean
     << " (target 10 +- 2); update " << update_bytes << " B (expected 32768)";
  return {std::abs(mean - 10.0) <= 2.0 && update_bytes == 32768, os.str()};
}

Outcome receipt_soundness() {
  auto rng = seeded_random(0xACC3);
  TreeParams params{.size_ts = 10, .depth_p = 5, .size_p = 16, .depth_u = 3,
                    .epoch_seconds = 1, .tick_hz = 1000};

  // trees with deliberate timestamp collisions so co-leaf receipts exist
  struct Case {
    Receipt receipt;
    Digest root;
  };
  std::vector<Case> cases;
  for (int t = 0; t < 8; ++t) {
    PitsTree tree(params, t);
    std::vector<std::pair<TimestampOffset, Digest>> logs;
    for (int i = 0; i < 64; ++i) {
      auto ts = uniform_below(rng, params.leaf_count() / 4);  // force shares
      auto d = random_digest(rng);
      try {
        tree.add_log(ts, d);
        logs.emplace_back(ts, d);
      } catch (const Error&) {
      }
    }
    auto root = tree.root();
    for (const auto& [ts, d] : logs) {
      auto r = calc_receipt(tree, d, ts);
      if (!verify_receipt(r, root, params))
        return {false, "honest receipt failed to verify"};
      cases.push_back({std::move(r), root});
    }
  }

  auto rejected = [&](const Receipt& r, const Digest& root) {
    try {
      return !verify_receipt(r, root, params);
    } catch (const Error&) {
      return true;
    }
  };

  const std::size_t kTrials = 12000;
  std::size_t survived = 0, co_leaf_trials = 0;
  for (std::size_t i = 0; i < kTrials; ++i) {
    const Case& c = cases[uniform_below(rng, cases.size())];
    Receipt m = c.receipt;
    switch (i % 5) {
      case 0:
        m.log_digest.bytes[uniform_below(rng, kDigestSize)] ^=
            uint8_t(1 + uniform_below(rng, 255));
        break;
      case 1: {
        uint64_t bit = uniform_below(rng, params.size_ts);
        m.ts ^= uint64_t(1) << bit;
        break;
      }
      case 2:
        if (m.poi.empty()) {
          m.bitmap ^= 1;
        } else {
          m.poi[uniform_below(rng, m.poi.size())]
              .bytes[uniform_below(rng, kDigestSize)] ^=
              uint8_t(1 + uniform_below(rng, 255));
        }
        break;
      case 3:
        m.bitmap ^= uint64_t(1) << uniform_below(rng, params.size_ts);
        break;
      case 4:
        if (m.co_leaf.digests.empty()) {
          m.log_digest.bytes[0] ^= 0x80;
        } else {
          ++co_leaf_trials;
          if (uniform_below(rng, 2) == 0)
            m.co_leaf.digests[uniform_below(rng, m.co_leaf.digests.size())]
                .bytes[uniform_below(rng, kDigestSize)] ^= 0x01;
          else
            m.co_leaf.position =
                uint32_t((m.co_leaf.position + 1) % (m.co_leaf.digests.size() + 1));
        }
        break;
    }
    if (!rejected(m, c.root)) ++survived;
  }
  std::ostringstream os;
  os << kTrials << " single-field mutations, " << survived << " survived ("
     << co_leaf_trials << " co-leaf trials)";
  return {survived == 0, os.str()};
}

Outcome parity_detection_rate() {
  TreeParams p4 = sim::ci_params();  // size_p = 4
  auto s4 = sim::parity_miss_trials(p4, 10000, 0xACC4);
  const double p = 1.0 / 16.0;
  const double mean = 10000 * p;
  const double sigma = std::sqrt(10000 * p * (1 - p));
  const bool ok4 = std::abs(double(s4.missed) - mean) <= 3.0 * sigma;

  TreeParams p16 = p4;
  p16.size_p = 16;
  auto s16 = sim::parity_miss_trials(p16, 10000, 0xACC5);
  const bool ok16 = s16.missed <= 3;

  std::ostringstream os;
  os << "size_p=4: " << s4.missed << "/10000 missed (expect " << mean << " +- "
     << std::fixed << std::setprecision(1) << 3 * sigma
     << "); size_p=16: " << s16.missed << "/10000 missed (allow <= 3)";
  return {ok4 && ok16, os.str()};
}

Outcome localization_correctness() {
  TreeParams params = sim::ci_params();
  params.size_p = 16;  // localization nearly always fires; exactness is the claim
  const double width = double(params.epoch_ms()) / double(params.subepoch_count());

  unsigned detected = 0, localized = 0;
  for (uint64_t seed = 1; seed <= 50; ++seed) {
    for (sim::Action action : {sim::Action::remove, sim::Action::modify}) {
      sim::Scenario s;
      s.action = action;
      s.name = to_string(action);
      s.params = params;
      s.seed = seed;
      auto out = sim::run_scenario(s);
      if (!out.detected) return {false, "tampering escaped detection"};
      ++detected;
      if (out.expected_subepochs.size() != 1)
        return {false, "trial setup produced an ambiguous expectation"};
      for (const auto& w : out.localized_windows) {
        if (w.subepoch != out.expected_subepochs[0])
          return {false, "window " + std::to_string(w.subepoch) +
                             " flagged instead of " +
                             std::to_string(out.expected_subepochs[0])};
        if (std::abs((w.end_ms - w.start_ms) - width) > 1e-9)
          return {false, "window width off"};
      }
      localized += !out.localized_windows.empty();
    }
  }

  // untampered snapshots never produce windows
  for (uint64_t seed = 1; seed <= 25; ++seed) {
    sim::Scenario s;
    s.action = sim::Action::none;
    s.name = "none";
    s.params = params;
    s.seed = seed;
    auto out = sim::run_scenario(s);
    if (!out.localized_windows.empty() || out.detected)
      return {false, "false accusation on an honest run"};
  }
  std::ostringstream os;
  os << detected << "/100 tamper trials detected, " << localized
     << " localized to exactly the true window; 0 false windows on 25 honest runs";
  return {true, os.str()};
}

Outcome forward_integrity() {
  unsigned chain_hits = 0, trunc_hits = 0;
  for (uint64_t seed = 1; seed <= 100; ++seed) {
    sim::Scenario s;
    s.action = sim::Action::pre_submission_tamper;
    s.name = "pre-submission-tamper";
    s.seed = seed;
    auto out = sim::run_scenario(s);
    chain_hits += out.detected &&
                  std::count(out.inconsistency_kinds.begin(),
                             out.inconsistency_kinds.end(),
                             std::string("chain-mismatch"));
  }
  for (uint64_t seed = 1; seed <= 100; ++seed) {
    sim::Scenario s;
    s.action = sim::Action::truncate;
    s.name = "truncate";
    s.seed = seed;
    auto out = sim::run_scenario(s);
    trunc_hits += out.detected &&
                  std::count(out.inconsistency_kinds.begin(),
                             out.inconsistency_kinds.end(),
                             std::string("truncation"));
  }
  std::ostringstream os;
  os << "pre-submission tampering " << chain_hits
     << "/100, truncation " << trunc_hits << "/100 detected";
  return {chain_hits == 100 && trunc_hits == 100, os.str()};
}

Outcome retention_equivalence() {
  TreeParams params{.size_ts = 12, .depth_p = 6, .size_p = 16, .depth_u = 4,
                    .epoch_seconds = 1, .tick_hz = 1000};
  const EpochId epoch = 1234;
  auto clock_now = std::make_shared<int64_t>(params.epoch_start_ms(epoch));
  Notary notary(NotaryConfig{.params = params},
                [clock_now] { return *clock_now; }, seeded_random(0xACC6));

  auto rng = seeded_random(0xACC7);
  Digest h0 = random_digest(rng);
  Digest chain = h0;
  LogBatch batch;
  batch.device = "dev";
  batch.epoch = epoch;
  batch.seq = 1;
  batch.boundary = Boundary{h0, std::nullopt};
  std::vector<std::pair<TimestampOffset, Digest>> logs;
  std::set<std::pair<TimestampOffset, Digest>> seen;
  while (logs.size() < 1000) {
    auto ts = uniform_below(rng, params.leaf_count());
    auto d = random_digest(rng);
    if (!seen.insert({ts, d}).second) continue;
    logs.emplace_back(ts, d);
    batch.entries.push_back({ts, d});
    chain = chain_extend(chain, d);
  }
  batch.chain_value = chain;
  notary.submit_batch(batch);

  *clock_now = params.epoch_start_ms(epoch + 1) + 1;
  LogBatch boundary;
  boundary.device = "dev";
  boundary.epoch = epoch + 1;
  boundary.seq = 2;
  Digest h0b = random_digest(rng);
  boundary.boundary = Boundary{h0b, chain};
  boundary.chain_value = h0b;
  notary.submit_batch(boundary);
  notary.finalize_epoch("dev", epoch);

  std::vector<Receipt> before;
  before.reserve(logs.size());
  for (const auto& [ts, d] : logs)
    before.push_back(notary.get_receipt("dev", epoch, d, ts).receipt);

  notary.advance_retention("dev", epoch, RetentionStage::leaves_only);
  for (std::size_t i = 0; i < logs.size(); ++i) {
    auto after =
        notary.get_receipt("dev", epoch, logs[i].second, logs[i].first).receipt;
    if (!(after == before[i]))
      return {false, "receipt " + std::to_string(i) + " changed after pruning"};
  }
  return {true, "1000 receipts bit-identical between full-tree and leaves-only"};
}

Outcome throughput_floor() {
  TreeParams params;  // running-example tree shape
  auto report = sim::bench(params, 150000, 1, 0xACC8);
  std::ostringstream os;
  os << std::fixed << std::setprecision(0) << report.single_thread_logs_per_sec
     << " inserts/s single-threaded (floor 50000); "
     << report.receipts_per_sec << " receipts/s; finalize "
     << std::setprecision(2) << report.finalize_ms << " ms";
  return {report.single_thread_logs_per_sec >= 50000.0, os.str()};
}

}  // namespace

int main() {
  using Check = std::pair<const char*, std::function<Outcome()>>;
  const std::vector<Check> checks = {
      {"oracle-equivalence", oracle_equivalence},
      {"storage-formula", storage_formula},
      {"receipt-size", receipt_size},
      {"receipt-soundness", receipt_soundness},
      {"parity-detection-rate", parity_detection_rate},
      {"localization-correctness", localization_correctness},
      {"forward-integrity", forward_integrity},
      {"retention-equivalence", retention_equivalence},
      {"throughput-floor", throughput_floor},
  };

  int failures = 0;
  for (const auto& [name, fn] : checks) {
    Outcome out;
    try {
      out = fn();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    std::printf("[%s] %-26s %s\n", out.pass ? "PASS" : "FAIL", name,
                out.detail.c_str());
    std::fflush(stdout);
    if (!out.pass) ++failures;
  }
  return failures;
}
