#include <catch2/catch_amalgamated.hpp>

#include "pits/harness.hpp"

using namespace pits;
using namespace pits::sim;

TEST_CASE("scenarios are deterministic under a seed") {
  Scenario s;
  s.name = "modify";
  s.action = Action::modify;
  s.seed = 0xDE7;
  auto a = run_scenario(s);
  auto b = run_scenario(s);
  CHECK(a == b);
  s.seed = 0xDE8;
  auto c = run_scenario(s);
  CHECK(a.seed != c.seed);
}

TEST_CASE("honest runs raise no alarms") {
  Scenario s;
  s.name = "none";
  s.action = Action::none;
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    s.seed = seed;
    auto out = run_scenario(s);
    REQUIRE_FALSE(out.detected);
    REQUIRE(out.root_match);
    REQUIRE(out.localized_windows.empty());
    REQUIRE(out.inconsistency_kinds.empty());
    CHECK(out.receipts_corroborating > 0);
  }
}

TEST_CASE("honest runs stay clean under transport faults") {
  Scenario s;
  s.name = "none+faults";
  s.action = Action::none;
  s.faults = {.drop = 0.3, .duplicate = 0.3};
  for (uint64_t seed = 1; seed <= 8; ++seed) {
    s.seed = seed;
    auto out = run_scenario(s);
    REQUIRE_FALSE(out.detected);
    REQUIRE(out.inconsistency_kinds.empty());
  }
}

TEST_CASE("post-hoc modification is always detected") {
  Scenario s;
  s.action = Action::modify;
  s.name = "modify";
  for (uint64_t seed = 1; seed <= 10; ++seed) {
    s.seed = seed;
    auto out = run_scenario(s);
    REQUIRE(out.detected);
    REQUIRE_FALSE(out.root_match);
    // localization, when it fires, points only at the expected sub-epoch
    for (const auto& w : out.localized_windows)
      REQUIRE(std::count(out.expected_subepochs.begin(),
                         out.expected_subepochs.end(), w.subepoch) == 1);
  }
}

TEST_CASE("deletion and insertion are detected and localized") {
  for (Action a : {Action::remove, Action::insert}) {
    Scenario s;
    s.action = a;
    s.name = to_string(a);
    s.seed = 77;
    auto out = run_scenario(s);
    REQUIRE(out.detected);
    REQUIRE_FALSE(out.root_match);
    for (const auto& w : out.localized_windows)
      REQUIRE(std::count(out.expected_subepochs.begin(),
                         out.expected_subepochs.end(), w.subepoch) == 1);
  }
}

TEST_CASE("pre-submission tampering trips the chain check") {
  Scenario s;
  s.action = Action::pre_submission_tamper;
  s.name = "pre-submission-tamper";
  for (uint64_t seed = 1; seed <= 10; ++seed) {
    s.seed = seed;
    auto out = run_scenario(s);
    REQUIRE(out.detected);
    REQUIRE(std::count(out.inconsistency_kinds.begin(),
                       out.inconsistency_kinds.end(),
                       std::string("chain-mismatch")) == 1);
  }
}

TEST_CASE("truncation trips the epoch-close check") {
  Scenario s;
  s.action = Action::truncate;
  s.name = "truncate";
  for (uint64_t seed = 1; seed <= 10; ++seed) {
    s.seed = seed;
    auto out = run_scenario(s);
    REQUIRE(out.detected);
    REQUIRE(std::count(out.inconsistency_kinds.begin(),
                       out.inconsistency_kinds.end(),
                       std::string("truncation")) == 1);
  }
}

TEST_CASE("obfuscation across sub-epochs is conspicuous, never silent") {
  Scenario s;
  s.action = Action::multi_subepoch_obfuscate;
  s.name = "obfuscate";
  s.alter_count = 6;
  s.seed = 3;
  auto out = run_scenario(s);
  REQUIRE(out.detected);
  REQUIRE_FALSE(out.root_match);
  CHECK(out.expected_subepochs.size() >= 2);
  for (const auto& w : out.localized_windows)
    CHECK(std::count(out.expected_subepochs.begin(), out.expected_subepochs.end(),
                     w.subepoch) == 1);
}

TEST_CASE("wipe is detected and receipts remain valid evidence") {
  Scenario s;
  s.action = Action::wipe;
  s.name = "wipe";
  s.shares = 6;
  s.seed = 11;
  auto out = run_scenario(s);
  REQUIRE(out.detected);
  REQUIRE_FALSE(out.root_match);
  CHECK(out.receipts_contradicting > 0);
  CHECK(out.receipts_corroborating == 0);
}

TEST_CASE("background devices do not disturb the target's outcome") {
  Scenario s;
  s.action = Action::modify;
  s.name = "modify+bg";
  s.background_devices = 3;
  s.seed = 5;
  auto out = run_scenario(s);
  REQUIRE(out.detected);
}

TEST_CASE("parity miss-rate trials converge to 2^-size_p") {
  auto stats = parity_miss_trials(ci_params(), 1500, 0x3aa);
  const double p = 1.0 / 16.0;
  const double sigma = std::sqrt(1500 * p * (1 - p));
  CHECK(std::abs(double(stats.missed) - 1500 * p) < 4.0 * sigma);
}

TEST_CASE("bench reports sane numbers on a small run") {
  auto params = TreeParams{.size_ts = 16,
                           .depth_p = 8,
                           .size_p = 16,
                           .depth_u = 6,
                           .epoch_seconds = 60,
                           .tick_hz = 1000};
  auto report = bench(params, 20000, 2, 9);
  CHECK(report.insert_logs_per_sec > 0);
  CHECK(report.single_thread_logs_per_sec > 0);
  CHECK(report.receipts_per_sec > 0);
  CHECK(report.finalize_ms >= 0);
  CHECK(report.node_count > 0);
  CHECK(report.full_tree_bytes > report.leaves_only_bytes);
  auto j = sim::wire::to_json(report);
  CHECK(j.at("logs") == 20000);
}
