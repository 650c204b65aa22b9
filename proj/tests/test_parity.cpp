#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "oracle.hpp"
#include "pits/parity.hpp"
#include "pits/record_io.hpp"

using namespace pits;

TEST_CASE("gen_secret samples distinct positions") {
  auto rng = seeded_random(0x5EC);

  SECTION("size_p = digest_bits covers every position exactly once") {
    auto s = gen_secret(64, 64, rng);
    std::set<uint16_t> seen(s.positions.begin(), s.positions.end());
    CHECK(seen.size() == 64);
    CHECK(*seen.begin() == 0);
    CHECK(*seen.rbegin() == 63);
  }

  SECTION("16 of 256 are distinct and in range") {
    for (int i = 0; i < 100; ++i) {
      auto s = gen_secret(16, 256, rng);
      std::set<uint16_t> seen(s.positions.begin(), s.positions.end());
      CHECK(seen.size() == 16);
      CHECK(*seen.rbegin() <= 255);
    }
  }

  SECTION("invalid shapes") {
    CHECK_THROWS_AS(gen_secret(0, 256, rng), Error);
    CHECK_THROWS_AS(gen_secret(300, 256, rng), Error);
    CHECK_THROWS_AS(gen_secret(17, 16, rng), Error);
  }
}

TEST_CASE("gen_secret marginals are uniform") {
  auto rng = seeded_random(0xFA1);
  constexpr int kRuns = 100000;
  std::array<int, 256> count{};
  for (int i = 0; i < kRuns; ++i) {
    auto s = gen_secret(16, 256, rng);
    for (auto p : s.positions) ++count[p];
  }
  // marginal inclusion probability is 16/256; 3 sigma of Binomial(1e5, 1/16)
  const double mean = kRuns / 16.0;
  const double sigma = std::sqrt(kRuns * (1.0 / 16.0) * (15.0 / 16.0));
  int outliers = 0;
  for (int b = 0; b < 256; ++b)
    if (std::abs(count[b] - mean) > 3.0 * sigma) ++outliers;
  // with 256 positions a fixed seed may graze the 3-sigma line once
  CHECK(outliers <= 1);
  double chi2 = 0;
  for (int b = 0; b < 256; ++b)
    chi2 += (count[b] - mean) * (count[b] - mean) / mean;
  CHECK(chi2 < 360.0);  // chi^2_255, p ~ 1e-5
}

TEST_CASE("parity extraction") {
  auto rng = seeded_random(0xE0);

  SECTION("all-zero addressed bits give word zero") {
    ParitySecret s;
    for (uint16_t j = 0; j < 8; ++j) s.positions.push_back(j);
    Digest d{};  // all zero
    CHECK(parity_word(d, s) == 0);
    d.bytes[0] = 0xff;  // bits 0..7 set
    CHECK(parity_word(d, s) == 0xff);
  }

  SECTION("bits outside the secret do not matter") {
    ParitySecret s{.positions = {3, 77, 200}};
    auto d = random_digest(rng);
    auto w = parity_word(d, s);
    auto flipped = d;
    flipped.bytes[20] ^= 0x01;  // bit 167, not addressed
    CHECK(parity_word(flipped, s) == w);
    flipped = d;
    flipped.bytes[77 / 8] ^= uint8_t(1) << (7 - 77 % 8);
    CHECK(parity_word(flipped, s) != w);
  }

  SECTION("matches an independent shift-and-mask oracle") {
    for (int trial = 0; trial < 200; ++trial) {
      auto s = gen_secret(16, 256, rng);
      auto d = random_digest(rng);
      uint64_t expect = 0;
      for (std::size_t j = 0; j < s.positions.size(); ++j) {
        unsigned pos = s.positions[j];
        unsigned byte = pos / 8, in_byte = pos % 8;
        uint64_t bit = (d.bytes[byte] & (0x80u >> in_byte)) ? 1 : 0;
        expect |= bit << j;
      }
      REQUIRE(parity_word(d, s) == expect);
    }
  }

  SECTION("level width must be 2^depth_p") {
    ParitySecret s{.positions = {0, 1}};
    std::vector<Digest> level(3);
    CHECK_THROWS_AS(extract_parity(level, s, 2), Error);
  }
}

TEST_CASE("finalize_tree produces the documented record sizes") {
  auto rng = seeded_random(0xABCD);

  auto body_size = [&](uint8_t depth_p, uint16_t size_p) {
    TreeParams p{.size_ts = 22, .depth_p = depth_p, .size_p = size_p,
                 .depth_u = 10, .epoch_seconds = 3600, .tick_hz = 1000};
    PitsTree t(p, 1);
    t.add_log(123456, sha256("payload"));
    auto rec = finalize_tree(t, rng);
    return serialize_record_body(rec, false).size();
  };

  CHECK(body_size(12, 16) == 8240);
  CHECK(body_size(12, 10) == 5162);
  CHECK(body_size(11, 16) == 4144);
}

TEST_CASE("finalize_tree marks the tree and rejects a second run") {
  auto rng = seeded_random(3);
  auto t = oracle::build_tree(oracle::tiny_params(), 0, oracle::miniature_logs());
  auto rec = finalize_tree(t, rng);
  CHECK(t.finalized());
  CHECK(rec.root == t.root());
  CHECK(rec.parity.size() == 4);
  CHECK_THROWS_MATCHES(finalize_tree(t, rng), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == Err::already_finalized;
                       }));
}

TEST_CASE("empty tree with occupancy compression") {
  auto rng = seeded_random(4);
  PitsTree t(oracle::tiny_params(), 0);
  auto rec = finalize_tree(t, rng, /*omit_empty=*/true);
  CHECK(rec.parity.empty());
  REQUIRE(rec.occupancy.has_value());
  for (auto b : *rec.occupancy) CHECK(b == 0);
}

TEST_CASE("parity is a pure function of level and secret") {
  auto rng = seeded_random(5);
  auto params = oracle::small_params();
  auto leaves = oracle::random_logs(rng, params.size_ts, 80);
  auto t = oracle::build_tree(params, 0, leaves);
  auto level = t.level_hashes(params.depth_p);
  auto s = gen_secret(params.size_p, kDigestBits, rng);
  CHECK(extract_parity(level, s, params.depth_p) ==
        extract_parity(level, s, params.depth_p));
}

TEST_CASE("compare_parity localizes the miniature deletion to sub-epoch 2") {
  // deleting l3 (ts=5, top-2-bits=2) changes b_2^2 and nothing else
  auto params = oracle::tiny_params();
  params.size_p = 16;
  auto rng = seeded_random(0x1234);

  auto leaves = oracle::miniature_logs();
  auto t = oracle::build_tree(params, 0, leaves);
  auto rec = finalize_tree(t, rng);

  auto tampered = leaves;
  tampered.erase(5);
  auto t2 = oracle::build_tree(params, 0, tampered);
  auto mism = compare_parity(rec, t2.level_hashes(2), t2.empty_at(2));
  CHECK(mism == std::vector<uint32_t>{2});

  // the untouched set reports nothing
  auto t3 = oracle::build_tree(params, 0, leaves);
  CHECK(compare_parity(rec, t3.level_hashes(2), t3.empty_at(2)).empty());
}

TEST_CASE("alterations confined to one sub-epoch never implicate another") {
  auto rng = seeded_random(0x77);
  auto params = oracle::small_params();
  for (int trial = 0; trial < 50; ++trial) {
    auto leaves = oracle::random_logs(rng, params.size_ts, 60);
    auto t = oracle::build_tree(params, 0, leaves);
    auto rec = finalize_tree(t, rng);

    auto victim = leaves.begin();
    std::advance(victim, uniform_below(rng, leaves.size()));
    uint32_t subepoch = params.subepoch_of(victim->first);

    auto tampered = leaves;
    tampered[victim->first] = {random_digest(rng)};
    auto t2 = oracle::build_tree(params, 0, tampered);
    auto mism = compare_parity(rec, t2.level_hashes(params.depth_p),
                               t2.empty_at(params.depth_p));
    for (auto i : mism) REQUIRE(i == subepoch);
  }
}

TEST_CASE("undetected alterations occur at the expected 2^-size_p rate") {
  auto rng = seeded_random(0x2E7);
  auto params = oracle::small_params();  // size_p = 4
  constexpr int kTrials = 2000;
  int missed = 0;
  for (int trial = 0; trial < kTrials; ++trial) {
    auto leaves = oracle::random_logs(rng, params.size_ts, 30);
    auto t = oracle::build_tree(params, 0, leaves);
    auto rec = finalize_tree(t, rng);

    auto victim = leaves.begin();
    std::advance(victim, uniform_below(rng, leaves.size()));
    uint32_t subepoch = params.subepoch_of(victim->first);
    auto tampered = leaves;
    tampered[victim->first] = {random_digest(rng)};
    auto t2 = oracle::build_tree(params, 0, tampered);
    auto mism = compare_parity(rec, t2.level_hashes(params.depth_p),
                               t2.empty_at(params.depth_p));
    bool localized = std::find(mism.begin(), mism.end(), subepoch) != mism.end();
    if (!localized) ++missed;
  }
  const double p = 1.0 / 16.0;
  const double sigma = std::sqrt(kTrials * p * (1 - p));
  CHECK(std::abs(missed - kTrials * p) < 4.0 * sigma);
}

TEST_CASE("occupancy-compressed records still localize") {
  auto rng = seeded_random(0x88);
  auto params = oracle::small_params();
  params.size_p = 16;
  auto leaves = oracle::random_logs(rng, params.size_ts, 20);
  auto t = oracle::build_tree(params, 0, leaves);
  auto rec = finalize_tree(t, rng, /*omit_empty=*/true);
  CHECK(rec.parity.size() < params.subepoch_count());

  // deleting a whole sub-epoch's only logs flips occupied -> empty
  auto victim_ts = leaves.begin()->first;
  uint32_t se = params.subepoch_of(victim_ts);
  auto tampered = leaves;
  for (auto it = tampered.begin(); it != tampered.end();)
    it = params.subepoch_of(it->first) == se ? tampered.erase(it) : ++it;
  auto t2 = oracle::build_tree(params, 0, tampered);
  auto mism = compare_parity(rec, t2.level_hashes(params.depth_p),
                             t2.empty_at(params.depth_p));
  CHECK(mism == std::vector<uint32_t>{se});

  // a sub-epoch that gains logs where none were stored is flagged too
  auto inserted = leaves;
  uint64_t fresh_ts = 0;
  for (uint64_t c = 0; c < params.leaf_count(); ++c)
    if (!leaves.count(c) &&
        !std::any_of(leaves.begin(), leaves.end(), [&](auto& kv) {
          return params.subepoch_of(kv.first) == params.subepoch_of(c);
        })) {
      fresh_ts = c;
      break;
    }
  inserted[fresh_ts] = {random_digest(rng)};
  auto t3 = oracle::build_tree(params, 0, inserted);
  auto mism2 = compare_parity(rec, t3.level_hashes(params.depth_p),
                              t3.empty_at(params.depth_p));
  CHECK(mism2 == std::vector<uint32_t>{params.subepoch_of(fresh_ts)});
}

TEST_CASE("record files round-trip through the binary layout") {
  auto rng = seeded_random(0x99);
  TreeParams p{.size_ts = 22, .depth_p = 12, .size_p = 16,
               .depth_u = 10, .epoch_seconds = 3600, .tick_hz = 1000};

  SECTION("plain record") {
    PitsTree t(p, 77);
    t.add_log(5, sha256("x"));
    auto rec = finalize_tree(t, rng);
    RecordFile rf{.device = "machine-7", .params = p, .record = rec};
    auto bytes = serialize_record(rf);
    auto back = parse_record(bytes);
    CHECK(back.device == rf.device);
    CHECK(back.record == rec);
    CHECK_FALSE(back.roots_only);

    // pinned header layout: magic, version, hash_id, size_ts, depth_p,
    // depth_u, size_p (u16 LE), flags, epoch (u64 LE), device (u16 len)
    REQUIRE(bytes.size() > 21);
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "PITS");
    CHECK(bytes[4] == 1);                      // version
    CHECK(bytes[5] == uint8_t(HashId::sha256));
    CHECK(bytes[6] == 22);                     // size_ts
    CHECK(bytes[7] == 12);                     // depth_p
    CHECK(bytes[8] == 10);                     // depth_u
    CHECK((bytes[9] | (bytes[10] << 8)) == 16);  // size_p
    CHECK(bytes[11] == 0);                     // flags
    CHECK(bytes[12] == 77);                    // epoch low byte
    CHECK((bytes[20] | (bytes[21] << 8)) == 9);  // device id length
    const std::size_t header = 4 + 1 + 1 + 1 + 1 + 1 + 2 + 1 + 8 + 2 + 9;
    CHECK(bytes.size() == header + serialize_record_body(rec, false).size());
  }

  SECTION("occupancy record") {
    PitsTree t(p, 78);
    t.add_log(17, sha256("y"));
    t.add_log((uint64_t(3000) << 10) + 4, sha256("z"));
    auto rec = finalize_tree(t, rng, true);
    RecordFile rf{.device = "machine-7", .params = p, .record = rec};
    auto back = parse_record(serialize_record(rf));
    CHECK(back.record == rec);
  }

  SECTION("roots-only record drops secret and parity") {
    PitsTree t(p, 79);
    auto rec = finalize_tree(t, rng);
    RecordFile rf{.device = "m", .params = p, .record = rec, .roots_only = true};
    auto bytes = serialize_record(rf);
    auto back = parse_record(bytes);
    CHECK(back.roots_only);
    CHECK(back.record.root == rec.root);
    CHECK(back.record.secret.positions.empty());
    CHECK(back.record.parity.empty());
    // body is exactly one digest
    CHECK(serialize_record_body(rec, true).size() == kDigestSize);
  }
}
