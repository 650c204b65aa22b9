#include <catch2/catch_amalgamated.hpp>

#include <thread>

#include <httplib.h>

#include "oracle.hpp"
#include "pits/harness.hpp"
#include "pits/http_api.hpp"

using namespace pits;

namespace {

struct Server {
  TreeParams params{.size_ts = 10, .depth_p = 5, .size_p = 16, .depth_u = 3,
                    .epoch_seconds = 1, .tick_hz = 1000};
  EpochId epoch0 = 1600000;
  sim::SimClock clock{0};
  Notary notary;
  NotaryHttpServer api;
  httplib::Server svr;
  int port = 0;
  std::thread runner;

  Server()
      : clock(TreeParams{.size_ts = 10, .depth_p = 5, .size_p = 16, .depth_u = 3,
                         .epoch_seconds = 1, .tick_hz = 1000}
                  .epoch_start_ms(1600000)),
        notary(NotaryConfig{.params = params, .grace_seconds = 0}, clock.fn(),
               seeded_random(0x80)),
        api(notary) {
    api.install(svr);
    port = svr.bind_to_any_port("127.0.0.1");
    runner = std::thread([this] { svr.listen_after_bind(); });
    svr.wait_until_ready();
  }

  ~Server() {
    svr.stop();
    runner.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port); }
};

void collect_keys(const nlohmann::json& j, std::set<std::string>& out) {
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) {
      out.insert(k);
      collect_keys(v, out);
    }
  } else if (j.is_array()) {
    for (const auto& v : j) collect_keys(v, out);
  }
}

}  // namespace

TEST_CASE_METHOD(Server, "full flow over HTTP matches the in-process path") {
  HttpClient http(url());
  Agent agent(AgentConfig{.device = "dev0", .params = params}, clock.fn(),
              seeded_random(0x81));
  Agent peer(AgentConfig{.device = "peer", .params = params}, clock.fn(),
             seeded_random(0x82));

  clock.set(params.epoch_start_ms(epoch0) + 20);
  auto entry = agent.log_event("over-the-wire");
  peer.ingest_shared(agent.share(entry));
  auto acks = agent.flush(http);
  REQUIRE(acks.size() == 1);
  CHECK(acks[0].status == SubmitAck::Status::ok);

  clock.set(params.epoch_start_ms(epoch0 + 1) + 3);
  agent.log_event("next");
  agent.flush(http);
  api.maintenance();

  auto res = peer.obtain_receipt(http, "dev0", entry.digest);
  CHECK(res.status == Agent::ReceiptStatus::stored);

  // HTTP answers equal the in-process answers
  LocalClient local(notary);
  CHECK(http.get_root("dev0", epoch0) == local.get_root("dev0", epoch0));
  CHECK(http.get_update("dev0", epoch0) == local.get_update("dev0", epoch0));
  auto rr_http = http.get_receipt("dev0", epoch0, entry.digest,
                                  res.receipt.ts);
  auto rr_local = local.get_receipt("dev0", epoch0, entry.digest, res.receipt.ts);
  CHECK(rr_http.receipt == rr_local.receipt);

  // auditing over HTTP
  Auditor auditor(params);
  auto audit_res = auditor.audit_device(agent.local_store(), "dev0", epoch0, http);
  CHECK(audit_res.root_match);

  // error mapping keeps the code
  CHECK_THROWS_MATCHES(http.get_root("ghost", epoch0), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == Err::unknown_device;
                       }));
  auto rng = seeded_random(0x84);
  CHECK_THROWS_MATCHES(http.get_receipt("dev0", epoch0, random_digest(rng), 3),
                       Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == Err::unknown_log;
                       }));
}

TEST_CASE_METHOD(Server, "start_epoch registers a device with just a boundary") {
  auto rng = seeded_random(0x85);
  Digest h0 = random_digest(rng);
  httplib::Client raw(url().c_str());

  nlohmann::json req{{"device", "fresh"},
                     {"epoch", epoch0 + 1},
                     {"seq", 1},
                     {"entries", nlohmann::json::array()},
                     {"chain_value", h0.hex()},
                     {"boundary", {{"h0", h0.hex()}, {"h_ep", nullptr}}}};
  auto res = raw.Post("/start_epoch", req.dump(), "application/json");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(nlohmann::json::parse(res->body).at("status") == "ok");

  // entries are refused on this endpoint
  req["entries"].push_back({{"ts", 3}, {"digest", random_digest(rng).hex()}});
  req["seq"] = 2;
  res = raw.Post("/start_epoch", req.dump(), "application/json");
  REQUIRE(res);
  CHECK(res->status == 400);

  // a plain batch without boundary now succeeds: the device is known
  Digest d = random_digest(rng);
  nlohmann::json batch{{"device", "fresh"},
                       {"epoch", epoch0 + 1},
                       {"seq", 2},
                       {"entries", {{{"ts", 7}, {"digest", d.hex()}}}},
                       {"chain_value", chain_extend(h0, d).hex()}};
  res = raw.Post("/submit_batch", batch.dump(), "application/json");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(nlohmann::json::parse(res->body).at("status") == "ok");
}

TEST_CASE_METHOD(Server, "no endpoint ever serves secret or parity material") {
  HttpClient http(url());
  Agent agent(AgentConfig{.device = "dev0", .params = params}, clock.fn(),
              seeded_random(0x83));
  clock.set(params.epoch_start_ms(epoch0) + 20);
  auto entry = agent.log_event("sensitive");
  agent.flush(http);
  clock.set(params.epoch_start_ms(epoch0 + 1) + 3);
  agent.log_event("next");
  agent.flush(http);
  api.maintenance();

  const auto& record = notary.stored_record("dev0", epoch0);
  std::string secret_hex;
  for (auto pos : record.secret.positions) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "%02x", unsigned(pos) & 0xff);
    secret_hex += buf;
  }

  httplib::Client raw(url().c_str());
  auto level = wire::level_to_json(
      std::vector<Digest>(params.subepoch_count(), Digest{}));
  const std::vector<std::pair<std::string, std::string>> calls = {
      {"/get_root", R"({"device":"dev0","epoch":1600000})"},
      {"/get_update", R"({"device":"dev0","epoch":1600000})"},
      {"/get_receipt", std::string(R"({"device":"dev0","epoch":1600000,"ts":)") +
                           std::to_string(entry.ts_ms % 1000) +
                           R"(,"digest":")" + entry.digest.hex() + R"("})"},
      {"/audit", std::string(R"({"device":"dev0","epoch":1600000,"level":)") +
                     level.dump() + "}"},
      {"/get_inconsistencies", R"({"device":"dev0","epoch":1600000})"},
  };

  const std::set<std::string> allowed = {
      "status", "chain_value", "inconsistency", "receipt", "partial", "epoch",
      "level", "root", "mismatched_subepochs", "inconsistencies", "params",
      "device", "seq", "kind", "entries", "received_chain", "detected_at_ms",
      "ts", "digest", "co_leaf", "digests", "position", "poi", "bitmap",
      "partial_depth", "size_ts", "depth_p", "size_p", "depth_u",
      "epoch_seconds", "tick_hz", "counter_bits", "hash_id", "error", "message"};

  for (const auto& [path, body] : calls) {
    auto res = raw.Post(path.c_str(), body, "application/json");
    REQUIRE(res);
    INFO(path << " -> " << res->body);
    std::set<std::string> keys;
    collect_keys(nlohmann::json::parse(res->body), keys);
    for (const auto& k : keys) {
      CHECK(allowed.count(k) == 1);
      CHECK(k != "secret");
      CHECK(k != "parity");
    }
    CHECK(res->body.find(secret_hex) == std::string::npos);
  }
}
