// Device agent CLI: log creation, batching to the notary, sharing full logs
// with peers, and receipt acquisition for shared logs. State lives in the
// directory named by the config file.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "pits/agent.hpp"
#include "pits/http_api.hpp"

namespace {

struct CliConfig {
  pits::AgentConfig agent;
  std::string notary_url;
};

CliConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) pits::fail(pits::Err::io_error, "cannot open config " + path);
  auto j = nlohmann::json::parse(in);
  CliConfig c;
  c.agent.device = j.at("device").get<std::string>();
  c.notary_url = j.at("notary").get<std::string>();
  c.agent.state_dir = j.at("state_dir").get<std::string>();
  c.agent.skew_budget_ms = j.value("skew_ms", int64_t(2000));
  c.agent.params = pits::wire::params_from_json(j.at("params"));
  return c;
}

std::vector<uint8_t> to_bytes(const std::string& s) {
  return {s.begin(), s.end()};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"monitored-node / interactor agent"};
  app.require_subcommand(1);

  std::string config_path = "agent.json";
  app.add_option("--config", config_path, "agent config file")
      ->capture_default_str();

  auto* log_cmd = app.add_subcommand("log", "create a log entry");
  std::string content;
  log_cmd->add_option("--content", content, "log content (utf-8)")->required();

  auto* flush_cmd = app.add_subcommand("flush", "send queued batches");

  auto* share_cmd =
      app.add_subcommand("share", "hand a full log to an interacting node");
  std::string peer;
  std::string share_digest;
  share_cmd->add_option("--peer", peer, "peer agent state directory")->required();
  share_cmd->add_option("--digest", share_digest,
                        "log digest to share (default: most recent)");

  auto* receipt_cmd =
      app.add_subcommand("receipt", "fetch and verify a receipt for a shared log");
  std::string peer_device, digest_hex;
  uint64_t epoch = 0;
  receipt_cmd->add_option("--peer-device", peer_device)->required();
  receipt_cmd->add_option("--epoch", epoch)->required();
  receipt_cmd->add_option("--digest", digest_hex)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    CliConfig cfg = load_config(config_path);
    pits::Agent agent(cfg.agent);
    pits::HttpClient client(cfg.notary_url);

    if (*log_cmd) {
      auto entry = agent.log_event(std::span<const uint8_t>(
          reinterpret_cast<const uint8_t*>(content.data()), content.size()));
      std::printf("%s %lld\n", entry.digest.hex().c_str(),
                  static_cast<long long>(entry.ts_ms));
    } else if (*flush_cmd) {
      auto acks = agent.flush(client);
      if (acks.empty()) {
        std::printf("deferred: nothing queued\n");
      } else {
        for (const auto& ack : acks)
          std::printf("%s %s\n",
                      ack.status == pits::SubmitAck::Status::ok      ? "ok"
                      : ack.status == pits::SubmitAck::Status::replay ? "replay"
                                                                       : "flagged",
                      ack.chain_value.hex().c_str());
      }
    } else if (*share_cmd) {
      const auto& store = agent.local_store();
      if (store.empty()) pits::fail(pits::Err::unknown_log, "nothing logged yet");
      const pits::LogEntry* entry = &store.back();
      if (!share_digest.empty()) {
        auto want = pits::parse_digest(share_digest);
        entry = nullptr;
        for (const auto& e : store)
          if (e.digest == want) entry = &e;
        if (!entry) pits::fail(pits::Err::unknown_log, share_digest);
      }
      auto ev = agent.share(*entry);
      // desk-scale delivery: drop the event into the peer's shared inbox
      namespace fs = std::filesystem;
      fs::path dir = fs::path(peer) / "shared" / ev.device;
      fs::create_directories(dir);
      nlohmann::json j{{"device", ev.device},
                       {"epoch", ev.epoch},
                       {"ts_offset", ev.ts_offset},
                       {"ts_ms", ev.ts_ms},
                       {"enc", "b64"},
                       {"content", pits::detail::b64_encode(ev.content)}};
      auto out_path = dir / (entry->digest.hex() + ".json");
      std::ofstream out(out_path, std::ios::trunc);
      out << j.dump(2);
      std::printf("shared %s -> %s\n", entry->digest.hex().c_str(),
                  out_path.string().c_str());
    } else if (*receipt_cmd) {
      auto digest = pits::parse_digest(digest_hex);
      auto res = agent.obtain_receipt(client, peer_device, digest);
      if (res.status == pits::Agent::ReceiptStatus::stored) {
        if (res.receipt.epoch != epoch)
          std::fprintf(stderr, "note: receipt is for epoch %llu\n",
                       static_cast<unsigned long long>(res.receipt.epoch));
        std::printf("stored: verified receipt, %zu proof hashes\n",
                    res.receipt.poi.size());
      } else {
        std::printf("pending: partial receipt held until the epoch closes\n");
      }
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
