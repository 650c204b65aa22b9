#pragma once

// HTTP transport for the wire API: one POST endpoint per operation, JSON in
// and out. Errors come back as {"error": <code>, "message": ...} with a 4xx
// status so clients can rethrow the original code.

#include <mutex>
#include <string>

#include <httplib.h>

#include "pits/client.hpp"
#include "pits/notary.hpp"
#include "pits/wire.hpp"

namespace pits {

inline std::pair<std::string, int> split_listen_addr(const std::string& addr) {
  auto colon = addr.rfind(':');
  if (colon == std::string::npos)
    fail(Err::invalid_params, "listen address must be host:port");
  return {addr.substr(0, colon), std::stoi(addr.substr(colon + 1))};
}

class NotaryHttpServer {
 public:
  explicit NotaryHttpServer(Notary& notary) : notary_(notary) {}

  void install(httplib::Server& server) {
    route(server, "/submit_batch", [this](const wire::json& req) {
      auto ack = notary_.submit_batch(wire::batch_from_json(req));
      return ack_json(ack);
    });
    // boundary-only shortcut; same handling as a batch without entries
    route(server, "/start_epoch", [this](const wire::json& req) {
      auto batch = wire::batch_from_json(req);
      if (!batch.entries.empty())
        fail(Err::malformed_batch, "start_epoch takes no entries");
      return ack_json(notary_.submit_batch(batch));
    });
    route(server, "/get_receipt", [this](const wire::json& req) {
      auto rr = notary_.get_receipt(
          req.at("device").get<std::string>(), req.at("epoch").get<uint64_t>(),
          parse_digest(req.at("digest").get<std::string>()),
          req.at("ts").get<uint64_t>());
      return wire::json{{"receipt", wire::to_json(rr.receipt)},
                        {"partial", rr.partial}};
    });
    route(server, "/get_update", [this](const wire::json& req) {
      auto u = notary_.get_update(req.at("device").get<std::string>(),
                                  req.at("epoch").get<uint64_t>());
      return wire::to_json(u);
    });
    route(server, "/get_root", [this](const wire::json& req) {
      auto root = notary_.get_root(req.at("device").get<std::string>(),
                                   req.at("epoch").get<uint64_t>());
      return wire::json{{"epoch", req.at("epoch").get<uint64_t>()},
                        {"root", root.hex()}};
    });
    route(server, "/audit", [this](const wire::json& req) {
      auto level = wire::level_from_json(req.at("level"));
      auto result = notary_.audit(req.at("device").get<std::string>(),
                                  req.at("epoch").get<uint64_t>(), level);
      wire::json inconsistencies = wire::json::array();
      for (const auto& rec : result.inconsistencies)
        inconsistencies.push_back(wire::to_json(rec));
      return wire::json{{"mismatched_subepochs", result.mismatched_subepochs},
                        {"inconsistencies", std::move(inconsistencies)},
                        {"params", wire::to_json(result.params)}};
    });
    route(server, "/get_inconsistencies", [this](const wire::json& req) {
      auto recs =
          notary_.inconsistencies_for(req.at("device").get<std::string>(),
                                      req.at("epoch").get<uint64_t>());
      wire::json out = wire::json::array();
      for (const auto& rec : recs) out.push_back(wire::to_json(rec));
      return wire::json{{"inconsistencies", std::move(out)}};
    });
  }

  void maintenance() {
    std::lock_guard lock(mu_);
    notary_.maintenance();
  }

 private:
  static wire::json ack_json(const SubmitAck& ack) {
    const char* status = ack.status == SubmitAck::Status::ok      ? "ok"
                         : ack.status == SubmitAck::Status::replay ? "replay"
                                                                    : "flagged";
    wire::json j{{"status", status}, {"chain_value", ack.chain_value.hex()}};
    if (ack.inconsistency) j["inconsistency"] = wire::to_json(*ack.inconsistency);
    return j;
  }

  template <typename Fn>
  void route(httplib::Server& server, const std::string& path, Fn handler) {
    server.Post(path, [this, handler](const httplib::Request& req,
                                      httplib::Response& res) {
      try {
        wire::json body =
            req.body.empty() ? wire::json::object() : wire::json::parse(req.body);
        wire::json out;
        {
          std::lock_guard lock(mu_);
          out = handler(body);
        }
        res.set_content(out.dump(), "application/json");
      } catch (const Error& e) {
        wire::json err{{"error", to_string(e.code())}, {"message", e.what()}};
        res.status = e.code() == Err::unknown_device ||
                             e.code() == Err::unknown_epoch ||
                             e.code() == Err::unknown_log ||
                             e.code() == Err::no_published_root
                         ? 404
                         : 400;
        res.set_content(err.dump(), "application/json");
      } catch (const std::exception& e) {
        wire::json err{{"error", "InternalError"}, {"message", e.what()}};
        res.status = 500;
        res.set_content(err.dump(), "application/json");
      }
    });
  }

  Notary& notary_;
  std::mutex mu_;  // request handling is serialized; fine at desk scale
};

class HttpClient final : public NotaryClient {
 public:
  explicit HttpClient(const std::string& base_url) : cli_(base_url.c_str()) {
    cli_.set_connection_timeout(5);
    cli_.set_read_timeout(30);
  }

  SubmitAck submit_batch(const LogBatch& batch) override {
    auto j = call("/submit_batch", wire::to_json(batch));
    SubmitAck ack;
    auto status = j.at("status").get<std::string>();
    ack.status = status == "ok"      ? SubmitAck::Status::ok
                 : status == "replay" ? SubmitAck::Status::replay
                                      : SubmitAck::Status::flagged;
    ack.chain_value = parse_digest(j.at("chain_value").get<std::string>());
    if (j.contains("inconsistency"))
      ack.inconsistency = wire::inconsistency_from_json(j.at("inconsistency"));
    return ack;
  }

  ReceiptResult get_receipt(const std::string& device, EpochId epoch,
                            const Digest& log_digest, TimestampOffset ts) override {
    auto j = call("/get_receipt", wire::json{{"device", device},
                                             {"epoch", epoch},
                                             {"digest", log_digest.hex()},
                                             {"ts", ts}});
    return {wire::receipt_from_json(j.at("receipt")), j.at("partial").get<bool>()};
  }

  ReceiptUpdate get_update(const std::string& device, EpochId epoch) override {
    return wire::update_from_json(
        call("/get_update", wire::json{{"device", device}, {"epoch", epoch}}));
  }

  Digest get_root(const std::string& device, EpochId epoch) override {
    auto j = call("/get_root", wire::json{{"device", device}, {"epoch", epoch}});
    return parse_digest(j.at("root").get<std::string>());
  }

  AuditResult audit(const std::string& device, EpochId epoch,
                    std::span<const Digest> candidate_level) override {
    auto j = call("/audit", wire::json{{"device", device},
                                       {"epoch", epoch},
                                       {"level", wire::level_to_json(candidate_level)}});
    AuditResult out;
    out.mismatched_subepochs =
        j.at("mismatched_subepochs").get<std::vector<uint32_t>>();
    for (const auto& rec : j.at("inconsistencies"))
      out.inconsistencies.push_back(wire::inconsistency_from_json(rec));
    out.params = wire::params_from_json(j.at("params"));
    return out;
  }

  std::vector<InconsistencyRecord> get_inconsistencies(const std::string& device,
                                                       EpochId epoch) override {
    auto j = call("/get_inconsistencies",
                  wire::json{{"device", device}, {"epoch", epoch}});
    std::vector<InconsistencyRecord> out;
    for (const auto& rec : j.at("inconsistencies"))
      out.push_back(wire::inconsistency_from_json(rec));
    return out;
  }

 private:
  wire::json call(const std::string& path, const wire::json& body) {
    auto res = cli_.Post(path.c_str(), body.dump(), "application/json");
    if (!res) fail(Err::transport_error, "no response from notary");
    wire::json j;
    try {
      j = wire::json::parse(res->body);
    } catch (const wire::json::exception&) {
      fail(Err::transport_error, "unparsable response");
    }
    if (res->status != 200) {
      auto code = j.value("error", std::string("TransportError"));
      fail(err_from_string(code), j.value("message", std::string()));
    }
    return j;
  }

  httplib::Client cli_;
};

}  // namespace pits
