// Log-notary server: ingests log batches over HTTP, finalizes epoch trees,
// persists parity records and serves receipts, updates, roots and audits.

#include <atomic>
#include <csignal>
#include <cstdio>
#include <thread>

#include <CLI11.hpp>

#include "pits/http_api.hpp"

namespace {
std::atomic<bool> g_stop{false};
void handle_signal(int) { g_stop = true; }
}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tamper-evident log notary"};

  std::string listen = "127.0.0.1:9290";
  std::string data_dir = "./notary-data";
  std::string retention;
  pits::NotaryConfig cfg;
  unsigned size_ts = cfg.params.size_ts, depth_p = cfg.params.depth_p;
  unsigned depth_u = cfg.params.depth_u, size_p = cfg.params.size_p;
  unsigned counter_bits = cfg.params.counter_bits;

  app.add_option("--listen", listen, "host:port to serve on")
      ->capture_default_str();
  app.add_option("--data-dir", data_dir, "directory for records and forensics")
      ->capture_default_str();
  app.add_option("--epoch-seconds", cfg.params.epoch_seconds)
      ->capture_default_str();
  app.add_option("--size-ts", size_ts, "bit width of leaf addresses")
      ->capture_default_str();
  app.add_option("--depth-p", depth_p, "parity depth")->capture_default_str();
  app.add_option("--size-p", size_p, "parity bits per sub-epoch")
      ->capture_default_str();
  app.add_option("--depth-u", depth_u, "receipt-update depth")
      ->capture_default_str();
  app.add_option("--tick-hz", cfg.params.tick_hz, "log timestamp resolution")
      ->capture_default_str();
  app.add_option("--counter-bits", counter_bits,
                 "low-order offset bits reserved for same-tick logs")
      ->capture_default_str();
  app.add_option("--retention", retention,
                 "stage schedule, e.g. leaves:1,parity:24,roots:8760");
  app.add_option("--grace-seconds", cfg.grace_seconds,
                 "straggler window after an epoch ends")
      ->capture_default_str();
  app.add_flag("--omit-empty-parity", cfg.omit_empty_parity,
               "store parity only for populated sub-epochs");

  CLI11_PARSE(app, argc, argv);
  cfg.params.size_ts = uint8_t(size_ts);
  cfg.params.depth_p = uint8_t(depth_p);
  cfg.params.depth_u = uint8_t(depth_u);
  cfg.params.size_p = uint16_t(size_p);
  cfg.params.counter_bits = uint8_t(counter_bits);
  cfg.data_dir = data_dir;

  try {
    cfg.params.validate();
    if (!retention.empty())
      cfg.retention = pits::RetentionSchedule::parse(retention);

    pits::Notary notary(cfg);
    pits::NotaryHttpServer api(notary);
    httplib::Server server;
    api.install(server);

    auto [host, port] = pits::split_listen_addr(listen);
    std::signal(SIGINT, handle_signal);
    std::signal(SIGTERM, handle_signal);

    std::thread janitor([&] {
      while (!g_stop) {
        std::this_thread::sleep_for(std::chrono::seconds(1));
        try {
          api.maintenance();
        } catch (const std::exception& e) {
          std::fprintf(stderr, "maintenance: %s\n", e.what());
        }
      }
      server.stop();
    });

    std::printf("notary listening on %s, data in %s\n", listen.c_str(),
                data_dir.c_str());
    if (!server.listen(host, port)) {
      std::fprintf(stderr, "cannot listen on %s\n", listen.c_str());
      g_stop = true;
      janitor.join();
      return 1;
    }
    janitor.join();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
