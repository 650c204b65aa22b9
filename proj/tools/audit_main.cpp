// Validator CLI: rebuilds a device's tree from a log-store snapshot, checks
// the published root, localizes tampering through the notary's parity audit
// and cross-checks interactor receipts.

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <CLI11.hpp>

#include "pits/auditor.hpp"
#include "pits/http_api.hpp"

int main(int argc, char** argv) {
  CLI::App app{"log-store auditor"};

  std::string snapshot, device, notary_url, receipts_dir, report_path;
  uint64_t epoch = 0;
  pits::TreeParams params;
  unsigned size_ts = params.size_ts, depth_p = params.depth_p;
  unsigned depth_u = params.depth_u, size_p = params.size_p;
  unsigned counter_bits = params.counter_bits;

  app.add_option("--snapshot", snapshot, "device log store (line-delimited)")
      ->required();
  app.add_option("--device", device)->required();
  app.add_option("--epoch", epoch)->required();
  app.add_option("--notary", notary_url, "e.g. http://127.0.0.1:9290")->required();
  app.add_option("--receipts", receipts_dir,
                 "directory of receipt JSON files from interactors");
  app.add_option("--report", report_path, "write the report as JSON here")
      ->required();
  app.add_option("--epoch-seconds", params.epoch_seconds)->capture_default_str();
  app.add_option("--size-ts", size_ts)->capture_default_str();
  app.add_option("--depth-p", depth_p)->capture_default_str();
  app.add_option("--size-p", size_p)->capture_default_str();
  app.add_option("--depth-u", depth_u)->capture_default_str();
  app.add_option("--tick-hz", params.tick_hz)->capture_default_str();
  app.add_option("--counter-bits", counter_bits)->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  params.size_ts = uint8_t(size_ts);
  params.depth_p = uint8_t(depth_p);
  params.depth_u = uint8_t(depth_u);
  params.size_p = uint16_t(size_p);
  params.counter_bits = uint8_t(counter_bits);

  try {
    params.validate();
    pits::Auditor auditor(params);
    auto entries = pits::Auditor::read_snapshot(snapshot);
    pits::HttpClient client(notary_url);
    auto result = auditor.audit_device(entries, device, epoch, client);

    std::vector<pits::Receipt> receipts;
    if (!receipts_dir.empty()) {
      namespace fs = std::filesystem;
      for (const auto& f : fs::recursive_directory_iterator(receipts_dir)) {
        if (!f.is_regular_file() || f.path().extension() != ".json") continue;
        std::ifstream in(f.path());
        try {
          receipts.push_back(
              pits::wire::receipt_from_json(nlohmann::json::parse(in)));
        } catch (const std::exception&) {
          result.warnings.push_back("unreadable receipt file: " +
                                    f.path().string());
        }
      }
      auditor.cross_check_receipts(result, receipts, entries);
    }

    std::ofstream out(report_path, std::ios::trunc);
    if (!out) pits::fail(pits::Err::io_error, "cannot write " + report_path);
    out << pits::wire::to_json(result).dump(2) << '\n';

    if (result.root_match) {
      std::printf("root match: no tampering for device %s epoch %llu\n",
                  device.c_str(), static_cast<unsigned long long>(epoch));
    } else {
      std::printf("ROOT MISMATCH: %zu window(s) flagged, %zu chain record(s)\n",
                  result.tampered_windows.size(),
                  result.chain_inconsistencies.size());
      for (const auto& w : result.tampered_windows)
        std::printf("  sub-epoch %u: [%.3f, %.3f) ms%s\n", w.subepoch, w.start_ms,
                    w.end_ms,
                    w.exact_ts_ms.empty() ? "" : " (receipt-pinned)");
    }
    std::printf("report written to %s\n", report_path.c_str());
    return result.root_match && result.chain_inconsistencies.empty() ? 0 : 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
