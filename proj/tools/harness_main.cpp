// Scenario runner and micro-benchmark for the logging scheme: replays the
// adversary strategies end to end against an in-process notary and reports
// detection/localization outcomes, or measures tree throughput.

#include <cstdio>
#include <fstream>

#include <CLI11.hpp>

#include "pits/harness.hpp"

namespace {

pits::sim::Scenario scenario_from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) pits::fail(pits::Err::io_error, "cannot open scenario " + path);
  auto j = nlohmann::json::parse(in);
  pits::sim::Scenario s;
  s.name = j.value("name", std::string("scenario"));
  s.action = pits::sim::action_from_string(j.at("action").get<std::string>());
  s.logs = j.value("logs", 60u);
  s.background_devices = j.value("background_devices", 0u);
  s.alter_count = j.value("alter_count", 1u);
  s.shares = j.value("shares", 4u);
  if (j.contains("params")) s.params = pits::wire::params_from_json(j.at("params"));
  if (j.contains("faults")) {
    s.faults.drop = j.at("faults").value("drop", 0.0);
    s.faults.duplicate = j.at("faults").value("duplicate", 0.0);
  }
  s.seed = j.value("seed", uint64_t(1));
  return s;
}

void print_outcome(const pits::sim::ScenarioOutcome& o) {
  std::printf("scenario %-26s seed %-6llu %s\n", o.name.c_str(),
              static_cast<unsigned long long>(o.seed),
              o.detected ? "DETECTED" : "clean");
  std::printf("  root match: %s\n", o.root_match ? "yes" : "no");
  if (!o.inconsistency_kinds.empty()) {
    std::printf("  forensic records:");
    for (const auto& k : o.inconsistency_kinds) std::printf(" %s", k.c_str());
    std::printf("\n");
  }
  if (!o.localized_windows.empty()) {
    std::printf("  localized windows:");
    for (const auto& w : o.localized_windows) std::printf(" %u", w.subepoch);
    std::printf("  (expected:");
    for (auto e : o.expected_subepochs) std::printf(" %u", e);
    std::printf(")\n");
  }
  if (o.receipts_contradicting || o.receipts_corroborating)
    std::printf("  receipts: %u corroborate, %u contradict\n",
                o.receipts_corroborating, o.receipts_contradicting);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adversary scenarios and benchmarks"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run one adversary scenario");
  std::string scenario = "modify";
  uint64_t seed = 1;
  bool as_json = false;
  run->add_option("--scenario", scenario,
                  "none|modify|delete|insert|pre-submission-tamper|truncate|"
                  "multi-subepoch-obfuscate|wipe, or a JSON file")
      ->capture_default_str();
  run->add_option("--seed", seed)->capture_default_str();
  run->add_flag("--json", as_json, "emit the outcome as JSON");

  auto* bench = app.add_subcommand("bench", "tree throughput micro-benchmark");
  std::size_t logs = 1000000;
  unsigned threads = 1;
  bool bench_json = false;
  bench->add_option("--logs", logs)->capture_default_str();
  bench->add_option("--threads", threads)->capture_default_str();
  bench->add_flag("--json", bench_json, "emit the report as JSON");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      pits::sim::Scenario s;
      if (scenario.size() > 5 &&
          scenario.substr(scenario.size() - 5) == ".json") {
        s = scenario_from_file(scenario);
      } else {
        s.action = pits::sim::action_from_string(scenario);
        s.name = scenario;
      }
      s.seed = seed;
      auto outcome = pits::sim::run_scenario(s);
      if (as_json)
        std::printf("%s\n", pits::sim::wire::to_json(outcome).dump(2).c_str());
      else
        print_outcome(outcome);
      return 0;
    }
    if (*bench) {
      pits::TreeParams params;  // 22-bit addresses, hourly epochs
      auto report = pits::sim::bench(params, logs, threads);
      if (bench_json) {
        std::printf("%s\n", pits::sim::wire::to_json(report).dump(2).c_str());
      } else {
        std::printf("logs               %zu\n", report.logs);
        std::printf("threads            %u\n", report.threads);
        std::printf("insert rate        %.0f logs/s (all threads)\n",
                    report.insert_logs_per_sec);
        std::printf("insert rate (1T)   %.0f logs/s\n",
                    report.single_thread_logs_per_sec);
        std::printf("receipt rate       %.0f receipts/s\n",
                    report.receipts_per_sec);
        std::printf("finalize           %.3f ms\n", report.finalize_ms);
        std::printf("tree nodes         %zu (%zu leaves)\n", report.node_count,
                    report.leaf_count);
        std::printf("memory full tree   %.2f MB\n",
                    double(report.full_tree_bytes) / 1048576.0);
        std::printf("memory leaves only %.2f MB\n",
                    double(report.leaves_only_bytes) / 1048576.0);
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
