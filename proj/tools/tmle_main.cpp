// tmle: run a scenario file through the error-decomposition harness.
//
//   tmle run --config <path> --out <dir> [--seed N] [--replicates N] [--threads N]
//   tmle validate --config <path>
//
// Exit codes: 0 success, 1 configuration error, 2 runtime error,
// 3 too many failed replicates. TMLE_THREADS sets the worker count when
// --threads is not given.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "tmle/error.hpp"
#include "tmle/pipeline.hpp"
#include "tmle/reports.hpp"
#include "tmle/scenario.hpp"

namespace {

enum Exit : int { kOk = 0, kConfig = 1, kRuntime = 2, kFailures = 3 };

std::size_t resolve_threads(const std::optional<std::size_t>& flag, std::size_t from_config) {
  if (flag) return *flag;
  if (const char* env = std::getenv("TMLE_THREADS"); env && *env) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (*end != '\0' || v == 0) throw tmle::ConfigError("TMLE_THREADS must be a positive integer");
    return static_cast<std::size_t>(v);
  }
  if (from_config) return from_config;
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Total machine learning error simulation workbench"};
  app.require_subcommand(1);
  app.set_version_flag("--version", tmle::harness::kVersion);

  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> replicates;
  std::optional<std::size_t> threads;

  auto* run = app.add_subcommand("run", "Run a scenario and write the reports");
  run->add_option("--config", config_path, "Scenario file")->required();
  run->add_option("--out", out_dir, "Output directory")->required();
  run->add_option("--seed", seed, "Master seed (overrides the file)");
  run->add_option("--replicates", replicates, "Monte Carlo replicates (overrides the file)")
      ->check(CLI::PositiveNumber);
  run->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);

  auto* validate = app.add_subcommand("validate", "Parse and check a scenario file");
  validate->add_option("--config", config_path, "Scenario file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  tmle::harness::ScenarioConfig cfg;
  try {
    cfg = tmle::harness::load_scenario(config_path);
    if (seed) cfg.seed = *seed;
    if (replicates) cfg.replicates = *replicates;
    cfg.validate();
  } catch (const tmle::Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  }

  if (validate->parsed()) {
    std::cout << "ok " << config_path << " (" << cfg.replicates << " replicates, "
              << tmle::harness::configurations(cfg).size() << " configurations)\n";
    return kOk;
  }

  try {
    const std::size_t workers = resolve_threads(threads, cfg.threads);
    const auto result = tmle::harness::run_scenario(cfg, workers);
    tmle::harness::emit_reports(result, cfg, out_dir);
    std::cout << "wrote " << out_dir << " (" << result.replicates.size() << " replicate runs, " << result.failures
              << " failed)\n";
    return kOk;
  } catch (const tmle::harness::ReplicateFailures& e) {
    std::cerr << "aborted: " << e.what() << "\n";
    return kFailures;
  } catch (const tmle::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return kRuntime;
  }
}
