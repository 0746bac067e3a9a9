#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "tmle/pipeline.hpp"

namespace tmle::harness {

inline constexpr const char* kVersion = "1.0.0";

// Files written by emit_reports, in writing order.
inline constexpr const char* kReportFiles[] = {"replicates.csv", "decomposition.csv", "validity.csv",
                                               "table1.csv",     "representativity.csv", "run_manifest.txt"};

// Writes the five CSV files and run_manifest.txt into `out_dir` (created if
// missing). Every value goes through format_double, so the bytes depend only
// on the results. Throws IoError naming the path on failure.
void emit_reports(const RunResult& result, const ScenarioConfig& config, const std::filesystem::path& out_dir);

// CSV text of each report, for callers that do not want files.
std::string replicates_csv(const std::vector<ReplicateResult>& replicates);
std::string decomposition_csv(const DecompositionReport& report);
std::string validity_csv(const ValidityReport& report);
std::string table1_csv(const std::vector<Table1Row>& rows);
std::string representativity_csv(const std::vector<RepresentativityRow>& rows);
std::string run_manifest(const ScenarioConfig& config);

}  // namespace tmle::harness
