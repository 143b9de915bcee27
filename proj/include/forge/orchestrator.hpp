#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "forge/config.hpp"
#include "forge/reflection.hpp"
#include "forge/stats.hpp"

namespace forge {

enum class FinalStatus { completed, parse_failed, never_compiled, mockup_failed, budget_exhausted, internal_error };

std::string_view to_string(FinalStatus status);
FinalStatus final_status_from_string(std::string_view text);

struct IterationEntry {
  int iteration = 0;
  bool generation_ok = false;
  bool compile_ok = false;
  int n_cases = 0;  // enabled cases that ran
  int n_passed = 0;
  int n_failed_assert = 0;
  int n_crashed = 0;   // newly crashed this iteration
  int n_disabled = 0;  // crash-disabled cases in the suite, carried ones included
  std::optional<double> coverage_pct;
  std::optional<int> rating;
  std::optional<std::string> rating_source;
  ErrorCounters errors;
  std::map<std::string, std::string> verdicts;  // case name -> status
  std::string decision;
};

struct SessionRecord {
  std::string target;
  std::string source_file;
  std::vector<IterationEntry> entries;
  FinalStatus final_status = FinalStatus::internal_error;
  std::string failure;  // why a non-completed target stopped

  std::optional<std::string> verifier_verdict;
  int verifier_violations = 0;
  double verifier_elapsed = 0;

  std::optional<int> initial_rating;
  std::optional<int> final_rating;
  int reflection_cycles = 0;
  std::optional<double> final_coverage_pct;
  ErrorCounters totals;
  double wall_time = 0;  // seconds; excluded from aggregate reports

  bool executed() const;
  bool coverage_measured() const;
};

nlohmann::json to_json(const SessionRecord& record);
SessionRecord record_from_json(const nlohmann::json& j);

struct TargetRow {
  std::string target;
  std::string status;
  std::optional<int> initial_rating;
  std::optional<int> final_rating;
  int cycles = 0;
  std::optional<int> gain;
  std::optional<double> coverage_pct;
  ErrorCounters counters;
};

struct AggregateReport {
  int n_targets = 0;
  int n_executed = 0;
  int n_coverage_measured = 0;
  int n_improved = 0;
  int n_completed = 0;
  ErrorCounters counters;
  std::vector<TargetRow> rows;  // sorted by target
  std::optional<ImprovementStats> improvement;
  std::optional<double> pearson_r;  // reflection cycles vs rating gain
  std::optional<double> pearson_p;
};

AggregateReport aggregate(const std::vector<SessionRecord>& records);
nlohmann::json to_json(const AggregateReport& report);
bool operator==(const AggregateReport& a, const AggregateReport& b);

/// Gains over records that carry both ratings. Throws EmptyInput.
ImprovementStats improvement_stats(const std::vector<SessionRecord>& records);

/// summary.json, targets.csv, ratings_scatter.csv, cycles_gain.csv. Byte-stable.
std::vector<std::filesystem::path> emit_reports(const AggregateReport& report, const std::filesystem::path& dir);

/// Every `<out>/<target>/session.json`, sorted by target.
std::vector<SessionRecord> load_records(const std::filesystem::path& output_dir);

struct RunResult {
  AggregateReport report;
  std::vector<SessionRecord> records;
  int exit_code = 0;
};

/// 0 when every record completed, 2 otherwise.
int exit_code_for(const std::vector<SessionRecord>& records);

/// Runs every selected target and writes reports to `<output_dir>/reports`.
/// `backend` overrides the configured one (tests, bindings). Throws FatalConfig only.
RunResult run_pipeline(const RunConfig& config, ModelBackend* backend = nullptr, std::ostream* progress = nullptr);

}  // namespace forge
