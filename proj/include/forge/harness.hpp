#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "forge/mockup.hpp"

namespace forge {

enum class CaseStatus { untried, passed, failed_assert, crashed, disabled_crash };

std::string_view to_string(CaseStatus status);

struct TestCase {
  std::string name;
  std::string body;  // the whole function definition, as generated (after any rename)
  CaseStatus status = CaseStatus::untried;
  std::optional<std::string> crash_signal;
  int iteration = 0;  // iteration that produced it
};

struct TestSuite {
  std::string target;
  std::vector<TestCase> cases;
  std::string support_code;  // generated code that is not a test case
  std::string harness_source;
  int iteration = 0;

  // Rendering inputs kept so the suite can be re-rendered after status changes.
  std::string mockup_file;
  std::string mockup_source;

  std::string file_name() const { return target + "_test.c"; }
  const TestCase* find(std::string_view name) const;
  size_t count(CaseStatus status) const;
};

/// Re-renders harness_source from the suite's fields.
void render_harness(TestSuite& suite);

/// The generated part of the harness (support code, cases, crash blocks) without
/// the embedded mockup or the dispatcher; what prompts show as prior tests.
std::string tests_source(const TestSuite& suite);

/// Splits `test_*` functions out of generated code. Crash-disabled cases of
/// `previous` are carried forward; a new case whose name collides with one of
/// them is renamed `<name>_v<iteration>`.
TestSuite build_harness(const MockupUnit& mockup, const std::string& generated_code, int iteration,
                        const TestSuite* previous = nullptr);

/// The `// CRASH` comment block for a disabled case.
std::string crash_block(const TestCase& tc);
/// Inverse of crash_block on the comment lines (marker line excluded).
std::string uncomment_crash_block(std::string_view commented);

struct CompilerConfig {
  std::string compiler = "cc";
  std::vector<std::string> flags = {"-std=gnu11", "-O0", "-g"};
  std::vector<std::string> coverage_flags = {"--coverage"};
  std::vector<std::string> link_libs = {"-lm"};
  std::chrono::seconds timeout{120};
};

struct CompileResult {
  bool ok = false;
  std::filesystem::path binary;
  std::string diagnostics;  // compiler stderr, verbatim
};

/// Writes the harness and the mockup into `dir`, clears old coverage counters and
/// compiles. Failure to compile is a result, not an exception.
CompileResult compile_suite(const TestSuite& suite, const CompilerConfig& config, const std::filesystem::path& dir);

/// Runs every enabled case in its own process.
TestSuite execute_suite(const std::filesystem::path& binary, const TestSuite& suite,
                        std::chrono::milliseconds per_case_timeout = std::chrono::seconds(5));

/// Crashed cases become disabled_crash and are commented out in harness_source.
TestSuite disable_crashed(const TestSuite& suite);

struct CoverageReport {
  std::map<int, long long> per_line;  // mockup line -> count, executable copied lines only
  double line_coverage_pct = 0.0;
  std::vector<int> uncovered_lines;

  int total() const { return static_cast<int>(per_line.size()); }
  int covered() const { return total() - static_cast<int>(uncovered_lines.size()); }
};

struct GcovLine {
  int line = 0;
  std::optional<long long> count;  // nullopt: not executable
};

/// Parses gcov's annotated-source text.
std::vector<GcovLine> parse_gcov(std::string_view text);

/// Builds a report from gcov lines, keeping only lines copied from the original
/// sources (prelude, stubs and generated prototypes are not the code under test).
CoverageReport coverage_from_gcov(const std::vector<GcovLine>& lines, const MockupUnit& mockup);

CoverageReport measure_coverage(const std::filesystem::path& binary_dir, const MockupUnit& mockup,
                                const std::string& coverage_tool = "gcov");

/// Prompt text: percentage plus the unexecuted lines with their original locations.
std::string coverage_summary(const CoverageReport& report, const MockupUnit& mockup);

nlohmann::json to_json(const CoverageReport& report, const MockupUnit& mockup);
nlohmann::json to_json(const TestSuite& suite);

}  // namespace forge
