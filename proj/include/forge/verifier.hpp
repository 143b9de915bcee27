#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "forge/mockup.hpp"

namespace forge {

struct VerifierConfig {
  std::string executable = "esbmc";
  std::vector<std::string> extra_flags;
  std::chrono::milliseconds timeout{10'000};
  int unwind_bound = 8;

  void validate() const;  // throws FatalConfig
};

enum class Verdict { verification_failed, verification_successful, timeout, tool_error };
enum class PropertyKind { array_bounds, pointer_deref, arithmetic_overflow, division_by_zero, assertion, other };

std::string_view to_string(Verdict verdict);
std::string_view to_string(PropertyKind kind);

struct CodeLocation {
  std::string file;
  int line = 0;
  std::string function;
  friend bool operator==(const CodeLocation&, const CodeLocation&) = default;
};

struct Assignment {
  std::string variable;
  std::string value;
  friend bool operator==(const Assignment&, const Assignment&) = default;
};

struct Violation {
  PropertyKind property_kind = PropertyKind::other;
  std::string description;  // property text; whole section text when unparseable
  std::optional<CodeLocation> location;
  std::vector<Assignment> assignments;  // trace order
  int trace_depth = 0;
  friend bool operator==(const Violation&, const Violation&) = default;
};

struct VerifierReport {
  Verdict verdict = Verdict::tool_error;
  std::vector<Violation> violations;
  std::string raw_output;
  std::chrono::duration<double> elapsed{0};
  int unwind_bound = 0;
  std::chrono::milliseconds timeout{0};

  /// failed <=> violations nonempty.
  bool consistent() const;
  /// Anything but timeout or tool_error.
  bool decisive() const { return verdict == Verdict::verification_failed || verdict == Verdict::verification_successful; }
};

/// Anchored markers for one checker output dialect. Classification is first-match on
/// lower-cased property text.
struct CounterexampleGrammar {
  std::string name;
  std::regex section_start;
  std::regex state_header;     // (1) state number, (2) file, (3) line, (4) function
  std::regex assignment;       // (1) lhs, (2) value
  std::regex violated_header;
  std::regex location;         // (1) file, (2) line, (3) function
  std::regex section_end;
  std::vector<std::pair<std::string, PropertyKind>> classification;
};

/// ESBMC 7.x counterexample text.
const CounterexampleGrammar& esbmc_grammar();

/// Never throws: sections it cannot read become PropertyKind::other with the raw text kept.
std::vector<Violation> parse_counterexample(std::string_view raw_output,
                                            const CounterexampleGrammar& grammar = esbmc_grammar());

PropertyKind classify_property(std::string_view text, const CounterexampleGrammar& grammar = esbmc_grammar());

/// `main` that calls the mockup's target with unconstrained arguments.
std::string synthesize_driver(const MockupUnit& mockup);

/// Writes `<target>_verify.c` into `work_dir` (a temp dir when empty) and runs the checker.
VerifierReport run_verifier(const MockupUnit& mockup, const VerifierConfig& config,
                            const std::filesystem::path& work_dir = {});

std::string sensitization_summary(const VerifierReport& report, const MockupUnit& mockup);

nlohmann::json to_json(const Violation& v);
nlohmann::json to_json(const VerifierReport& report);

}  // namespace forge
