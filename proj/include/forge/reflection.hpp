#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "forge/harness.hpp"
#include "forge/llm.hpp"
#include "forge/mockup.hpp"

namespace forge {

enum class VerdictSource { model, heuristic_fallback };

std::string_view to_string(VerdictSource source);

struct ReflectionVerdict {
  int rating = 0;  // 0..8
  std::string plan;
  VerdictSource source = VerdictSource::heuristic_fallback;
  bool rating_clamped = false;  // the model answered outside 0..8
  std::string fallback_reason;  // why the model answer was not used
};

struct ErrorCounters {
  int compile_errors = 0;
  int crashes = 0;
  int verifier_timeouts = 0;
  int generation_errors = 0;  // no usable code in the model reply

  ErrorCounters& operator+=(const ErrorCounters& o);
  friend bool operator==(const ErrorCounters&, const ErrorCounters&) = default;
};

struct LoopState {
  int iteration = 0;
  int max_iterations = 4;
  ErrorCounters last_errors;  // the most recent iteration only
  std::vector<ReflectionVerdict> rating_history;
};

enum class LoopDecision { continue_loop, exit_success, exit_budget_exhausted };

std::string_view to_string(LoopDecision decision);

/// floor(pct / 100 * 8), nondecreasing in pct.
int heuristic_rating(double line_coverage_pct);
/// Same rule on exact counts: covered * 8 / total.
int heuristic_rating(const CoverageReport& coverage);

/// Rating from coverage, plan listing the unexecuted lines. `coverage` may be null
/// when nothing ran.
ReflectionVerdict heuristic_verdict(const CoverageReport* coverage, const MockupUnit& mockup);

struct ReflectInputs {
  const MockupUnit* mockup = nullptr;
  std::optional<std::string> verifier_summary;
  size_t token_budget = 32768;
  std::string request_key;  // backend routing key; the mockup's target when empty
};

/// Asks the model for RATING/PLAN; any failure (bad reply, backend error, prompt
/// too large) falls back to the heuristic. Never throws for backend problems.
ReflectionVerdict reflect(const CoverageReport* coverage, const TestSuite& suite, ModelBackend& backend,
                          const ReflectInputs& inputs);

LoopDecision should_continue(const LoopState& state);

}  // namespace forge
