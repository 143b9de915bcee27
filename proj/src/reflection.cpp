#include "forge/reflection.hpp"

#include <cmath>
#include <sstream>

#include "forge/error.hpp"
#include "forge/util.hpp"

namespace forge {

std::string_view to_string(VerdictSource source) {
  return source == VerdictSource::model ? "model" : "heuristic_fallback";
}

std::string_view to_string(LoopDecision decision) {
  switch (decision) {
    case LoopDecision::continue_loop: return "continue_loop";
    case LoopDecision::exit_success: return "exit_success";
    case LoopDecision::exit_budget_exhausted: return "exit_budget_exhausted";
  }
  return "?";
}

ErrorCounters& ErrorCounters::operator+=(const ErrorCounters& o) {
  compile_errors += o.compile_errors;
  crashes += o.crashes;
  verifier_timeouts += o.verifier_timeouts;
  generation_errors += o.generation_errors;
  return *this;
}

int heuristic_rating(double line_coverage_pct) {
  if (!(line_coverage_pct > 0)) return 0;
  if (line_coverage_pct >= 100) return 8;
  // The epsilon keeps exact multiples of 12.5% from landing one below.
  return static_cast<int>(std::floor(line_coverage_pct * 8.0 / 100.0 + 1e-9));
}

int heuristic_rating(const CoverageReport& coverage) {
  if (coverage.total() == 0) return 0;
  return coverage.covered() * 8 / coverage.total();
}

ReflectionVerdict heuristic_verdict(const CoverageReport* coverage, const MockupUnit& mockup) {
  ReflectionVerdict v;
  v.source = VerdictSource::heuristic_fallback;
  if (!coverage) {
    v.rating = 0;
    v.plan = "No test case ran to completion; write tests that compile and call " + mockup.target + ".";
    return v;
  }
  v.rating = heuristic_rating(*coverage);
  if (coverage->uncovered_lines.empty()) {
    v.plan = "Every executable line is covered; strengthen assertions on boundary values.";
    return v;
  }
  std::ostringstream os;
  os << "Add tests that execute these lines:";
  auto lines = split_lines(mockup.source_text);
  for (int l : coverage->uncovered_lines) {
    os << "\n- ";
    if (auto o = map_back(mockup, l))
      os << o->file << ":" << o->line;
    else
      os << "mockup line " << l;
    os << ": " << trim(lines[static_cast<size_t>(l - 1)]);
  }
  v.plan = os.str();
  return v;
}

ReflectionVerdict reflect(const CoverageReport* coverage, const TestSuite& suite, ModelBackend& backend,
                          const ReflectInputs& inputs) {
  if (!inputs.mockup) throw EmptyInput("reflect needs the mockup");
  const MockupUnit& mockup = *inputs.mockup;

  PromptBundle bundle;
  bundle.instruction = Instruction::reflect;
  bundle.mockup_source = mockup.source_text;
  bundle.prior_tests = tests_source(suite);
  bundle.coverage_summary = coverage ? coverage_summary(*coverage, mockup) : std::string("No coverage data: no test case ran.");
  bundle.verifier_summary = inputs.verifier_summary;
  bundle.token_budget = inputs.token_budget;

  std::string reason;
  try {
    auto response = complete(backend, assemble_prompt(bundle),
                             {inputs.request_key.empty() ? mockup.target : inputs.request_key, Instruction::reflect});
    if (response.extracted_rating && response.extracted_plan) {
      ReflectionVerdict v;
      v.rating = *response.extracted_rating;
      v.plan = *response.extracted_plan;
      v.source = VerdictSource::model;
      v.rating_clamped = response.rating_clamped;
      return v;
    }
    reason = response.extracted_rating ? "reply has no PLAN line" : "reply has no RATING line";
  } catch (const Error& e) {
    reason = e.what();
  }
  auto v = heuristic_verdict(coverage, mockup);
  v.fallback_reason = reason;
  return v;
}

LoopDecision should_continue(const LoopState& state) {
  bool clean = state.last_errors.compile_errors == 0 && state.last_errors.generation_errors == 0;
  if (state.iteration >= state.max_iterations && clean) return LoopDecision::exit_success;
  if (state.iteration >= 2 * state.max_iterations) return LoopDecision::exit_budget_exhausted;
  return LoopDecision::continue_loop;
}

}  // namespace forge
