#pragma once

#include <stdexcept>
#include <string>

namespace forge {

/// Base of every error the pipeline raises. Recoverable per-target outcomes
/// (compile failures, crashes, verifier timeouts) are values, not errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define FORGE_DEFINE_ERROR(Name)      \
  class Name : public Error {         \
   public:                            \
    using Error::Error;               \
  };

// c_frontend
class PreprocessFailed : public Error {
 public:
  PreprocessFailed(const std::string& what, std::string stderr_text)
      : Error(what), stderr_text_(std::move(stderr_text)) {}
  const std::string& stderr_text() const { return stderr_text_; }

 private:
  std::string stderr_text_;
};

class ParseFailed : public Error {
 public:
  ParseFailed(const std::string& what, std::string offending_line, int line_no)
      : Error(what), offending_line_(std::move(offending_line)), line_no_(line_no) {}
  const std::string& offending_line() const { return offending_line_; }
  int line_no() const { return line_no_; }

 private:
  std::string offending_line_;
  int line_no_;
};

FORGE_DEFINE_ERROR(TargetNotFound)

// mockup_gen
FORGE_DEFINE_ERROR(EmitCollision)
FORGE_DEFINE_ERROR(LineOutOfRange)
FORGE_DEFINE_ERROR(SynthesizedLine)

// verifier_adapter
FORGE_DEFINE_ERROR(ToolMissing)

// llm_gateway
FORGE_DEFINE_ERROR(SourceTooLarge)
FORGE_DEFINE_ERROR(EndpointUnreachable)
FORGE_DEFINE_ERROR(ScriptExhausted)

// test_harness
FORGE_DEFINE_ERROR(NoTestsFound)
FORGE_DEFINE_ERROR(NoCoverageData)

class CoverageToolFailed : public Error {
 public:
  CoverageToolFailed(const std::string& what, std::string stderr_text)
      : Error(what), stderr_text_(std::move(stderr_text)) {}
  const std::string& stderr_text() const { return stderr_text_; }

 private:
  std::string stderr_text_;
};

// orchestrator
FORGE_DEFINE_ERROR(EmptyInput)
FORGE_DEFINE_ERROR(DegenerateInput)
FORGE_DEFINE_ERROR(FatalConfig)
FORGE_DEFINE_ERROR(IoFailure)

#undef FORGE_DEFINE_ERROR

}  // namespace forge
