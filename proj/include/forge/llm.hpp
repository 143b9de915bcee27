#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace forge {

enum class Instruction { generate_tests, reflect };

std::string_view to_string(Instruction instruction);

/// Instruction text for a template version ("v1" is the only one shipped).
const std::string& instruction_template(Instruction instruction, std::string_view version = "v1");

struct PromptBundle {
  std::string mockup_source;
  std::optional<std::string> prior_tests;
  std::optional<std::string> coverage_summary;
  std::optional<std::string> verifier_summary;
  std::optional<std::string> diagnostics;  // compiler output from the previous attempt
  std::optional<std::string> plan;         // last reflection plan, heads the prior-tests section
  Instruction instruction = Instruction::generate_tests;
  size_t token_budget = 32768;             // characters
};

/// Section order is fixed: INSTRUCTION, SOURCE, VERIFIER, COVERAGE, COMPILER DIAGNOSTICS,
/// PRIOR TESTS. Over budget, bodies are cut tail-first: prior tests, then coverage,
/// diagnostics, verifier. The source is never cut; SourceTooLarge instead.
std::string assemble_prompt(const PromptBundle& bundle);

inline constexpr std::string_view kTruncationMarker = "\n[... truncated]";

struct ModelResponse {
  std::string text;
  std::optional<std::string> extracted_code;
  std::optional<int> extracted_rating;  // clamped to [0, 8]
  std::optional<std::string> extracted_plan;
  int code_blocks = 0;
  bool rating_clamped = false;
};

/// Pure extraction, also used by the backends.
ModelResponse parse_response(std::string text);

struct RequestContext {
  std::string target;  // scripted backends may keep one script per target
  Instruction instruction = Instruction::generate_tests;
};

class ModelBackend {
 public:
  virtual ~ModelBackend() = default;
  virtual std::string describe() const = 0;
  /// Raw completion text. Must be safe to call from several threads.
  virtual std::string send(const std::string& prompt, const RequestContext& ctx) = 0;
};

/// Replays `000.txt`, `001.txt`, ... in order. If `<dir>/<target>/` exists, that
/// target reads its own sequence from there instead of the shared one.
class ScriptedBackend final : public ModelBackend {
 public:
  explicit ScriptedBackend(std::filesystem::path dir);
  std::string describe() const override;
  std::string send(const std::string& prompt, const RequestContext& ctx) override;

  /// Every prompt received, in call order (for tests and transcripts).
  std::vector<std::string> prompts() const;

 private:
  std::filesystem::path dir_;
  mutable std::mutex mu_;
  std::map<std::string, size_t> cursors_;  // "" is the shared script
  std::vector<std::string> prompts_;
};

struct HttpBackendConfig {
  std::string url;  // e.g. https://api.example.com/v1/chat/completions
  std::string model;
  std::string credentials_env;  // name of the variable holding the key
  double temperature = 0.0;
  int retries = 3;
  std::chrono::milliseconds initial_backoff{500};
  std::chrono::seconds request_timeout{120};
};

/// OpenAI-style chat-completions client.
class HttpBackend final : public ModelBackend {
 public:
  explicit HttpBackend(HttpBackendConfig config);
  std::string describe() const override;
  std::string send(const std::string& prompt, const RequestContext& ctx) override;

  const HttpBackendConfig& config() const { return config_; }

 private:
  HttpBackendConfig config_;
};

ModelResponse complete(ModelBackend& backend, const std::string& prompt, const RequestContext& ctx = {});

}  // namespace forge
