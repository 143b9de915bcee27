#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "forge/harness.hpp"
#include "forge/llm.hpp"
#include "forge/verifier.hpp"

namespace forge {

/// "all", a comma list of names, or shell globs (`*`, `?`, `[...]`).
struct TargetSelector {
  std::vector<std::string> patterns;  // empty means all

  bool all() const { return patterns.empty(); }
  bool matches(const std::string& name) const;
  static TargetSelector parse(const std::string& text);
};

struct BackendDescriptor {
  enum class Kind { scripted, http } kind = Kind::scripted;
  std::filesystem::path script_dir;  // scripted
  HttpBackendConfig http;
};

struct RunConfig {
  std::vector<std::filesystem::path> source_roots;
  TargetSelector targets;
  std::vector<std::filesystem::path> include_dirs;
  std::vector<std::string> defines;
  std::string preprocessor = "cc -E -dD";
  std::vector<std::string> prelude_includes = {"stdio.h", "stdlib.h", "string.h", "stdint.h"};

  VerifierConfig verifier;
  bool verifier_enabled = true;

  BackendDescriptor backend;
  size_t token_budget = 32768;

  int max_iterations = 4;
  CompilerConfig compiler;
  std::string coverage_tool = "gcov";
  std::chrono::milliseconds per_case_timeout{5000};
  std::filesystem::path output_dir = "forge-out";
  int parallelism = 1;

  /// Throws FatalConfig.
  void validate() const;
};

/// Flat `key = value` file; `#` starts a comment; lists are comma separated.
/// Relative paths resolve against the file's directory.
RunConfig load_config(const std::filesystem::path& file);
RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});

/// "scripted:<dir>" or "http"; relative script dirs resolve against `base_dir`.
BackendDescriptor parse_backend(const std::string& text, const std::filesystem::path& base_dir = {});

std::unique_ptr<ModelBackend> make_backend(const BackendDescriptor& descriptor);

}  // namespace forge
