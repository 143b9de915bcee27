#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "forge/frontend.hpp"

namespace forge {

enum class StubBehavior { return_zero, return_fixed, abort_on_call };

std::string_view to_string(StubBehavior behavior);

struct StubDecl {
  std::string name;
  std::string signature;  // prototype without storage class or trailing ';'
  StubBehavior behavior = StubBehavior::return_zero;
  std::string fixed_value;  // for return_fixed
  bool is_variable = false;
};

struct StubOverride {
  StubBehavior behavior = StubBehavior::return_zero;
  std::string value;
};
using StubPolicy = std::map<std::string, StubOverride>;

struct SourceOrigin {
  std::string file;
  int line = 0;
  friend bool operator==(const SourceOrigin&, const SourceOrigin&) = default;
};

struct SourceMapEntry {
  int emitted_line = 0;
  SourceOrigin origin;
  bool rewritten = false;  // `static` dropped or an identifier renamed on this line
};

struct Rename {
  std::string from;
  std::string to;
};

struct MockupOptions {
  std::vector<std::string> prelude = {"stdio.h", "stdlib.h", "string.h", "stdint.h"};
  bool carry_system_includes = true;
  std::vector<std::string> defines;      // NAME or NAME=VALUE, re-emitted as #define
  std::set<std::string> reserved_names;  // names the prelude headers already declare
};

struct MockupUnit {
  std::string target;
  std::string source_text;
  std::vector<SourceMapEntry> source_map;  // ascending emitted_line
  std::vector<StubDecl> stubs;
  std::vector<std::string> exposed;
  std::vector<Rename> renames;
  std::vector<Param> target_params;  // drive the verifier's synthesized main
  bool target_variadic = false;

  int line_count() const;
  std::string line(int emitted_line) const;
  /// Name the target has inside the mockup (differs only after a rename).
  std::string target_symbol() const;
  std::string file_name() const { return target + "_mockup.c"; }
};

MockupUnit generate_mockup(const std::vector<SymbolDecl>& closure, const TranslationUnit& unit,
                           const std::set<std::string>& unresolved, const StubPolicy& stub_policy = {},
                           const MockupOptions& options = {});

/// nullopt marks a synthesized line (prelude, stub, generated prototype).
std::optional<SourceOrigin> map_back(const MockupUnit& mockup, int emitted_line);

struct Edit {
  std::string file;
  int line = 0;
  std::string text;
  friend bool operator==(const Edit&, const Edit&) = default;
};

/// Ordered so that applying edits top to bottom never shifts a later target line.
struct EditScript {
  std::vector<Edit> edits;
};

EditScript annotate_original(const MockupUnit& mockup, int emitted_line, const std::string& note);
EditScript annotate_original(const MockupUnit& mockup, const std::vector<std::pair<int, std::string>>& notes);

/// Inserts each note as its own line above the target line, matching its indentation.
void apply_edit_script(const EditScript& script);

nlohmann::json source_map_json(const MockupUnit& mockup);
nlohmann::json to_json(const EditScript& script);

/// Writes `<target>_mockup.c` and `<target>_mockup.map.json` into `dir`.
void write_mockup(const MockupUnit& mockup, const std::filesystem::path& dir);

/// Names declared by the given system headers, for collision checks.
std::set<std::string> prelude_symbols(const std::vector<std::string>& headers,
                                      const std::string& preprocessor = "cc -E -dD");

}  // namespace forge
