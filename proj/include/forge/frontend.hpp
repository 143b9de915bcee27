#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace forge {

enum class SymbolKind { function, global_var, typedef_name, struct_union_enum, macro_residue };
enum class Storage { static_internal, external };

std::string_view to_string(SymbolKind kind);
std::string_view to_string(Storage storage);

/// Inclusive line range in preprocessed-text coordinates (1-based).
struct LineSpan {
  int start_line = 0;
  int end_line = 0;
  friend bool operator==(const LineSpan&, const LineSpan&) = default;
};

/// Where a preprocessed line came from, per the preprocessor's line markers.
struct LineOrigin {
  std::string file;
  int line = 0;         // 0 for marker lines
  bool system = false;  // system header or compiler-internal pseudo file
  friend bool operator==(const LineOrigin&, const LineOrigin&) = default;
};

struct Param {
  std::string text;  // as written, name synthesized when absent
  std::string name;
  bool pointer = false;           // pointer or array (decays)
  bool function_pointer = false;
  friend bool operator==(const Param&, const Param&) = default;
};

struct SymbolDecl {
  std::string name;  // tags are named "struct X" / "union X" / "enum X"
  SymbolKind kind = SymbolKind::macro_residue;
  Storage storage = Storage::external;
  LineSpan span;
  std::vector<std::string> references;  // unique, first-appearance order

  bool system = false;
  bool is_definition = false;
  std::vector<LineSpan> redeclarations;
  std::vector<std::string> aliases;  // enumerators and inline tags resolving here

  // Populated for functions and variables.
  std::string return_type;  // specifiers + stars; empty when the declarator is too complex to split
  bool returns_pointer = false;
  bool returns_void = false;
  std::vector<Param> params;
  bool variadic = false;
  std::string prototype;  // storage-free declaration text without trailing ';'

  int static_line = 0;  // preprocessed line of the leading `static`, 0 when none

  friend bool operator==(const SymbolDecl&, const SymbolDecl&) = default;
};

struct MacroDef {
  std::string name;
  std::string text;  // full directive
  LineOrigin origin;
  std::vector<std::string> references;
  friend bool operator==(const MacroDef&, const MacroDef&) = default;
};

struct TranslationUnit {
  std::filesystem::path path;
  std::vector<SymbolDecl> symbols;
  std::string preprocessed_text;

  std::vector<LineOrigin> line_origins;  // index: preprocessed line - 1
  std::vector<MacroDef> macros;          // user-file #defines only
  std::vector<std::string> system_includes;  // `<...>` includes found in user files
  size_t declaration_count = 0;  // top-level declarators seen, before merging redeclarations

  const SymbolDecl* find(std::string_view name) const;
  const LineOrigin& origin_of(int pre_line) const;
  int line_count() const { return static_cast<int>(line_origins.size()); }
};

struct ParseOptions {
  std::vector<std::filesystem::path> include_dirs;
  std::vector<std::string> defines;  // NAME or NAME=VALUE
  std::string preprocessor = "cc -E -dD";
};

TranslationUnit parse_unit(const std::filesystem::path& source_path, const ParseOptions& options = {});

/// Parses already-preprocessed text (line markers and -dD defines honored).
TranslationUnit parse_preprocessed(const std::filesystem::path& path, std::string text);

using Edge = std::pair<std::string, std::string>;  // (user, used)

class SymbolGraph {
 public:
  SymbolGraph() = default;
  SymbolGraph(std::vector<SymbolDecl> nodes, std::vector<Edge> edges,
              std::set<std::string> external_unresolved = {});

  const std::vector<SymbolDecl>& nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::set<std::string>& external_unresolved() const { return unresolved_; }

  const SymbolDecl* node(std::string_view name) const;
  const std::vector<std::string>& successors(std::string_view name) const;
  bool has_edge(std::string_view user, std::string_view used) const;
  size_t index_of(std::string_view name) const;

 private:
  std::vector<SymbolDecl> nodes_;
  std::vector<Edge> edges_;
  std::set<std::string> unresolved_;
  std::map<std::string, size_t, std::less<>> index_;
  std::vector<std::vector<std::string>> out_;
};

SymbolGraph build_graph(const TranslationUnit& unit);

/// Everything reachable from `target` (inclusive), dependencies before users.
/// Strongly connected groups keep source order.
std::vector<SymbolDecl> implied_closure(const SymbolGraph& graph, std::string_view target);

}  // namespace forge
