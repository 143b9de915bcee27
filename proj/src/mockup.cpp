#include "forge/mockup.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>
#include <regex>
#include <sstream>
#include <unordered_map>

#include "forge/ctoken.hpp"
#include "forge/error.hpp"
#include "forge/util.hpp"

namespace forge {

std::string_view to_string(StubBehavior behavior) {
  switch (behavior) {
    case StubBehavior::return_zero: return "return_zero";
    case StubBehavior::return_fixed: return "return_fixed";
    case StubBehavior::abort_on_call: return "abort_on_call";
  }
  return "?";
}

int MockupUnit::line_count() const { return static_cast<int>(split_lines(source_text).size()); }

std::string MockupUnit::line(int emitted_line) const {
  auto lines = split_lines(source_text);
  if (emitted_line < 1 || emitted_line > static_cast<int>(lines.size()))
    throw LineOutOfRange("line " + std::to_string(emitted_line) + " outside mockup");
  return lines[static_cast<size_t>(emitted_line - 1)];
}

std::string MockupUnit::target_symbol() const {
  for (const auto& r : renames)
    if (r.from == target) return r.to;
  return target;
}

namespace {

std::regex word(const std::string& w) { return std::regex("\\b" + w + "\\b"); }

class FileCache {
 public:
  const std::vector<std::string>& lines(const std::string& file) {
    auto it = cache_.find(file);
    if (it != cache_.end()) return it->second;
    std::vector<std::string> out;
    std::ifstream in(file);
    if (!in) throw IoFailure("cannot read original source " + file);
    std::string line;
    while (std::getline(in, line)) out.push_back(line);
    return cache_.emplace(file, std::move(out)).first->second;
  }

 private:
  std::unordered_map<std::string, std::vector<std::string>> cache_;
};

StubDecl make_stub(const SymbolDecl& s, const StubPolicy& policy) {
  StubDecl stub;
  stub.name = s.name;
  stub.signature = s.prototype;
  stub.is_variable = s.kind == SymbolKind::global_var;
  stub.behavior = s.returns_pointer || (s.return_type.empty() && !s.returns_void)
                      ? StubBehavior::abort_on_call
                      : StubBehavior::return_zero;
  if (auto it = policy.find(s.name); it != policy.end()) {
    stub.behavior = it->second.behavior;
    stub.fixed_value = it->second.value;
  }
  return stub;
}

std::string render_stub(const StubDecl& stub, const SymbolDecl& s) {
  if (stub.is_variable) return stub.signature + ";  /* stub */";
  std::string body;
  switch (stub.behavior) {
    case StubBehavior::abort_on_call:
      body = "fprintf(stderr, \"unexpected call to stub " + stub.name + "\\n\"); abort();";
      break;
    case StubBehavior::return_zero:
      if (!s.returns_void) body = "return (" + s.return_type + "){0};";
      break;
    case StubBehavior::return_fixed:
      if (!s.returns_void) body = "return (" + s.return_type + ")(" + stub.fixed_value + ");";
      break;
  }
  return stub.signature + " { " + body + (body.empty() ? "" : " ") + "}  /* stub */";
}

}  // namespace

MockupUnit generate_mockup(const std::vector<SymbolDecl>& closure, const TranslationUnit& unit,
                           const std::set<std::string>& unresolved, const StubPolicy& stub_policy,
                           const MockupOptions& options) {
  if (closure.empty()) throw TargetNotFound("empty closure");
  MockupUnit mockup;
  mockup.target = closure.back().name;
  mockup.target_params = closure.back().params;
  mockup.target_variadic = closure.back().variadic;

  std::vector<std::string> lines;
  std::vector<std::optional<SourceOrigin>> origins;
  std::vector<bool> rewritten;
  auto synth = [&](const std::string& text) {
    for (auto& l : split_lines(text)) {
      lines.push_back(l);
      origins.emplace_back();
      rewritten.push_back(false);
    }
  };

  FileCache files;
  const std::string stem = unit.path.stem().string();

  // Resolution within the closure, for prototype insertion.
  std::map<std::string, size_t> position;
  for (size_t i = 0; i < closure.size(); ++i) {
    position[closure[i].name] = i;
    for (const auto& a : closure[i].aliases) position.emplace(a, i);
  }

  // Statics that clash with prelude declarations or stub names get a file-stem suffix.
  std::set<std::string> stub_names;
  for (const auto& s : closure)
    if (unresolved.count(s.name)) stub_names.insert(s.name);
  std::set<std::string> taken = options.reserved_names;
  taken.insert(stub_names.begin(), stub_names.end());
  for (const auto& s : closure)
    if (!s.system && s.storage == Storage::static_internal) {
      if (!taken.count(s.name)) continue;
      std::string renamed = s.name + "__" + stem;
      if (taken.count(renamed) || position.count(renamed))
        throw EmitCollision("cannot expose static '" + s.name + "': '" + renamed + "' is taken");
      mockup.renames.push_back({s.name, renamed});
    }

  synth("/* mockup of " + mockup.target + ": implied functions of " + unit.path.filename().string() + " */");
  std::set<std::string> included;
  for (const auto& h : options.prelude)
    if (included.insert(h).second) synth("#include <" + h + ">");
  if (options.carry_system_includes)
    for (const auto& h : unit.system_includes)
      if (included.insert(h).second) synth("#include <" + h + ">");
  for (const auto& d : options.defines) {
    auto eq = d.find('=');
    synth(eq == std::string::npos ? "#define " + d + " 1" : "#define " + d.substr(0, eq) + " " + d.substr(eq + 1));
  }

  // User macros referenced from any copied line, closed transitively.
  std::set<std::string> used_idents;
  for (const auto& s : closure) {
    if (s.system || unresolved.count(s.name)) continue;
    const auto& o_begin = unit.origin_of(s.span.start_line);
    const auto& o_end = unit.origin_of(s.span.end_line);
    if (o_begin.file.empty() || o_begin.line == 0) continue;
    const auto& src = files.lines(o_begin.file);
    int last = o_end.file == o_begin.file ? std::max(o_end.line, o_begin.line) : o_begin.line;
    std::string text;
    for (int l = o_begin.line; l <= last && l <= static_cast<int>(src.size()); ++l) text += src[static_cast<size_t>(l - 1)] + "\n";
    for (const auto& t : c::tokenize(text).tokens)
      if (t.is_ident()) used_idents.insert(t.text);
  }
  std::map<std::string, const MacroDef*> macro_by_name;
  for (const auto& m : unit.macros) macro_by_name[m.name] = &m;
  std::set<std::string> needed_macros;
  std::vector<std::string> work(used_idents.begin(), used_idents.end());
  while (!work.empty()) {
    std::string name = work.back();
    work.pop_back();
    auto it = macro_by_name.find(name);
    if (it == macro_by_name.end() || !needed_macros.insert(name).second) continue;
    for (const auto& r : it->second->references) work.push_back(r);
  }
  for (const auto& m : unit.macros)
    if (needed_macros.count(m.name) && macro_by_name[m.name] == &m) synth(m.text);

  std::set<std::pair<std::string, int>> copied;
  std::set<std::string> emitted;
  std::set<std::string> prototyped;
  for (size_t i = 0; i < closure.size(); ++i) {
    const SymbolDecl& s = closure[i];
    // A reference to a later closure function only happens inside a cycle; declare it first.
    for (const auto& ref : s.references) {
      auto it = position.find(ref);
      if (it == position.end() || it->second <= i) continue;
      const SymbolDecl& later = closure[it->second];
      if (later.kind != SymbolKind::function || later.system || unresolved.count(later.name)) continue;
      if (!prototyped.insert(later.name).second) continue;
      synth(later.prototype + ";");
    }
    if (s.system) continue;
    if (unresolved.count(s.name)) {
      StubDecl stub = make_stub(s, stub_policy);
      synth(render_stub(stub, s));
      mockup.stubs.push_back(std::move(stub));
      continue;
    }
    if (!s.is_definition && s.kind == SymbolKind::struct_union_enum) continue;  // bare forward declaration
    const auto& o_begin = unit.origin_of(s.span.start_line);
    const auto& o_end = unit.origin_of(s.span.end_line);
    if (o_begin.line == 0) continue;
    const auto& src = files.lines(o_begin.file);
    int last = o_end.file == o_begin.file ? std::max(o_end.line, o_begin.line) : o_begin.line;
    int static_origin = s.static_line ? unit.origin_of(s.static_line).line : 0;
    for (int l = o_begin.line; l <= last && l <= static_cast<int>(src.size()); ++l) {
      if (!copied.insert({o_begin.file, l}).second) continue;
      std::string text = src[static_cast<size_t>(l - 1)];
      bool changed = false;
      if (s.storage == Storage::static_internal && l == static_origin) {
        std::string before = text;
        text = std::regex_replace(text, std::regex("\\bstatic\\b\\s*"), "", std::regex_constants::format_first_only);
        changed = text != before;
      }
      lines.push_back(text);
      origins.push_back(SourceOrigin{o_begin.file, l});
      rewritten.push_back(changed);
    }
    if (s.storage == Storage::static_internal && s.kind != SymbolKind::macro_residue) mockup.exposed.push_back(s.name);
    emitted.insert(s.name);
  }

  for (const auto& r : mockup.renames) {
    auto re = word(r.from);
    for (size_t i = 0; i < lines.size(); ++i) {
      if (!origins[i]) continue;
      std::string after = std::regex_replace(lines[i], re, r.to);
      if (after != lines[i]) {
        lines[i] = std::move(after);
        rewritten[i] = true;
      }
    }
  }

  for (size_t i = 0; i < lines.size(); ++i) {
    mockup.source_text += lines[i] + "\n";
    if (origins[i])
      mockup.source_map.push_back({static_cast<int>(i + 1), *origins[i], rewritten[i]});
  }
  return mockup;
}

std::optional<SourceOrigin> map_back(const MockupUnit& mockup, int emitted_line) {
  if (emitted_line < 1 || emitted_line > mockup.line_count())
    throw LineOutOfRange("line " + std::to_string(emitted_line) + " outside mockup of " + mockup.target);
  auto it = std::lower_bound(mockup.source_map.begin(), mockup.source_map.end(), emitted_line,
                             [](const SourceMapEntry& e, int line) { return e.emitted_line < line; });
  if (it == mockup.source_map.end() || it->emitted_line != emitted_line) return std::nullopt;
  return it->origin;
}

EditScript annotate_original(const MockupUnit& mockup, const std::vector<std::pair<int, std::string>>& notes) {
  EditScript script;
  for (const auto& [line, note] : notes) {
    auto origin = map_back(mockup, line);
    if (!origin) throw SynthesizedLine("mockup line " + std::to_string(line) + " has no original location");
    script.edits.push_back({origin->file, origin->line, note});
  }
  std::stable_sort(script.edits.begin(), script.edits.end(), [](const Edit& a, const Edit& b) {
    if (a.file != b.file) return a.file < b.file;
    return a.line > b.line;
  });
  return script;
}

EditScript annotate_original(const MockupUnit& mockup, int emitted_line, const std::string& note) {
  return annotate_original(mockup, {{emitted_line, note}});
}

void apply_edit_script(const EditScript& script) {
  std::map<std::string, std::vector<const Edit*>> by_file;
  for (const auto& e : script.edits) by_file[e.file].push_back(&e);
  for (const auto& [file, edits] : by_file) {
    std::vector<std::string> lines;
    {
      std::ifstream in(file);
      if (!in) throw IoFailure("cannot read " + file);
      std::string l;
      while (std::getline(in, l)) lines.push_back(l);
    }
    for (const Edit* e : edits) {
      if (e->line < 1 || e->line > static_cast<int>(lines.size()) + 1)
        throw IoFailure(file + ": edit line " + std::to_string(e->line) + " out of range");
      std::string indent;
      if (e->line <= static_cast<int>(lines.size())) {
        const auto& target = lines[static_cast<size_t>(e->line - 1)];
        indent = target.substr(0, target.find_first_not_of(" \t") == std::string::npos ? 0 : target.find_first_not_of(" \t"));
      }
      lines.insert(lines.begin() + (e->line - 1), indent + e->text);
    }
    write_text_file(file, join_lines(lines));
  }
}

nlohmann::json source_map_json(const MockupUnit& mockup) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : mockup.source_map) {
    nlohmann::json rec = {{"emitted_line", e.emitted_line}, {"file", e.origin.file}, {"line", e.origin.line}};
    if (e.rewritten) rec["rewritten"] = true;
    arr.push_back(std::move(rec));
  }
  return arr;
}

nlohmann::json to_json(const EditScript& script) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : script.edits) arr.push_back({{"file", e.file}, {"line", e.line}, {"text", e.text}});
  return arr;
}

void write_mockup(const MockupUnit& mockup, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text_file(dir / mockup.file_name(), mockup.source_text);
  nlohmann::json meta = source_map_json(mockup);
  write_text_file(dir / (mockup.target + "_mockup.map.json"), meta.dump(2) + "\n");
}

std::set<std::string> prelude_symbols(const std::vector<std::string>& headers, const std::string& preprocessor) {
  static std::mutex mu;
  static std::map<std::string, std::set<std::string>> cache;
  std::string key = preprocessor;
  for (const auto& h : headers) key += "|" + h;
  std::lock_guard lock(mu);
  if (auto it = cache.find(key); it != cache.end()) return it->second;

  TempDir tmp("forge-prelude");
  std::string text;
  for (const auto& h : headers) text += "#include <" + h + ">\n";
  auto file = tmp.path() / "prelude.c";
  write_text_file(file, text);
  std::set<std::string> names;
  ParseOptions opts;
  opts.preprocessor = preprocessor;
  for (const auto& s : parse_unit(file, opts).symbols)
    if (s.kind == SymbolKind::function || s.kind == SymbolKind::global_var || s.kind == SymbolKind::typedef_name)
      names.insert(s.name);
  cache[key] = names;
  return names;
}

}  // namespace forge
