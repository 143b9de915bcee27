#include "forge/frontend.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <regex>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "forge/ctoken.hpp"
#include "forge/error.hpp"
#include "forge/process.hpp"

namespace forge {

using c::Token;
using c::TokenKind;

std::string_view to_string(SymbolKind kind) {
  switch (kind) {
    case SymbolKind::function: return "function";
    case SymbolKind::global_var: return "global_var";
    case SymbolKind::typedef_name: return "typedef";
    case SymbolKind::struct_union_enum: return "struct_union_enum";
    case SymbolKind::macro_residue: return "macro_residue";
  }
  return "?";
}

std::string_view to_string(Storage storage) {
  return storage == Storage::static_internal ? "static_internal" : "external";
}

const SymbolDecl* TranslationUnit::find(std::string_view name) const {
  for (const auto& s : symbols)
    if (s.name == name) return &s;
  return nullptr;
}

const LineOrigin& TranslationUnit::origin_of(int pre_line) const {
  static const LineOrigin none{};
  if (pre_line < 1 || pre_line > line_count()) return none;
  return line_origins[static_cast<size_t>(pre_line - 1)];
}

namespace {

const std::unordered_set<std::string_view> kStorageWords = {
    "typedef", "extern", "static", "auto", "register", "_Thread_local", "__thread",
    "inline", "__inline", "__inline__", "_Noreturn", "__extension__"};
const std::unordered_set<std::string_view> kQualifiers = {
    "const", "volatile", "restrict", "__restrict", "__restrict__", "__const", "__const__",
    "__volatile__", "_Atomic"};
const std::unordered_set<std::string_view> kTypeWords = {
    "void", "char", "short", "int", "long", "float", "double", "signed", "unsigned", "_Bool",
    "_Complex", "__complex__", "__int128", "_Float16", "_Float32", "_Float64", "_Float128",
    "_Float32x", "_Float64x", "_Float128x", "__float128", "__builtin_va_list", "__signed__",
    "__signed", "__auto_type"};
const std::unordered_set<std::string_view> kAttributeWords = {
    "__attribute__", "__attribute", "__declspec", "_Alignas", "__asm__", "__asm", "asm"};
const std::unordered_set<std::string_view> kTypeofWords = {"typeof", "__typeof__", "__typeof"};

bool is_tag_keyword(const Token& t) { return t.is("struct") || t.is("union") || t.is("enum"); }
bool is_asm(const Token& t) { return t.is("asm") || t.is("__asm__") || t.is("__asm"); }

// Line markers: `# 12 "file.c" 1 3` or `#line 12 "file.c"`.
const std::regex kMarker(R"(^#\s*(?:line\s+)?(\d+)\s+\"((?:[^\"\\]|\\.)*)\"([\s\d]*)$)");
const std::regex kDefine(R"(^#\s*define\s+([A-Za-z_$][A-Za-z0-9_$]*))");
const std::regex kAngleInclude(R"(^\s*#\s*include\s*<([^>]+)>)");

struct DeclFailure {
  std::string reason;
  int line;
  bool outside_subset;  // K&R, inline asm: ParseFailed in user code
};

class UnitParser {
 public:
  UnitParser(std::filesystem::path path, std::string text) {
    unit_.path = std::move(path);
    unit_.preprocessed_text = std::move(text);
  }

  TranslationUnit run() {
    compute_origins();
    lexed_ = c::tokenize(unit_.preprocessed_text);
    collect_macros();
    collect_system_includes();
    split_and_parse();
    return std::move(unit_);
  }

 private:
  TranslationUnit unit_;
  c::Lexed lexed_;
  std::unordered_set<std::string> typedefs_;
  std::unordered_map<std::string, size_t> by_name_;
  std::vector<std::string> user_files_;

  const std::vector<Token>& toks() const { return lexed_.tokens; }

  void compute_origins() {
    std::istringstream in(unit_.preprocessed_text);
    std::string line;
    LineOrigin cur{unit_.path.string(), 1, false};
    std::set<std::string> seen_user;
    auto note_user = [&](const LineOrigin& o) {
      if (!o.system && !o.file.empty() && seen_user.insert(o.file).second) user_files_.push_back(o.file);
    };
    while (std::getline(in, line)) {
      std::smatch m;
      if (!line.empty() && line[0] == '#' && std::regex_match(line, m, kMarker)) {
        unit_.line_origins.push_back({cur.file, 0, cur.system});
        cur.file = m[2].str();
        cur.line = std::stoi(m[1].str());
        std::istringstream flags(m[3].str());
        int f;
        cur.system = cur.file.starts_with('<');
        while (flags >> f)
          if (f == 3) cur.system = true;
        continue;
      }
      unit_.line_origins.push_back(cur);
      note_user(cur);
      ++cur.line;
    }
    if (!unit_.preprocessed_text.empty() && unit_.preprocessed_text.back() != '\n') {
      // getline already produced the last partial line
    }
  }

  const LineOrigin& origin(int line) const { return unit_.origin_of(line); }

  void collect_macros() {
    for (const auto& d : lexed_.directives) {
      std::smatch m;
      if (!std::regex_search(d.text, m, kDefine)) continue;
      const auto& o = origin(d.line);
      if (o.system) continue;
      MacroDef def{m[1].str(), d.text, o, {}};
      auto body = c::tokenize(d.text.substr(static_cast<size_t>(m.position(0) + m.length(0))));
      std::set<std::string> seen;
      for (const auto& t : body.tokens)
        if (t.is_ident() && !c::is_keyword(t.text) && t.text != def.name && seen.insert(t.text).second)
          def.references.push_back(t.text);
      unit_.macros.push_back(std::move(def));
    }
  }

  void collect_system_includes() {
    std::set<std::string> seen;
    for (const auto& file : user_files_) {
      std::ifstream in(file);
      if (!in) continue;
      std::string line;
      while (std::getline(in, line)) {
        std::smatch m;
        if (std::regex_search(line, m, kAngleInclude) && seen.insert(m[1].str()).second)
          unit_.system_includes.push_back(m[1].str());
      }
    }
  }

  [[noreturn]] void fail(const std::string& reason, int line) const {
    std::string text;
    std::istringstream in(unit_.preprocessed_text);
    for (int i = 1; std::getline(in, text) && i < line; ++i) {
    }
    const auto& o = origin(line);
    throw ParseFailed(o.file + ":" + std::to_string(o.line) + ": " + reason, text, o.line);
  }

  size_t match_close(size_t open) const {
    const std::string& o = toks()[open].text;
    std::string close = o == "(" ? ")" : o == "[" ? "]" : "}";
    int depth = 0;
    for (size_t k = open; k < toks().size(); ++k) {
      if (toks()[k].kind != TokenKind::punct) continue;
      if (toks()[k].text == o) ++depth;
      else if (toks()[k].text == close && --depth == 0) return k;
    }
    fail("unbalanced '" + o + "'", toks()[open].line);
  }

  bool brace_opens_body(size_t begin, size_t brace) const {
    if (brace == begin) return false;
    if (toks()[brace - 1].is("=")) return false;
    size_t k = brace - 1;
    for (;;) {
      const Token& t = toks()[k];
      if (is_tag_keyword(t)) return false;
      if (t.is_ident() && !c::is_keyword(t.text)) {
        if (k == begin) return true;
        --k;
        continue;
      }
      if (t.is(")")) {
        // walk back over __attribute__((...))
        int depth = 0;
        size_t m = k;
        for (;; --m) {
          if (toks()[m].is(")")) ++depth;
          else if (toks()[m].is("(") && --depth == 0) break;
          if (m == begin) return true;
        }
        if (m > begin && toks()[m - 1].is("(") ) --m;
        if (m > begin && kAttributeWords.count(toks()[m - 1].text)) {
          if (m - 1 == begin) return true;
          k = m - 2;
          continue;
        }
        return true;
      }
      return true;
    }
  }

  void split_and_parse() {
    const auto& ts = toks();
    size_t i = 0;
    while (i < ts.size()) {
      if (ts[i].is(";")) {
        ++i;
        continue;
      }
      size_t begin = i;
      int depth = 0;
      size_t body = 0;
      size_t end = 0;
      for (; i < ts.size(); ++i) {
        const Token& t = ts[i];
        if (t.kind != TokenKind::punct) continue;
        if (t.text == "(" || t.text == "[") {
          ++depth;
        } else if (t.text == ")" || t.text == "]" || t.text == "}") {
          if (--depth < 0) fail("unexpected '" + t.text + "'", t.line);
        } else if (t.text == "{") {
          if (depth == 0 && brace_opens_body(begin, i)) {
            body = i;
            end = match_close(i) + 1;
            break;
          }
          ++depth;
        } else if (t.text == ";" && depth == 0) {
          end = i + 1;
          break;
        }
      }
      if (end == 0) {
        if (origin(ts[begin].line).system) {
          end = ts.size();
        } else {
          fail("unterminated declaration", ts[begin].line);
        }
      }
      handle_declaration(begin, end, body);
      i = end;
    }
  }

  void handle_declaration(size_t begin, size_t end, size_t body) {
    const bool system = origin(toks()[begin].line).system;
    std::vector<SymbolDecl> decls;
    std::optional<DeclFailure> failure;
    try {
      decls = parse_declaration(begin, end, body, system);
    } catch (const DeclFailure& f) {
      failure = f;
    }
    if (failure) {
      if (failure->outside_subset && !system) fail(failure->reason, failure->line);
      SymbolDecl residue;
      residue.name = "<residue:" + std::to_string(toks()[begin].line) + ">";
      residue.kind = SymbolKind::macro_residue;
      residue.span = span_of(begin, end);
      residue.system = system;
      residue.references = collect_refs(begin, end, {});
      decls.push_back(std::move(residue));
    }
    for (auto& d : decls) add_symbol(std::move(d));
  }

  LineSpan span_of(size_t begin, size_t end) const {
    return {toks()[begin].line, toks()[end - 1].line};
  }

  void add_symbol(SymbolDecl d) {
    ++unit_.declaration_count;
    auto it = by_name_.find(d.name);
    if (it == by_name_.end()) {
      by_name_[d.name] = unit_.symbols.size();
      unit_.symbols.push_back(std::move(d));
      return;
    }
    SymbolDecl& existing = unit_.symbols[it->second];
    std::vector<std::string> refs = existing.references;
    for (const auto& r : d.references)
      if (std::find(refs.begin(), refs.end(), r) == refs.end()) refs.push_back(r);
    bool was_static = existing.storage == Storage::static_internal || d.storage == Storage::static_internal;
    if (d.is_definition && !existing.is_definition) {
      auto redecls = std::move(existing.redeclarations);
      redecls.push_back(existing.span);
      auto aliases = std::move(existing.aliases);
      existing = std::move(d);
      existing.redeclarations = std::move(redecls);
      for (auto& a : aliases)
        if (std::find(existing.aliases.begin(), existing.aliases.end(), a) == existing.aliases.end())
          existing.aliases.push_back(a);
    } else {
      existing.redeclarations.push_back(d.span);
    }
    existing.references = std::move(refs);
    if (was_static) existing.storage = Storage::static_internal;
  }

  // Identifiers in [begin,end) excluding member names, keywords and `skip` positions.
  std::vector<std::string> collect_refs(size_t begin, size_t end, const std::set<size_t>& skip) const {
    std::vector<std::string> refs;
    std::unordered_set<std::string> seen;
    const auto& ts = toks();
    for (size_t k = begin; k < end; ++k) {
      const Token& t = ts[k];
      if (skip.count(k)) continue;
      std::string name;
      if (is_tag_keyword(t) && k + 1 < end && ts[k + 1].is_ident() && !c::is_keyword(ts[k + 1].text)) {
        name = t.text + " " + ts[k + 1].text;
        ++k;
      } else if (t.is_ident() && !c::is_keyword(t.text)) {
        if (k > begin && (ts[k - 1].is(".") || ts[k - 1].is("->"))) continue;
        name = t.text;
      } else {
        continue;
      }
      if (seen.insert(name).second) refs.push_back(std::move(name));
    }
    return refs;
  }

  struct Specifiers {
    bool is_typedef = false, is_static = false, is_extern = false;
    int static_line = 0;
    std::vector<size_t> type_tokens;  // positions forming the type (for return types)
    struct Tag {
      std::string name;  // "struct X" or "" for anonymous
      std::string keyword;
      bool has_body = false;
      std::vector<std::string> enumerators;
    };
    std::vector<Tag> tags;
    size_t end = 0;
  };

  size_t skip_group(size_t open) const { return match_close(open) + 1; }

  Specifiers parse_specifiers(size_t pos, size_t end) const {
    const auto& ts = toks();
    Specifiers s;
    bool saw_type = false;
    while (pos < end) {
      const Token& t = ts[pos];
      if (kStorageWords.count(t.text)) {
        if (t.is("typedef")) s.is_typedef = true;
        if (t.is("extern")) s.is_extern = true;
        if (t.is("static")) {
          s.is_static = true;
          s.static_line = t.line;
        }
        ++pos;
      } else if (kQualifiers.count(t.text)) {
        if (t.is("_Atomic") && pos + 1 < end && ts[pos + 1].is("(")) {
          size_t close = skip_group(pos + 1);
          for (size_t k = pos; k < close; ++k) s.type_tokens.push_back(k);
          pos = close;
          saw_type = true;
          continue;
        }
        s.type_tokens.push_back(pos);
        ++pos;
      } else if (kAttributeWords.count(t.text)) {
        pos = (pos + 1 < end && ts[pos + 1].is("(")) ? skip_group(pos + 1) : pos + 1;
      } else if (kTypeofWords.count(t.text)) {
        size_t close = (pos + 1 < end && ts[pos + 1].is("(")) ? skip_group(pos + 1) : pos + 1;
        for (size_t k = pos; k < close; ++k) s.type_tokens.push_back(k);
        pos = close;
        saw_type = true;
      } else if (kTypeWords.count(t.text)) {
        s.type_tokens.push_back(pos);
        saw_type = true;
        ++pos;
      } else if (is_tag_keyword(t)) {
        Specifiers::Tag tag;
        tag.keyword = t.text;
        size_t first = pos;
        ++pos;
        while (pos < end && kAttributeWords.count(ts[pos].text))
          pos = (pos + 1 < end && ts[pos + 1].is("(")) ? skip_group(pos + 1) : pos + 1;
        if (pos < end && ts[pos].is_ident() && !c::is_keyword(ts[pos].text)) {
          tag.name = t.text + " " + ts[pos].text;
          ++pos;
        }
        while (pos < end && kAttributeWords.count(ts[pos].text))
          pos = (pos + 1 < end && ts[pos + 1].is("(")) ? skip_group(pos + 1) : pos + 1;
        if (pos < end && ts[pos].is("{")) {
          size_t close = match_close(pos);
          tag.has_body = true;
          if (tag.keyword == "enum") {
            bool expect = true;
            int depth = 0;
            for (size_t k = pos + 1; k < close; ++k) {
              const Token& e = ts[k];
              if (e.is("(") || e.is("[") || e.is("{")) ++depth;
              else if (e.is(")") || e.is("]") || e.is("}")) --depth;
              else if (depth == 0 && e.is(",")) expect = true;
              else if (expect && e.is_ident()) {
                tag.enumerators.push_back(e.text);
                expect = false;
              }
            }
          }
          pos = close + 1;
        } else if (tag.name.empty()) {
          throw DeclFailure{"anonymous " + t.text + " without body", t.line, false};
        }
        for (size_t k = first; k < pos; ++k) s.type_tokens.push_back(k);
        s.tags.push_back(std::move(tag));
        saw_type = true;
      } else if (t.is_ident() && !c::is_keyword(t.text)) {
        if (saw_type) break;
        bool known = typedefs_.count(t.text) != 0;
        bool looks_like_type = pos + 1 < end && (ts[pos + 1].is_ident() || ts[pos + 1].is("*"));
        if (!known && !looks_like_type) break;
        s.type_tokens.push_back(pos);
        saw_type = true;
        ++pos;
      } else {
        break;
      }
    }
    s.end = pos;
    return s;
  }

  struct Declarator {
    size_t name_pos = 0;
    bool has_name = false;
    bool is_function = false;
    bool decided = false;  // stars or suffix seen at or below the name's level
    size_t params_open = 0, params_close = 0;
    int stars = 0;         // stars at the level of the function suffix
    bool complex = false;  // name nested in parentheses
    size_t end = 0;
  };

  Declarator parse_declarator(size_t pos, size_t end) const {
    const auto& ts = toks();
    Declarator d;
    int stars = 0;
    while (pos < end && (ts[pos].is("*") || kQualifiers.count(ts[pos].text) || kAttributeWords.count(ts[pos].text))) {
      if (ts[pos].is("*")) ++stars;
      if (kAttributeWords.count(ts[pos].text) && pos + 1 < end && ts[pos + 1].is("(")) {
        pos = skip_group(pos + 1);
        continue;
      }
      ++pos;
    }
    bool inner_group = false;
    if (pos < end && ts[pos].is_ident() && !c::is_keyword(ts[pos].text)) {
      d.name_pos = pos;
      d.has_name = true;
      ++pos;
    } else if (pos < end && ts[pos].is("(")) {
      Declarator inner = parse_declarator(pos + 1, end);
      if (inner.end >= end || !ts[inner.end].is(")")) throw DeclFailure{"malformed declarator", ts[pos].line, false};
      d = inner;
      d.complex = true;
      pos = inner.end + 1;
      inner_group = true;
    } else {
      throw DeclFailure{"expected declarator", pos < end ? ts[pos].line : ts[end - 1].line, false};
    }
    bool first_suffix = true;
    while (pos < end && (ts[pos].is("[") || ts[pos].is("("))) {
      size_t close = match_close(pos);
      if (first_suffix && (!inner_group || !d.decided)) {
        if (ts[pos].is("(")) {
          d.is_function = true;
          d.params_open = pos;
          d.params_close = close;
          d.stars = stars;
        }
        d.decided = true;
      }
      first_suffix = false;
      pos = close + 1;
    }
    if (stars > 0 && !d.decided) {
      d.decided = true;
    }
    if (!inner_group) d.decided = d.decided || stars > 0;
    d.end = pos;
    return d;
  }

  std::vector<Param> parse_params(size_t open, size_t close, bool& variadic, bool user) const {
    const auto& ts = toks();
    std::vector<Param> params;
    variadic = false;
    std::vector<std::pair<size_t, size_t>> ranges;
    int depth = 0;
    size_t start = open + 1;
    for (size_t k = open + 1; k < close; ++k) {
      if (ts[k].is("(") || ts[k].is("[") || ts[k].is("{")) ++depth;
      else if (ts[k].is(")") || ts[k].is("]") || ts[k].is("}")) --depth;
      else if (depth == 0 && ts[k].is(",")) {
        ranges.emplace_back(start, k);
        start = k + 1;
      }
    }
    if (start < close) ranges.emplace_back(start, close);
    if (ranges.size() == 1 && ranges[0].second - ranges[0].first == 1 && ts[ranges[0].first].is("void"))
      return params;
    int index = 0;
    for (auto [b, e] : ranges) {
      if (e - b == 1 && ts[b].is("...")) {
        variadic = true;
        continue;
      }
      Param p;
      std::optional<size_t> name_pos;
      std::vector<size_t> candidates;  // identifiers at depth 0 that are not tag names
      int pdepth = 0;
      for (size_t k = b; k < e; ++k) {
        const Token& t = ts[k];
        if (kAttributeWords.count(t.text) && k + 1 < e && ts[k + 1].is("(")) {
          k = match_close(k + 1);
          continue;
        }
        if (t.is("(")) {
          if (pdepth == 0 && k + 1 < e && ts[k + 1].is("*")) {
            p.function_pointer = true;
            size_t j = k + 1;
            while (j < e && (ts[j].is("*") || kQualifiers.count(ts[j].text))) ++j;
            if (j < e && ts[j].is_ident() && !c::is_keyword(ts[j].text)) name_pos = j;
          }
          ++pdepth;
        } else if (t.is(")")) {
          --pdepth;
        } else if (t.is("[")) {
          if (pdepth == 0) p.pointer = true;
          ++pdepth;
        } else if (t.is("]")) {
          --pdepth;
        } else if (t.is("*") && pdepth == 0) {
          p.pointer = true;
        } else if (is_tag_keyword(t)) {
          if (k + 1 < e && ts[k + 1].is_ident()) ++k;
        } else if (pdepth == 0 && t.is_ident() && !c::is_keyword(t.text)) {
          candidates.push_back(k);
        }
      }
      if (p.function_pointer) p.pointer = true;
      bool has_type_word = false;
      for (size_t k = b; k < e; ++k)
        if (kTypeWords.count(ts[k].text) || is_tag_keyword(ts[k]) || kTypeofWords.count(ts[k].text))
          has_type_word = true;
      if (!p.function_pointer && !candidates.empty()) {
        size_t last = candidates.back();
        bool typedef_only = candidates.size() == 1 && !has_type_word;
        if (typedef_only && user && e - b == 1 && !typedefs_.count(ts[last].text))
          throw DeclFailure{"K&R-style parameter list", ts[b].line, true};
        if (!typedef_only) name_pos = last;
      }
      std::vector<Token> piece(ts.begin() + static_cast<long>(b), ts.begin() + static_cast<long>(e));
      if (name_pos) {
        p.name = ts[*name_pos].text;
        p.text = c::join_tokens(piece, 0, piece.size());
      } else {
        p.name = "p" + std::to_string(index);
        Token name_tok{TokenKind::identifier, p.name, 0, 0, 0};
        // Insert after `(*` for abstract function pointers, before the first `[`, else at the end.
        size_t insert_at = piece.size();
        for (size_t k = 0; k + 1 < piece.size(); ++k)
          if (piece[k].is("(") && piece[k + 1].is("*")) {
            insert_at = k + 2;
            while (insert_at < piece.size() && piece[insert_at].is("*")) ++insert_at;
            break;
          }
        if (insert_at == piece.size())
          for (size_t k = 0; k < piece.size(); ++k)
            if (piece[k].is("[")) {
              insert_at = k;
              break;
            }
        piece.insert(piece.begin() + static_cast<long>(insert_at), name_tok);
        p.text = c::join_tokens(piece, 0, piece.size());
      }
      params.push_back(std::move(p));
      ++index;
    }
    return params;
  }

  std::string type_text(const Specifiers& s, int stars) const {
    std::vector<Token> parts;
    for (size_t k : s.type_tokens) parts.push_back(toks()[k]);
    std::string out = c::join_tokens(parts, 0, parts.size());
    if (stars > 0) out += " " + std::string(static_cast<size_t>(stars), '*');
    return out;
  }

  std::vector<SymbolDecl> parse_declaration(size_t begin, size_t end, size_t body, bool system) {
    const auto& ts = toks();
    if (!system && is_asm(ts[begin])) throw DeclFailure{"inline assembly is not supported", ts[begin].line, true};
    if (ts[begin].is("_Static_assert")) throw DeclFailure{"static assertion", ts[begin].line, false};

    Specifiers spec = parse_specifiers(begin, end);
    std::vector<SymbolDecl> out;
    const LineSpan span = span_of(begin, end);

    auto make = [&](std::string name, SymbolKind kind) {
      SymbolDecl d;
      d.name = std::move(name);
      d.kind = kind;
      d.span = span;
      d.system = system;
      d.storage = spec.is_static ? Storage::static_internal : Storage::external;
      d.static_line = spec.is_static ? spec.static_line : 0;
      return d;
    };

    size_t pos = spec.end;
    if (pos < end && ts[pos].is(";")) {
      // Tag-only declaration.
      for (const auto& tag : spec.tags) {
        std::string name = tag.name;
        if (name.empty()) {
          if (tag.enumerators.empty()) continue;
          name = tag.keyword + " <anonymous:" + std::to_string(span.start_line) + ">";
        }
        SymbolDecl d = make(name, SymbolKind::struct_union_enum);
        d.storage = Storage::external;
        d.static_line = 0;
        d.is_definition = tag.has_body;
        d.aliases = tag.enumerators;
        std::set<size_t> skip;
        d.references = collect_refs(begin, end, skip);
        d.references.erase(std::remove(d.references.begin(), d.references.end(), d.name), d.references.end());
        for (const auto& e : tag.enumerators)
          d.references.erase(std::remove(d.references.begin(), d.references.end(), e), d.references.end());
        out.push_back(std::move(d));
      }
      if (out.empty()) throw DeclFailure{"declaration declares nothing", ts[begin].line, false};
      return out;
    }

    std::vector<std::string> tag_aliases;
    std::set<std::string> inline_names;
    for (const auto& tag : spec.tags) {
      if (tag.has_body) {
        if (!tag.name.empty()) tag_aliases.push_back(tag.name);
        for (const auto& e : tag.enumerators) tag_aliases.push_back(e);
      }
      inline_names.insert(tag.name);
    }

    bool first = true;
    while (pos < end) {
      Declarator decl = parse_declarator(pos, end);
      if (!decl.has_name) throw DeclFailure{"abstract declarator at file scope", ts[pos].line, false};
      const std::string name = ts[decl.name_pos].text;
      size_t decl_end = decl.end;
      bool has_init = false;
      size_t init_begin = 0, init_end = 0;
      // attributes / asm labels
      while (decl_end < end && kAttributeWords.count(ts[decl_end].text)) {
        decl_end = (decl_end + 1 < end && ts[decl_end + 1].is("(")) ? skip_group(decl_end + 1) : decl_end + 1;
      }
      size_t next = decl_end;
      bool is_body = false;
      if (next < end && ts[next].is("=")) {
        has_init = true;
        init_begin = next + 1;
        int depth = 0;
        size_t k = init_begin;
        for (; k < end; ++k) {
          const Token& t = ts[k];
          if (t.is("(") || t.is("[") || t.is("{")) ++depth;
          else if (t.is(")") || t.is("]") || t.is("}")) --depth;
          else if (depth == 0 && (t.is(",") || t.is(";"))) break;
        }
        init_end = k;
        next = k;
      } else if (body != 0 && next == body) {
        if (!first || !decl.is_function) throw DeclFailure{"unexpected body", ts[next].line, false};
        is_body = true;
      } else if (next >= end || !(ts[next].is(",") || ts[next].is(";"))) {
        bool kr = decl.is_function && next < end &&
                  (kTypeWords.count(ts[next].text) || kQualifiers.count(ts[next].text) ||
                   kStorageWords.count(ts[next].text) || is_tag_keyword(ts[next]) ||
                   (ts[next].is_ident() && !c::is_keyword(ts[next].text)));
        if (kr) throw DeclFailure{"K&R-style function definition", ts[next].line, true};
        throw DeclFailure{"unexpected token after declarator", next < end ? ts[next].line : span.end_line, false};
      }

      SymbolKind kind = spec.is_typedef  ? SymbolKind::typedef_name
                        : decl.is_function ? SymbolKind::function
                                           : SymbolKind::global_var;
      SymbolDecl d = make(name, kind);
      if (kind == SymbolKind::typedef_name) {
        d.storage = Storage::external;
        d.static_line = 0;
      }
      if (first) d.aliases = tag_aliases;

      // References: specifiers, this declarator, initializer or body.
      std::set<size_t> skip{decl.name_pos};
      std::vector<std::string> refs = collect_refs(begin, spec.end, skip);
      auto append = [&](const std::vector<std::string>& more) {
        for (const auto& r : more)
          if (std::find(refs.begin(), refs.end(), r) == refs.end()) refs.push_back(r);
      };
      append(collect_refs(pos, decl.end, skip));
      if (has_init) append(collect_refs(init_begin, init_end, skip));
      if (is_body) {
        size_t close = match_close(body);
        if (!system)
          for (size_t k = body; k < close; ++k)
            if (is_asm(ts[k])) throw DeclFailure{"inline assembly is not supported", ts[k].line, true};
        append(collect_refs(body, close + 1, {}));
      }
      for (const auto& a : tag_aliases) refs.erase(std::remove(refs.begin(), refs.end(), a), refs.end());
      d.references = std::move(refs);

      if (kind == SymbolKind::function) {
        d.is_definition = is_body;
        d.params = parse_params(decl.params_open, decl.params_close, d.variadic, !system);
        d.returns_pointer = decl.stars > 0 || decl.complex;
        if (!decl.complex) {
          d.return_type = type_text(spec, decl.stars);
          d.returns_void = decl.stars == 0 && d.return_type.find("void") != std::string::npos &&
                           d.return_type.find_first_of("*") == std::string::npos &&
                           spec.type_tokens.size() == 1;
        }
        std::vector<Token> proto;
        for (size_t k : spec.type_tokens) proto.push_back(ts[k]);
        for (size_t k = pos; k < decl.params_open; ++k) proto.push_back(ts[k]);
        std::string head = c::join_tokens(proto, 0, proto.size());
        std::string params;
        for (size_t i = 0; i < d.params.size(); ++i) params += (i ? ", " : "") + d.params[i].text;
        if (d.variadic) params += d.params.empty() ? "..." : ", ...";
        if (params.empty() && decl.params_close > decl.params_open + 1) params = "void";
        std::vector<Token> tail;
        for (size_t k = decl.params_close + 1; k < decl.end; ++k) tail.push_back(ts[k]);
        d.prototype = head + "(" + params + ")" + c::join_tokens(tail, 0, tail.size());
      } else {
        d.is_definition = kind != SymbolKind::global_var || !spec.is_extern || has_init;
        std::vector<Token> proto;
        for (size_t k : spec.type_tokens) proto.push_back(ts[k]);
        for (size_t k = pos; k < decl.end; ++k) proto.push_back(ts[k]);
        d.prototype = c::join_tokens(proto, 0, proto.size());
        d.return_type = type_text(spec, 0);
      }
      if (kind == SymbolKind::typedef_name) typedefs_.insert(name);
      out.push_back(std::move(d));
      first = false;

      if (is_body) break;
      if (ts[next].is(";")) break;
      pos = next + 1;  // ','
    }
    return out;
  }
};

}  // namespace

TranslationUnit parse_preprocessed(const std::filesystem::path& path, std::string text) {
  TranslationUnit tu = UnitParser(path, std::move(text)).run();
  // Keep only names that are file-scope symbols here; parameters shadow them.
  std::set<std::string, std::less<>> known;
  for (const auto& s : tu.symbols) {
    known.insert(s.name);
    known.insert(s.aliases.begin(), s.aliases.end());
  }
  for (auto& s : tu.symbols) {
    std::set<std::string, std::less<>> params;
    for (const auto& p : s.params) params.insert(p.name);
    std::erase_if(s.references, [&](const std::string& r) { return !known.count(r) || params.count(r); });
  }
  return tu;
}

TranslationUnit parse_unit(const std::filesystem::path& source_path, const ParseOptions& options) {
  if (!std::filesystem::exists(source_path))
    throw PreprocessFailed("no such file: " + source_path.string(), "");
  auto absolute = std::filesystem::absolute(source_path).lexically_normal();
  ProcessSpec spec;
  spec.argv = split_command(options.preprocessor);
  if (spec.argv.empty()) throw PreprocessFailed("empty preprocessor command", "");
  for (const auto& dir : options.include_dirs)
    spec.argv.push_back("-I" + std::filesystem::absolute(dir).lexically_normal().string());
  for (const auto& def : options.defines) spec.argv.push_back("-D" + def);
  spec.argv.push_back(absolute.string());
  spec.timeout = std::chrono::seconds(60);
  auto result = run_process(spec);
  if (result.spawn_failed || !result.exited_cleanly() || result.exit_code != 0) {
    throw PreprocessFailed("preprocessing " + source_path.string() + " failed", result.err);
  }
  return parse_preprocessed(absolute, std::move(result.out));
}

// ---------------------------------------------------------------------------

SymbolGraph::SymbolGraph(std::vector<SymbolDecl> nodes, std::vector<Edge> edges,
                         std::set<std::string> external_unresolved)
    : nodes_(std::move(nodes)), edges_(std::move(edges)), unresolved_(std::move(external_unresolved)) {
  for (size_t i = 0; i < nodes_.size(); ++i) index_.emplace(nodes_[i].name, i);
  out_.resize(nodes_.size());
  std::vector<Edge> kept;
  std::set<Edge> seen;
  for (auto& e : edges_) {
    auto a = index_.find(e.first);
    auto b = index_.find(e.second);
    if (a == index_.end() || b == index_.end() || !seen.insert(e).second) continue;
    out_[a->second].push_back(e.second);
    kept.push_back(e);
  }
  edges_ = std::move(kept);
}

const SymbolDecl* SymbolGraph::node(std::string_view name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &nodes_[it->second];
}

size_t SymbolGraph::index_of(std::string_view name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nodes_.size() : it->second;
}

const std::vector<std::string>& SymbolGraph::successors(std::string_view name) const {
  static const std::vector<std::string> none;
  auto it = index_.find(name);
  return it == index_.end() ? none : out_[it->second];
}

bool SymbolGraph::has_edge(std::string_view user, std::string_view used) const {
  const auto& succ = successors(user);
  return std::find(succ.begin(), succ.end(), used) != succ.end();
}

SymbolGraph build_graph(const TranslationUnit& unit) {
  std::map<std::string, std::string, std::less<>> resolve;
  for (const auto& s : unit.symbols) resolve.emplace(s.name, s.name);
  for (const auto& s : unit.symbols)
    for (const auto& a : s.aliases) resolve.emplace(a, s.name);

  std::vector<Edge> edges;
  std::set<std::string> unresolved;
  for (const auto& s : unit.symbols) {
    for (const auto& ref : s.references) {
      auto it = resolve.find(ref);
      if (it == resolve.end()) continue;
      edges.emplace_back(s.name, it->second);
      const SymbolDecl* target = unit.find(it->second);
      if (target && !target->system && !target->is_definition &&
          (target->kind == SymbolKind::function || target->kind == SymbolKind::global_var))
        unresolved.insert(target->name);
    }
  }
  return SymbolGraph(unit.symbols, std::move(edges), std::move(unresolved));
}

std::vector<SymbolDecl> implied_closure(const SymbolGraph& graph, std::string_view target) {
  const SymbolDecl* root = graph.node(target);
  if (!root || root->kind != SymbolKind::function)
    throw TargetNotFound("no function named '" + std::string(target) + "'");

  // Tarjan's algorithm: components come out dependencies-first.
  const size_t n = graph.nodes().size();
  std::vector<int> index(n, -1), low(n, 0);
  std::vector<bool> on_stack(n, false);
  std::vector<size_t> stack;
  std::vector<SymbolDecl> order;
  int counter = 0;

  struct Frame {
    size_t v;
    size_t next;
  };
  std::vector<Frame> call;
  size_t start = graph.index_of(target);
  call.push_back({start, 0});
  index[start] = low[start] = counter++;
  stack.push_back(start);
  on_stack[start] = true;

  while (!call.empty()) {
    Frame& f = call.back();
    const auto& succ = graph.successors(graph.nodes()[f.v].name);
    if (f.next < succ.size()) {
      size_t w = graph.index_of(succ[f.next++]);
      if (index[w] < 0) {
        index[w] = low[w] = counter++;
        stack.push_back(w);
        on_stack[w] = true;
        call.push_back({w, 0});
      } else if (on_stack[w]) {
        low[f.v] = std::min(low[f.v], index[w]);
      }
      continue;
    }
    size_t v = f.v;
    call.pop_back();
    if (!call.empty()) low[call.back().v] = std::min(low[call.back().v], low[v]);
    if (low[v] == index[v]) {
      std::vector<size_t> group;
      size_t w;
      do {
        w = stack.back();
        stack.pop_back();
        on_stack[w] = false;
        group.push_back(w);
      } while (w != v);
      std::sort(group.begin(), group.end(), [&](size_t a, size_t b) {
        const auto& x = graph.nodes()[a].span;
        const auto& y = graph.nodes()[b].span;
        return std::tie(x.start_line, a) < std::tie(y.start_line, b);
      });
      for (size_t g : group) order.push_back(graph.nodes()[g]);
    }
  }
  return order;
}

}  // namespace forge
