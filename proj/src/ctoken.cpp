#include "forge/ctoken.hpp"

#include <array>
#include <cctype>
#include <unordered_set>

namespace forge::c {

namespace {

bool ident_start(char ch) { return std::isalpha(static_cast<unsigned char>(ch)) || ch == '_' || ch == '$'; }
bool ident_char(char ch) { return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '$'; }

constexpr std::array<std::string_view, 22> kLongPuncts = {
    "...", "<<=", ">>=", "->", "++", "--", "<<", ">>", "<=", ">=", "==",
    "!=",  "&&",  "||",  "*=", "/=", "%=", "+=", "-=", "&=", "^=", "|="};

}  // namespace

bool is_keyword(std::string_view word) {
  static const std::unordered_set<std::string_view> kw = {
      "auto", "break", "case", "char", "const", "continue", "default", "do", "double", "else",
      "enum", "extern", "float", "for", "goto", "if", "inline", "int", "long", "register",
      "restrict", "return", "short", "signed", "sizeof", "static", "struct", "switch",
      "typedef", "union", "unsigned", "void", "volatile", "while", "_Alignas", "_Alignof",
      "_Atomic", "_Bool", "_Complex", "_Generic", "_Imaginary", "_Noreturn", "_Static_assert",
      "_Thread_local", "__attribute__", "__attribute", "__extension__", "__inline",
      "__inline__", "__restrict", "__restrict__", "__const", "__const__", "__volatile__",
      "__signed__", "__signed", "__asm__", "__asm", "asm", "typeof", "__typeof__", "__typeof",
      "__thread", "__int128", "__builtin_va_list", "__builtin_offsetof", "__alignof__",
      "__complex__", "__real__", "__imag__", "_Float16", "_Float32", "_Float64", "_Float128",
      "_Float32x", "_Float64x", "_Float128x", "__float128", "__label__", "__auto_type"};
  return kw.count(word) != 0;
}

Lexed tokenize(std::string_view src) {
  Lexed out;
  size_t i = 0;
  int line = 1;
  bool line_start = true;  // only whitespace seen so far on this line
  const size_t n = src.size();

  auto push = [&](TokenKind kind, size_t begin, size_t end) {
    out.tokens.push_back(Token{kind, std::string(src.substr(begin, end - begin)), line, begin, end});
    line_start = false;
  };

  while (i < n) {
    char ch = src[i];
    if (ch == '\n') {
      ++line;
      ++i;
      line_start = true;
      continue;
    }
    if (ch == ' ' || ch == '\t' || ch == '\r' || ch == '\f' || ch == '\v') {
      ++i;
      continue;
    }
    if (ch == '\\' && i + 1 < n && src[i + 1] == '\n') {
      i += 2;
      ++line;
      continue;
    }
    if (ch == '/' && i + 1 < n && src[i + 1] == '/') {
      while (i < n && src[i] != '\n') ++i;
      continue;
    }
    if (ch == '/' && i + 1 < n && src[i + 1] == '*') {
      i += 2;
      while (i < n && !(src[i] == '*' && i + 1 < n && src[i + 1] == '/')) {
        if (src[i] == '\n') ++line;
        ++i;
      }
      i = std::min(n, i + 2);
      continue;
    }
    if (ch == '#' && line_start) {
      Directive d{line, {}};
      while (i < n && src[i] != '\n') {
        if (src[i] == '\\' && i + 1 < n && src[i + 1] == '\n') {
          d.text += ' ';
          i += 2;
          ++line;
          continue;
        }
        d.text += src[i++];
      }
      while (!d.text.empty() && (d.text.back() == '\r' || d.text.back() == ' ')) d.text.pop_back();
      out.directives.push_back(std::move(d));
      continue;
    }
    size_t begin = i;
    // String and char literals, with optional encoding prefix.
    size_t q = i;
    if (src[q] == 'L' || src[q] == 'U' || src[q] == 'u') {
      ++q;
      if (q < n && src[q - 1] == 'u' && src[q] == '8') ++q;
    }
    if (q < n && (src[q] == '"' || src[q] == '\'') && (q == i || ident_start(src[i]))) {
      char quote = src[q];
      bool prefixed_ok = true;
      for (size_t k = i; k < q; ++k) prefixed_ok = prefixed_ok && ident_char(src[k]);
      if (prefixed_ok) {
        i = q + 1;
        while (i < n && src[i] != quote && src[i] != '\n') {
          if (src[i] == '\\' && i + 1 < n) {
            if (src[i + 1] == '\n') ++line;
            ++i;
          }
          ++i;
        }
        if (i < n && src[i] == quote) ++i;
        push(quote == '"' ? TokenKind::string : TokenKind::character, begin, i);
        continue;
      }
    }
    if (ident_start(ch)) {
      while (i < n && ident_char(src[i])) ++i;
      push(TokenKind::identifier, begin, i);
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(ch)) ||
        (ch == '.' && i + 1 < n && std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
      ++i;
      while (i < n) {
        char c = src[i];
        if ((c == '+' || c == '-') && (src[i - 1] == 'e' || src[i - 1] == 'E' || src[i - 1] == 'p' ||
                                       src[i - 1] == 'P')) {
          ++i;
        } else if (ident_char(c) || c == '.') {
          ++i;
        } else {
          break;
        }
      }
      push(TokenKind::number, begin, i);
      continue;
    }
    size_t len = 1;
    for (auto p : kLongPuncts) {
      if (src.substr(i, p.size()) == p) {
        len = p.size();
        break;
      }
    }
    i += len;
    push(TokenKind::punct, begin, i);
  }
  return out;
}

std::string join_tokens(const std::vector<Token>& toks, size_t first, size_t last) {
  std::string out;
  const Token* prev = nullptr;
  for (size_t k = first; k < last && k < toks.size(); ++k) {
    const auto& t = toks[k];
    if (prev) {
      const std::string& p = prev->text;
      bool space = true;
      if (t.text == "," || t.text == ")" || t.text == "]" || t.text == ";" || t.text == "[") space = false;
      if (t.text == "(" && (p == ")" || (prev->is_ident() && !is_keyword(p)))) space = false;
      if (p == "(" || p == "[") space = false;
      if (p == "*" && t.text != "=" && t.text != "{") space = false;
      if (space) out += ' ';
    }
    out += t.text;
    prev = &t;
  }
  return out;
}

}  // namespace forge::c
