#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace forge::c {

enum class TokenKind { identifier, number, string, character, punct };

struct Token {
  TokenKind kind;
  std::string text;
  int line = 0;         // 1-based
  size_t offset = 0;    // byte offset of first char
  size_t end = 0;       // one past last char

  bool is(std::string_view s) const { return text == s && kind != TokenKind::string && kind != TokenKind::character; }
  bool is_ident() const { return kind == TokenKind::identifier; }
};

/// A preprocessor line, kept verbatim (continuations joined).
struct Directive {
  int line = 0;
  std::string text;
};

struct Lexed {
  std::vector<Token> tokens;
  std::vector<Directive> directives;
};

/// Tokenizes C source. Comments are dropped; directive lines are split out.
Lexed tokenize(std::string_view src);

bool is_keyword(std::string_view word);

/// Joins token texts with a space only where needed to keep tokens apart.
std::string join_tokens(const std::vector<Token>& toks, size_t first, size_t last);

}  // namespace forge::c
