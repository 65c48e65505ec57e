#pragma once

#include <string>
#include <vector>

#include "typelang/diag.hpp"

namespace typelang {

enum class TokenKind { Keyword, Identifier, IntLiteral, Punct };

struct Token {
  TokenKind kind;
  std::string lexeme;
  int line;
  int column;
};

// Splits source text into tokens. `//` line comments are skipped.
// Throws CompileError on an unknown character.
std::vector<Token> tokenize(const std::string& source);

}  // namespace typelang
