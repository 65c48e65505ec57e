#include <array>
#include <cctype>
#include <string_view>

#include "typelang/token.hpp"

namespace typelang {

std::string format_diagnostic(const std::string& file, const Diagnostic& d) {
  return file + ":" + std::to_string(d.pos.line) + ":" +
         std::to_string(d.pos.column) + ": error: " + d.message;
}

namespace {

constexpr std::array<std::string_view, 5> kKeywords = {"var", "function", "if",
                                                       "else", "return"};

// Multi-character operators first so `::` and `:=` win over `:`.
constexpr std::array<std::string_view, 21> kPuncts = {
    ":=", "::", "==", "!=", "||", "&&", ":", ";", ",", "(", ")",
    "[",  "]",  "{",  "}",  ".",  "+",  "-", "*", "/", "<"};

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

}  // namespace

std::vector<Token> tokenize(const std::string& source) {
  std::vector<Token> out;
  int line = 1;
  int col = 1;
  size_t i = 0;
  const size_t n = source.size();
  auto advance = [&](size_t count) {
    for (size_t k = 0; k < count; ++k) {
      if (source[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
      ++i;
    }
  };
  while (i < n) {
    char c = source[i];
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      advance(1);
      continue;
    }
    if (c == '/' && i + 1 < n && source[i + 1] == '/') {
      while (i < n && source[i] != '\n') advance(1);
      continue;
    }
    int tok_line = line;
    int tok_col = col;
    if (is_ident_start(c)) {
      size_t start = i;
      while (i < n && is_ident_char(source[i])) advance(1);
      std::string lexeme = source.substr(start, i - start);
      bool kw = false;
      for (auto k : kKeywords) kw = kw || lexeme == k;
      out.push_back({kw ? TokenKind::Keyword : TokenKind::Identifier,
                     std::move(lexeme), tok_line, tok_col});
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      size_t start = i;
      while (i < n && std::isdigit(static_cast<unsigned char>(source[i]))) advance(1);
      out.push_back({TokenKind::IntLiteral, source.substr(start, i - start),
                     tok_line, tok_col});
      continue;
    }
    if (c == '>') {
      advance(1);
      out.push_back({TokenKind::Punct, ">", tok_line, tok_col});
      continue;
    }
    bool matched = false;
    for (auto p : kPuncts) {
      if (source.compare(i, p.size(), p) == 0) {
        advance(p.size());
        out.push_back({TokenKind::Punct, std::string(p), tok_line, tok_col});
        matched = true;
        break;
      }
    }
    if (!matched) {
      throw CompileError({tok_line, tok_col},
                         std::string("unknown character '") + c + "'");
    }
  }
  return out;
}

}  // namespace typelang
