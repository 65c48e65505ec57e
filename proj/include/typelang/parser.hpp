#pragma once

#include <string>
#include <vector>

#include "typelang/ast.hpp"
#include "typelang/token.hpp"

namespace typelang {

// Builds an Ast from a token stream. Throws CompileError on the first
// syntax error.
Ast parse_program(const std::vector<Token>& tokens);

// Convenience: tokenize + parse.
Ast parse_source(const std::string& source);

// Canonical text form. parse(print(ast)) reproduces the same structure.
std::string print_program(const Ast& ast);
std::string print_chain(const TypeChain& chain);

}  // namespace typelang
