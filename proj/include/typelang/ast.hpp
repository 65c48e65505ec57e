#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "typelang/diag.hpp"

namespace typelang {

struct TypeConstructor;
using TypeArg = std::variant<TypeConstructor, std::int64_t>;

struct TypeConstructor {
  std::string name;
  std::vector<TypeArg> args;
  SourcePos pos;
};

// A `::`-separated sequence of constructors. Empty only for function
// decorations that were omitted.
struct TypeChain {
  std::vector<TypeConstructor> entries;
  bool empty() const { return entries.empty(); }
};

struct Expr;
using ExprPtr = std::unique_ptr<Expr>;

struct IntLiteral {
  std::int64_t value;
};
struct VarRef {
  std::string name;
};
struct FieldAccess {
  ExprPtr object;
  std::string field;  // only "val" is meaningful
};
struct Call {
  std::string callee;
  std::vector<ExprPtr> args;
};
struct Binary {
  std::string op;
  ExprPtr lhs;
  ExprPtr rhs;
};

struct Expr {
  int id = 0;
  SourcePos pos;
  std::variant<IntLiteral, VarRef, FieldAccess, Call, Binary> node;
};

struct Stmt;
using StmtPtr = std::unique_ptr<Stmt>;

struct VarDecl {
  std::vector<std::string> names;
  TypeChain chain;
};
struct Assign {
  std::string target;
  ExprPtr value;
};
struct If {
  ExprPtr cond;
  std::vector<StmtPtr> then_body;
  std::vector<StmtPtr> else_body;
};
struct Return {
  ExprPtr value;  // may be null
};
struct ExprStmt {
  ExprPtr expr;  // always a Call
};

struct Stmt {
  int id = 0;
  SourcePos pos;
  std::variant<VarDecl, Assign, If, Return, ExprStmt> node;
};

struct Param {
  std::string name;
  TypeChain chain;
  SourcePos pos;
};

struct FunctionDecl {
  std::string name;
  TypeChain return_type;
  std::vector<Param> params;
  TypeChain decoration;  // chain after the parameter list, possibly empty
  std::vector<StmtPtr> body;
  SourcePos pos;
};

struct Ast {
  std::vector<FunctionDecl> functions;
  std::vector<StmtPtr> top_level;
};

}  // namespace typelang
