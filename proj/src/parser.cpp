#include <cstdlib>
#include <sstream>

#include "typelang/parser.hpp"

namespace typelang {

namespace {

class Parser {
 public:
  explicit Parser(const std::vector<Token>& tokens) : toks_(tokens) {}

  Ast program() {
    Ast ast;
    while (!at_end()) {
      if (check_keyword("function")) {
        ast.functions.push_back(function_decl());
      } else {
        ast.top_level.push_back(statement());
      }
    }
    return ast;
  }

 private:
  const std::vector<Token>& toks_;
  size_t pos_ = 0;
  int next_id_ = 1;

  bool at_end() const { return pos_ >= toks_.size(); }
  const Token& peek() const {
    if (at_end()) fail("unexpected end of input");
    return toks_[pos_];
  }
  SourcePos here() const {
    if (at_end()) {
      if (toks_.empty()) return {1, 1};
      const Token& t = toks_.back();
      return {t.line, t.column + static_cast<int>(t.lexeme.size())};
    }
    return {toks_[pos_].line, toks_[pos_].column};
  }
  [[noreturn]] void fail(const std::string& msg) const {
    throw CompileError(here(), msg);
  }

  bool check_punct(std::string_view p) const {
    return !at_end() && toks_[pos_].kind == TokenKind::Punct &&
           toks_[pos_].lexeme == p;
  }
  bool check_keyword(std::string_view k) const {
    return !at_end() && toks_[pos_].kind == TokenKind::Keyword &&
           toks_[pos_].lexeme == k;
  }
  bool match_punct(std::string_view p) {
    if (!check_punct(p)) return false;
    ++pos_;
    return true;
  }
  void expect_punct(std::string_view p) {
    if (!match_punct(p)) fail(std::string("expected '") + std::string(p) + "'");
  }
  std::string expect_identifier() {
    if (at_end() || peek().kind != TokenKind::Identifier)
      fail("expected identifier");
    return toks_[pos_++].lexeme;
  }
  std::int64_t expect_int() {
    if (at_end() || peek().kind != TokenKind::IntLiteral)
      fail("expected integer literal");
    return std::strtoll(toks_[pos_++].lexeme.c_str(), nullptr, 10);
  }

  template <typename Node>
  StmtPtr make_stmt(SourcePos pos, Node&& node) {
    auto s = std::make_unique<Stmt>();
    s->id = next_id_++;
    s->pos = pos;
    s->node = std::forward<Node>(node);
    return s;
  }
  template <typename Node>
  ExprPtr make_expr(SourcePos pos, Node&& node) {
    auto e = std::make_unique<Expr>();
    e->id = next_id_++;
    e->pos = pos;
    e->node = std::forward<Node>(node);
    return e;
  }

  TypeConstructor type_constructor() {
    SourcePos pos = here();
    TypeConstructor tc;
    tc.pos = pos;
    tc.name = expect_identifier();
    if (match_punct("[")) {
      do {
        if (!at_end() && peek().kind == TokenKind::IntLiteral) {
          tc.args.emplace_back(expect_int());
        } else {
          tc.args.emplace_back(type_constructor());
        }
      } while (match_punct(","));
      expect_punct("]");
    }
    return tc;
  }

  TypeChain type_chain() {
    TypeChain chain;
    chain.entries.push_back(type_constructor());
    while (match_punct("::")) chain.entries.push_back(type_constructor());
    return chain;
  }

  FunctionDecl function_decl() {
    FunctionDecl fn;
    fn.pos = here();
    ++pos_;  // 'function'
    fn.return_type.entries.push_back(type_constructor());
    fn.name = expect_identifier();
    expect_punct("(");
    if (!check_punct(")")) {
      do {
        Param p;
        p.pos = here();
        if (!check_keyword("var")) fail("expected 'var'");
        ++pos_;
        p.name = expect_identifier();
        expect_punct(":");
        p.chain = type_chain();
        fn.params.push_back(std::move(p));
      } while (match_punct(","));
    }
    expect_punct(")");
    if (match_punct(":")) fn.decoration = type_chain();
    fn.body = block();
    return fn;
  }

  std::vector<StmtPtr> block() {
    expect_punct("{");
    std::vector<StmtPtr> body;
    while (!check_punct("}")) {
      if (at_end()) fail("expected '}'");
      body.push_back(statement());
    }
    expect_punct("}");
    return body;
  }

  std::vector<StmtPtr> stmt_or_block() {
    if (check_punct("{")) return block();
    std::vector<StmtPtr> body;
    body.push_back(statement());
    return body;
  }

  StmtPtr statement() {
    SourcePos pos = here();
    if (check_keyword("var")) {
      ++pos_;
      VarDecl decl;
      decl.names.push_back(expect_identifier());
      while (match_punct(",")) decl.names.push_back(expect_identifier());
      expect_punct(":");
      decl.chain = type_chain();
      expect_punct(";");
      return make_stmt(pos, std::move(decl));
    }
    if (check_keyword("if")) {
      ++pos_;
      If node;
      expect_punct("(");
      node.cond = expression();
      expect_punct(")");
      node.then_body = stmt_or_block();
      if (check_keyword("else")) {
        ++pos_;
        node.else_body = stmt_or_block();
      }
      return make_stmt(pos, std::move(node));
    }
    if (check_keyword("return")) {
      ++pos_;
      Return node;
      if (!check_punct(";")) node.value = expression();
      expect_punct(";");
      return make_stmt(pos, std::move(node));
    }
    // Assignment or a call statement.
    if (!at_end() && peek().kind == TokenKind::Identifier &&
        pos_ + 1 < toks_.size() && toks_[pos_ + 1].kind == TokenKind::Punct &&
        toks_[pos_ + 1].lexeme == ":=") {
      Assign node;
      node.target = expect_identifier();
      expect_punct(":=");
      node.value = expression();
      expect_punct(";");
      return make_stmt(pos, std::move(node));
    }
    ExprPtr e = expression();
    if (!std::holds_alternative<Call>(e->node)) fail("expected statement");
    expect_punct(";");
    ExprStmt node;
    node.expr = std::move(e);
    return make_stmt(pos, std::move(node));
  }

  // Precedence (loosest first): || && | comparisons | + - | * /
  ExprPtr expression() { return logical(); }

  ExprPtr binary_level(ExprPtr (Parser::*next)(),
                       std::initializer_list<std::string_view> ops) {
    ExprPtr lhs = (this->*next)();
    for (;;) {
      bool matched = false;
      for (auto op : ops) {
        if (check_punct(op)) {
          SourcePos pos = here();
          ++pos_;
          Binary node;
          node.op = std::string(op);
          node.lhs = std::move(lhs);
          node.rhs = (this->*next)();
          lhs = make_expr(pos, std::move(node));
          matched = true;
          break;
        }
      }
      if (!matched) return lhs;
    }
  }

  ExprPtr logical() { return binary_level(&Parser::comparison, {"||", "&&"}); }
  ExprPtr comparison() {
    return binary_level(&Parser::additive, {"==", "!=", "<", ">"});
  }
  ExprPtr additive() { return binary_level(&Parser::multiplicative, {"+", "-"}); }
  ExprPtr multiplicative() { return binary_level(&Parser::postfix, {"*", "/"}); }

  ExprPtr postfix() {
    ExprPtr e = primary();
    while (check_punct(".")) {
      SourcePos pos = here();
      ++pos_;
      FieldAccess node;
      node.field = expect_identifier();
      node.object = std::move(e);
      e = make_expr(pos, std::move(node));
    }
    return e;
  }

  ExprPtr primary() {
    SourcePos pos = here();
    if (match_punct("(")) {
      ExprPtr e = expression();
      expect_punct(")");
      return e;
    }
    if (!at_end() && peek().kind == TokenKind::IntLiteral) {
      return make_expr(pos, IntLiteral{expect_int()});
    }
    if (!at_end() && peek().kind == TokenKind::Identifier) {
      std::string name = expect_identifier();
      if (match_punct("(")) {
        Call node;
        node.callee = std::move(name);
        if (!check_punct(")")) {
          do {
            node.args.push_back(expression());
          } while (match_punct(","));
        }
        expect_punct(")");
        return make_expr(pos, std::move(node));
      }
      return make_expr(pos, VarRef{std::move(name)});
    }
    fail("expected expression");
  }
};

// ---- printer ----

void print_ctor(std::ostream& os, const TypeConstructor& tc) {
  os << tc.name;
  if (!tc.args.empty()) {
    os << "[";
    for (size_t i = 0; i < tc.args.size(); ++i) {
      if (i) os << ",";
      if (auto* n = std::get_if<std::int64_t>(&tc.args[i])) {
        os << *n;
      } else {
        print_ctor(os, std::get<TypeConstructor>(tc.args[i]));
      }
    }
    os << "]";
  }
}

void print_chain_to(std::ostream& os, const TypeChain& chain) {
  for (size_t i = 0; i < chain.entries.size(); ++i) {
    if (i) os << " :: ";
    print_ctor(os, chain.entries[i]);
  }
}

int binding_power(const std::string& op) {
  if (op == "||" || op == "&&") return 1;
  if (op == "==" || op == "!=" || op == "<" || op == ">") return 2;
  if (op == "+" || op == "-") return 3;
  return 4;
}

void print_expr(std::ostream& os, const Expr& e, int parent_power) {
  std::visit(
      [&](const auto& node) {
        using T = std::decay_t<decltype(node)>;
        if constexpr (std::is_same_v<T, IntLiteral>) {
          os << node.value;
        } else if constexpr (std::is_same_v<T, VarRef>) {
          os << node.name;
        } else if constexpr (std::is_same_v<T, FieldAccess>) {
          print_expr(os, *node.object, 5);
          os << "." << node.field;
        } else if constexpr (std::is_same_v<T, Call>) {
          os << node.callee << "(";
          for (size_t i = 0; i < node.args.size(); ++i) {
            if (i) os << ", ";
            print_expr(os, *node.args[i], 0);
          }
          os << ")";
        } else if constexpr (std::is_same_v<T, Binary>) {
          int power = binding_power(node.op);
          bool parens = power < parent_power;
          if (parens) os << "(";
          print_expr(os, *node.lhs, power);
          os << " " << node.op << " ";
          // Operators are left-associative; parenthesize right subtrees
          // of equal power.
          print_expr(os, *node.rhs, power + 1);
          if (parens) os << ")";
        }
      },
      e.node);
}

void print_stmts(std::ostream& os, const std::vector<StmtPtr>& stmts,
                 int indent);

void print_stmt(std::ostream& os, const Stmt& s, int indent) {
  std::string pad(static_cast<size_t>(indent) * 4, ' ');
  std::visit(
      [&](const auto& node) {
        using T = std::decay_t<decltype(node)>;
        if constexpr (std::is_same_v<T, VarDecl>) {
          os << pad << "var ";
          for (size_t i = 0; i < node.names.size(); ++i) {
            if (i) os << ",";
            os << node.names[i];
          }
          os << ":";
          print_chain_to(os, node.chain);
          os << ";\n";
        } else if constexpr (std::is_same_v<T, Assign>) {
          os << pad << node.target << ":=";
          print_expr(os, *node.value, 0);
          os << ";\n";
        } else if constexpr (std::is_same_v<T, If>) {
          os << pad << "if (";
          print_expr(os, *node.cond, 0);
          os << ") {\n";
          print_stmts(os, node.then_body, indent + 1);
          os << pad << "}";
          if (!node.else_body.empty()) {
            os << " else {\n";
            print_stmts(os, node.else_body, indent + 1);
            os << pad << "}";
          }
          os << "\n";
        } else if constexpr (std::is_same_v<T, Return>) {
          os << pad << "return";
          if (node.value) {
            os << " ";
            print_expr(os, *node.value, 0);
          }
          os << ";\n";
        } else if constexpr (std::is_same_v<T, ExprStmt>) {
          os << pad;
          print_expr(os, *node.expr, 0);
          os << ";\n";
        }
      },
      s.node);
}

void print_stmts(std::ostream& os, const std::vector<StmtPtr>& stmts,
                 int indent) {
  for (const auto& s : stmts) print_stmt(os, *s, indent);
}

}  // namespace

Ast parse_program(const std::vector<Token>& tokens) {
  return Parser(tokens).program();
}

Ast parse_source(const std::string& source) {
  return parse_program(tokenize(source));
}

std::string print_chain(const TypeChain& chain) {
  std::ostringstream os;
  print_chain_to(os, chain);
  return os.str();
}

std::string print_program(const Ast& ast) {
  std::ostringstream os;
  for (const auto& fn : ast.functions) {
    os << "function ";
    print_ctor(os, fn.return_type.entries.front());
    os << " " << fn.name << "(";
    for (size_t i = 0; i < fn.params.size(); ++i) {
      if (i) os << ", ";
      os << "var " << fn.params[i].name << ":";
      print_chain_to(os, fn.params[i].chain);
    }
    os << ")";
    if (!fn.decoration.empty()) {
      os << " : ";
      print_chain_to(os, fn.decoration);
    }
    os << " {\n";
    print_stmts(os, fn.body, 1);
    os << "}\n";
  }
  print_stmts(os, ast.top_level, 0);
  return os.str();
}

}  // namespace typelang
