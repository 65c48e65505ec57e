#include <set>

#include "typelang/typesys.hpp"

namespace typelang {

namespace {

[[noreturn]] void bad_entry(const TypeConstructor& tc, const std::string& msg) {
  throw CompileError(tc.pos, msg);
}

const TypeConstructor* ctor_arg(const TypeConstructor& tc, size_t i) {
  return std::get_if<TypeConstructor>(&tc.args[i]);
}

std::int64_t int_arg(const TypeConstructor& tc, size_t i) {
  const auto* n = std::get_if<std::int64_t>(&tc.args[i]);
  if (!n)
    bad_entry(tc, "'" + tc.name + "' expects an integer argument");
  return *n;
}

}  // namespace

const std::map<std::string, TypeRegistryEntry>& type_registry() {
  static const std::map<std::string, TypeRegistryEntry> registry = {
      {"Int",
       {0, [](EffectiveAttributes& a, const TypeConstructor&) {
          a.base = BaseKind::Int;
        }}},
      {"Future",
       {1, [](EffectiveAttributes& a, const TypeConstructor& tc) {
          const TypeConstructor* inner = ctor_arg(tc, 0);
          if (!inner || inner->name != "Int" || !inner->args.empty())
            bad_entry(tc, "Future is only instantiated as Future[Int]");
          a.base = BaseKind::FutureInt;
        }}},
      {"allocated",
       {1, [](EffectiveAttributes& a, const TypeConstructor& tc) {
          const TypeConstructor* single = ctor_arg(tc, 0);
          if (!single || single->name != "single" || single->args.size() != 1)
            bad_entry(tc, "allocated expects single[on[<rank>]]");
          const TypeConstructor* on = ctor_arg(*single, 0);
          if (!on || on->name != "on" || on->args.size() != 1)
            bad_entry(tc, "single expects on[<rank>]");
          std::int64_t rank = int_arg(*on, 0);
          if (rank < 0) bad_entry(tc, "owner rank must be nonnegative");
          a.allocation = Allocation::Single(static_cast<int>(rank));
        }}},
      {"single",
       {1, [](EffectiveAttributes&, const TypeConstructor& tc) {
          bad_entry(tc, "'single' is only valid inside allocated[...]");
        }}},
      {"on",
       {1, [](EffectiveAttributes&, const TypeConstructor& tc) {
          bad_entry(tc, "'on' is only valid inside allocated[...]");
        }}},
      {"channel",
       {2, [](EffectiveAttributes& a, const TypeConstructor& tc) {
          std::int64_t x = int_arg(tc, 0);
          std::int64_t y = int_arg(tc, 1);
          if (x < 0 || y < 0)
            bad_entry(tc, "channel ranks must be nonnegative");
          if (x == y) bad_entry(tc, "channel endpoints must be distinct");
          a.mechanism =
              Mechanism::Channel(static_cast<int>(x), static_cast<int>(y));
        }}},
      {"spawnable",
       {0, [](EffectiveAttributes& a, const TypeConstructor&) {
          a.spawnable = true;
        }}},
      {"dependencies",
       {0, [](EffectiveAttributes& a, const TypeConstructor&) {
          a.dependencies = true;
        }}},
  };
  return registry;
}

EffectiveAttributes resolve_chain(const TypeChain& chain) {
  EffectiveAttributes attrs;
  for (const TypeConstructor& tc : chain.entries) {
    auto it = type_registry().find(tc.name);
    if (it == type_registry().end())
      bad_entry(tc, "unknown type constructor '" + tc.name + "'");
    if (static_cast<int>(tc.args.size()) != it->second.arity)
      bad_entry(tc, "'" + tc.name + "' expects " +
                        std::to_string(it->second.arity) + " argument(s), got " +
                        std::to_string(tc.args.size()));
    it->second.apply(attrs, tc);
  }
  return attrs;
}

// ---- static checks ----

namespace {

enum class ExprType { Int, Future, Unknown };

bool is_base_name(const std::string& n) { return n == "Int" || n == "Future"; }

struct FnInfo {
  const FunctionDecl* decl = nullptr;
  bool spawnable = false;
  bool dependencies = false;
};

class Checker {
 public:
  explicit Checker(const Ast& ast) : ast_(ast) {}

  std::vector<Diagnostic> run() {
    collect_functions();
    for (const FunctionDecl& fn : ast_.functions) check_function(fn);
    scopes_.clear();
    scopes_.emplace_back();
    in_function_ = nullptr;
    for (const StmtPtr& s : ast_.top_level) check_stmt(*s, /*top_level=*/true);
    return std::move(diags_);
  }

 private:
  const Ast& ast_;
  std::vector<Diagnostic> diags_;
  std::map<std::string, FnInfo> functions_;
  std::vector<std::map<std::string, ExprType>> scopes_;
  const FnInfo* in_function_ = nullptr;

  void report(SourcePos pos, std::string msg) {
    diags_.push_back({pos, std::move(msg)});
  }

  void collect_functions() {
    for (const FunctionDecl& fn : ast_.functions) {
      if (functions_.count(fn.name)) {
        report(fn.pos, "duplicate function '" + fn.name + "'");
        continue;
      }
      FnInfo info;
      info.decl = &fn;
      for (const TypeConstructor& tc : fn.decoration.entries) {
        if (tc.name == "allocated" || tc.name == "channel") {
          report(tc.pos, "data-allocation constructor '" + tc.name +
                             "' appears only in variable type chains");
        } else if (is_base_name(tc.name)) {
          report(tc.pos,
                 "'" + tc.name + "' is not valid in a function decoration");
        }
      }
      try {
        EffectiveAttributes attrs = resolve_chain(fn.decoration);
        info.spawnable = attrs.spawnable;
        info.dependencies = attrs.dependencies;
      } catch (const CompileError& e) {
        report(e.pos(), e.what());
      }
      const TypeConstructor& ret = fn.return_type.entries.front();
      if (ret.name != "Int" || !ret.args.empty())
        report(ret.pos, "only Int return types are supported");
      functions_.emplace(fn.name, info);
    }
  }

  // Variable chains carry exactly one base kind, leftmost, and no
  // function-only constructors.
  ExprType check_var_chain(const TypeChain& chain, SourcePos pos,
                           bool top_level) {
    int base_count = 0;
    for (const TypeConstructor& tc : chain.entries) {
      if (is_base_name(tc.name)) ++base_count;
      if (tc.name == "spawnable" || tc.name == "dependencies")
        report(tc.pos, "'" + tc.name + "' appears only in function decorations");
      if (!top_level && (tc.name == "allocated" || tc.name == "channel"))
        report(tc.pos,
               "'" + tc.name + "' applies only to top-level variables");
    }
    if (base_count != 1 || !is_base_name(chain.entries.front().name)) {
      report(pos, "variable type must start with exactly one of Int or "
                  "Future[...]");
      return ExprType::Unknown;
    }
    EffectiveAttributes attrs;
    try {
      attrs = resolve_chain(chain);
    } catch (const CompileError& e) {
      report(e.pos(), e.what());
      return ExprType::Unknown;
    }
    if (attrs.base == BaseKind::FutureInt && top_level) {
      report(pos, "futures cannot be declared at top level");
      return ExprType::Unknown;
    }
    return attrs.base == BaseKind::FutureInt ? ExprType::Future : ExprType::Int;
  }

  ExprType* lookup(const std::string& name) {
    for (auto it = scopes_.rbegin(); it != scopes_.rend(); ++it) {
      auto found = it->find(name);
      if (found != it->end()) return &found->second;
    }
    return nullptr;
  }

  void check_function(const FunctionDecl& fn) {
    const FnInfo& info = functions_.at(fn.name);
    scopes_.clear();
    scopes_.emplace_back();
    in_function_ = &info;
    std::set<std::string> param_names;
    for (const Param& p : fn.params) {
      if (!param_names.insert(p.name).second)
        report(p.pos, "duplicate parameter '" + p.name + "'");
      ExprType t = check_var_chain(p.chain, p.pos, /*top_level=*/false);
      if (t == ExprType::Future)
        report(p.pos, "parameters are declared Int; dependencies functions "
                      "accept futures at the call site");
      scopes_.back()[p.name] = ExprType::Int;
    }
    scopes_.emplace_back();
    for (const StmtPtr& s : fn.body) check_stmt(*s, /*top_level=*/false);
    in_function_ = nullptr;
  }

  bool is_spawnable_call(const Expr& e) const {
    const auto* call = std::get_if<Call>(&e.node);
    if (!call) return false;
    auto it = functions_.find(call->callee);
    return it != functions_.end() && it->second.spawnable;
  }

  ExprType check_expr(const Expr& e) {
    return std::visit(
        [&](const auto& node) -> ExprType {
          using T = std::decay_t<decltype(node)>;
          if constexpr (std::is_same_v<T, IntLiteral>) {
            return ExprType::Int;
          } else if constexpr (std::is_same_v<T, VarRef>) {
            if (ExprType* t = lookup(node.name)) return *t;
            report(e.pos, "unknown variable '" + node.name + "'");
            return ExprType::Unknown;
          } else if constexpr (std::is_same_v<T, FieldAccess>) {
            ExprType obj = check_expr(*node.object);
            if (node.field != "val") {
              report(e.pos, "unknown field '" + node.field + "'");
              return ExprType::Unknown;
            }
            if (obj == ExprType::Int)
              report(e.pos, "'.val' applies only to Future values");
            return ExprType::Int;
          } else if constexpr (std::is_same_v<T, Call>) {
            return check_call(e, node);
          } else if constexpr (std::is_same_v<T, Binary>) {
            ExprType l = check_expr(*node.lhs);
            ExprType r = check_expr(*node.rhs);
            if (l == ExprType::Future || r == ExprType::Future)
              report(e.pos, "future value used without '.val' in '" + node.op +
                                "' expression");
            return ExprType::Int;
          }
        },
        e.node);
  }

  ExprType check_call(const Expr& e, const Call& call) {
    if (call.callee == "synchronise") {
      if (call.args.size() != 1) {
        report(e.pos, "synchronise expects 1 argument");
      } else {
        check_expr(*call.args[0]);
      }
      return ExprType::Int;
    }
    bool builtin_print = call.callee == "print";
    const FnInfo* info = nullptr;
    if (!builtin_print) {
      auto it = functions_.find(call.callee);
      if (it == functions_.end()) {
        report(e.pos, "unknown function '" + call.callee + "'");
        for (const ExprPtr& a : call.args) check_expr(*a);
        return ExprType::Unknown;
      }
      info = &it->second;
      if (call.args.size() != info->decl->params.size())
        report(e.pos, "'" + call.callee + "' expects " +
                          std::to_string(info->decl->params.size()) +
                          " argument(s), got " +
                          std::to_string(call.args.size()));
    } else if (call.args.size() != 1) {
      report(e.pos, "print expects 1 argument");
    }
    bool accepts_futures = info && info->dependencies;
    for (const ExprPtr& a : call.args) {
      ExprType t = check_expr(*a);
      if (t == ExprType::Future && !accepts_futures)
        report(a->pos, "future argument to non-dependencies function '" +
                           call.callee + "'");
    }
    return info && info->spawnable ? ExprType::Future : ExprType::Int;
  }

  void check_block(const std::vector<StmtPtr>& body, bool top_level) {
    scopes_.emplace_back();
    for (const StmtPtr& s : body) check_stmt(*s, top_level);
    scopes_.pop_back();
  }

  void check_stmt(const Stmt& s, bool top_level) {
    std::visit(
        [&](const auto& node) {
          using T = std::decay_t<decltype(node)>;
          if constexpr (std::is_same_v<T, VarDecl>) {
            ExprType t = check_var_chain(node.chain, s.pos, top_level);
            for (const std::string& name : node.names) {
              if (scopes_.back().count(name))
                report(s.pos, "duplicate variable '" + name + "'");
              scopes_.back()[name] = t;
            }
          } else if constexpr (std::is_same_v<T, Assign>) {
            ExprType* target = lookup(node.target);
            ExprType rhs = check_expr(*node.value);
            if (!target) {
              report(s.pos, "unknown variable '" + node.target + "'");
              return;
            }
            if (*target == ExprType::Int && rhs == ExprType::Future) {
              if (is_spawnable_call(*node.value))
                report(s.pos, "spawnable call result bound to non-Future "
                              "variable '" + node.target + "'");
              else
                report(s.pos, "future value assigned to Int variable '" +
                                  node.target + "'");
            } else if (*target == ExprType::Future && rhs == ExprType::Int) {
              report(s.pos, "only spawnable call results may be assigned to "
                            "Future variable '" + node.target + "'");
            }
          } else if constexpr (std::is_same_v<T, If>) {
            if (check_expr(*node.cond) == ExprType::Future)
              report(s.pos, "condition must be an Int value");
            check_block(node.then_body, top_level);
            check_block(node.else_body, top_level);
          } else if constexpr (std::is_same_v<T, Return>) {
            if (top_level) {
              report(s.pos, "return outside function");
              return;
            }
            if (!node.value) {
              report(s.pos, "return requires a value");
              return;
            }
            ExprType t = check_expr(*node.value);
            // A spawnable body may return a future; the task result is
            // forwarded when that future completes.
            if (t == ExprType::Future && !(in_function_ && in_function_->spawnable))
              report(s.pos, "function returns Int but value is a Future");
          } else if constexpr (std::is_same_v<T, ExprStmt>) {
            check_expr(*node.expr);
          }
        },
        s.node);
  }
};

}  // namespace

std::vector<Diagnostic> check_program(const Ast& ast) {
  return Checker(ast).run();
}

}  // namespace typelang
