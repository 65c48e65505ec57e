#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <thread>
#include <variant>

#include "typelang/interp.hpp"
#include "typelang/typesys.hpp"

namespace typelang::interp {

namespace {

using taskrt::FuturePtr;
using taskrt::TaskArg;
using Value = std::variant<std::int64_t, FuturePtr>;

class RuntimeError : public std::runtime_error {
 public:
  RuntimeError(SourcePos pos, const std::string& msg)
      : std::runtime_error(std::to_string(pos.line) + ":" +
                           std::to_string(pos.column) + ": error: " + msg) {}
  explicit RuntimeError(const std::string& msg) : std::runtime_error(msg) {}
};

struct FnEntry {
  const FunctionDecl* decl;
  bool spawnable;
  bool dependencies;
};

// Lexical scopes for one activation; slots are empty until assigned.
using Scope = std::map<std::string, std::optional<Value>>;

struct Env {
  std::vector<Scope> scopes;

  std::optional<Value>* find(const std::string& name) {
    for (auto it = scopes.rbegin(); it != scopes.rend(); ++it) {
      auto found = it->find(name);
      if (found != it->end()) return &found->second;
    }
    return nullptr;
  }
};

thread_local int tls_call_depth = 0;

struct DepthGuard {
  SourcePos pos;
  explicit DepthGuard(SourcePos p) : pos(p) {
    if (++tls_call_depth > kMaxCallDepth) {
      --tls_call_depth;
      throw RuntimeError(pos, "recursion depth limit (" +
                                  std::to_string(kMaxCallDepth) +
                                  ") exceeded");
    }
  }
  ~DepthGuard() { --tls_call_depth; }
};

std::int64_t as_int(const Value& v, SourcePos pos, const std::string& what) {
  if (const auto* n = std::get_if<std::int64_t>(&v)) return *n;
  throw RuntimeError(pos, "future value used where an Int is required (" +
                              what + ")");
}

TaskArg to_task_arg(const Value& v) {
  if (const auto* n = std::get_if<std::int64_t>(&v)) return TaskArg(*n);
  return TaskArg(std::get<FuturePtr>(v));
}

// One rank's evaluator. Top-level statements route variable traffic
// through the World; function bodies see only parameters and locals.
class RankEval {
 public:
  RankEval(int rank, distsim::World& world, taskrt::Runtime& runtime,
           const std::map<std::string, FnEntry>& functions, bool checked,
           std::mutex& out_mu, std::vector<std::string>& out_lines)
      : rank_(rank),
        world_(world),
        runtime_(runtime),
        functions_(functions),
        checked_(checked),
        out_mu_(out_mu),
        out_lines_(out_lines) {}

  void run_top_level(const std::vector<StmtPtr>& stmts) {
    Env env;
    env.scopes.emplace_back();
    Value ret;
    for (const StmtPtr& s : stmts) exec_stmt(*s, env, /*top=*/true, ret);
  }

 private:
  int rank_;
  distsim::World& world_;
  taskrt::Runtime& runtime_;
  const std::map<std::string, FnEntry>& functions_;
  bool checked_;
  std::mutex& out_mu_;
  std::vector<std::string>& out_lines_;

  enum class Flow { Normal, Returned };

  Flow exec_block(const std::vector<StmtPtr>& body, Env& env, bool top,
                  Value& ret) {
    env.scopes.emplace_back();
    Flow flow = Flow::Normal;
    for (const StmtPtr& s : body) {
      flow = exec_stmt(*s, env, top, ret);
      if (flow == Flow::Returned) break;
    }
    env.scopes.pop_back();
    return flow;
  }

  Flow exec_stmt(const Stmt& s, Env& env, bool top, Value& ret) {
    return std::visit(
        [&](const auto& node) -> Flow {
          using T = std::decay_t<decltype(node)>;
          if constexpr (std::is_same_v<T, VarDecl>) {
            // Top-level variables already live in the World store.
            if (!top)
              for (const std::string& name : node.names)
                env.scopes.back()[name] = std::nullopt;
            return Flow::Normal;
          } else if constexpr (std::is_same_v<T, Assign>) {
            Value v = eval_expr(*node.value, env, top);
            if (auto* slot = env.find(node.target)) {
              *slot = std::move(v);
            } else if (top) {
              world_.assign_value(rank_, s.id, node.target,
                                  as_int(v, s.pos, "assignment to '" +
                                                       node.target + "'"));
            } else {
              throw RuntimeError(s.pos,
                                 "unknown variable '" + node.target + "'");
            }
            return Flow::Normal;
          } else if constexpr (std::is_same_v<T, If>) {
            std::int64_t cond =
                as_int(eval_expr(*node.cond, env, top), s.pos, "condition");
            if (cond != 0) return exec_block(node.then_body, env, top, ret);
            return exec_block(node.else_body, env, top, ret);
          } else if constexpr (std::is_same_v<T, Return>) {
            if (top) throw RuntimeError(s.pos, "return outside function");
            ret = node.value ? eval_expr(*node.value, env, top)
                             : Value(std::int64_t{0});
            return Flow::Returned;
          } else if constexpr (std::is_same_v<T, ExprStmt>) {
            eval_expr(*node.expr, env, top);
            return Flow::Normal;
          }
        },
        s.node);
  }

  Value eval_expr(const Expr& e, Env& env, bool top) {
    return std::visit(
        [&](const auto& node) -> Value {
          using T = std::decay_t<decltype(node)>;
          if constexpr (std::is_same_v<T, IntLiteral>) {
            return Value(node.value);
          } else if constexpr (std::is_same_v<T, VarRef>) {
            if (auto* slot = env.find(node.name)) {
              if (!slot->has_value())
                throw RuntimeError(e.pos, "use of unassigned variable '" +
                                              node.name + "'");
              return **slot;
            }
            if (top) {
              try {
                return Value(world_.read_value(rank_, e.id, node.name));
              } catch (const distsim::WorldAborted&) {
                throw;
              } catch (const std::runtime_error& err) {
                throw RuntimeError(e.pos, err.what());
              }
            }
            throw RuntimeError(e.pos, "unknown variable '" + node.name + "'");
          } else if constexpr (std::is_same_v<T, FieldAccess>) {
            return eval_field(e, node, env, top);
          } else if constexpr (std::is_same_v<T, Call>) {
            return eval_call(e, node, env, top);
          } else if constexpr (std::is_same_v<T, Binary>) {
            return eval_binary(e, node, env, top);
          }
        },
        e.node);
  }

  Value eval_field(const Expr& e, const FieldAccess& node, Env& env, bool top) {
    Value obj = eval_expr(*node.object, env, top);
    if (node.field != "val")
      throw RuntimeError(e.pos, "unknown field '" + node.field + "'");
    const auto* f = std::get_if<FuturePtr>(&obj);
    if (!f)
      throw RuntimeError(e.pos, "'.val' applies only to Future values");
    switch ((*f)->state()) {
      case taskrt::Future::State::Ready:
        return Value((*f)->value());
      case taskrt::Future::State::Failed:
        throw RuntimeError((*f)->error());
      case taskrt::Future::State::Pending:
        throw RuntimeError(
            e.pos, "E_FUTURE_NOT_READY: '.val' on pending future of task " +
                       std::to_string((*f)->task_id()) +
                       "; synchronise first");
    }
    throw RuntimeError(e.pos, "unreachable");
  }

  Value eval_binary(const Expr& e, const Binary& node, Env& env, bool top) {
    std::int64_t lhs = as_int(eval_expr(*node.lhs, env, top), e.pos,
                              "'" + node.op + "' operand");
    if (node.op == "||") {
      if (lhs != 0) return Value(std::int64_t{1});
      std::int64_t rhs = as_int(eval_expr(*node.rhs, env, top), e.pos,
                                "'||' operand");
      return Value(std::int64_t{rhs != 0});
    }
    if (node.op == "&&") {
      if (lhs == 0) return Value(std::int64_t{0});
      std::int64_t rhs = as_int(eval_expr(*node.rhs, env, top), e.pos,
                                "'&&' operand");
      return Value(std::int64_t{rhs != 0});
    }
    std::int64_t rhs = as_int(eval_expr(*node.rhs, env, top), e.pos,
                              "'" + node.op + "' operand");
    if (node.op == "==") return Value(std::int64_t{lhs == rhs});
    if (node.op == "!=") return Value(std::int64_t{lhs != rhs});
    if (node.op == "<") return Value(std::int64_t{lhs < rhs});
    if (node.op == ">") return Value(std::int64_t{lhs > rhs});
    std::int64_t result = 0;
    bool overflow = false;
    if (node.op == "+") {
      overflow = __builtin_add_overflow(lhs, rhs, &result);
    } else if (node.op == "-") {
      overflow = __builtin_sub_overflow(lhs, rhs, &result);
    } else if (node.op == "*") {
      overflow = __builtin_mul_overflow(lhs, rhs, &result);
    } else if (node.op == "/") {
      if (rhs == 0) throw RuntimeError(e.pos, "division by zero");
      if (lhs == INT64_MIN && rhs == -1)
        overflow = true;
      else
        result = lhs / rhs;
    } else {
      throw RuntimeError(e.pos, "unknown operator '" + node.op + "'");
    }
    if (overflow && checked_)
      throw RuntimeError(e.pos, "integer overflow in '" + node.op + "'");
    return Value(result);
  }

  Value eval_call(const Expr& e, const Call& call, Env& env, bool top) {
    if (call.callee == "synchronise") {
      Value arg = eval_expr(*call.args[0], env, top);
      try {
        return Value(runtime_.synchronise(to_task_arg(arg)));
      } catch (const RuntimeError&) {
        throw;
      } catch (const std::runtime_error& err) {
        throw RuntimeError(e.pos, err.what());
      }
    }
    if (call.callee == "print") {
      std::int64_t v =
          as_int(eval_expr(*call.args[0], env, top), e.pos, "print argument");
      std::lock_guard lk(out_mu_);
      out_lines_.push_back("rank " + std::to_string(rank_) + ": " +
                           std::to_string(v));
      return Value(v);
    }
    auto it = functions_.find(call.callee);
    if (it == functions_.end())
      throw RuntimeError(e.pos, "unknown function '" + call.callee + "'");
    const FnEntry& fn = it->second;
    if (call.args.size() != fn.decl->params.size())
      throw RuntimeError(e.pos, "wrong argument count for '" + call.callee +
                                    "'");
    std::vector<Value> args;
    args.reserve(call.args.size());
    for (const ExprPtr& a : call.args) args.push_back(eval_expr(*a, env, top));

    if (fn.spawnable) {
      auto body = [this, decl = fn.decl](const std::vector<std::int64_t>& vals)
          -> taskrt::TaskResult {
        Value r = invoke_immediate(*decl, vals);
        if (const auto* n = std::get_if<std::int64_t>(&r)) return *n;
        return std::get<FuturePtr>(r);
      };
      try {
        if (fn.dependencies) {
          std::vector<TaskArg> task_args;
          task_args.reserve(args.size());
          for (const Value& a : args) task_args.push_back(to_task_arg(a));
          return Value(runtime_.spawn_with_dependencies(
              call.callee, body, std::move(task_args)));
        }
        std::vector<std::int64_t> vals;
        vals.reserve(args.size());
        for (size_t i = 0; i < args.size(); ++i)
          vals.push_back(as_int(args[i], call.args[i]->pos,
                                "argument to non-dependencies function '" +
                                    call.callee + "'"));
        return Value(runtime_.spawn(call.callee, body, std::move(vals)));
      } catch (const RuntimeError&) {
        throw;
      } catch (const std::runtime_error& err) {
        throw RuntimeError(e.pos, err.what());
      }
    }
    // Immediate call; a dependencies decoration first waits out any
    // future arguments in place.
    std::vector<std::int64_t> vals;
    vals.reserve(args.size());
    for (size_t i = 0; i < args.size(); ++i) {
      if (std::holds_alternative<FuturePtr>(args[i])) {
        if (!fn.dependencies)
          throw RuntimeError(call.args[i]->pos,
                             "future argument to non-dependencies function '" +
                                 call.callee + "'");
        try {
          vals.push_back(runtime_.synchronise(to_task_arg(args[i])));
        } catch (const std::runtime_error& err) {
          throw RuntimeError(call.args[i]->pos, err.what());
        }
      } else {
        vals.push_back(std::get<std::int64_t>(args[i]));
      }
    }
    DepthGuard guard(e.pos);
    Value r = invoke_immediate(*fn.decl, vals);
    if (std::holds_alternative<FuturePtr>(r))
      throw RuntimeError(e.pos, "function '" + call.callee +
                                    "' returned a future from an immediate "
                                    "call");
    return r;
  }

  // Runs a function body to completion on the current thread. Used both
  // for immediate calls and as the body of spawned tasks.
  Value invoke_immediate(const FunctionDecl& decl,
                         const std::vector<std::int64_t>& args) {
    Env env;
    env.scopes.emplace_back();
    for (size_t i = 0; i < decl.params.size(); ++i)
      env.scopes.back()[decl.params[i].name] = Value(args[i]);
    Value ret;
    Flow flow = exec_block(decl.body, env, /*top=*/false, ret);
    if (flow != Flow::Returned)
      throw RuntimeError(decl.pos, "function '" + decl.name +
                                       "' ended without a return");
    return ret;
  }
};

}  // namespace

RunOutcome run_program(const Ast& ast, const RunConfig& config) {
  RunOutcome outcome;
  if (config.procs < 1) {
    outcome.exit_status = 1;
    outcome.errors.push_back("error: process count must be at least 1");
    return outcome;
  }

  // Top-level declarations define the World layout up front.
  std::vector<std::pair<std::string, EffectiveAttributes>> declared;
  std::map<std::string, FnEntry> functions;
  try {
    for (const StmtPtr& s : ast.top_level) {
      if (const auto* decl = std::get_if<VarDecl>(&s->node)) {
        EffectiveAttributes attrs = resolve_chain(decl->chain);
        for (const std::string& name : decl->names)
          declared.emplace_back(name, attrs);
      }
    }
    for (const FunctionDecl& fn : ast.functions) {
      EffectiveAttributes attrs = resolve_chain(fn.decoration);
      functions.emplace(fn.name,
                        FnEntry{&fn, attrs.spawnable, attrs.dependencies});
    }
  } catch (const CompileError& e) {
    outcome.exit_status = 1;
    outcome.errors.push_back("error: " + std::string(e.what()));
    return outcome;
  }

  std::unique_ptr<distsim::World> world;
  try {
    world = std::make_unique<distsim::World>(config.procs, declared);
  } catch (const std::exception& e) {
    outcome.exit_status = 1;
    outcome.errors.push_back(std::string("error: ") + e.what());
    return outcome;
  }

  std::vector<std::unique_ptr<taskrt::Runtime>> runtimes;
  for (int r = 0; r < config.procs; ++r)
    runtimes.push_back(std::make_unique<taskrt::Runtime>(
        taskrt::RuntimeConfig{config.workers, config.seed}));

  std::mutex err_mu;
  std::vector<std::vector<std::string>> rank_output(
      static_cast<size_t>(config.procs));
  std::vector<std::mutex> out_mus(static_cast<size_t>(config.procs));

  // Evaluators outlive the rank threads: spawned task bodies keep running
  // until the runtimes drain.
  std::vector<std::unique_ptr<RankEval>> evals;
  for (int r = 0; r < config.procs; ++r)
    evals.push_back(std::make_unique<RankEval>(
        r, *world, *runtimes[static_cast<size_t>(r)], functions,
        config.checked_arithmetic, out_mus[static_cast<size_t>(r)],
        rank_output[static_cast<size_t>(r)]));

  std::vector<std::thread> rank_threads;
  for (int r = 0; r < config.procs; ++r) {
    rank_threads.emplace_back([&, r] {
      try {
        evals[static_cast<size_t>(r)]->run_top_level(ast.top_level);
      } catch (const distsim::WorldAborted&) {
        // Another rank failed first; its message is already recorded.
      } catch (const std::exception& e) {
        {
          std::lock_guard lk(err_mu);
          outcome.errors.push_back("rank " + std::to_string(r) + ": " +
                                   e.what());
        }
        world->abort(e.what());
      }
    });
  }
  for (auto& t : rank_threads) t.join();

  for (int r = 0; r < config.procs; ++r) {
    try {
      taskrt::TaskDag dag = runtimes[static_cast<size_t>(r)]->drain_and_shutdown();
      if (r == 0) outcome.dag = std::move(dag);
    } catch (const std::exception& e) {
      std::lock_guard lk(err_mu);
      outcome.errors.push_back("rank " + std::to_string(r) + ": " + e.what());
    }
  }

  outcome.exit_status = outcome.errors.empty() ? 0 : 1;
  for (int r = 0; r < config.procs; ++r) {
    outcome.per_rank_vars.push_back(world->rank_snapshot(r));
    for (std::string& line : rank_output[static_cast<size_t>(r)])
      outcome.output.push_back(std::move(line));
  }
  outcome.trace = world->trace_snapshot();
  return outcome;
}

}  // namespace typelang::interp
