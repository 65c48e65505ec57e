#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "typelang/ast.hpp"
#include "typelang/distsim.hpp"
#include "typelang/taskrt.hpp"

namespace typelang::interp {

struct RunConfig {
  int procs = 1;
  unsigned workers = 1;
  std::uint64_t seed = 0;
  bool checked_arithmetic = true;
};

struct RunOutcome {
  int exit_status = 0;                 // 0 ok, 1 runtime error
  std::vector<std::string> errors;     // rank-tagged messages
  // rank -> (name, value) in declaration order, assigned slots only
  std::vector<std::vector<std::pair<std::string, std::int64_t>>> per_rank_vars;
  std::vector<distsim::TraceEvent> trace;
  taskrt::TaskDag dag;                 // rank 0's task graph
  std::vector<std::string> output;     // print lines, grouped by rank
};

// Nested recursion this deep is an error rather than stack exhaustion.
constexpr int kMaxCallDepth = 4096;

// Executes the program SPMD over `procs` ranks, each with its own
// task runtime of `workers` workers. The Ast must have passed
// check_program.
RunOutcome run_program(const Ast& ast, const RunConfig& config);

}  // namespace typelang::interp
