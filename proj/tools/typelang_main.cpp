#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "typelang/interp.hpp"
#include "typelang/parser.hpp"
#include "typelang/typesys.hpp"

namespace {

unsigned default_threads() {
  if (const char* env = std::getenv("TYPECHAIN_THREADS")) {
    long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<unsigned>(v);
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw >= 1 ? hw : 1;
}

int run_command(const std::string& path, int procs, unsigned threads,
                std::uint64_t seed, const std::string& trace_path,
                const std::string& dag_path, bool unchecked) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    std::cerr << path << ": cannot open file\n";
    return 66;
  }
  std::stringstream buf;
  buf << in.rdbuf();
  std::string source = buf.str();

  typelang::Ast ast;
  try {
    ast = typelang::parse_source(source);
  } catch (const typelang::CompileError& e) {
    std::cerr << typelang::format_diagnostic(path, {e.pos(), e.what()}) << "\n";
    return 2;
  }
  std::vector<typelang::Diagnostic> diags = typelang::check_program(ast);
  if (!diags.empty()) {
    for (const auto& d : diags)
      std::cerr << typelang::format_diagnostic(path, d) << "\n";
    return 2;
  }

  typelang::interp::RunConfig config;
  config.procs = procs;
  config.workers = threads;
  config.seed = seed;
  config.checked_arithmetic = !unchecked;
  typelang::interp::RunOutcome outcome =
      typelang::interp::run_program(ast, config);

  if (!trace_path.empty()) {
    std::ofstream out(trace_path, std::ios::binary | std::ios::trunc);
    std::ostringstream lines;
    for (const auto& e : outcome.trace)
      lines << typelang::distsim::event_to_json(e) << "\n";
    out << lines.str();  // single flush; trailing newline marks a full file
  }
  if (!dag_path.empty()) {
    std::ofstream out(dag_path, std::ios::binary | std::ios::trunc);
    out << outcome.dag.to_dot();
  }

  for (const std::string& line : outcome.output) std::cout << line << "\n";
  for (size_t r = 0; r < outcome.per_rank_vars.size(); ++r)
    for (const auto& [name, value] : outcome.per_rank_vars[r])
      std::cout << "rank " << r << ": " << name << " = " << value << "\n";

  if (outcome.exit_status != 0)
    for (const std::string& err : outcome.errors) std::cerr << err << "\n";
  return outcome.exit_status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interpreter for a mini language with type-chain driven "
               "parallelism"};
  app.require_subcommand(1);

  std::string path;
  int procs = 1;
  unsigned threads = default_threads();
  std::uint64_t seed = 0;
  std::string trace_path;
  std::string dag_path;
  bool unchecked = false;

  CLI::App* run = app.add_subcommand("run", "Run a program");
  run->add_option("file", path, "Source file (.tl)")->required();
  run->add_option("--procs", procs, "Simulated process count")
      ->check(CLI::PositiveNumber);
  run->add_option("--threads", threads, "Task runtime workers per process")
      ->check(CLI::PositiveNumber);
  run->add_option("--seed", seed, "Scheduler polling-order seed");
  run->add_option("--trace", trace_path, "Write the communication trace "
                  "(JSON lines) here");
  run->add_option("--dag", dag_path, "Write the task DAG (DOT) here");
  run->add_flag("--unchecked", unchecked, "Wrap on integer overflow instead "
                "of raising an error");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 64;
  }

  return run_command(path, procs, threads, seed, trace_path, dag_path,
                     unchecked);
}
