#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <sys/wait.h>

namespace testsupport {

inline std::int64_t iter_fib(int n) {
  std::int64_t a = 0, b = 1;
  for (int i = 0; i < n; ++i) {
    std::int64_t next = a + b;
    a = b;
    b = next;
  }
  return a;
}

// Recursion-tree oracle: how many calls naive fib(n) makes in total.
inline int fib_call_count(int n) {
  if (n == 0 || n == 1) return 1;
  return 1 + fib_call_count(n - 1) + fib_call_count(n - 2);
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct CmdResult {
  int exit_code;
  std::string output;  // stdout and stderr merged
};

inline CmdResult run_cmd(const std::string& cmd) {
  std::string full = cmd + " 2>&1";
  FILE* pipe = popen(full.c_str(), "r");
  if (!pipe) throw std::runtime_error("popen failed");
  std::string out;
  std::array<char, 4096> buf;
  size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0)
    out.append(buf.data(), n);
  int status = pclose(pipe);
  int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return {code, out};
}

inline CmdResult run_cli(const std::string& args) {
  return run_cmd(std::string(TYPELANG_BIN) + " " + args);
}

inline std::string program_path(const std::string& name) {
  return std::string(PROGRAMS_DIR) + "/" + name;
}

}  // namespace testsupport
