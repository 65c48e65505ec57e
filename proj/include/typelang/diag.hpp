#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace typelang {

struct SourcePos {
  int line = 0;
  int column = 0;
};

struct Diagnostic {
  SourcePos pos;
  std::string message;
};

// Formats as "<file>:<line>:<col>: error: <message>".
std::string format_diagnostic(const std::string& file, const Diagnostic& d);

// Lexical or syntax failure; aborts the current compile.
class CompileError : public std::runtime_error {
 public:
  CompileError(SourcePos pos, const std::string& message)
      : std::runtime_error(message), pos_(pos) {}
  SourcePos pos() const { return pos_; }

 private:
  SourcePos pos_;
};

}  // namespace typelang
