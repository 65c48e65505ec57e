#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "typelang/ast.hpp"

namespace typelang {

enum class BaseKind { None, Int, FutureInt };

struct Allocation {
  bool everywhere = true;
  int rank = 0;  // valid iff !everywhere

  bool operator==(const Allocation&) const = default;
  static Allocation Everywhere() { return {}; }
  static Allocation Single(int r) { return {false, r}; }
};

struct Mechanism {
  bool channel = false;
  int a = 0, b = 0;  // rank pair, valid iff channel

  bool operator==(const Mechanism&) const = default;
  static Mechanism Rma() { return {}; }
  static Mechanism Channel(int a, int b) { return {true, a, b}; }
  bool covers(int x, int y) const {
    return channel && ((a == x && b == y) || (a == y && b == x));
  }
};

// Flat record a chain resolves to. Later chain entries overwrite earlier
// ones attribute-wise (rightmost wins).
struct EffectiveAttributes {
  BaseKind base = BaseKind::None;
  Allocation allocation = Allocation::Everywhere();
  Mechanism mechanism = Mechanism::Rma();
  bool spawnable = false;
  bool dependencies = false;

  bool operator==(const EffectiveAttributes&) const = default;
};

// One registry row: arity plus the attribute update an entry performs.
// Registered as data so new constructors slot in without resolver changes.
struct TypeRegistryEntry {
  int arity;
  // Validates args and applies the entry's updates; throws CompileError.
  std::function<void(EffectiveAttributes&, const TypeConstructor&)> apply;
};

const std::map<std::string, TypeRegistryEntry>& type_registry();

// Resolves a chain left-to-right from defaults; rightmost entry wins on
// conflicting attributes. Throws CompileError on unknown names, wrong
// arity, or malformed arguments.
EffectiveAttributes resolve_chain(const TypeChain& chain);

// Static checks over a parsed program. Returns every violation found;
// empty means the program is well-formed.
std::vector<Diagnostic> check_program(const Ast& ast);

}  // namespace typelang
