#include <map>

#include "doctest.h"
#include "support.hpp"
#include "typelang/parser.hpp"
#include "typelang/typesys.hpp"

using namespace typelang;

namespace {

TypeChain chain_of(const std::string& text) {
  Ast ast = parse_source("var x:" + text + ";");
  return std::get<VarDecl>(ast.top_level[0]->node).chain;
}

std::vector<Diagnostic> check_source(const std::string& src) {
  return check_program(parse_source(src));
}

}  // namespace

TEST_CASE("bare Int resolves to defaults") {
  EffectiveAttributes a = resolve_chain(chain_of("Int"));
  CHECK(a.base == BaseKind::Int);
  CHECK(a.allocation == Allocation::Everywhere());
  CHECK(a.mechanism == Mechanism::Rma());
  CHECK_FALSE(a.spawnable);
  CHECK_FALSE(a.dependencies);
}

TEST_CASE("a combined chain resolves allocation and channel") {
  EffectiveAttributes a =
      resolve_chain(chain_of("Int :: allocated[single[on[0]]] :: channel[0,1]"));
  CHECK(a.base == BaseKind::Int);
  CHECK(a.allocation == Allocation::Single(0));
  CHECK(a.mechanism == Mechanism::Channel(0, 1));
}

TEST_CASE("rightmost entry wins on conflict") {
  EffectiveAttributes a = resolve_chain(
      chain_of("Int :: allocated[single[on[0]]] :: allocated[single[on[2]]]"));
  CHECK(a.allocation == Allocation::Single(2));
}

TEST_CASE("permuting non-conflicting entries is order independent") {
  Ast a1 = parse_source("function Int f(var a:Int) : spawnable :: dependencies { return a; }");
  Ast a2 = parse_source("function Int f(var a:Int) : dependencies :: spawnable { return a; }");
  CHECK(resolve_chain(a1.functions[0].decoration) ==
        resolve_chain(a2.functions[0].decoration));
}

TEST_CASE("resolve_chain rejects malformed chains") {
  CHECK_THROWS_AS(resolve_chain(chain_of("Flob")), CompileError);
  CHECK_THROWS_AS(resolve_chain(chain_of("Int :: channel[0]")), CompileError);
  CHECK_THROWS_AS(resolve_chain(chain_of("Int :: channel[0,x]")), CompileError);
  CHECK_THROWS_AS(resolve_chain(chain_of("Int :: channel[1,1]")), CompileError);
  CHECK_THROWS_AS(resolve_chain(chain_of("Int :: allocated[0]")), CompileError);
  CHECK_THROWS_AS(resolve_chain(chain_of("Int :: single[on[0]]")), CompileError);
  CHECK_THROWS_AS(resolve_chain(chain_of("Future[channel[0,1]]")), CompileError);
}

TEST_CASE("exhaustive rightmost-wins over chains of length <= 3") {
  // Independent oracle: each entry is a list of (field, value) updates;
  // folding them over the defaults must agree with resolve_chain.
  struct Entry {
    std::string text;
    std::map<std::string, std::string> updates;
  };
  const std::vector<Entry> entries = {
      {"Int", {{"base", "int"}}},
      {"Future[Int]", {{"base", "future"}}},
      {"allocated[single[on[0]]]", {{"alloc", "single0"}}},
      {"allocated[single[on[2]]]", {{"alloc", "single2"}}},
      {"channel[0,1]", {{"mech", "chan01"}}},
      {"channel[1,2]", {{"mech", "chan12"}}},
      {"spawnable", {{"spawn", "yes"}}},
      {"dependencies", {{"deps", "yes"}}},
  };
  auto oracle_of = [&](const std::vector<size_t>& idx) {
    std::map<std::string, std::string> m = {{"base", "none"},
                                            {"alloc", "everywhere"},
                                            {"mech", "rma"},
                                            {"spawn", "no"},
                                            {"deps", "no"}};
    for (size_t i : idx)
      for (const auto& [k, v] : entries[i].updates) m[k] = v;
    return m;
  };
  auto attrs_as_map = [](const EffectiveAttributes& a) {
    std::map<std::string, std::string> m;
    m["base"] = a.base == BaseKind::None ? "none"
                : a.base == BaseKind::Int ? "int"
                                          : "future";
    m["alloc"] = a.allocation.everywhere
                     ? "everywhere"
                     : "single" + std::to_string(a.allocation.rank);
    m["mech"] = !a.mechanism.channel
                    ? "rma"
                    : "chan" + std::to_string(a.mechanism.a) +
                          std::to_string(a.mechanism.b);
    m["spawn"] = a.spawnable ? "yes" : "no";
    m["deps"] = a.dependencies ? "yes" : "no";
    return m;
  };
  auto run = [&](const std::vector<size_t>& idx) {
    std::string text;
    for (size_t k = 0; k < idx.size(); ++k) {
      if (k) text += " :: ";
      text += entries[idx[k]].text;
    }
    CHECK_MESSAGE(attrs_as_map(resolve_chain(chain_of(text))) == oracle_of(idx),
                  text);
  };
  const size_t n = entries.size();
  for (size_t i = 0; i < n; ++i) {
    run({i});
    for (size_t j = 0; j < n; ++j) {
      run({i, j});
      for (size_t k = 0; k < n; ++k) run({i, j, k});
    }
  }
}

TEST_CASE("sample programs pass the checker") {
  CHECK(check_source(testsupport::read_file(
            testsupport::program_path("distributed_vars.tl")))
            .empty());
  CHECK(check_source(testsupport::read_file(
            testsupport::program_path("fib_sync.tl")))
            .empty());
  CHECK(check_source(testsupport::read_file(
            testsupport::program_path("fib_gated.tl")))
            .empty());
}

TEST_CASE("immediate dependencies function is valid") {
  CHECK(check_source("function Int f(var a:Int) : dependencies { return a; }\n"
                     "var y:Int;\n"
                     "y := f(2);\n")
            .empty());
}

TEST_CASE("spawnable result bound to Int variable is rejected") {
  auto diags = check_source(
      "function Int fib(var v:Int) : spawnable { return v; }\n"
      "var x:Int;\nx := fib(3);\n");
  REQUIRE(diags.size() == 1);
  CHECK(diags[0].message.find("spawnable call result bound to non-Future") !=
        std::string::npos);
  CHECK(diags[0].pos.line == 3);
}

TEST_CASE("checker keeps going past the first error") {
  auto diags = check_source("var x:Int;\nx := f();\ny := 3;\nx := g();\n");
  CHECK(diags.size() == 3);
}

TEST_CASE("dependencies is rejected in variable chains") {
  auto diags = check_source("var x:Int :: dependencies;");
  REQUIRE(!diags.empty());
  CHECK(diags[0].message.find("function decorations") != std::string::npos);
}

TEST_CASE("allocation constructors are rejected in decorations") {
  auto diags = check_source(
      "function Int f(var a:Int) : allocated[single[on[0]]] { return a; }");
  REQUIRE(!diags.empty());
  CHECK(diags[0].message.find("variable type chains") != std::string::npos);
}

TEST_CASE(".val on an Int is rejected") {
  auto diags =
      check_source("function Int f(var a:Int) { return a.val; }\n"
                    "var x:Int;\nx := f(1);\n");
  REQUIRE(!diags.empty());
  CHECK(diags[0].message.find("'.val' applies only to Future") !=
        std::string::npos);
}

TEST_CASE("future arithmetic without .val is rejected") {
  auto diags = check_source(
      "function Int id(var v:Int) : spawnable { return v; }\n"
      "function Int f(var n:Int) {\n"
      "    var g : Future[Int];\n"
      "    g := id(n);\n"
      "    return g + 1;\n"
      "}\n"
      "var x:Int;\nx := f(1);\n");
  REQUIRE(!diags.empty());
  CHECK(diags[0].message.find("without '.val'") != std::string::npos);
}

TEST_CASE("top-level futures are rejected") {
  CHECK(!check_source("var f:Future[Int];").empty());
}

TEST_CASE("negative corpus static programs all fail the checker") {
  for (const char* name :
       {"unknown_function.tl", "spawnable_to_int.tl", "deps_in_var_chain.tl",
        "val_on_int.tl", "future_to_int_mix.tl", "channel_same_endpoints.tl",
        "top_level_future.tl"}) {
    auto diags = check_source(testsupport::read_file(
        testsupport::program_path(std::string("negative/") + name)));
    CHECK_MESSAGE(!diags.empty(), name);
  }
}
