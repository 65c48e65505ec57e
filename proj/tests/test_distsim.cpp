#include <functional>
#include <map>
#include <thread>

#include "doctest.h"
#include "support.hpp"
#include "typelang/distsim.hpp"

using namespace typelang;
using namespace typelang::distsim;

namespace {

EffectiveAttributes everywhere_int() { return {}; }

EffectiveAttributes single_int(int rank) {
  EffectiveAttributes a;
  a.allocation = Allocation::Single(rank);
  return a;
}

EffectiveAttributes channel_int(int owner, int peer_a, int peer_b) {
  EffectiveAttributes a = single_int(owner);
  a.mechanism = Mechanism::Channel(peer_a, peer_b);
  return a;
}

// Runs fn(rank) on one thread per rank, SPMD style.
void run_spmd(int procs, const std::function<void(int)>& fn) {
  std::vector<std::thread> threads;
  for (int r = 0; r < procs; ++r) threads.emplace_back(fn, r);
  for (auto& t : threads) t.join();
}

std::map<std::string, int> kind_counts(const std::vector<TraceEvent>& trace,
                                       const std::string& var = "") {
  std::map<std::string, int> counts;
  for (const TraceEvent& e : trace)
    if (var.empty() || e.var == var) ++counts[event_kind_name(e.kind)];
  return counts;
}

}  // namespace

TEST_CASE("owner rank out of range is a configuration error") {
  CHECK_THROWS_WITH(World(2, {{"c", single_int(5)}}),
                    "owner rank 5 out of range for variable 'c'");
}

TEST_CASE("everywhere assignment is one local write per rank") {
  World w(4, {{"a", everywhere_int()}});
  run_spmd(4, [&](int r) { w.assign_value(r, 1, "a", 22); });
  auto counts = kind_counts(w.trace_snapshot());
  CHECK(counts["local_write"] == 4);
  CHECK(counts.size() == 1);
  for (int r = 0; r < 4; ++r) {
    auto snap = w.rank_snapshot(r);
    REQUIRE(snap.size() == 1);
    CHECK(snap[0] == std::pair<std::string, std::int64_t>{"a", 22});
  }
}

TEST_CASE("single assignment is local at owner and rma_put elsewhere") {
  World w(4, {{"b", single_int(0)}});
  run_spmd(4, [&](int r) { w.assign_value(r, 1, "b", 22); });
  auto counts = kind_counts(w.trace_snapshot());
  CHECK(counts["local_write"] == 1);
  CHECK(counts["rma_put"] == 3);
  CHECK(w.rank_snapshot(0).size() == 1);
  for (int r = 1; r < 4; ++r) CHECK(w.rank_snapshot(r).empty());
}

TEST_CASE("channel pair replaces rma for the covered transfer") {
  World w(2, {{"c", channel_int(0, 0, 1)}});
  run_spmd(2, [&](int r) { w.assign_value(r, 1, "c", 22); });
  auto trace = w.trace_snapshot();
  auto counts = kind_counts(trace);
  CHECK(counts["local_write"] == 1);
  CHECK(counts["channel_send"] == 1);
  CHECK(counts["channel_recv"] == 1);
  CHECK(counts["rma_put"] == 0);
  // send and recv reference each other through the linkage field
  const TraceEvent* send = nullptr;
  const TraceEvent* recv = nullptr;
  for (const TraceEvent& e : trace) {
    if (e.kind == EventKind::ChannelSend) send = &e;
    if (e.kind == EventKind::ChannelRecv) recv = &e;
  }
  REQUIRE(send);
  REQUIRE(recv);
  CHECK(send->pair_seq == static_cast<std::int64_t>(recv->seq));
  CHECK(recv->pair_seq == static_cast<std::int64_t>(send->seq));
}

TEST_CASE("uncovered ranks still use rma when a channel exists") {
  World w(4, {{"c", channel_int(0, 0, 1)}});
  run_spmd(4, [&](int r) { w.assign_value(r, 1, "c", 22); });
  auto counts = kind_counts(w.trace_snapshot());
  CHECK(counts["local_write"] == 1);
  CHECK(counts["channel_send"] == 1);
  CHECK(counts["channel_recv"] == 1);
  CHECK(counts["rma_put"] == 2);
}

TEST_CASE("reading a single variable is one broadcast") {
  World w(4, {{"b", single_int(0)}});
  run_spmd(4, [&](int r) { w.assign_value(r, 1, "b", 22); });
  std::vector<std::int64_t> got(4);
  run_spmd(4, [&](int r) { got[r] = w.read_value(r, 2, "b"); });
  for (int r = 0; r < 4; ++r) CHECK(got[r] == 22);
  int broadcasts = 0;
  for (const TraceEvent& e : w.trace_snapshot()) {
    if (e.kind == EventKind::Broadcast) {
      ++broadcasts;
      CHECK(e.src == 0);
      CHECK(e.dst == kDstAll);
      CHECK(e.deliveries == 3);
      CHECK(e.value == 22);
    }
  }
  CHECK(broadcasts == 1);
}

TEST_CASE("single-process world reads and writes silently") {
  World w(1, {{"b", single_int(0)}});
  w.assign_value(0, 1, "b", 22);
  auto counts = kind_counts(w.trace_snapshot());
  CHECK(counts["local_write"] == 1);
  CHECK(counts.size() == 1);
  CHECK(w.read_value(0, 2, "b") == 22);
  CHECK(w.trace_snapshot().size() == 1);  // reads add nothing
}

TEST_CASE("owner read is value-identical across world sizes") {
  World w1(1, {{"b", single_int(0)}});
  w1.assign_value(0, 1, "b", 22);
  std::int64_t v1 = w1.read_value(0, 2, "b");

  World w4(4, {{"b", single_int(0)}});
  run_spmd(4, [&](int r) { w4.assign_value(r, 1, "b", 22); });
  std::vector<std::int64_t> got(4);
  run_spmd(4, [&](int r) { got[r] = w4.read_value(r, 2, "b"); });
  CHECK(v1 == got[0]);
}

TEST_CASE("event conservation across world sizes") {
  for (int p : {1, 2, 4, 8}) {
    World w(p, {{"b", single_int(0)}});
    run_spmd(p, [&](int r) { w.assign_value(r, 1, "b", 7); });
    auto counts = kind_counts(w.trace_snapshot());
    CHECK(counts["local_write"] == 1);
    CHECK(counts["rma_put"] == p - 1);
  }
}

TEST_CASE("remote writes land in ascending rank order, last writer wins") {
  World w(4, {{"b", single_int(1)}});
  run_spmd(4, [&](int r) { w.assign_value(r, 1, "b", 100 + r); });
  auto trace = w.trace_snapshot();
  REQUIRE(trace.size() == 4);
  for (size_t i = 1; i < trace.size(); ++i) CHECK(trace[i].src > trace[i - 1].src);
  CHECK(w.rank_snapshot(1)[0].second == 103);
}

TEST_CASE("unassigned reads are runtime errors") {
  World w(2, {{"a", everywhere_int()}, {"b", single_int(0)}});
  CHECK_THROWS_WITH(w.read_value(0, 1, "a"),
                    "use of unassigned variable 'a'");
  std::vector<std::string> errors(2);
  run_spmd(2, [&](int r) {
    try {
      w.read_value(r, 2, "b");
    } catch (const std::runtime_error& e) {
      errors[r] = e.what();
    }
  });
  CHECK(errors[0] == "use of unassigned variable 'b'");
  CHECK(errors[1] == "use of unassigned variable 'b'");
}

TEST_CASE("undeclared variables are runtime errors") {
  World w(1, {});
  CHECK_THROWS_WITH(w.assign_value(0, 1, "x", 1),
                    "undeclared variable 'x'");
  CHECK_THROWS_WITH(w.read_value(0, 2, "x"), "undeclared variable 'x'");
}

TEST_CASE("trace snapshot of a fresh world is empty") {
  World w(4, {{"a", everywhere_int()}});
  CHECK(w.trace_snapshot().empty());
}

TEST_CASE("trace events serialize to the pinned JSON shape") {
  TraceEvent e{3, EventKind::RmaPut, 2, 0, "b", 22};
  CHECK(event_to_json(e) ==
        "{\"seq\": 3, \"kind\": \"rma_put\", \"src\": 2, \"dst\": 0, "
        "\"var\": \"b\", \"value\": 22}");
  TraceEvent b{5, EventKind::Broadcast, 0, kDstAll, "b", 22};
  CHECK(event_to_json(b) ==
        "{\"seq\": 5, \"kind\": \"broadcast\", \"src\": 0, \"dst\": \"all\", "
        "\"var\": \"b\", \"value\": 22}");
}

TEST_CASE("spmd value agreement after broadcast assignment") {
  World w(4, {{"a", everywhere_int()}, {"b", single_int(0)}});
  run_spmd(4, [&](int r) { w.assign_value(r, 1, "b", 22); });
  run_spmd(4, [&](int r) {
    std::int64_t v = w.read_value(r, 2, "b");
    w.assign_value(r, 3, "a", v);
  });
  for (int r = 0; r < 4; ++r) {
    auto snap = w.rank_snapshot(r);
    REQUIRE(!snap.empty());
    CHECK(snap[0].second == 22);
  }
}

TEST_CASE("abort releases ranks parked in a collective") {
  World w(2, {{"b", single_int(0)}});
  std::string caught;
  std::thread waiter([&] {
    try {
      w.assign_value(0, 1, "b", 1);  // rank 1 never arrives
    } catch (const WorldAborted& e) {
      caught = e.what();
    }
  });
  std::this_thread::sleep_for(std::chrono::milliseconds(20));
  w.abort("rank 1 failed");
  waiter.join();
  CHECK(caught == "rank 1 failed");
}
