#pragma once

#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "typelang/typesys.hpp"

namespace typelang::distsim {

enum class EventKind {
  LocalWrite,
  RmaPut,
  RmaGet,
  ChannelSend,
  ChannelRecv,
  Broadcast,
};

constexpr int kDstAll = -1;

struct TraceEvent {
  std::uint64_t seq = 0;
  EventKind kind;
  int src = 0;
  int dst = 0;               // kDstAll for broadcasts
  std::string var;
  std::int64_t value = 0;
  int deliveries = 0;        // broadcast only: P - 1
  std::int64_t pair_seq = -1;  // links channel_send with channel_recv
};

const char* event_kind_name(EventKind k);
// One JSON object: {"seq":..,"kind":"..","src":..,"dst":..,"var":"..","value":..}
std::string event_to_json(const TraceEvent& e);

// Raised on a rank when another rank hit an error and tore the world down.
class WorldAborted : public std::runtime_error {
 public:
  explicit WorldAborted(const std::string& reason)
      : std::runtime_error(reason) {}
};

// P simulated ranks with per-rank stores. Single-allocated variables have
// a value slot only on the owner; writes and reads by other ranks go
// through the message layer and land in the trace.
class World {
 public:
  World(int size,
        const std::vector<std::pair<std::string, EffectiveAttributes>>& vars);
  ~World();

  int size() const { return size_; }

  // SPMD assignment: every rank calls this for the same static statement.
  // Everywhere variables take a local write per rank; Single variables
  // rendezvous, then all P values land at the owner in ascending rank
  // order (last writer wins), non-owners via rma_put or the channel.
  void assign_value(int rank, int stmt_id, const std::string& var,
                    std::int64_t value);

  // SPMD read. Everywhere reads are local and silent; Single reads
  // rendezvous and count as one broadcast from the owner.
  std::int64_t read_value(int rank, int stmt_id, const std::string& var);

  std::vector<TraceEvent> trace_snapshot() const;

  // Values currently stored on a rank, in declaration order; slots with
  // no value yet are omitted.
  std::vector<std::pair<std::string, std::int64_t>> rank_snapshot(
      int rank) const;

  // Wakes every rank parked in a collective; they throw WorldAborted.
  void abort(const std::string& reason);

 private:
  struct VarInfo {
    EffectiveAttributes attrs;
    size_t decl_index;
  };
  struct Collective;

  const VarInfo& var_info(const std::string& var) const;
  void emit(TraceEvent e);  // assigns seq, requires mu_ held

  int size_;
  std::map<std::string, VarInfo> vars_;
  std::vector<std::string> decl_order_;

  mutable std::mutex mu_;
  std::condition_variable cv_;
  // store_[rank][var] -> value; slot exists only where allocated
  std::vector<std::map<std::string, std::optional<std::int64_t>>> store_;
  std::vector<TraceEvent> trace_;
  std::uint64_t next_seq_ = 0;
  std::vector<std::uint64_t> rank_collective_idx_;
  std::map<std::uint64_t, std::unique_ptr<Collective>> collectives_;
  bool aborted_ = false;
  std::string abort_reason_;
};

}  // namespace typelang::distsim
