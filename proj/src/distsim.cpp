#include <sstream>
#include <stdexcept>

#include "typelang/distsim.hpp"

namespace typelang::distsim {

const char* event_kind_name(EventKind k) {
  switch (k) {
    case EventKind::LocalWrite: return "local_write";
    case EventKind::RmaPut: return "rma_put";
    case EventKind::RmaGet: return "rma_get";
    case EventKind::ChannelSend: return "channel_send";
    case EventKind::ChannelRecv: return "channel_recv";
    case EventKind::Broadcast: return "broadcast";
  }
  return "unknown";
}

std::string event_to_json(const TraceEvent& e) {
  std::ostringstream os;
  os << "{\"seq\": " << e.seq << ", \"kind\": \"" << event_kind_name(e.kind)
     << "\", \"src\": " << e.src << ", \"dst\": ";
  if (e.dst == kDstAll)
    os << "\"all\"";
  else
    os << e.dst;
  os << ", \"var\": \"" << e.var << "\", \"value\": " << e.value << "}";
  return os.str();
}

// Rendezvous state for one SPMD assignment or read. Matched by per-rank
// collective index; identical control flow on every rank keeps the
// indices aligned.
struct World::Collective {
  int stmt_id = 0;
  std::string var;
  int arrived = 0;
  int departed = 0;
  bool done = false;
  std::vector<std::int64_t> values;
  std::int64_t result = 0;
  std::string error;
};

World::World(
    int size,
    const std::vector<std::pair<std::string, EffectiveAttributes>>& vars)
    : size_(size) {
  if (size < 1) throw std::runtime_error("world size must be at least 1");
  store_.resize(static_cast<size_t>(size));
  rank_collective_idx_.assign(static_cast<size_t>(size), 0);
  for (const auto& [name, attrs] : vars) {
    if (!attrs.allocation.everywhere && attrs.allocation.rank >= size)
      throw std::runtime_error("owner rank " +
                               std::to_string(attrs.allocation.rank) +
                               " out of range for variable '" + name + "'");
    vars_.emplace(name, VarInfo{attrs, decl_order_.size()});
    decl_order_.push_back(name);
    if (attrs.allocation.everywhere) {
      for (auto& s : store_) s.emplace(name, std::nullopt);
    } else {
      store_[static_cast<size_t>(attrs.allocation.rank)].emplace(name,
                                                                 std::nullopt);
    }
  }
}

World::~World() = default;

const World::VarInfo& World::var_info(const std::string& var) const {
  auto it = vars_.find(var);
  if (it == vars_.end())
    throw std::runtime_error("undeclared variable '" + var + "'");
  return it->second;
}

void World::emit(TraceEvent e) {
  e.seq = next_seq_++;
  trace_.push_back(std::move(e));
}

void World::assign_value(int rank, int stmt_id, const std::string& var,
                         std::int64_t value) {
  const VarInfo& info = var_info(var);
  std::unique_lock lk(mu_);
  if (aborted_) throw WorldAborted(abort_reason_);
  if (info.attrs.allocation.everywhere) {
    store_[static_cast<size_t>(rank)][var] = value;
    emit({0, EventKind::LocalWrite, rank, rank, var, value});
    return;
  }
  const int owner = info.attrs.allocation.rank;
  std::uint64_t idx = rank_collective_idx_[static_cast<size_t>(rank)]++;
  auto& slot = collectives_[idx];
  if (!slot) {
    slot = std::make_unique<Collective>();
    slot->stmt_id = stmt_id;
    slot->var = var;
    slot->values.resize(static_cast<size_t>(size_));
  }
  if (slot->stmt_id != stmt_id || slot->var != var) {
    aborted_ = true;
    abort_reason_ = "SPMD divergence at variable '" + var + "'";
    cv_.notify_all();
    throw WorldAborted(abort_reason_);
  }
  Collective* c = slot.get();
  c->values[static_cast<size_t>(rank)] = value;
  if (++c->arrived == size_) {
    // Writer order is ascending rank; the owner's store ends up with the
    // highest rank's value (last writer wins).
    for (int s = 0; s < size_; ++s) {
      std::int64_t v = c->values[static_cast<size_t>(s)];
      if (s == owner) {
        emit({0, EventKind::LocalWrite, owner, owner, var, v});
      } else if (info.attrs.mechanism.covers(s, owner)) {
        TraceEvent send{next_seq_++, EventKind::ChannelSend, s, owner, var, v};
        TraceEvent recv{next_seq_++, EventKind::ChannelRecv, s, owner, var, v};
        send.pair_seq = static_cast<std::int64_t>(recv.seq);
        recv.pair_seq = static_cast<std::int64_t>(send.seq);
        trace_.push_back(send);
        trace_.push_back(recv);
      } else {
        emit({0, EventKind::RmaPut, s, owner, var, v});
      }
      store_[static_cast<size_t>(owner)][var] = v;
    }
    c->done = true;
    cv_.notify_all();
  } else {
    cv_.wait(lk, [&] { return c->done || aborted_; });
    if (aborted_) throw WorldAborted(abort_reason_);
  }
  if (++c->departed == size_) collectives_.erase(idx);
}

std::int64_t World::read_value(int rank, int stmt_id, const std::string& var) {
  const VarInfo& info = var_info(var);
  std::unique_lock lk(mu_);
  if (aborted_) throw WorldAborted(abort_reason_);
  if (info.attrs.allocation.everywhere) {
    const auto& slot = store_[static_cast<size_t>(rank)].at(var);
    if (!slot.has_value())
      throw std::runtime_error("use of unassigned variable '" + var + "'");
    return *slot;
  }
  const int owner = info.attrs.allocation.rank;
  std::uint64_t idx = rank_collective_idx_[static_cast<size_t>(rank)]++;
  auto& entry = collectives_[idx];
  if (!entry) {
    entry = std::make_unique<Collective>();
    entry->stmt_id = stmt_id;
    entry->var = var;
  }
  if (entry->stmt_id != stmt_id || entry->var != var) {
    aborted_ = true;
    abort_reason_ = "SPMD divergence at variable '" + var + "'";
    cv_.notify_all();
    throw WorldAborted(abort_reason_);
  }
  Collective* c = entry.get();
  if (++c->arrived == size_) {
    const auto& slot = store_[static_cast<size_t>(owner)].at(var);
    if (!slot.has_value()) {
      c->error = "use of unassigned variable '" + var + "'";
    } else {
      c->result = *slot;
      if (size_ > 1) {
        TraceEvent b{0, EventKind::Broadcast, owner, kDstAll, var, c->result};
        b.deliveries = size_ - 1;
        emit(std::move(b));
        // The delivery to the channel's other endpoint is additionally
        // visible as a point-to-point transfer.
        const Mechanism& m = info.attrs.mechanism;
        if (m.channel && (m.a == owner || m.b == owner)) {
          int peer = m.a == owner ? m.b : m.a;
          if (peer != owner && peer < size_) {
            TraceEvent send{next_seq_++, EventKind::ChannelSend, owner, peer,
                            var, c->result};
            TraceEvent recv{next_seq_++, EventKind::ChannelRecv, owner, peer,
                            var, c->result};
            send.pair_seq = static_cast<std::int64_t>(recv.seq);
            recv.pair_seq = static_cast<std::int64_t>(send.seq);
            trace_.push_back(send);
            trace_.push_back(recv);
          }
        }
      }
    }
    c->done = true;
    cv_.notify_all();
  } else {
    cv_.wait(lk, [&] { return c->done || aborted_; });
    if (aborted_) throw WorldAborted(abort_reason_);
  }
  std::int64_t result = c->result;
  std::string error = c->error;
  if (++c->departed == size_) collectives_.erase(idx);
  if (!error.empty()) throw std::runtime_error(error);
  return result;
}

std::vector<TraceEvent> World::trace_snapshot() const {
  std::lock_guard lk(mu_);
  return trace_;
}

std::vector<std::pair<std::string, std::int64_t>> World::rank_snapshot(
    int rank) const {
  std::lock_guard lk(mu_);
  std::vector<std::pair<std::string, std::int64_t>> out;
  const auto& store = store_[static_cast<size_t>(rank)];
  for (const std::string& name : decl_order_) {
    auto it = store.find(name);
    if (it != store.end() && it->second.has_value())
      out.emplace_back(name, *it->second);
  }
  return out;
}

void World::abort(const std::string& reason) {
  std::lock_guard lk(mu_);
  if (aborted_) return;
  aborted_ = true;
  abort_reason_ = reason;
  cv_.notify_all();
}

}  // namespace typelang::distsim
