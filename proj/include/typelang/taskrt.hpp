#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

namespace typelang::taskrt {

class Runtime;

// Result handle for a scheduled task. Pending until the task body (or the
// future it forwards to) completes; Ready/Failed exactly once after that.
class Future {
 public:
  enum class State { Pending, Ready, Failed };

  explicit Future(std::uint64_t task_id) : task_id_(task_id) {}

  std::uint64_t task_id() const { return task_id_; }
  State state() const;
  std::int64_t value() const;      // requires Ready
  std::string error() const;       // requires Failed

 private:
  friend class Runtime;

  void complete(std::int64_t v);
  void fail(std::string message);
  // Registers fn to run once on completion; returns false (fn not taken)
  // if the future is already completed.
  bool add_listener(std::function<void()> fn);

  mutable std::mutex mu_;
  State state_ = State::Pending;
  std::int64_t value_ = 0;
  std::string error_;
  std::vector<std::function<void()>> listeners_;
  std::uint64_t task_id_;
};

using FuturePtr = std::shared_ptr<Future>;

// Either a plain value or a future whose value gates the task.
using TaskArg = std::variant<std::int64_t, FuturePtr>;

// Task body: receives fully unwrapped integer arguments. May return a
// future, in which case the task's own future completes with that
// future's eventual value (no DAG edge is added for the forwarding).
using TaskResult = std::variant<std::int64_t, FuturePtr>;
using TaskFn = std::function<TaskResult(const std::vector<std::int64_t>&)>;

struct RuntimeConfig {
  unsigned worker_count = 1;
  std::uint64_t seed = 0;  // perturbs worker polling order only
};

// Immutable dependency graph exported after quiescence. Node ids are
// canonical (preorder over the spawn tree), so the export is identical
// across schedules.
struct TaskDag {
  struct Node {
    std::uint64_t id;
    std::string callee;
    std::vector<std::uint64_t> deps;  // tasks whose futures gated this one
  };
  std::vector<Node> nodes;

  std::string to_dot() const;
};

// Point-in-time state counts, for schedule assertions in tests.
struct RuntimeSample {
  unsigned gated = 0;
  unsigned ready = 0;
  unsigned running = 0;   // actively executing (not blocked in synchronise)
  unsigned blocked = 0;   // parked in synchronise, worker is off helping
  unsigned done = 0;
  bool running_task_with_pending_deps = false;
};

struct Task;  // internal scheduling record

class Runtime {
 public:
  explicit Runtime(RuntimeConfig config);
  ~Runtime();

  Runtime(const Runtime&) = delete;
  Runtime& operator=(const Runtime&) = delete;

  // Enqueues immediately; args must be plain values.
  FuturePtr spawn(std::string callee, TaskFn fn, std::vector<std::int64_t> args);

  // Gated until every future argument is Ready; consumes no worker while
  // gated. With no future args this behaves exactly like spawn.
  FuturePtr spawn_with_dependencies(std::string callee, TaskFn fn,
                                    std::vector<TaskArg> args);

  // Plain values pass through; futures block until completion. A thread
  // blocked here help-first executes tasks the awaited future depends on,
  // so bounded pools always make progress and the nesting depth stays
  // proportional to the dependency chain. Rethrows the task's error.
  std::int64_t synchronise(const TaskArg& arg);

  // Non-blocking probe.
  std::optional<std::int64_t> try_result(const FuturePtr& f) const;

  RuntimeSample sample() const;

  // Blocks until all tasks are Done, stops the workers, and exports the
  // dependency DAG. The runtime accepts no spawns afterwards.
  TaskDag drain_and_shutdown();

 private:
  FuturePtr spawn_impl(std::string callee, TaskFn fn, std::vector<TaskArg> args);
  void enqueue_locked(Task* t);
  void run_task(Task* t);
  void finish_task(Task* t, TaskResult result);
  void complete_task(Task* t, std::int64_t value);
  void fail_task(Task* t, std::string message);
  Task* claim_contributing_locked(const Future* target);
  void worker_loop(unsigned index);

  RuntimeConfig config_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::vector<std::unique_ptr<Task>> tasks_;  // index = id - 1
  std::deque<Task*> ready_;
  std::uint64_t outstanding_ = 0;    // tasks whose future is still pending
  std::uint64_t root_child_seq_ = 0; // spawn order of top-level tasks
  unsigned running_n_ = 0;
  bool stopping_ = false;
  bool dead_ = false;
  std::vector<std::thread> workers_;
};

}  // namespace typelang::taskrt
