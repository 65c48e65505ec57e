#include <algorithm>
#include <cassert>
#include <chrono>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

#include "typelang/taskrt.hpp"

namespace typelang::taskrt {

enum class TaskState { Gated, ReadyToRun, Running, Blocked, Done };

struct Task {
  std::uint64_t id = 0;          // temporal spawn order, per runtime
  std::uint64_t parent = 0;      // 0 = spawned outside any task
  std::uint64_t child_seq = 0;   // spawn index within the parent
  std::string callee;
  TaskFn fn;
  std::vector<TaskArg> args;
  std::vector<std::uint64_t> deps;  // future args present at spawn time
  TaskState state = TaskState::Gated;
  unsigned pending_deps = 0;
  FuturePtr future;
  std::uint64_t next_child_seq = 0;
  std::uint64_t forwarded_to = 0;  // task id the returned future belongs to
};

namespace {
// Task currently executing on this thread (help-first nesting restores it).
thread_local Task* tls_current = nullptr;
}  // namespace

// ---- Future ----

Future::State Future::state() const {
  std::lock_guard lk(mu_);
  return state_;
}

std::int64_t Future::value() const {
  std::lock_guard lk(mu_);
  assert(state_ == State::Ready);
  return value_;
}

std::string Future::error() const {
  std::lock_guard lk(mu_);
  assert(state_ == State::Failed);
  return error_;
}

void Future::complete(std::int64_t v) {
  std::vector<std::function<void()>> listeners;
  {
    std::lock_guard lk(mu_);
    assert(state_ == State::Pending && "future completed twice");
    value_ = v;
    state_ = State::Ready;
    listeners.swap(listeners_);
  }
  for (auto& fn : listeners) fn();
}

void Future::fail(std::string message) {
  std::vector<std::function<void()>> listeners;
  {
    std::lock_guard lk(mu_);
    assert(state_ == State::Pending && "future completed twice");
    error_ = std::move(message);
    state_ = State::Failed;
    listeners.swap(listeners_);
  }
  for (auto& fn : listeners) fn();
}

bool Future::add_listener(std::function<void()> fn) {
  std::lock_guard lk(mu_);
  if (state_ != State::Pending) return false;
  listeners_.push_back(std::move(fn));
  return true;
}

// ---- Runtime ----

Runtime::Runtime(RuntimeConfig config) : config_(config) {
  if (config.worker_count == 0)
    throw std::invalid_argument("worker_count must be at least 1");
  workers_.reserve(config.worker_count);
  for (unsigned i = 0; i < config.worker_count; ++i)
    workers_.emplace_back([this, i] { worker_loop(i); });
}

Runtime::~Runtime() {
  {
    std::lock_guard lk(mu_);
    stopping_ = true;
  }
  cv_.notify_all();
  for (auto& w : workers_)
    if (w.joinable()) w.join();
}

FuturePtr Runtime::spawn(std::string callee, TaskFn fn,
                         std::vector<std::int64_t> args) {
  std::vector<TaskArg> task_args;
  task_args.reserve(args.size());
  for (std::int64_t v : args) task_args.emplace_back(v);
  return spawn_impl(std::move(callee), std::move(fn), std::move(task_args));
}

FuturePtr Runtime::spawn_with_dependencies(std::string callee, TaskFn fn,
                                           std::vector<TaskArg> args) {
  return spawn_impl(std::move(callee), std::move(fn), std::move(args));
}

FuturePtr Runtime::spawn_impl(std::string callee, TaskFn fn,
                              std::vector<TaskArg> args) {
  Task* t;
  std::vector<FuturePtr> gates;
  {
    std::lock_guard lk(mu_);
    if (stopping_ || dead_) throw std::runtime_error("spawn after shutdown");
    auto task = std::make_unique<Task>();
    t = task.get();
    t->id = tasks_.size() + 1;
    if (tls_current) {
      t->parent = tls_current->id;
      t->child_seq = tls_current->next_child_seq++;
    } else {
      t->parent = 0;
      t->child_seq = root_child_seq_++;
    }
    t->callee = std::move(callee);
    t->fn = std::move(fn);
    t->args = std::move(args);
    t->future = std::make_shared<Future>(t->id);
    for (const TaskArg& a : t->args) {
      if (const auto* f = std::get_if<FuturePtr>(&a)) {
        t->deps.push_back((*f)->task_id());
        gates.push_back(*f);
      }
    }
    // Sentinel +1 keeps the task gated until every listener is in place.
    t->pending_deps = static_cast<unsigned>(gates.size()) + 1;
    t->state = TaskState::Gated;
    ++outstanding_;
    tasks_.push_back(std::move(task));
  }
  auto arm = [this, t] {
    bool wake = false;
    {
      std::lock_guard lk(mu_);
      if (--t->pending_deps == 0 && t->state == TaskState::Gated) {
        enqueue_locked(t);
        wake = true;
      }
    }
    if (wake) cv_.notify_all();
  };
  for (const FuturePtr& f : gates)
    if (!f->add_listener(arm)) arm();
  arm();  // release the sentinel
  return t->future;
}

void Runtime::enqueue_locked(Task* t) {
  t->state = TaskState::ReadyToRun;
  ready_.push_back(t);
}

// Walks from the awaited future down its pending dependency chain and
// claims the first task that is ready to run, removing it from the queue.
// Returns null when every contributing task is already running, blocked,
// or mid-forwarding on another thread. Requires mu_ held.
Task* Runtime::claim_contributing_locked(const Future* target) {
  const Future* f = target;
  for (size_t hops = 0; hops <= tasks_.size(); ++hops) {
    std::uint64_t tid = f->task_id();
    if (tid == 0 || tid > tasks_.size()) return nullptr;
    Task* t = tasks_[tid - 1].get();
    switch (t->state) {
      case TaskState::ReadyToRun: {
        auto it = std::find(ready_.begin(), ready_.end(), t);
        if (it == ready_.end()) return nullptr;
        ready_.erase(it);
        return t;
      }
      case TaskState::Gated: {
        const Future* next = nullptr;
        for (const TaskArg& a : t->args) {
          if (const auto* fp = std::get_if<FuturePtr>(&a)) {
            if ((*fp)->state() == Future::State::Pending) {
              next = fp->get();
              break;
            }
          }
        }
        if (!next) return nullptr;  // deps done, enqueue is imminent
        f = next;
        break;
      }
      case TaskState::Done: {
        if (t->forwarded_to == 0 || t->forwarded_to > tasks_.size())
          return nullptr;
        f = tasks_[t->forwarded_to - 1]->future.get();
        break;
      }
      default:
        return nullptr;
    }
  }
  return nullptr;
}

void Runtime::run_task(Task* t) {
  Task* prev = tls_current;
  tls_current = t;
  {
    std::lock_guard lk(mu_);
    t->state = TaskState::Running;
    ++running_n_;
  }
  // A failed dependency poisons the task before its body runs.
  std::string dep_error;
  std::vector<std::int64_t> values;
  values.reserve(t->args.size());
  for (const TaskArg& a : t->args) {
    if (const auto* v = std::get_if<std::int64_t>(&a)) {
      values.push_back(*v);
    } else {
      const FuturePtr& f = std::get<FuturePtr>(a);
      Future::State st = f->state();
      assert(st != Future::State::Pending && "gated task ran with pending dep");
      if (st == Future::State::Failed) {
        dep_error = f->error();
        break;
      }
      values.push_back(f->value());
    }
  }
  if (!dep_error.empty()) {
    fail_task(t, std::move(dep_error));
  } else {
    try {
      finish_task(t, t->fn(values));
    } catch (const std::exception& e) {
      fail_task(t, e.what());
    }
  }
  tls_current = prev;
}

void Runtime::finish_task(Task* t, TaskResult result) {
  if (const auto* v = std::get_if<std::int64_t>(&result)) {
    complete_task(t, *v);
    return;
  }
  // Forwarded result: complete once the returned future does.
  FuturePtr inner = std::get<FuturePtr>(result);
  {
    std::lock_guard lk(mu_);
    t->state = TaskState::Done;
    t->forwarded_to = inner->task_id();
    --running_n_;
  }
  auto forward = [this, t, inner] {
    if (inner->state() == Future::State::Ready)
      t->future->complete(inner->value());
    else
      t->future->fail(inner->error());
    std::lock_guard lk(mu_);
    --outstanding_;
    cv_.notify_all();
  };
  if (!inner->add_listener(forward)) forward();
}

void Runtime::complete_task(Task* t, std::int64_t value) {
  t->future->complete(value);  // may enqueue gated dependents
  std::lock_guard lk(mu_);
  t->state = TaskState::Done;
  --running_n_;
  --outstanding_;
  cv_.notify_all();
}

void Runtime::fail_task(Task* t, std::string message) {
  t->future->fail(std::move(message));
  std::lock_guard lk(mu_);
  t->state = TaskState::Done;
  --running_n_;
  --outstanding_;
  cv_.notify_all();
}

std::int64_t Runtime::synchronise(const TaskArg& arg) {
  if (const auto* v = std::get_if<std::int64_t>(&arg)) return *v;
  const FuturePtr& f = std::get<FuturePtr>(arg);
  Task* self = tls_current;
  if (self) {
    std::lock_guard lk(mu_);
    self->state = TaskState::Blocked;
    --running_n_;
  }
  using namespace std::chrono_literals;
  while (f->state() == Future::State::Pending) {
    Task* t;
    {
      std::lock_guard lk(mu_);
      t = claim_contributing_locked(f.get());
    }
    if (t) {
      run_task(t);
      continue;
    }
    std::unique_lock lk(mu_);
    cv_.wait_for(lk, 1ms, [&] {
      return f->state() != Future::State::Pending || stopping_;
    });
    if (stopping_ && f->state() == Future::State::Pending)
      throw std::runtime_error("synchronise interrupted by shutdown");
  }
  if (self) {
    std::lock_guard lk(mu_);
    self->state = TaskState::Running;
    ++running_n_;
  }
  if (f->state() == Future::State::Failed)
    throw std::runtime_error(f->error());
  return f->value();
}

std::optional<std::int64_t> Runtime::try_result(const FuturePtr& f) const {
  if (f->state() == Future::State::Ready) return f->value();
  return std::nullopt;
}

RuntimeSample Runtime::sample() const {
  std::lock_guard lk(mu_);
  RuntimeSample s;
  for (const auto& t : tasks_) {
    switch (t->state) {
      case TaskState::Gated: ++s.gated; break;
      case TaskState::ReadyToRun: ++s.ready; break;
      case TaskState::Running: ++s.running; break;
      case TaskState::Blocked: ++s.blocked; break;
      case TaskState::Done: ++s.done; break;
    }
    if (t->state == TaskState::Running) {
      for (const TaskArg& a : t->args) {
        if (const auto* f = std::get_if<FuturePtr>(&a)) {
          if ((*f)->state() == Future::State::Pending)
            s.running_task_with_pending_deps = true;
        }
      }
    }
  }
  return s;
}

void Runtime::worker_loop(unsigned index) {
  std::mt19937_64 rng(config_.seed * 0x9e3779b97f4a7c15ull + index + 1);
  for (;;) {
    Task* t = nullptr;
    {
      std::unique_lock lk(mu_);
      cv_.wait(lk, [&] { return stopping_ || !ready_.empty(); });
      if (ready_.empty()) {
        if (stopping_) return;
        continue;
      }
      // Seeded jitter: occasionally defer so another worker polls first.
      if (config_.seed != 0 && rng() % 4 == 0) {
        lk.unlock();
        std::this_thread::yield();
        continue;
      }
      t = ready_.front();
      ready_.pop_front();
    }
    run_task(t);
  }
}

TaskDag Runtime::drain_and_shutdown() {
  using namespace std::chrono_literals;
  {
    std::unique_lock lk(mu_);
    if (dead_) throw std::runtime_error("runtime already shut down");
    int idle_strikes = 0;
    std::uint64_t last_outstanding = outstanding_;
    while (outstanding_ > 0) {
      if (outstanding_ != last_outstanding) {
        last_outstanding = outstanding_;
        idle_strikes = 0;
      }
      bool idle = ready_.empty() && running_n_ == 0;
      if (idle && ++idle_strikes >= 10)
        throw std::runtime_error(
            "deadlock: gated tasks remain with no runnable work");
      if (!idle) idle_strikes = 0;
      cv_.wait_for(lk, 20ms);
    }
    stopping_ = true;
  }
  cv_.notify_all();
  for (auto& w : workers_) w.join();
  workers_.clear();

  TaskDag dag;
  std::map<std::uint64_t, std::vector<Task*>> children;
  {
    std::lock_guard lk(mu_);
    dead_ = true;
    for (const auto& t : tasks_) children[t->parent].push_back(t.get());
    for (auto& [parent, kids] : children) {
      std::sort(kids.begin(), kids.end(), [](const Task* a, const Task* b) {
        return a->child_seq < b->child_seq;
      });
    }
    // Preorder over the spawn tree gives schedule-independent ids.
    std::map<std::uint64_t, std::uint64_t> canonical;
    std::vector<Task*> stack;
    auto roots = children.find(0);
    if (roots != children.end())
      stack.assign(roots->second.rbegin(), roots->second.rend());
    std::vector<Task*> order;
    while (!stack.empty()) {
      Task* t = stack.back();
      stack.pop_back();
      canonical[t->id] = order.size();
      order.push_back(t);
      auto it = children.find(t->id);
      if (it != children.end())
        stack.insert(stack.end(), it->second.rbegin(), it->second.rend());
    }
    for (Task* t : order) {
      TaskDag::Node node;
      node.id = canonical.at(t->id);
      node.callee = t->callee;
      for (std::uint64_t dep : t->deps) node.deps.push_back(canonical.at(dep));
      dag.nodes.push_back(std::move(node));
    }
  }
  return dag;
}

std::string TaskDag::to_dot() const {
  std::ostringstream os;
  os << "digraph tasks {\n";
  for (const Node& n : nodes)
    os << "  \"t" << n.id << "\" [label=\"" << n.callee << "#" << n.id
       << "\"];\n";
  for (const Node& n : nodes)
    for (std::uint64_t dep : n.deps)
      os << "  \"t" << dep << "\" -> \"t" << n.id << "\";\n";
  os << "}\n";
  return os.str();
}

}  // namespace typelang::taskrt
