#pragma once

#include <coroutine>
#include <exception>
#include <optional>
#include <utility>

namespace decloud {

// Lazy coroutine task with symmetric transfer. Awaiting starts the child and
// resumes the awaiter when the child finishes. Destroying a suspended task
// destroys the whole chain below it, which is how crashed devices abandon
// in-flight operations without resuming them.
template <typename T>
class task;

namespace detail {

struct final_awaiter {
  bool await_ready() noexcept { return false; }
  template <typename P>
  std::coroutine_handle<> await_suspend(std::coroutine_handle<P> h) noexcept {
    auto cont = h.promise().continuation;
    return cont ? cont : std::noop_coroutine();
  }
  void await_resume() noexcept {}
};

struct promise_base {
  std::coroutine_handle<> continuation;
  std::exception_ptr error;

  std::suspend_always initial_suspend() noexcept { return {}; }
  final_awaiter final_suspend() noexcept { return {}; }
  void unhandled_exception() { error = std::current_exception(); }
};

}  // namespace detail

template <typename T>
class task {
 public:
  struct promise_type : detail::promise_base {
    std::optional<T> value;
    task get_return_object() {
      return task(std::coroutine_handle<promise_type>::from_promise(*this));
    }
    void return_value(T v) { value = std::move(v); }
  };

  task() = default;
  explicit task(std::coroutine_handle<promise_type> h) : h_(h) {}
  task(task&& o) noexcept : h_(std::exchange(o.h_, {})) {}
  task& operator=(task&& o) noexcept {
    if (h_) h_.destroy();
    h_ = std::exchange(o.h_, {});
    return *this;
  }
  task(const task&) = delete;
  task& operator=(const task&) = delete;
  ~task() {
    if (h_) h_.destroy();
  }

  bool await_ready() const noexcept { return false; }
  std::coroutine_handle<> await_suspend(std::coroutine_handle<> cont) {
    h_.promise().continuation = cont;
    return h_;
  }
  T await_resume() {
    if (h_.promise().error) std::rethrow_exception(h_.promise().error);
    return std::move(*h_.promise().value);
  }

  std::coroutine_handle<promise_type> handle() const { return h_; }

 private:
  std::coroutine_handle<promise_type> h_;
};

template <>
class task<void> {
 public:
  struct promise_type : detail::promise_base {
    task get_return_object() {
      return task(std::coroutine_handle<promise_type>::from_promise(*this));
    }
    void return_void() {}
  };

  task() = default;
  explicit task(std::coroutine_handle<promise_type> h) : h_(h) {}
  task(task&& o) noexcept : h_(std::exchange(o.h_, {})) {}
  task& operator=(task&& o) noexcept {
    if (h_) h_.destroy();
    h_ = std::exchange(o.h_, {});
    return *this;
  }
  task(const task&) = delete;
  task& operator=(const task&) = delete;
  ~task() {
    if (h_) h_.destroy();
  }

  bool await_ready() const noexcept { return false; }
  std::coroutine_handle<> await_suspend(std::coroutine_handle<> cont) {
    h_.promise().continuation = cont;
    return h_;
  }
  void await_resume() {
    if (h_.promise().error) std::rethrow_exception(h_.promise().error);
  }

  std::coroutine_handle<promise_type> handle() const { return h_; }

 private:
  std::coroutine_handle<promise_type> h_;
};

// Root of a coroutine chain. Owns the top task; `start` kicks it off, and
// the owner may abandon() it at any suspension point to destroy everything
// beneath without resuming. Completion is observed by the coroutine itself
// (it should end by invoking whatever callback matters before returning).
class op_root {
 public:
  op_root() = default;
  explicit op_root(task<void> t) : t_(std::move(t)) {}
  op_root(op_root&&) = default;
  op_root& operator=(op_root&&) = default;

  void start() {
    if (t_.handle()) t_.handle().resume();
  }
  bool active() const { return t_.handle() && !t_.handle().done(); }
  void abandon() { t_ = task<void>(); }

 private:
  task<void> t_;
};

}  // namespace decloud
