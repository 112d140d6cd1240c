#pragma once

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

namespace mimoshape {

inline unsigned resolve_threads(unsigned requested) {
  if (requested != 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(i) for i in [0, count) on up to `threads` workers.  Work items are
/// claimed dynamically, so fn must write its result to a slot owned by i.
/// The first exception thrown by any item is rethrown on the caller.
template <class Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(resolve_threads(threads), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto body = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(count);
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(body);
  body();
  pool.clear();
  if (error) std::rethrow_exception(error);
}

/// Computes items in parallel but hands results to `emit` strictly in index
/// order, as soon as each prefix is complete.  `emit` runs on the calling
/// thread.  If `stop` becomes true, no new items are started; results already
/// finished in the completed prefix are still emitted.  Returns the number of
/// items emitted.
template <class T, class Compute, class Emit, class Stop>
std::size_t ordered_parallel(std::size_t count, unsigned threads, Compute&& compute,
                             Emit&& emit, Stop&& stop) {
  const std::size_t workers = std::min<std::size_t>(resolve_threads(threads), count);
  if (workers <= 1) {
    std::size_t emitted = 0;
    for (std::size_t i = 0; i < count && !stop(); ++i) {
      emit(compute(i));
      ++emitted;
    }
    return emitted;
  }

  std::vector<std::optional<T>> slots(count);
  std::vector<char> done(count, 0);
  std::mutex m;
  std::condition_variable cv;
  std::atomic<std::size_t> next{0};
  std::size_t finished_workers = 0;
  std::exception_ptr error;

  auto body = [&] {
    for (;;) {
      if (stop()) break;
      const std::size_t i = next.fetch_add(1);
      if (i >= count) break;
      try {
        T value = compute(i);
        std::lock_guard lock(m);
        slots[i] = std::move(value);
        done[i] = 1;
      } catch (...) {
        std::lock_guard lock(m);
        if (!error) error = std::current_exception();
        next.store(count);
      }
      cv.notify_all();
    }
    std::lock_guard lock(m);
    ++finished_workers;
    cv.notify_all();
  };

  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(body);

  std::size_t emitted = 0;
  std::unique_lock lock(m);
  for (;;) {
    cv.wait(lock, [&] {
      return (emitted < count && done[emitted]) || finished_workers == workers;
    });
    while (emitted < count && done[emitted]) {
      T value = std::move(*slots[emitted]);
      slots[emitted].reset();
      lock.unlock();
      emit(std::move(value));
      lock.lock();
      ++emitted;
    }
    if (finished_workers == workers) break;
  }
  lock.unlock();
  pool.clear();
  if (error) std::rethrow_exception(error);
  return emitted;
}

}  // namespace mimoshape
