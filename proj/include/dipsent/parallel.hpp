#pragma once

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>
#include <type_traits>
#include <vector>

namespace dipsent {

/// Runs produce(i) for i in [0, n) on at most `limit` worker threads and
/// hands each result to consume(i, result) on the calling thread in index
/// order, as soon as every earlier index has been consumed. An exception
/// from produce(i) is rethrown on the calling thread when index i is
/// reached; remaining workers are drained first.
template <class Produce, class Consume>
void ordered_parallel_for(std::size_t n, std::size_t limit, Produce&& produce,
                          Consume&& consume) {
  using Result = std::invoke_result_t<Produce&, std::size_t>;
  if (n == 0) return;
  limit = std::clamp<std::size_t>(limit, 1, n);

  std::vector<std::optional<Result>> slots(n);
  std::vector<std::exception_ptr> errors(n);
  std::vector<char> ready(n, 0);
  std::mutex mu;
  std::condition_variable cv;
  std::atomic<std::size_t> next{0};
  std::atomic<bool> cancelled{false};

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n || cancelled.load()) return;
      std::optional<Result> value;
      std::exception_ptr error;
      try {
        value.emplace(produce(i));
      } catch (...) {
        error = std::current_exception();
      }
      {
        std::lock_guard lock(mu);
        slots[i] = std::move(value);
        errors[i] = error;
        ready[i] = 1;
      }
      cv.notify_all();
    }
  };

  std::vector<std::jthread> workers;
  workers.reserve(limit);
  for (std::size_t w = 0; w < limit; ++w) workers.emplace_back(worker);

  for (std::size_t i = 0; i < n; ++i) {
    std::optional<Result> value;
    std::exception_ptr error;
    {
      std::unique_lock lock(mu);
      cv.wait(lock, [&] { return ready[i] != 0; });
      value = std::move(slots[i]);
      error = errors[i];
    }
    if (error) {
      cancelled = true;
      workers.clear();
      std::rethrow_exception(error);
    }
    try {
      consume(i, std::move(*value));
    } catch (...) {
      cancelled = true;
      throw;
    }
  }
}

template <class Produce>
auto parallel_map(std::size_t n, std::size_t limit, Produce&& produce) {
  using Result = std::invoke_result_t<Produce&, std::size_t>;
  std::vector<Result> out;
  out.reserve(n);
  ordered_parallel_for(n, limit, produce,
                       [&](std::size_t, Result&& r) { out.push_back(std::move(r)); });
  return out;
}

}  // namespace dipsent
