#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <thread>
#include <vector>

namespace localsgd {

/// Worker count used by the Monte-Carlo estimators when a call does not pass
/// one explicitly. Zero selects std::thread::hardware_concurrency().
void set_default_workers(unsigned workers);
unsigned default_workers();

/// Replicas per shard. Fixed so that the reduction tree never depends on the
/// number of workers.
inline constexpr std::uint64_t kShardSize = 4096;

/// Splits [0, n) into shards of kShardSize items and evaluates
/// fn(shard_index, begin, end) for each, returning the results in shard order.
/// If several shards throw, the exception of the lowest shard is rethrown.
template <class Result, class Fn>
std::vector<Result> run_shards(std::uint64_t n, Fn&& fn, unsigned workers = 0,
                               std::uint64_t shard_size = kShardSize) {
  const std::uint64_t shards = (n + shard_size - 1) / shard_size;
  std::vector<Result> results(shards);
  std::vector<std::exception_ptr> errors(shards);
  if (workers == 0) workers = default_workers();
  workers = static_cast<unsigned>(std::min<std::uint64_t>(std::max(1u, workers), std::max<std::uint64_t>(shards, 1)));

  std::atomic<std::uint64_t> next{0};
  auto body = [&] {
    for (;;) {
      const std::uint64_t s = next.fetch_add(1, std::memory_order_relaxed);
      if (s >= shards) return;
      const std::uint64_t begin = s * shard_size;
      const std::uint64_t end = std::min(n, begin + shard_size);
      try {
        results[s] = fn(s, begin, end);
      } catch (...) {
        errors[s] = std::current_exception();
      }
    }
  };

  if (workers <= 1) {
    body();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(body);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

}  // namespace localsgd
