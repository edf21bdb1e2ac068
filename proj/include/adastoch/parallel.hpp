#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace adastoch {

// Wraps (via std::nested_exception) the error raised by one replication.
class ReplicationFailure : public std::runtime_error {
 public:
  ReplicationFailure(std::size_t index, const std::string& what)
      : std::runtime_error("replication " + std::to_string(index) + ": " + what), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

// Runs body(i) for i in [0, count) on a small pool of threads. Work is claimed
// through an atomic counter; results must be written to slot i so the outcome
// does not depend on scheduling. The first exception (lowest index) is rethrown
// with the replication index attached.
template <class Body>
void parallel_for(std::size_t count, Body&& body, std::size_t max_workers = 0) {
  if (count == 0) return;
  std::size_t workers = max_workers ? max_workers : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, count);

  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::size_t error_index = count;
  std::exception_ptr error;

  auto run = [&] {
    for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (i < error_index) {
          error_index = i;
          error = std::current_exception();
        }
      }
    }
  };

  if (workers == 1) {
    run();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run);
    for (auto& t : pool) t.join();
  }

  if (error) {
    try {
      std::rethrow_exception(error);
    } catch (const std::exception& e) {
      std::throw_with_nested(ReplicationFailure(error_index, e.what()));
    }
  }
}

}  // namespace adastoch
