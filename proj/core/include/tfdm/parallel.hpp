#pragma once

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace tfdm {

// Fixed-size worker pool running range chunks. Work is split into one
// contiguous chunk per worker with a statically computed boundary, and each
// output element is written by exactly one chunk, so results are bit
// identical no matter how many threads run. There are no atomics in any
// numeric path; reductions happen per chunk and are combined sequentially
// by the caller when needed.
class ThreadPool {
 public:
  static ThreadPool& instance();

  // Resizes the pool. n <= 1 means run everything inline.
  void set_threads(int n);
  int threads() const { return n_threads_; }

  // fn(begin, end) over [0, n) split into static contiguous chunks.
  // Nested calls from inside a worker run inline to avoid deadlock.
  void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn);

  ~ThreadPool();

 private:
  ThreadPool() = default;
  void stop_workers();
  void worker_loop(int worker_id);

  int n_threads_ = 1;
  std::vector<std::thread> workers_;
  std::mutex mu_;
  std::condition_variable cv_start_, cv_done_;
  std::uint64_t generation_ = 0;
  int pending_ = 0;
  bool shutdown_ = false;
  const std::function<void(std::int64_t, std::int64_t)>* job_ = nullptr;
  std::int64_t job_n_ = 0;
  int job_chunks_ = 0;
};

// Convenience wrapper over the global pool.
inline void parallel_for(std::int64_t n,
                         const std::function<void(std::int64_t, std::int64_t)>& fn) {
  ThreadPool::instance().parallel_for(n, fn);
}

}  // namespace tfdm
