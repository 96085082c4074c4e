#include "tfdm/parallel.hpp"

#include <stdexcept>

namespace tfdm {

namespace {
thread_local bool t_in_worker = false;
}

ThreadPool& ThreadPool::instance() {
  static ThreadPool pool;
  return pool;
}

ThreadPool::~ThreadPool() { stop_workers(); }

void ThreadPool::stop_workers() {
  {
    std::unique_lock<std::mutex> lk(mu_);
    shutdown_ = true;
  }
  cv_start_.notify_all();
  for (auto& t : workers_) t.join();
  workers_.clear();
  shutdown_ = false;
}

void ThreadPool::set_threads(int n) {
  if (n < 1) n = 1;
  if (n == n_threads_ && static_cast<int>(workers_.size()) == n - 1) return;
  stop_workers();
  n_threads_ = n;
  for (int i = 1; i < n; ++i) workers_.emplace_back([this, i] { worker_loop(i); });
}

void ThreadPool::worker_loop(int worker_id) {
  t_in_worker = true;
  std::uint64_t seen = 0;
  for (;;) {
    const std::function<void(std::int64_t, std::int64_t)>* job;
    std::int64_t n;
    int chunks;
    {
      std::unique_lock<std::mutex> lk(mu_);
      cv_start_.wait(lk, [&] { return shutdown_ || generation_ != seen; });
      if (shutdown_) return;
      seen = generation_;
      job = job_;
      n = job_n_;
      chunks = job_chunks_;
    }
    if (worker_id < chunks) {
      std::int64_t lo = n * worker_id / chunks;
      std::int64_t hi = n * (worker_id + 1) / chunks;
      if (lo < hi) (*job)(lo, hi);
    }
    {
      std::unique_lock<std::mutex> lk(mu_);
      if (--pending_ == 0) cv_done_.notify_all();
    }
  }
}

void ThreadPool::parallel_for(std::int64_t n,
                              const std::function<void(std::int64_t, std::int64_t)>& fn) {
  if (n <= 0) return;
  int chunks = n_threads_;
  if (static_cast<std::int64_t>(chunks) > n) chunks = static_cast<int>(n);
  if (chunks <= 1 || t_in_worker || workers_.empty()) {
    fn(0, n);
    return;
  }
  {
    std::unique_lock<std::mutex> lk(mu_);
    job_ = &fn;
    job_n_ = n;
    job_chunks_ = chunks;
    pending_ = static_cast<int>(workers_.size());
    ++generation_;
  }
  cv_start_.notify_all();
  // The calling thread takes chunk 0.
  std::int64_t hi = n / chunks;
  if (hi > 0) fn(0, hi);
  {
    std::unique_lock<std::mutex> lk(mu_);
    cv_done_.wait(lk, [&] { return pending_ == 0; });
    job_ = nullptr;
  }
}

}  // namespace tfdm
