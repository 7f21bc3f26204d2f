#ifndef WAVELEARN_THREAD_POOL_HPP
#define WAVELEARN_THREAD_POOL_HPP

#include <algorithm>
#include <condition_variable>
#include <functional>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

// Deterministic data parallelism for the heavy tensor primitives. Work is
// always split into a fixed number of chunks so floating-point reduction
// order is independent of the worker count; --threads only changes who
// executes which chunk.

namespace wavelearn {

inline constexpr int kParallelChunks = 16;

class ThreadPool {
 public:
  explicit ThreadPool(int workers) {
    workers = std::max(1, workers);
    for (int i = 1; i < workers; ++i) {
      threads_.emplace_back([this] { worker_loop(); });
    }
  }

  ~ThreadPool() {
    {
      std::unique_lock lock(mu_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& t : threads_) t.join();
  }

  int workers() const { return static_cast<int>(threads_.size()) + 1; }

  // Runs fn(chunk) for chunk = 0 .. n_chunks-1, returning when all are done.
  // The calling thread participates.
  void run_chunks(int n_chunks, const std::function<void(int)>& fn) {
    if (threads_.empty() || n_chunks <= 1) {
      for (int c = 0; c < n_chunks; ++c) fn(c);
      return;
    }
    {
      std::unique_lock lock(mu_);
      task_ = &fn;
      next_chunk_ = 0;
      total_chunks_ = n_chunks;
      pending_ = n_chunks;
    }
    cv_.notify_all();
    work_until_done();
  }

 private:
  void work_until_done() {
    for (;;) {
      int c;
      {
        std::unique_lock lock(mu_);
        if (next_chunk_ >= total_chunks_) break;
        c = next_chunk_++;
      }
      (*task_)(c);
      std::unique_lock lock(mu_);
      if (--pending_ == 0) {
        done_cv_.notify_all();
        return;
      }
    }
    std::unique_lock lock(mu_);
    done_cv_.wait(lock, [this] { return pending_ == 0; });
  }

  void worker_loop() {
    for (;;) {
      int c;
      {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [this] { return stop_ || next_chunk_ < total_chunks_; });
        if (stop_) return;
        c = next_chunk_++;
      }
      (*task_)(c);
      std::unique_lock lock(mu_);
      if (--pending_ == 0) done_cv_.notify_all();
    }
  }

  std::vector<std::thread> threads_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable done_cv_;
  const std::function<void(int)>* task_ = nullptr;
  int next_chunk_ = 0;
  int total_chunks_ = 0;
  int pending_ = 0;
  bool stop_ = false;
};

inline int& configured_workers() {
  static int n = 1;
  return n;
}

inline void set_worker_count(int n) { configured_workers() = std::max(1, n); }

// Static partition of [0, total) into kParallelChunks pieces, executed on the
// process pool if more than one worker is configured.
template <typename Fn>
void parallel_chunks(std::size_t total, Fn&& fn) {
  const int chunks = kParallelChunks;
  const auto body = [&](int c) {
    const std::size_t lo = total * static_cast<std::size_t>(c) / chunks;
    const std::size_t hi = total * (static_cast<std::size_t>(c) + 1) / chunks;
    if (lo < hi) fn(c, lo, hi);
  };
  if (configured_workers() <= 1) {
    for (int c = 0; c < chunks; ++c) body(c);
    return;
  }
  static std::unique_ptr<ThreadPool> pool;
  static std::mutex pool_mu;
  {
    std::scoped_lock lock(pool_mu);
    if (!pool || pool->workers() != configured_workers()) {
      pool = std::make_unique<ThreadPool>(configured_workers());
    }
  }
  const std::function<void(int)> task = body;
  pool->run_chunks(chunks, task);
}

}  // namespace wavelearn

#endif  // WAVELEARN_THREAD_POOL_HPP
