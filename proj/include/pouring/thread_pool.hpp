#pragma once

#include <condition_variable>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <vector>

namespace pouring {

// Fixed-size pool that fans work out over contiguous index chunks, one chunk
// per thread (the calling thread takes the last chunk). Results that are
// accumulated per chunk and reduced in chunk order do not depend on timing,
// so callers stay bit-reproducible for a fixed thread count; chunk workloads
// that are independent per index are bit-reproducible for any count.
class ThreadPool {
 public:
  explicit ThreadPool(unsigned threads)
      : threads_(threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads) {
    for (unsigned i = 0; i + 1 < threads_; ++i) {
      workers_.emplace_back([this, i] { worker_loop(i); });
    }
  }

  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  ~ThreadPool() {
    {
      std::unique_lock lock(mutex_);
      stop_ = true;
    }
    wake_.notify_all();
    for (std::thread& t : workers_) t.join();
  }

  unsigned size() const { return threads_; }

  // Runs fn(chunk_index, begin, end) for `size()` contiguous ranges covering
  // [0, count). Blocks until every chunk has finished. Exceptions from chunks
  // are rethrown on the calling thread (first one wins).
  void for_chunks(std::size_t count,
                  const std::function<void(unsigned, std::size_t, std::size_t)>& fn) {
    if (threads_ == 1 || count <= 1) {
      fn(0, 0, count);
      return;
    }
    {
      std::unique_lock lock(mutex_);
      job_ = &fn;
      job_count_ = count;
      pending_ = threads_ - 1;
      ++generation_;
    }
    wake_.notify_all();
    run_chunk(threads_ - 1, count, fn);
    std::unique_lock lock(mutex_);
    done_.wait(lock, [this] { return pending_ == 0; });
    job_ = nullptr;
    if (error_) {
      auto err = error_;
      error_ = nullptr;
      std::rethrow_exception(err);
    }
  }

 private:
  void run_chunk(unsigned chunk, std::size_t count,
                 const std::function<void(unsigned, std::size_t, std::size_t)>& fn) {
    const std::size_t begin = count * chunk / threads_;
    const std::size_t end = count * (chunk + 1) / threads_;
    if (begin < end) fn(chunk, begin, end);
  }

  void worker_loop(unsigned chunk) {
    std::uint64_t seen = 0;
    while (true) {
      const std::function<void(unsigned, std::size_t, std::size_t)>* job = nullptr;
      std::size_t count = 0;
      {
        std::unique_lock lock(mutex_);
        wake_.wait(lock, [&] { return stop_ || generation_ != seen; });
        if (stop_) return;
        seen = generation_;
        job = job_;
        count = job_count_;
      }
      try {
        run_chunk(chunk, count, *job);
      } catch (...) {
        std::unique_lock lock(mutex_);
        if (!error_) error_ = std::current_exception();
      }
      {
        std::unique_lock lock(mutex_);
        if (--pending_ == 0) done_.notify_one();
      }
    }
  }

  unsigned threads_;
  std::vector<std::thread> workers_;
  std::mutex mutex_;
  std::condition_variable wake_, done_;
  const std::function<void(unsigned, std::size_t, std::size_t)>* job_ = nullptr;
  std::size_t job_count_ = 0;
  unsigned pending_ = 0;
  std::uint64_t generation_ = 0;
  bool stop_ = false;
  std::exception_ptr error_;
};

}  // namespace pouring
