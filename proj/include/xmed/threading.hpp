#pragma once

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace xmed {

// Persistent pool of workers driven in lockstep. run(job) executes
// job(worker_index) on every worker and returns when all have finished.
// With zero workers requested, jobs run inline on the caller.
class WorkerPool {
 public:
  explicit WorkerPool(int workers) : count_(workers > 1 ? workers : 1) {
    if (count_ == 1) return;
    threads_.reserve(count_);
    for (int w = 0; w < count_; ++w) {
      threads_.emplace_back([this, w] { worker_loop(w); });
    }
  }

  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  ~WorkerPool() {
    if (count_ == 1) return;
    {
      std::lock_guard<std::mutex> lock(mutex_);
      stop_ = true;
      ++generation_;
    }
    cv_start_.notify_all();
    for (auto& t : threads_) t.join();
  }

  int size() const { return count_; }

  void run(const std::function<void(int)>& job) {
    if (count_ == 1) {
      job(0);
      return;
    }
    {
      std::lock_guard<std::mutex> lock(mutex_);
      job_ = &job;
      done_count_ = 0;
      ++generation_;
    }
    cv_start_.notify_all();
    std::unique_lock<std::mutex> lock(mutex_);
    cv_done_.wait(lock, [this] { return done_count_ == count_; });
    job_ = nullptr;
  }

 private:
  void worker_loop(int index) {
    std::uint64_t seen = 0;
    for (;;) {
      const std::function<void(int)>* job = nullptr;
      {
        std::unique_lock<std::mutex> lock(mutex_);
        cv_start_.wait(lock, [&] { return generation_ != seen; });
        seen = generation_;
        if (stop_) return;
        job = job_;
      }
      (*job)(index);
      {
        std::lock_guard<std::mutex> lock(mutex_);
        ++done_count_;
      }
      cv_done_.notify_one();
    }
  }

  int count_;
  std::vector<std::thread> threads_;
  std::mutex mutex_;
  std::condition_variable cv_start_, cv_done_;
  const std::function<void(int)>* job_ = nullptr;
  std::uint64_t generation_ = 0;
  int done_count_ = 0;
  bool stop_ = false;
};

}  // namespace xmed
