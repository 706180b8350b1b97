#pragma once

#include <atomic>
#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "shapemorph/io/json.hpp"

namespace shapemorph::service {

enum class JobStatus { queued, running, done, failed, cancelled };

const char* to_string(JobStatus status);

struct JobInfo {
  std::string id;
  std::string kind;
  std::string session;
  JobStatus status = JobStatus::queued;
  double progress = 0.0;
  io::Json result;        // done only
  std::string error_code; // failed only
  std::string error;
};

/// Handle passed to a running task. Cancellation is cooperative: the task
/// polls cancelled(), and commit() runs its state change only if the job was
/// not cancelled first, so a cancelled job never touches session state.
class JobContext {
 public:
  bool cancelled() const { return cancel_.load(); }
  void set_progress(double fraction);
  /// Throws Error(cancelled) without running fn if cancel won the race.
  void commit(const std::function<void()>& fn);

 private:
  friend class JobQueue;
  std::atomic<bool> cancel_{false};
  std::mutex mu_;
  bool committed_ = false;
  std::function<void(double)> on_progress_;
};

/// Fixed pool of worker threads running submitted tasks in FIFO order.
class JobQueue {
 public:
  using Task = std::function<io::Json(JobContext&)>;

  explicit JobQueue(std::size_t workers);
  ~JobQueue();
  JobQueue(const JobQueue&) = delete;
  JobQueue& operator=(const JobQueue&) = delete;

  std::string submit(std::string kind, std::string session, Task task);
  std::optional<JobInfo> get(const std::string& id) const;

  /// Requests cancellation. False if the job is unknown or already finished
  /// (or past its commit point).
  bool cancel(const std::string& id);

  /// Blocks until the job leaves queued/running; for tests and shutdown.
  void wait(const std::string& id);

 private:
  struct Entry {
    JobInfo info;
    Task task;
    std::shared_ptr<JobContext> ctx;
  };

  void worker();

  mutable std::mutex mu_;
  std::condition_variable cv_;       // work available / shutdown
  std::condition_variable done_cv_;  // some job finished
  std::map<std::string, std::shared_ptr<Entry>> jobs_;
  std::deque<std::shared_ptr<Entry>> pending_;
  bool stop_ = false;
  std::vector<std::thread> threads_;
};

/// 128-bit random hex token.
std::string random_token();

}  // namespace shapemorph::service
