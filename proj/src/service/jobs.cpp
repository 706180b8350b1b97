#include "shapemorph/service/jobs.hpp"

#include <cstdio>
#include <random>

#include "shapemorph/error.hpp"

namespace shapemorph::service {

const char* to_string(JobStatus s) {
  switch (s) {
    case JobStatus::queued: return "queued";
    case JobStatus::running: return "running";
    case JobStatus::done: return "done";
    case JobStatus::failed: return "failed";
    case JobStatus::cancelled: return "cancelled";
  }
  return "unknown";
}

std::string random_token() {
  static std::mutex mu;
  static std::random_device rd;
  std::lock_guard lock(mu);
  char buf[33];
  std::snprintf(buf, sizeof buf, "%08x%08x%08x%08x", rd(), rd(), rd(), rd());
  return buf;
}

void JobContext::set_progress(double fraction) {
  if (on_progress_) on_progress_(fraction);
}

void JobContext::commit(const std::function<void()>& fn) {
  std::lock_guard lock(mu_);
  if (cancel_.load()) fail(ErrorCode::cancelled, "job cancelled");
  fn();
  committed_ = true;
}

JobQueue::JobQueue(std::size_t workers) {
  if (workers < 1) workers = 1;
  for (std::size_t i = 0; i < workers; ++i) threads_.emplace_back([this] { worker(); });
}

JobQueue::~JobQueue() {
  {
    std::lock_guard lock(mu_);
    stop_ = true;
    for (auto& [_, e] : jobs_)
      if (e->info.status == JobStatus::queued || e->info.status == JobStatus::running) e->ctx->cancel_ = true;
  }
  cv_.notify_all();
  for (auto& t : threads_) t.join();
}

std::string JobQueue::submit(std::string kind, std::string session, Task task) {
  auto e = std::make_shared<Entry>();
  e->info.id = random_token();
  e->info.kind = std::move(kind);
  e->info.session = std::move(session);
  e->task = std::move(task);
  e->ctx = std::make_shared<JobContext>();
  std::weak_ptr<Entry> weak = e;
  e->ctx->on_progress_ = [this, weak](double f) {
    if (auto p = weak.lock()) {
      std::lock_guard lock(mu_);
      p->info.progress = f;
    }
  };
  const std::string id = e->info.id;
  {
    std::lock_guard lock(mu_);
    jobs_[id] = e;
    pending_.push_back(e);
  }
  cv_.notify_one();
  return id;
}

std::optional<JobInfo> JobQueue::get(const std::string& id) const {
  std::lock_guard lock(mu_);
  const auto it = jobs_.find(id);
  if (it == jobs_.end()) return std::nullopt;
  return it->second->info;
}

bool JobQueue::cancel(const std::string& id) {
  std::shared_ptr<Entry> e;
  {
    std::lock_guard lock(mu_);
    const auto it = jobs_.find(id);
    if (it == jobs_.end()) return false;
    e = it->second;
    if (e->info.status == JobStatus::queued) {
      e->ctx->cancel_ = true;
      e->info.status = JobStatus::cancelled;
      std::erase(pending_, e);
      done_cv_.notify_all();
      return true;
    }
    if (e->info.status != JobStatus::running) return false;
  }
  std::lock_guard clock(e->ctx->mu_);
  if (e->ctx->committed_) return false;
  e->ctx->cancel_ = true;
  return true;
}

void JobQueue::wait(const std::string& id) {
  std::unique_lock lock(mu_);
  done_cv_.wait(lock, [&] {
    const auto it = jobs_.find(id);
    return it == jobs_.end() ||
           (it->second->info.status != JobStatus::queued && it->second->info.status != JobStatus::running);
  });
}

void JobQueue::worker() {
  for (;;) {
    std::shared_ptr<Entry> e;
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [&] { return stop_ || !pending_.empty(); });
      if (stop_) return;
      e = pending_.front();
      pending_.pop_front();
      e->info.status = JobStatus::running;
    }
    JobStatus status = JobStatus::done;
    io::Json result;
    std::string code, message;
    try {
      result = e->task(*e->ctx);
    } catch (const Error& err) {
      status = err.code() == ErrorCode::cancelled ? JobStatus::cancelled : JobStatus::failed;
      code = shapemorph::to_string(err.code());
      message = err.what();
    } catch (const std::exception& err) {
      status = JobStatus::failed;
      code = "internal";
      message = err.what();
    }
    {
      std::lock_guard lock(mu_);
      e->info.status = status;
      if (status == JobStatus::done) {
        e->info.progress = 1.0;
        e->info.result = std::move(result);
      } else {
        e->info.error_code = code;
        e->info.error = message;
      }
      e->task = nullptr;
    }
    done_cv_.notify_all();
  }
}

}  // namespace shapemorph::service
