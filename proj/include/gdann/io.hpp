#pragma once

#include <unistd.h>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "gdann/disk_format.hpp"

namespace gdann {

struct ReadTicket {
    NodeId node = 0;
    uint64_t submit_time_us = 0;
};

struct IoStats {
    uint64_t reads_submitted = 0;
    uint64_t reads_completed = 0;
    uint64_t virtual_time_us = 0;
};

/// One query's private view of the storage device: its own ticket queue and
/// clock over a shared read-only index image.
class StorageSession {
public:
    virtual ~StorageSession() = default;

    /// Enqueues a read of `node`'s record. Non-blocking.
    virtual ReadTicket submit(NodeId node) = 0;

    /// Returns the records completed so far (possibly none). With `wait` set
    /// and reads outstanding, blocks (or advances virtual time) until at
    /// least one completes.
    virtual std::vector<NodeRecord> poll(bool wait) = 0;

    virtual uint64_t now_us() const = 0;

    size_t in_flight() const { return stats_.reads_submitted - stats_.reads_completed + pending_before_reset_; }
    size_t max_in_flight() const { return max_in_flight_; }
    IoStats stats() const {
        IoStats s = stats_;
        s.virtual_time_us = now_us();
        return s;
    }
    void reset_stats() {
        pending_before_reset_ = in_flight();
        stats_ = {};
        max_in_flight_ = pending_before_reset_;
    }

protected:
    void note_submit() {
        ++stats_.reads_submitted;
        max_in_flight_ = std::max(max_in_flight_, in_flight());
    }
    void note_complete(size_t n) {
        // completions of reads issued before a reset are not counted again
        const size_t old = std::min(n, pending_before_reset_);
        pending_before_reset_ -= old;
        stats_.reads_completed += n - old;
    }

    IoStats stats_;
    size_t pending_before_reset_ = 0;
    size_t max_in_flight_ = 0;
};

class StorageBackend {
public:
    explicit StorageBackend(const DiskImage& disk) : disk_(&disk) {}
    virtual ~StorageBackend() = default;

    virtual std::unique_ptr<StorageSession> open_session() = 0;
    virtual std::string_view name() const = 0;

    const DiskImage& disk() const { return *disk_; }

    /// Aggregate counters over all sessions.
    IoStats global_stats() const {
        return {submitted_.load(std::memory_order_relaxed), completed_.load(std::memory_order_relaxed), 0};
    }
    void reset_global_stats() {
        submitted_ = 0;
        completed_ = 0;
    }

    void close() { closed_ = true; }
    bool closed() const { return closed_; }

protected:
    void check_submit(NodeId node) const {
        if (closed_) fail(ErrorKind::invalid_argument, "storage backend is closed");
        if (node >= disk_->header().count)
            fail(ErrorKind::invalid_argument, "read of out-of-range node " + std::to_string(node));
    }

    friend class SimSession;
    friend class FileSession;

    const DiskImage* disk_;
    std::atomic<uint64_t> submitted_{0};
    std::atomic<uint64_t> completed_{0};
    std::atomic<bool> closed_{false};
};

// ---------------------------------------------------------------------------
// simulated device: every read completes exactly `latency_us` of virtual time
// after submission; unlimited parallelism; FIFO completion.

class SimSession final : public StorageSession {
public:
    SimSession(StorageBackend& backend, uint64_t latency_us) : backend_(&backend), latency_us_(latency_us) {}

    ReadTicket submit(NodeId node) override {
        backend_->check_submit(node);
        queue_.push_back({node, now_ + latency_us_});
        note_submit();
        backend_->submitted_.fetch_add(1, std::memory_order_relaxed);
        return {node, now_};
    }

    std::vector<NodeRecord> poll(bool wait) override {
        std::vector<NodeRecord> done;
        if (wait && !queue_.empty() && queue_.front().due_us > now_) now_ = queue_.front().due_us;
        while (!queue_.empty() && queue_.front().due_us <= now_) {
            NodeRecord rec = backend_->disk().record(queue_.front().node);
            rec.completion_time_us = queue_.front().due_us;
            done.push_back(std::move(rec));
            queue_.pop_front();
        }
        note_complete(done.size());
        backend_->completed_.fetch_add(done.size(), std::memory_order_relaxed);
        return done;
    }

    uint64_t now_us() const override { return now_; }

    /// Moves the virtual clock forward by `us`.
    void advance(uint64_t us) { now_ += us; }
    uint64_t latency_us() const { return latency_us_; }

private:
    struct Pending {
        NodeId node;
        uint64_t due_us;
    };

    StorageBackend* backend_;
    uint64_t latency_us_;
    uint64_t now_ = 0;
    std::deque<Pending> queue_;
};

class SimBackend final : public StorageBackend {
public:
    explicit SimBackend(const DiskImage& disk, uint64_t latency_us = 100) : StorageBackend(disk), latency_us_(latency_us) {}

    std::unique_ptr<StorageSession> open_session() override { return std::make_unique<SimSession>(*this, latency_us_); }
    std::string_view name() const override { return "sim"; }
    uint64_t latency_us() const { return latency_us_; }

private:
    uint64_t latency_us_;
};

// ---------------------------------------------------------------------------
// real file: positioned reads on a small worker pool; records are returned in
// completion order and time is wall-clock microseconds since session start.

class FileBackend;

class FileSession final : public StorageSession {
public:
    explicit FileSession(FileBackend& backend);
    ~FileSession() override {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [this] { return outstanding_ == 0; });
    }

    ReadTicket submit(NodeId node) override;
    std::vector<NodeRecord> poll(bool wait) override;
    uint64_t now_us() const override {
        return static_cast<uint64_t>(
            std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() - start_).count());
    }

private:
    friend class FileBackend;
    void deliver(NodeRecord rec, std::exception_ptr err);

    FileBackend* backend_;
    std::chrono::steady_clock::time_point start_;
    std::mutex mu_;
    std::condition_variable cv_;
    std::deque<NodeRecord> done_;
    std::exception_ptr error_;
    size_t outstanding_ = 0;
};

class FileBackend final : public StorageBackend {
public:
    explicit FileBackend(const DiskImage& disk, unsigned workers = 4) : StorageBackend(disk) {
        fd_ = ::dup(disk.fd());
        if (fd_ < 0) fail(ErrorKind::io, "cannot duplicate index file descriptor");
        for (unsigned i = 0; i < std::max(1u, workers); ++i) pool_.emplace_back([this] { worker(); });
    }
    ~FileBackend() override {
        {
            std::lock_guard lock(mu_);
            stop_ = true;
        }
        cv_.notify_all();
        for (auto& t : pool_) t.join();
        ::close(fd_);
    }

    std::unique_ptr<StorageSession> open_session() override { return std::make_unique<FileSession>(*this); }
    std::string_view name() const override { return "file"; }

private:
    friend class FileSession;

    struct Job {
        FileSession* session;
        NodeId node;
    };

    void enqueue(Job job) {
        {
            std::lock_guard lock(mu_);
            jobs_.push_back(job);
        }
        cv_.notify_one();
    }

    void worker() {
        const DiskIndexHeader& h = disk_->header();
        std::vector<std::byte> buf(h.sector_size);
        for (;;) {
            Job job;
            {
                std::unique_lock lock(mu_);
                cv_.wait(lock, [this] { return stop_ || !jobs_.empty(); });
                if (stop_ && jobs_.empty()) return;
                job = jobs_.front();
                jobs_.pop_front();
            }
            NodeRecord rec;
            std::exception_ptr err;
            try {
                const off_t off = static_cast<off_t>(h.record_offset(job.node));
                size_t got = 0;
                while (got < buf.size()) {
                    const ssize_t r = ::pread(fd_, buf.data() + got, buf.size() - got, off + static_cast<off_t>(got));
                    if (r <= 0) fail(ErrorKind::io, "pread failed for node " + std::to_string(job.node));
                    got += static_cast<size_t>(r);
                }
                rec = decode_record(h, job.node, buf);
            } catch (...) {
                err = std::current_exception();
            }
            job.session->deliver(std::move(rec), err);
        }
    }

    int fd_ = -1;
    std::mutex mu_;
    std::condition_variable cv_;
    std::deque<Job> jobs_;
    bool stop_ = false;
    std::vector<std::thread> pool_;
};

inline FileSession::FileSession(FileBackend& backend) : backend_(&backend), start_(std::chrono::steady_clock::now()) {}

inline ReadTicket FileSession::submit(NodeId node) {
    backend_->check_submit(node);
    {
        std::lock_guard lock(mu_);
        ++outstanding_;
    }
    note_submit();
    backend_->submitted_.fetch_add(1, std::memory_order_relaxed);
    const uint64_t t = now_us();
    backend_->enqueue({this, node});
    return {node, t};
}

inline void FileSession::deliver(NodeRecord rec, std::exception_ptr err) {
    {
        std::lock_guard lock(mu_);
        rec.completion_time_us = now_us();
        if (err && !error_) error_ = err;
        if (!err) done_.push_back(std::move(rec));
        --outstanding_;
    }
    cv_.notify_all();
}

inline std::vector<NodeRecord> FileSession::poll(bool wait) {
    std::vector<NodeRecord> out;
    {
        std::unique_lock lock(mu_);
        if (wait && outstanding_ > 0 && done_.empty())
            cv_.wait(lock, [this] { return !done_.empty() || outstanding_ == 0; });
        if (error_) {
            auto e = error_;
            error_ = nullptr;
            std::rethrow_exception(e);
        }
        out.assign(std::make_move_iterator(done_.begin()), std::make_move_iterator(done_.end()));
        done_.clear();
    }
    note_complete(out.size());
    backend_->completed_.fetch_add(out.size(), std::memory_order_relaxed);
    return out;
}

enum class BackendKind { sim, file };

inline BackendKind parse_backend(std::string_view s) {
    if (s == "sim") return BackendKind::sim;
    if (s == "file") return BackendKind::file;
    fail(ErrorKind::invalid_argument, "unknown backend: " + std::string(s));
}

inline std::unique_ptr<StorageBackend> make_backend(BackendKind kind, const DiskImage& disk, uint64_t sim_latency_us = 100) {
    if (kind == BackendKind::sim) return std::make_unique<SimBackend>(disk, sim_latency_us);
    return std::make_unique<FileBackend>(disk);
}

}  // namespace gdann
